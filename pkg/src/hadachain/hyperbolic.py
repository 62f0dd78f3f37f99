"""Hyperboloid model of constant curvature -k^2.

Points live in Minkowski space R^{1,n} with signature (-, +, ..., +) on the
upper sheet <x, x> = -1/k^2, x_0 > 0.  Every function broadcasts over leading
axes, so a point cloud is just an array of shape (N, n+1).
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

DOMAIN_TOL = 1e-9
RADIAL_TABLE_SIZE = 4096


class DomainError(ValueError):
    """Raised when an arccosh argument falls below 1 beyond tolerance."""


@dataclass(frozen=True)
class ModelSpace:
    """n-dimensional hyperbolic space of sectional curvature -k^2."""

    dim: int
    k: float = 1.0

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 2:
            raise ValueError(f"dim must be an integer >= 2, got {self.dim}")
        if not self.k > 0:
            raise ValueError(f"curvature scale k must be positive, got {self.k}")

    @property
    def ambient_dim(self) -> int:
        return self.dim + 1

    @property
    def origin(self) -> np.ndarray:
        o = np.zeros(self.dim + 1)
        o[0] = 1.0 / self.k
        return o

    def point(self, spatial) -> np.ndarray:
        """Lift spatial coordinates x_1..x_n onto the hyperboloid."""
        spatial = np.asarray(spatial, dtype=float)
        if spatial.shape[-1] != self.dim:
            raise ValueError(f"expected {self.dim} spatial coordinates")
        x0 = np.sqrt(1.0 / self.k**2 + np.sum(spatial**2, axis=-1, keepdims=True))
        return np.concatenate([x0, spatial], axis=-1)

    def constraint_residual(self, x) -> np.ndarray:
        """|<x, x> + 1/k^2| for each point."""
        return np.abs(minkowski_form(x, x) + 1.0 / self.k**2)


def minkowski_form(x, y) -> np.ndarray:
    """Lorentzian bilinear form -x_0 y_0 + sum_i x_i y_i (broadcasting)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape[-1] != y.shape[-1]:
        raise ValueError(f"length mismatch: {x.shape[-1]} vs {y.shape[-1]}")
    if x.shape[-1] < 3:
        raise ValueError("Minkowski vectors need length >= 3")
    return np.sum(x[..., 1:] * y[..., 1:], axis=-1) - x[..., 0] * y[..., 0]


def project_point(space: ModelSpace, x) -> np.ndarray:
    """Re-project onto the hyperboloid by recomputing the time coordinate."""
    x = np.array(x, dtype=float, copy=True)
    x[..., 0] = np.sqrt(1.0 / space.k**2 + np.sum(x[..., 1:] ** 2, axis=-1))
    return x


def project_tangent(space: ModelSpace, base, v) -> np.ndarray:
    """Orthogonal projection of an ambient vector onto the tangent space at base."""
    base = np.asarray(base, dtype=float)
    v = np.asarray(v, dtype=float)
    return v + space.k**2 * minkowski_form(base, v)[..., None] * base


def tangent_norm(v) -> np.ndarray:
    return np.sqrt(np.maximum(minkowski_form(v, v), 0.0))


def _cosh_arg(space: ModelSpace, p, q) -> np.ndarray:
    arg = -space.k**2 * minkowski_form(p, q)
    scale = np.maximum(1.0, space.k**2 * np.abs(np.asarray(p)[..., 0] * np.asarray(q)[..., 0]))
    if np.any(arg < 1.0 - DOMAIN_TOL * scale):
        worst = float(np.min(arg))
        raise DomainError(f"arccosh argument {worst!r} below 1; points off the hyperboloid?")
    return np.maximum(arg, 1.0)


def distance(space: ModelSpace, p, q) -> np.ndarray:
    """Geodesic distance (1/k) arccosh(-k^2 <p, q>).

    Near-coincident points go through the equivalent chord form
    (2/k) asinh(k |p - q|_M / 2), which avoids cancellation in arccosh(1 + tiny).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    k = space.k
    arg = _cosh_arg(space, p, q)
    diff = p - q
    chord2 = np.maximum(minkowski_form(diff, diff), 0.0)
    near = 2.0 / k * np.arcsinh(0.5 * k * np.sqrt(chord2))
    far = np.arccosh(arg) / k
    return np.where(arg < 2.0, near, far)


def pairwise_distances(space: ModelSpace, a, b=None) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    b = a if b is None else np.asarray(b, dtype=float)
    return distance(space, a[:, None, :], b[None, :, :])


def _sinhc(x):
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    return np.where(small, 1.0 + x * x / 6.0, np.sinh(safe) / safe)


def exp_map(space: ModelSpace, base, v) -> np.ndarray:
    """Point reached after unit time along the geodesic with initial velocity v."""
    base = np.asarray(base, dtype=float)
    v = project_tangent(space, base, v)
    kn = space.k * tangent_norm(v)[..., None]
    out = np.cosh(kn) * base + _sinhc(kn) * v
    return project_point(space, out)


def log_map(space: ModelSpace, base, target) -> np.ndarray:
    """Tangent vector at base pointing to target with norm distance(base, target)."""
    base = np.asarray(base, dtype=float)
    target = np.asarray(target, dtype=float)
    kd = space.k * distance(space, base, target)[..., None]
    w = target + space.k**2 * minkowski_form(base, target)[..., None] * base
    v = w / _sinhc(kd)
    return project_tangent(space, base, v)


def geodesic_point(space: ModelSpace, p, q, t) -> np.ndarray:
    """Point at fraction t in [0, 1] of the geodesic segment from p to q."""
    t = np.asarray(t, dtype=float)
    if np.any((t < 0.0) | (t > 1.0)):
        raise ValueError("geodesic parameter t must lie in [0, 1]")
    v = log_map(space, p, q)
    return exp_map(space, p, t[..., None] * v if t.ndim else t * v)


def parallel_transport(space: ModelSpace, x, y, v) -> np.ndarray:
    """Transport tangent vector v from x to y along the connecting geodesic."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xs, ys = space.k * x, space.k * y
    coef = minkowski_form(ys, v) / (1.0 - minkowski_form(xs, ys))
    return np.asarray(v, dtype=float) + coef[..., None] * (xs + ys)


def tangent_basis(space: ModelSpace, base) -> np.ndarray:
    """Orthonormal frame (n, n+1) of the tangent space at a single point."""
    base = np.asarray(base, dtype=float)
    e = np.eye(space.dim + 1)[1:]
    return parallel_transport(space, space.origin, base, e)


def random_unit_tangent(space: ModelSpace, base, rng: np.random.Generator, size=None) -> np.ndarray:
    """Unit tangent vectors at base, uniform on the unit sphere."""
    shape = () if size is None else (size,)
    z = rng.standard_normal(shape + (space.dim,))
    z /= np.linalg.norm(z, axis=-1, keepdims=True)
    return z @ tangent_basis(space, base)


@functools.lru_cache(maxsize=64)
def _radial_table(dim: int, k: float, r: float):
    t = np.linspace(0.0, r, RADIAL_TABLE_SIZE)
    with np.errstate(divide="ignore"):
        logdens = (dim - 1) * (np.log(np.sinh(k * t[1:])) - math.log(k))
    dens = np.concatenate([[0.0], np.exp(logdens - logdens.max())])
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(t))])
    cdf /= cdf[-1]
    return cdf, t


def sample_radius(space: ModelSpace, r: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """Radii with density proportional to (sinh(k t)/k)^(n-1) on [0, r]."""
    cdf, t = _radial_table(space.dim, float(space.k), float(r))
    return np.interp(rng.random(size), cdf, t)


def sample_ball_uniform(space: ModelSpace, center, r: float, rng: np.random.Generator, size=None) -> np.ndarray:
    """Uniform sample (w.r.t. Riemannian volume) from the closed ball B(center, r)."""
    if not r > 0:
        raise ValueError("ball radius must be positive")
    center = np.asarray(center, dtype=float)
    u = random_unit_tangent(space, center, rng, size)
    rad = sample_radius(space, r, rng, size)
    return exp_map(space, center, np.asarray(rad)[..., None] * u)


def lorentz_centroid(space: ModelSpace, points) -> np.ndarray:
    """Normalised Minkowski sum of points; a cheap interior point of their hull."""
    s = np.sum(np.asarray(points, dtype=float), axis=0)
    return s / (space.k * np.sqrt(-minkowski_form(s, s)))
