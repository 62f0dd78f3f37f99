"""The envelope G = {g1 + g2 <= 1} around a hull plus one outgoing geodesic ray.

g1 and g2 are 1 - exp(-a dist) to the base hull and to the ray.  Convexity of
G is checked numerically (geodesic pair probes and second differences along
boundary tangents) rather than through smoothed surrogates.
"""
from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np

from .bounds import check_a, find_a
from .hyperbolic import (
    ModelSpace,
    distance,
    exp_map,
    log_map,
    lorentz_centroid,
    minkowski_form,
    random_unit_tangent,
    tangent_basis,
    tangent_norm,
)
from .sets import SetRep, cloud_distance, cloud_tree, fill_region, segment_distance

BOUNDARY_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class EnvelopeSpec:
    base_hull: SetRep
    ray_start: np.ndarray
    ray_dir: np.ndarray
    decay: float
    ray_length: float = 50.0
    k1: float = 1.0

    def __post_init__(self):
        space = self.space
        if abs(float(tangent_norm(self.ray_dir)) - 1.0) > 1e-9:
            raise ValueError("ray direction must be a unit vector")
        scale = max(1.0, float(np.abs(self.ray_start).max() * np.abs(self.ray_dir).max()))
        if abs(float(minkowski_form(self.ray_start, self.ray_dir))) > 1e-9 * scale:
            raise ValueError("ray direction must be tangent at the ray start")
        if not self.decay > 0:
            raise ValueError("decay must be positive")
        if not all(check_a(self.decay, self.k1)):
            raise ValueError(f"decay {self.decay} violates the convexity conditions for k1={self.k1}")
        if not self.ray_length > 0:
            raise ValueError("ray length must be positive")
        if space.dim + 1 != len(self.ray_start):
            raise ValueError("ray start has the wrong dimension")

    @property
    def space(self) -> ModelSpace:
        return self.base_hull.space

    @property
    def ray_end(self) -> np.ndarray:
        return exp_map(self.space, self.ray_start, self.ray_length * self.ray_dir)

    def ray_distance(self, pts):
        pts = np.asarray(pts, dtype=float)
        return segment_distance(self.space, pts, self.ray_start, self.ray_end)

    def g1(self, pts):
        return -np.expm1(-self.decay * self.base_hull.distance(pts))

    def g2(self, pts):
        return -np.expm1(-self.decay * self.ray_distance(pts))

    def level(self, pts):
        return self.g1(pts) + self.g2(pts)

    def contains(self, pts):
        return self.level(pts) <= 1.0

    def bounding_ball(self):
        """A ball containing G: every point of G lies within ln2/a of hull or ray."""
        space = self.space
        c = self.base_hull.center
        reach = max(self.base_hull.radius,
                    float(distance(space, c, self.ray_start)) + self.ray_length)
        return c, reach + math.log(2) / self.decay + 1e-6

    @functools.cached_property
    def boundary(self) -> np.ndarray:
        return sample_boundary(self)

    def as_set(self, spacing=0.05, rng=None) -> SetRep:
        return envelope_set(self, spacing=spacing, rng=rng)


def g1(env: EnvelopeSpec, p):
    return env.g1(p)


def g2(env: EnvelopeSpec, p):
    return env.g2(p)


def envelope_membership(env: EnvelopeSpec, p):
    out = env.contains(np.atleast_2d(p))
    return bool(out[0]) if np.ndim(p) == 1 else out


def make_envelope(space: ModelSpace, base_hull: SetRep, far_point, decay=None, k1=1.0) -> EnvelopeSpec:
    """Envelope for adding ``far_point`` to ``base_hull``.

    The ray starts at the hull point Q nearest to far_point and runs to it,
    perpendicular to the hull boundary.
    """
    far_point = np.asarray(far_point, dtype=float)
    poly = base_hull.meta.get("polytope")
    if poly is None:
        raise ValueError("base hull must be an exact polytope hull")
    d, foot = poly.nearest(far_point[None])
    if d[0] <= 0:
        raise ValueError("far point lies inside the base hull")
    Q = foot[0]
    v = log_map(space, Q, far_point)
    L = float(tangent_norm(v))
    decay = find_a(k1) if decay is None else decay
    return EnvelopeSpec(base_hull, Q, v / L, decay, ray_length=L, k1=k1)


def _boundary_along(env: EnvelopeSpec, origin, dirs, t_hi, iters=60):
    """Bisection for the level-1 crossing along each unit direction from origin."""
    lo = np.zeros(len(dirs))
    hi = np.full(len(dirs), t_hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        inside = env.contains(exp_map(env.space, origin, mid[:, None] * dirs))
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return exp_map(env.space, origin, lo[:, None] * dirs)


def sample_boundary(env: EnvelopeSpec, spacing=0.02, rng=None, max_points=200_000) -> np.ndarray:
    """Points on the boundary of G, found by bisection along rays from Q.

    In two dimensions the angles are refined until neighbouring boundary
    points are within ``spacing``; in higher dimensions directions are random.
    """
    space = env.space
    Q = env.ray_start
    c, R = env.bounding_ball()
    t_hi = float(distance(space, c, Q)) + R + 1.0
    if space.dim == 2:
        e = tangent_basis(space, Q)
        theta = np.linspace(0.0, 2 * math.pi, 721)[:-1]

        def points(th):
            dirs = np.cos(th)[:, None] * e[0] + np.sin(th)[:, None] * e[1]
            return _boundary_along(env, Q, dirs, t_hi)

        pts = points(theta)
        for _ in range(30):
            nxt = np.roll(pts, -1, axis=0)
            gaps = distance(space, pts, nxt) > spacing
            if not np.any(gaps) or len(theta) >= max_points:
                break
            nxt_theta = np.where(np.arange(len(theta)) == len(theta) - 1, theta[0] + 2 * math.pi, np.roll(theta, -1))
            new_theta = 0.5 * (theta[gaps] + nxt_theta[gaps])
            new_pts = points(new_theta)
            theta = np.concatenate([theta, new_theta % (2 * math.pi)])
            pts = np.concatenate([pts, new_pts])
            order = np.argsort(theta)
            theta, pts = theta[order], pts[order]
        return pts
    rng = rng if rng is not None else np.random.default_rng(0)
    dirs = random_unit_tangent(space, Q, rng, min(max_points, 20_000))
    return _boundary_along(env, Q, dirs, t_hi)


def envelope_set(env: EnvelopeSpec, spacing=0.05, rng=None) -> SetRep:
    """SetRep of G: boundary samples plus an interior fill as support."""
    space = env.space
    bnd = env.boundary
    c = lorentz_centroid(space, bnd)
    radius = float(np.max(distance(space, bnd, c))) + 1e-9
    interior = fill_region(space, env.contains, c, radius, spacing, rng)
    support = np.concatenate([env.ray_start[None], bnd, interior])
    tree = cloud_tree(space, bnd)

    def dist(p):
        # only called for points outside G, whose nearest point is on the boundary
        return cloud_distance(space, bnd, p, tree)

    return SetRep(space, "envelope", support, c, radius, env.contains, dist,
                  {"decay": env.decay, "ray_length": env.ray_length, "boundary_points": len(bnd)})


def boundary_tangent(env: EnvelopeSpec, p, rng=None, h=1e-5):
    """Unit tangent to the level set through p, via a finite-difference gradient."""
    space = env.space
    p = np.asarray(p, dtype=float)
    e = tangent_basis(space, p)
    grad = np.array([(env.level(exp_map(space, p, h * ei)[None])[0]
                      - env.level(exp_map(space, p, -h * ei)[None])[0]) / (2 * h) for ei in e])
    gnorm = np.linalg.norm(grad)
    if space.dim == 2:
        x = np.array([-grad[1], grad[0]])
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        x = rng.standard_normal(space.dim)
        x -= (x @ grad) / gnorm**2 * grad
    x /= np.linalg.norm(x)
    return x @ e, (grad / gnorm) @ e


def second_difference_probe(env: EnvelopeSpec, p, x, h=1e-3) -> float:
    """Central second difference of g1 + g2 at p along the geodesic with direction x."""
    space = env.space
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    if not 1e-4 <= h <= 1e-2:
        raise ValueError("step h must lie in [1e-4, 1e-2]")
    f0 = env.level(p[None])[0]
    if abs(f0 - 1.0) > BOUNDARY_TOL:
        raise ValueError(f"point is not on the envelope boundary (g1 + g2 = {f0:.6f})")
    fp = env.level(exp_map(space, p, h * x)[None])[0]
    fm = env.level(exp_map(space, p, -h * x)[None])[0]
    return float((fp - 2 * f0 + fm) / h**2)
