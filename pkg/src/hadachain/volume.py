"""Riemannian volumes: exact ball volumes and hit-or-miss Monte Carlo."""
from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass

import numpy as np

from .hyperbolic import ModelSpace, distance, sample_ball_uniform

QUAD_NODES = 256
MC_CHUNK = 1 << 16


@functools.lru_cache(maxsize=None)
def _gauss_legendre(n: int):
    return np.polynomial.legendre.leggauss(n)


def sphere_area(n: int) -> float:
    """Area of the unit (n-1)-sphere in R^n."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_surface(space: ModelSpace, r: float) -> float:
    """Area of the geodesic sphere of radius r."""
    n, k = space.dim, space.k
    return sphere_area(n) * (math.sinh(k * r) / k) ** (n - 1)


def ball_volume(space: ModelSpace, r: float) -> float:
    """Volume of a geodesic ball, by 256-node Gauss-Legendre on the radial integral."""
    if r < 0:
        raise ValueError("radius must be nonnegative")
    if r == 0:
        return 0.0
    n, k = space.dim, space.k
    x, w = _gauss_legendre(QUAD_NODES)
    t = 0.5 * r * (x + 1.0)
    integrand = (np.sinh(k * t) / k) ** (n - 1)
    return sphere_area(n) * 0.5 * r * float(np.dot(w, integrand))


def ball_volume_closed_form(space: ModelSpace, r: float) -> float:
    """Closed forms for n = 2, 3 (used as quadrature cross-checks)."""
    k = space.k
    if space.dim == 2:
        return 2.0 * math.pi * (math.cosh(k * r) - 1.0) / k**2
    if space.dim == 3:
        return math.pi * (math.sinh(2 * k * r) - 2 * k * r) / k**3
    raise ValueError("closed form only available for n = 2, 3")


@dataclass(frozen=True)
class VolumeEstimate:
    value: float
    stderr: float
    samples: int
    bounding_volume: float
    hits: int = 0
    low_confidence: bool = False

    def record(self, kind: str, space: ModelSpace) -> dict:
        """JSON-ready record for reports."""
        return {
            "kind": kind,
            "n": space.dim,
            "k": space.k,
            "samples": self.samples,
            "value": self.value,
            "stderr": self.stderr,
            "low_confidence": self.low_confidence,
        }


def _estimate(hits: int, samples: int, vbound: float) -> VolumeEstimate:
    if hits == 0:
        # rule of three: 95% upper bound on the hit rate
        return VolumeEstimate(0.0, 3.0 * vbound / samples, samples, vbound, 0, True)
    p = hits / samples
    return VolumeEstimate(p * vbound, vbound * math.sqrt(p * (1 - p) / samples), samples, vbound, hits)


def _chunks(samples: int):
    done = 0
    while done < samples:
        size = min(MC_CHUNK, samples - done)
        yield size
        done += size


def mc_volume(space: ModelSpace, s, samples: int, rng: np.random.Generator, bounding=None) -> VolumeEstimate:
    """Hit-or-miss volume of a region inside its bounding ball.

    ``bounding=(center, radius)`` replaces the set's own bounding ball; it
    must contain the set.  Draws come in fixed-size chunks from ``rng``, so
    the estimate is bit-reproducible for a given seed.
    """
    if samples < 1000:
        raise ValueError("mc_volume needs at least 1000 samples")
    center, radius = (s.center, s.radius) if bounding is None else bounding
    if not math.isfinite(radius):
        raise ValueError(f"{s.kind} set has no finite bounding ball")
    vbound = ball_volume(space, radius)
    hits = 0
    for size in _chunks(samples):
        pts = sample_ball_uniform(space, center, radius, rng, size)
        hits += int(np.count_nonzero(s.contains(pts)))
    return _estimate(hits, samples, vbound)


def mc_volumes_common(space: ModelSpace, sets, samples: int, rng: np.random.Generator, bounding) -> list:
    """Hit-or-miss volumes of several regions from one shared sample.

    Common draws make ratios of nested regions at least 1 and cut their
    variance.  ``bounding=(center, radius)`` must contain every region.
    """
    if samples < 1000:
        raise ValueError("mc_volume needs at least 1000 samples")
    center, radius = bounding
    vbound = ball_volume(space, radius)
    hits = np.zeros(len(sets), dtype=np.int64)
    for size in _chunks(samples):
        pts = sample_ball_uniform(space, center, radius, rng, size)
        hits += [int(np.count_nonzero(s.contains(pts))) for s in sets]
    return [_estimate(int(h), samples, vbound) for h in hits]


def shell_volume_ratio(space: ModelSpace, s, deltas, samples: int, rng: np.random.Generator):
    """Collar volumes Vol(N(s, d) - s) / d for each d in ``deltas``.

    All collars are estimated from one sample of the ball bounding N(s, max d).
    Returns a list of (delta, ratio, stderr) triples.
    """
    deltas = [float(d) for d in deltas]
    if not deltas or any(d <= 0 for d in deltas):
        raise ValueError("deltas must be positive")
    if any(b >= a for a, b in zip(deltas, deltas[1:])):
        raise ValueError("deltas must be strictly decreasing")
    radius = s.radius + deltas[0]
    vbound = ball_volume(space, radius)
    counts = np.zeros(len(deltas), dtype=np.int64)
    for size in _chunks(samples):
        pts = sample_ball_uniform(space, s.center, radius, rng, size)
        outside = pts[~s.contains(pts)]
        if len(outside) == 0:
            continue
        d = s.distance(outside)
        counts += np.array([np.count_nonzero(d <= delta) for delta in deltas])
    out = []
    for delta, c in zip(deltas, counts):
        est = _estimate(int(c), samples, vbound)
        out.append((delta, est.value / delta, est.stderr / delta))
    return out


def decompose_G_volumes(space: ModelSpace, env, eta: float, samples: int, rng: np.random.Generator) -> dict:
    """Split Monte Carlo hits of the envelope G into the three proof regions.

    G2 is G inside B(Q, eta); outside that ball a hit belongs to G1 (the tube)
    when it is nearer the ray than the base hull, and to G3 otherwise.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    center, radius = env.bounding_ball()
    vbound = ball_volume(space, radius)
    counts = np.zeros(3, dtype=np.int64)
    total = 0
    for size in _chunks(samples):
        pts = sample_ball_uniform(space, center, radius, rng, size)
        pts = pts[env.contains(pts)]
        total += len(pts)
        if len(pts) == 0:
            continue
        in_ball = distance(space, pts, env.ray_start) <= eta
        nearer_ray = env.ray_distance(pts) < env.base_hull.distance(pts)
        counts[1] += np.count_nonzero(in_ball)
        counts[0] += np.count_nonzero(~in_ball & nearer_ray)
        counts[2] += np.count_nonzero(~in_ball & ~nearer_ray)
    parts = [_estimate(int(c), samples, vbound) for c in counts]
    whole = _estimate(total, samples, vbound)
    return {
        "eta": eta,
        "vol_G1": parts[0].value,
        "vol_G2": parts[1].value,
        "vol_G3": parts[2].value,
        "vol_total": whole.value,
        "stderr": {"G1": parts[0].stderr, "G2": parts[1].stderr, "G3": parts[2].stderr, "total": whole.stderr},
        "samples": samples,
    }


def estimate_as_dict(est: VolumeEstimate) -> dict:
    return asdict(est)
