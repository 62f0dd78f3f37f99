"""Covering numbers of finite clouds, the volume sandwich and the hull covering ratio."""
from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .hyperbolic import ModelSpace, distance
from .sets import SetRep, convexity_probe
from .volume import ball_volume, mc_volume

UNIT_BALL_NOTE = "Vol(B) is the geodesic unit ball; constant curvature makes it position independent"


class HyperbolicMetric:
    """Metric callable for point arrays: metric(points, q) -> distances to q.

    Also exposes a cheap monotone surrogate, -k^2 <x, q>, so traversals can
    run on one matrix-vector product per step.
    """

    def __init__(self, space: ModelSpace):
        self.space = space
        self._J = np.ones(space.dim + 1)
        self._J[0] = -1.0

    def __call__(self, points, q):
        return distance(self.space, points, q)

    def key(self, points, q):
        return -self.space.k**2 * (points @ (self._J * q))

    def from_key(self, key):
        k = self.space.k
        key = np.maximum(np.asarray(key, dtype=float), 1.0)
        near = 2.0 / k * np.arcsinh(0.5 * np.sqrt(2.0 * (key - 1.0)))
        return np.where(key < 2.0, near, np.arccosh(key) / k)


def hyperbolic_metric(space: ModelSpace) -> HyperbolicMetric:
    return HyperbolicMetric(space)


def farthest_point_order(points, metric, start=0, stop_radius=0.0, max_centers=None):
    """Farthest-point traversal.

    Returns (order, radii) where radii[j] is the covering radius of the first
    j+1 centres.  Stops once the radius drops to ``stop_radius`` or below.
    Ties go to the lowest index.
    """
    points = np.asarray(points)
    n = len(points)
    if n == 0:
        raise ValueError("need at least one point")
    limit = n if max_centers is None else min(n, max_centers)
    if hasattr(metric, "key"):
        return _order_by_key(points, metric, start, stop_radius, limit)
    order = [start]
    mind = np.asarray(metric(points, points[start]), dtype=float).copy()
    mind[start] = 0.0
    radii = [float(mind.max())]
    while len(order) < limit and radii[-1] > stop_radius:
        nxt = int(np.argmax(mind))
        order.append(nxt)
        np.minimum(mind, metric(points, points[nxt]), out=mind)
        mind[nxt] = 0.0
        radii.append(float(mind.max()))
    return np.array(order), np.array(radii)


def _order_by_key(points, metric, start, stop_radius, limit):
    order = [start]
    mink = metric.key(points, points[start])
    mink[start] = 1.0
    radii = [float(metric.from_key(mink.max()))]
    while len(order) < limit and radii[-1] > stop_radius:
        nxt = int(np.argmax(mink))
        order.append(nxt)
        np.minimum(mink, metric.key(points, points[nxt]), out=mink)
        mink[nxt] = 1.0
        radii.append(float(metric.from_key(mink.max())))
    return np.array(order), np.array(radii)


def count_from_radii(radii, eps) -> int:
    """Greedy covering number at eps from a traversal's radius sequence."""
    hit = np.nonzero(np.asarray(radii) <= eps)[0]
    if len(hit) == 0:
        raise ValueError("traversal stopped before reaching this eps")
    return int(hit[0]) + 1


def greedy_covering_number(points, metric, eps):
    """Farthest-point greedy cover; returns (count, centre indices).

    The centres are eps-separated, so the count is also a packing number.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    order, radii = farthest_point_order(points, metric, stop_radius=eps)
    count = count_from_radii(radii, eps)
    return count, order[:count]


def exact_covering_number_small(points, metric, eps) -> int:
    """Minimum number of eps-balls centred at the points covering them (<= 16 points)."""
    points = np.asarray(points)
    n = len(points)
    if n > 16:
        raise ValueError("exact covering supports at most 16 points")
    if n == 0:
        return 0
    D = np.array([metric(points, points[i]) for i in range(n)])
    masks = [int(sum(1 << j for j in range(n) if D[i, j] <= eps)) for i in range(n)]
    full = (1 << n) - 1
    # a greedy cover gives the branch-and-bound ceiling
    best = greedy_covering_number(points, metric, eps)[0]
    for size in range(1, best):
        for combo in itertools.combinations(range(n), size):
            acc = 0
            for i in combo:
                acc |= masks[i]
            if acc == full:
                return size
    return best


@dataclass
class CoveringProfile:
    epsilons: np.ndarray
    counts: np.ndarray
    method: str = "greedy"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.epsilons = np.asarray(self.epsilons, dtype=float)
        self.counts = np.asarray(self.counts, dtype=int)
        if np.any(np.diff(self.epsilons) >= 0):
            raise ValueError("eps grid must be strictly decreasing")
        if np.any(np.diff(self.counts) < 0) or np.any(self.counts < 1):
            raise ValueError("counts must be >= 1 and nondecreasing as eps shrinks")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["eps", "count", "method"])
            for e, c in zip(self.epsilons, self.counts):
                w.writerow([repr(float(e)), int(c), self.method])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        return cls([float(r["eps"]) for r in rows], [int(r["count"]) for r in rows], rows[0]["method"])

    def to_dict(self):
        return {"eps": self.epsilons.tolist(), "counts": self.counts.tolist(), "method": self.method}


def eps_grid(diam: float, size: int = 16, ratio: float = 64.0) -> np.ndarray:
    """Log-spaced decreasing grid from diam down to diam/ratio."""
    if diam <= 0:
        raise ValueError("diameter must be positive")
    return diam * np.logspace(0.0, -math.log10(ratio), size)


def covering_profile(points, metric, epsilons, method="greedy", start=0) -> CoveringProfile:
    epsilons = np.asarray(epsilons, dtype=float)
    if method == "exact":
        counts = [exact_covering_number_small(points, metric, e) for e in epsilons]
    elif method == "greedy":
        _, radii = farthest_point_order(points, metric, start=start, stop_radius=float(epsilons.min()))
        counts = [count_from_radii(radii, e) for e in epsilons]
    else:
        raise ValueError(f"unknown method {method!r}")
    return CoveringProfile(epsilons, counts, method)


def volume_sandwich_check(space: ModelSpace, s: SetRep, eps: float, samples: int, rng,
                          cloud_spacing=None, convexity_trials=500) -> dict:
    """Compare a greedy cover of s against (1/eps)^n and (3/eps)^n volume bounds.

    Vol(B) is the geodesic unit ball; in constant curvature it does not
    depend on where it is centred.  Bounds are widened by 3 Monte Carlo
    standard errors before the comparison.
    """
    n = space.dim
    report = {"eps": float(eps), "unit_ball": UNIT_BALL_NOTE}
    probe = convexity_probe(space, s, convexity_trials, rng)
    report["convex"] = probe["violations"] == 0
    if s.kind == "geodesic_ball":
        inradius = s.radius
    elif "polytope" in s.meta:
        inradius = s.meta["polytope"].inradius_at(s.center)
    else:
        inradius = None
    report["eps_ball_inside"] = None if inradius is None else bool(eps <= inradius + 1e-12)
    if s.kind == "geodesic_ball" and cloud_spacing is not None:
        from .sets import geodesic_ball

        cloud = geodesic_ball(space, s.center, s.radius, spacing=cloud_spacing, rng=rng).support
    else:
        cloud = s.support
    est = mc_volume(space, s, samples, rng)
    vb = ball_volume(space, 1.0)
    order, radii = farthest_point_order(cloud, hyperbolic_metric(space), stop_radius=eps)
    N = count_from_radii(radii, eps)
    lower = (1 / eps) ** n * (est.value - 3 * est.stderr) / vb
    upper = (3 / eps) ** n * (est.value + 3 * est.stderr) / vb
    report.update({
        "volume": est.value,
        "volume_stderr": est.stderr,
        "lower": (1 / eps) ** n * est.value / vb,
        "upper": (3 / eps) ** n * est.value / vb,
        "greedy": N,
        "cloud_points": int(len(cloud)),
    })
    if not report["convex"] or report["eps_ball_inside"] is False:
        report["flag"] = "not-assertable: precondition violated (convexity or eps-ball containment)"
    elif report["eps_ball_inside"] is None:
        report["flag"] = "not-assertable: eps-ball containment not verifiable for this kind"
    else:
        report["flag"] = "pass" if lower <= N <= upper else "fail"
    return report


def covering_ratio_check(profile_T: CoveringProfile, profile_Th: CoveringProfile, R: float, n: int) -> dict:
    """Per-eps check N_Th <= R 3^n N_T, plus the largest measured ratio.

    Entries with N_T < 2 are marked not assertable.
    """
    if len(profile_T.epsilons) != len(profile_Th.epsilons) or not np.allclose(
            profile_T.epsilons, profile_Th.epsilons, rtol=1e-12, atol=0):
        raise ValueError("covering profiles are on different eps grids")
    bound = R * 3**n * profile_T.counts
    ok = profile_Th.counts <= bound
    ratio = profile_Th.counts / profile_T.counts
    assertable = profile_T.counts >= 2
    return {
        "eps": profile_T.epsilons.tolist(),
        "ok": ok.tolist(),
        "assertable": assertable.tolist(),
        "ratios": ratio.tolist(),
        "max_ratio": float(ratio.max()),
        "max_ratio_assertable": float(ratio[assertable].max()) if np.any(assertable) else None,
        "bound_factor": R * 3**n,
        "R": R,
    }
