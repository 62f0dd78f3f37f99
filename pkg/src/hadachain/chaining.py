"""The gamma_alpha chaining functional on finite metric spaces.

Admissible sequences use N_0 = 1 and N_n = 2^(2^n) blocks, and the value of
a sequence is max_t sum_n 2^(n/alpha) diam(A_n(t)).
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.integrate import trapezoid
from scipy.spatial.distance import cdist

from .covering import farthest_point_order

TRIANGLE_SLACK = 1e-9
GAUSS_CHUNK = 4096


def level_cap(n: int) -> int:
    """Maximum number of blocks at level n."""
    return 1 if n == 0 else 2 ** (2**n)


class FiniteMetricSpace:
    def __init__(self, dist, labels=None, validate=True):
        d = np.array(dist, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ValueError("distance matrix must be square")
        self.dist = d
        self.labels = list(range(len(d))) if labels is None else list(labels)
        if len(self.labels) != len(d):
            raise ValueError("label count does not match the matrix")
        if validate:
            self.validate()

    def __len__(self):
        return len(self.dist)

    def validate(self):
        d = self.dist
        if len(d) == 0:
            return
        scale = max(1.0, float(d.max()))
        if np.any(d < 0) or not np.all(np.isfinite(d)):
            raise ValueError("distances must be finite and nonnegative")
        if np.any(np.abs(np.diag(d)) > 0):
            raise ValueError("diagonal must be zero")
        if not np.allclose(d, d.T, rtol=0, atol=1e-12 * scale):
            raise ValueError("distance matrix must be symmetric")
        # d[i,k] <= d[i,j] + d[j,k], one pivot j at a time
        for j in range(len(d)):
            if np.any(d > d[:, j, None] + d[None, j, :] + TRIANGLE_SLACK * scale):
                raise ValueError("triangle inequality violated")

    @property
    def diameter(self) -> float:
        return float(self.dist.max()) if len(self) else 0.0

    def scaled(self, c: float) -> "FiniteMetricSpace":
        return FiniteMetricSpace(self.dist * c, self.labels, validate=False)

    def subspace(self, idx) -> "FiniteMetricSpace":
        idx = list(idx)
        return FiniteMetricSpace(self.dist[np.ix_(idx, idx)], [self.labels[i] for i in idx], validate=False)

    def permuted(self, perm) -> "FiniteMetricSpace":
        return self.subspace(perm)

    @classmethod
    def from_vectors(cls, vectors, labels=None):
        v = np.atleast_2d(np.asarray(vectors, dtype=float))
        return cls(cdist(v, v), labels, validate=False)

    @classmethod
    def from_points(cls, space, points, labels=None):
        from .hyperbolic import pairwise_distances

        d = pairwise_distances(space, np.asarray(points, dtype=float))
        np.fill_diagonal(d, 0.0)
        # a genuine metric by construction; the O(n^3) check is skipped
        return cls(0.5 * (d + d.T), labels, validate=False)

    @classmethod
    def from_csv(cls, path):
        """Square distance matrix, one row per line, optional header of labels."""
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        labels = None
        try:
            float(rows[0][0])
        except ValueError:
            labels, rows = rows[0], rows[1:]
        return cls([[float(x) for x in r] for r in rows], labels)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([str(x) for x in self.labels])
            for row in self.dist:
                w.writerow([repr(float(x)) for x in row])


def _metric(fms: FiniteMetricSpace):
    # farthest_point_order wants metric(points, q); points are row indices here
    return lambda idx, q: fms.dist[np.asarray(idx, dtype=int), int(q)]


def canonical_start(fms: FiniteMetricSpace) -> int:
    """Label-free traversal start: smallest eccentricity, then smallest distance sum."""
    d = fms.dist
    return int(np.lexsort((d.sum(axis=1), d.max(axis=1)))[0])


def traversal(fms: FiniteMetricSpace):
    """Farthest-point order and covering radii, started at canonical_start."""
    idx = np.arange(len(fms))
    return farthest_point_order(idx, _metric(fms), start=canonical_start(fms))


def greedy_counts(fms: FiniteMetricSpace, epsilons) -> np.ndarray:
    _, radii = traversal(fms)
    return np.array([int(np.argmax(radii <= e)) + 1 for e in np.asarray(epsilons, dtype=float)])


def dudley_grid(diam: float, size: int = 64, ratio: float = 256.0) -> np.ndarray:
    return diam * np.logspace(0.0, -math.log10(ratio), size)


def dudley_integral(fms: FiniteMetricSpace, alpha: float = 2.0, grid=None) -> float:
    """Integral of (log N(eps))^(1/alpha) over eps > 0 with greedy N.

    ``grid=None`` uses 64 log-spaced points from diam to diam/256.  The
    trapezoidal rule runs on the grid plus the diameter, with N taken as its
    left limit at each node (so the cutoff at the diameter is exact) and held
    constant below the smallest node.  ``grid="exact"`` sums the greedy step
    function exactly over its jumps at the traversal radii.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    if len(fms) <= 1 or fms.diameter == 0:
        return 0.0
    _, radii = traversal(fms)
    if isinstance(grid, str):
        if grid != "exact":
            raise ValueError(f"unknown grid {grid!r}")
        # N = j on [radii[j-1], radii[j-2]) for j >= 2
        j = np.arange(2, len(radii) + 1)
        widths = radii[:-1] - radii[1:]
        return float(np.sum(widths * np.log(j) ** (1 / alpha)))
    diam = fms.diameter
    grid = dudley_grid(diam) if grid is None else np.asarray(grid, dtype=float)
    eps = np.unique(np.append(grid, diam))
    eps = eps[(eps > 0) & (eps <= diam)]
    counts = np.array([int(np.argmax(radii < e)) + 1 for e in eps])
    f = np.log(counts) ** (1 / alpha)
    return float(trapezoid(f, eps) + eps[0] * f[0])


@dataclass
class AdmissibleSequence:
    partitions: list
    alpha: float
    value: float
    centers: list = field(default_factory=list)

    def check(self, fms: Optional[FiniteMetricSpace] = None) -> None:
        parts = self.partitions
        if len(np.unique(parts[0])) != 1:
            raise AssertionError("A_0 must be the whole space")
        for n, lab in enumerate(parts):
            if len(np.unique(lab)) > level_cap(n):
                raise AssertionError(f"level {n} has too many blocks")
            if n > 0:
                prev = parts[n - 1]
                for b in np.unique(lab):
                    if len(np.unique(prev[lab == b])) != 1:
                        raise AssertionError(f"level {n} does not refine level {n - 1}")
        if fms is not None and abs(sequence_value(fms, parts, self.alpha) - self.value) > 1e-12 * max(1.0, self.value):
            raise AssertionError("stored value does not match the partitions")


def _block_diams(fms: FiniteMetricSpace, labels) -> np.ndarray:
    """diam(A(t)) for every point t under the partition given by labels."""
    out = np.zeros(len(labels))
    for b in np.unique(labels):
        members = np.nonzero(labels == b)[0]
        if len(members) > 1:
            out[members] = fms.dist[np.ix_(members, members)].max()
    return out


def sequence_value(fms: FiniteMetricSpace, partitions, alpha: float) -> float:
    if len(fms) == 0:
        return 0.0
    total = np.zeros(len(fms))
    for n, lab in enumerate(partitions):
        total += 2 ** (n / alpha) * _block_diams(fms, np.asarray(lab))
    return float(total.max())


def greedy_gamma(fms: FiniteMetricSpace, alpha: float = 2.0) -> AdmissibleSequence:
    """Upper bound on gamma_alpha from nested farthest-point nets.

    Level n uses the first min(N_n, |T|) traversal centres; each point goes to
    the nearest centre inside its level n-1 block (lowest index on ties).
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    size = len(fms)
    if size == 0:
        raise ValueError("empty metric space")
    order, _ = traversal(fms)
    # finish the order so every point eventually becomes a centre
    rest = np.setdiff1d(np.arange(size), order)
    order = np.concatenate([order, rest]).astype(int)
    labels = np.zeros(size, dtype=int)
    partitions = [labels.copy()]
    centers = [order[:1].tolist()]
    n = 0
    while len(np.unique(labels)) < size:
        n += 1
        C = order[:min(level_cap(n), size)]
        D = fms.dist[:, C]
        # a centre is admissible for x only inside x's current block
        same = labels[:, None] == labels[C][None, :]
        D = np.where(same, D, np.inf)
        # a centre always keeps itself, so duplicate points still separate
        D[C, np.arange(len(C))] = -1.0
        pick = np.argmin(D, axis=1)
        labels = C[pick]
        partitions.append(labels.copy())
        centers.append(C.tolist())
    value = sequence_value(fms, partitions, alpha)
    return AdmissibleSequence(partitions, alpha, value, centers)


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        for i in range(len(part)):
            yield part[:i] + [[first] + part[i]] + part[i + 1:]
        yield [[first]] + part


def exact_gamma_small(fms: FiniteMetricSpace, alpha: float = 2.0) -> float:
    """Exact gamma_alpha for at most 6 points.

    Level 2 allows 16 blocks, so from there on all singletons are admissible
    and optimal; only the level-1 partition (at most 4 blocks) is searched.
    """
    size = len(fms)
    if size > 6:
        raise ValueError("exact gamma supports at most 6 points")
    if size <= 1:
        return 0.0
    best = math.inf
    for part in _set_partitions(list(range(size))):
        if len(part) > level_cap(1):
            continue
        worst = max(fms.dist[np.ix_(b, b)].max() for b in part)
        best = min(best, worst)
    return fms.diameter + 2 ** (1 / alpha) * best


@dataclass
class GaussianIndexSet:
    vectors: np.ndarray

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=float))
        if len(self.vectors) == 0:
            raise ValueError("need at least one vector")

    @property
    def metric(self) -> np.ndarray:
        return cdist(self.vectors, self.vectors)

    def metric_space(self) -> FiniteMetricSpace:
        return FiniteMetricSpace(self.metric, validate=False)

    @classmethod
    def from_csv(cls, path):
        return cls(np.loadtxt(path, delimiter=",", ndmin=2, comments="#"))


def gaussian_sup_mc(gset: GaussianIndexSet, trials: int, rng) -> dict:
    """Monte Carlo mean of max_t <t, g> for standard Gaussian g."""
    if trials < 1000:
        raise ValueError("need at least 1000 trials")
    V = gset.vectors
    sups = np.empty(trials)
    done = 0
    while done < trials:
        size = min(GAUSS_CHUNK, trials - done)
        g = rng.standard_normal((size, V.shape[1]))
        sups[done:done + size] = (g @ V.T).max(axis=1)
        done += size
    return {"mean_sup": float(sups.mean()), "stderr": float(sups.std(ddof=1) / math.sqrt(trials)), "trials": trials}


def fernique_band(gset: GaussianIndexSet, alpha: float = 2.0, trials: int = 10_000, rng=None) -> dict:
    """Empirical constants gamma/E sup and E sup/gamma for one index set."""
    rng = rng if rng is not None else np.random.default_rng(0)
    gamma = greedy_gamma(gset.metric_space(), alpha).value
    mc = gaussian_sup_mc(gset, trials, rng)
    out = {"gamma_greedy": gamma, "mean_sup": mc["mean_sup"], "stderr": mc["stderr"],
           "L_lower": None, "L_upper": None, "flag": "pass"}
    if gamma == 0 or mc["mean_sup"] <= 0:
        out["flag"] = "not-assertable: degenerate index set (all vectors equal)"
        return out
    out["L_upper"] = gamma / mc["mean_sup"]
    out["L_lower"] = mc["mean_sup"] / gamma
    if not (math.isfinite(out["L_upper"]) and out["L_upper"] > 0):
        out["flag"] = "fail"
    return out
