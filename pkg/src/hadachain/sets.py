"""Regions of the model space: membership oracle plus a dense support cloud.

Balls, half-spaces, geodesic segments and their unions have closed-form
distance functions.  Geodesic hulls of full-dimensional seed sets are exact
polytopes (the hull of finitely many hyperboloid points is the normalised
positive cone they span), so hull membership and distances are exact as well.
Anything else falls back to nearest-support search refined along geodesics.
"""
from __future__ import annotations

import csv
import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.spatial import ConvexHull, QhullError, cKDTree

from .hyperbolic import (
    ModelSpace,
    distance,
    exp_map,
    log_map,
    lorentz_centroid,
    minkowski_form,
    random_unit_tangent,
    sample_ball_uniform,
    tangent_basis,
    tangent_norm,
)
from .volume import ball_surface, ball_volume, sphere_area

KINDS = ("geodesic_ball", "half_space", "geodesic_segment", "union", "hull_cloud", "envelope", "neighborhood")
MEMBERSHIP_TOL = 1e-10
SEGMENT_TOL = 1e-8
MAX_CLOUD_POINTS = 10_000_000
_QUERY_CHUNK = 4096


class UnsupportedConfiguration(ValueError):
    pass


class ResourceLimitError(RuntimeError):
    def __init__(self, message, achieved_tol=None):
        super().__init__(message)
        self.achieved_tol = achieved_tol


@dataclass(frozen=True, eq=False)
class SetRep:
    """A region: membership predicate, support cloud and a bounding ball.

    ``contains`` and ``distance`` accept a single point or an (N, n+1) array.
    """

    space: ModelSpace
    kind: str
    support: np.ndarray
    center: np.ndarray
    radius: float
    contains_fn: Callable[[np.ndarray], np.ndarray]
    distance_fn: Optional[Callable[[np.ndarray], np.ndarray]] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown set kind {self.kind!r}")
        if len(self.support) == 0:
            raise ValueError("support cloud must be nonempty")

    def contains(self, pts):
        pts = np.asarray(pts, dtype=float)
        if pts.ndim == 1:
            return bool(self.contains_fn(pts[None])[0])
        return np.asarray(self.contains_fn(pts), dtype=bool)

    def distance(self, pts):
        """Distance to the set; 0 for members."""
        pts = np.asarray(pts, dtype=float)
        single = pts.ndim == 1
        pts = np.atleast_2d(pts)
        out = np.zeros(len(pts))
        outside = ~self.contains(pts)
        if np.any(outside):
            fn = self.distance_fn or self._cloud_distance
            out[outside] = np.maximum(fn(pts[outside]), 0.0)
        return float(out[0]) if single else out

    @functools.cached_property
    def _tree(self):
        return cloud_tree(self.space, self.support)

    def _cloud_distance(self, pts):
        return cloud_distance(self.space, self.support, pts, self._tree)

    def check_invariants(self, slack=1e-9) -> bool:
        inside = self.contains(self.support)
        within = distance(self.space, self.support, self.center) <= self.radius + slack
        return bool(np.all(inside) and np.all(within))


def dist_to_set(space: ModelSpace, p, s: SetRep):
    return s.distance(p)


# ---------------------------------------------------------------------------
# geodesic primitives


def segment_distance(space: ModelSpace, p, a, b, return_foot=False):
    """Distance from p to the geodesic segment [a, b], in closed form.

    The foot on the full geodesic sits at parameter atanh(B/A)/k with
    A = -k^2 <p, a>, B = k <p, u>; distance is convex along geodesics, so
    clamping the parameter to [0, L] gives the segment minimiser.
    """
    p, a, b = (np.asarray(x, dtype=float) for x in (p, a, b))
    k = space.k
    v = log_map(space, a, b)
    L = tangent_norm(v)
    safe = np.where(L > 0, L, 1.0)
    u = v / safe[..., None]
    A = -(k**2) * minkowski_form(p, a)
    B = k * minkowski_form(p, u)
    s = np.arctanh(np.clip(B / A, -1 + 1e-16, 1 - 1e-16)) / k
    s = np.clip(s, 0.0, L)
    foot = exp_map(space, a, s[..., None] * u)
    d = distance(space, p, foot)
    return (d, foot) if return_foot else d


def nearest_in_cloud(space: ModelSpace, cloud, pts, tree=None, neighbours=8, keep=3):
    """Exact geodesic nearest neighbours in a cloud; returns (distances, indices of the ``keep`` nearest).

    A k-d tree on Poincare-ball coordinates (``cloud_tree``) shortlists
    candidates; the query is widened until the shortlist provably holds every
    cloud point that could still beat the best geodesic distance found.
    """
    cloud = np.asarray(cloud, dtype=float)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    if len(cloud) == 0:
        raise ValueError("empty support")
    tree = tree or cloud_tree(space, cloud)
    best = np.full(len(pts), np.inf)
    near = np.zeros((len(pts), keep), dtype=int)
    todo = np.arange(len(pts))
    kq = min(max(neighbours, keep), len(cloud))
    while len(todo):
        sub = pts[todo]
        eu, idx = tree.query(poincare_coords(space, sub), k=kq)
        eu = np.asarray(eu).reshape(len(sub), kq)
        idx = np.asarray(idx).reshape(len(sub), kq)
        d = distance(space, sub[:, None, :], cloud[idx])
        order = np.argsort(d, axis=1)[:, :keep]
        best[todo] = np.take_along_axis(d, order[:, :1], axis=1)[:, 0]
        top = np.take_along_axis(idx, order, axis=1)
        near[todo, :top.shape[1]] = top
        near[todo, top.shape[1]:] = top[:, :1]
        certified = (kq == len(cloud)) | (eu[:, -1] > poincare_reach(space, sub, best[todo]))
        todo = todo[~certified]
        kq = min(4 * kq, len(cloud))
    return best, near


def cloud_distance(space: ModelSpace, cloud, pts, tree=None, neighbours=8):
    """Min distance to a point cloud, refined on segments between the 3 nearest points."""
    cloud = np.asarray(cloud, dtype=float)
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    tree = tree or cloud_tree(space, cloud)
    out = np.empty(len(pts))
    for lo in range(0, len(pts), _QUERY_CHUNK):
        chunk = pts[lo:lo + _QUERY_CHUNK]
        best, near = nearest_in_cloud(space, cloud, chunk, tree, neighbours)
        for i, j in ((0, 1), (0, 2), (1, 2)):
            seg = segment_distance(space, chunk, cloud[near[:, i]], cloud[near[:, j]])
            best = np.minimum(best, seg)
        out[lo:lo + len(chunk)] = best
    return out


def fill_region(space: ModelSpace, contains, center, radius, spacing, rng=None, oversample=4.0):
    """Dense sample of a region inside B(center, radius).

    In two dimensions this is a deterministic geodesic polar grid with ring
    and arc spacing ``spacing``; in higher dimensions it is a uniform random
    sample with ``oversample`` points per spacing-ball on average.
    """
    center = np.asarray(center, dtype=float)
    if spacing <= 0:
        raise ValueError("spacing must be positive")
    n, k = space.dim, space.k
    if n == 2:
        rings = int(math.ceil(radius / spacing))
        expected = ball_volume(space, radius) / spacing**2
        if expected > MAX_CLOUD_POINTS:
            raise ResourceLimitError(f"fill at spacing {spacing} needs ~{expected:.3g} points",
                                     achieved_tol=math.sqrt(ball_volume(space, radius) / MAX_CLOUD_POINTS))
        e = tangent_basis(space, center)
        chunks = [center[None]]
        for j in range(1, rings + 1):
            t = min(j * spacing, radius)
            count = max(1, int(math.ceil(2 * math.pi * math.sinh(k * t) / k / spacing)))
            theta = (np.arange(count) + 0.5 * (j % 2)) * (2 * math.pi / count)
            v = t * (np.cos(theta)[:, None] * e[0] + np.sin(theta)[:, None] * e[1])
            chunks.append(exp_map(space, center, v))
        pts = np.concatenate(chunks)
    else:
        rng = rng if rng is not None else np.random.default_rng(0)
        cell = sphere_area(n) / n * spacing**n
        count = int(math.ceil(oversample * ball_volume(space, radius) / cell))
        if count > MAX_CLOUD_POINTS:
            raise ResourceLimitError(f"fill at spacing {spacing} needs {count} points",
                                     achieved_tol=spacing * (count / MAX_CLOUD_POINTS) ** (1 / n))
        pts = np.concatenate([center[None], sample_ball_uniform(space, center, radius, rng, count)])
    keep = np.zeros(len(pts), dtype=bool)
    for lo in range(0, len(pts), 1 << 16):
        keep[lo:lo + (1 << 16)] = contains(pts[lo:lo + (1 << 16)])
    return pts[keep]


def sphere_points(space: ModelSpace, center, r, spacing, rng=None):
    """Points on the geodesic sphere S(center, r) at roughly the given spacing."""
    center = np.asarray(center, dtype=float)
    if space.dim == 2:
        count = max(8, int(math.ceil(2 * math.pi * math.sinh(space.k * r) / space.k / spacing)))
        theta = np.arange(count) * (2 * math.pi / count)
        e = tangent_basis(space, center)
        v = r * (np.cos(theta)[:, None] * e[0] + np.sin(theta)[:, None] * e[1])
        return exp_map(space, center, v)
    rng = rng if rng is not None else np.random.default_rng(0)
    count = int(min(200_000, max(32, 4 * ball_surface(space, r) / spacing ** (space.dim - 1))))
    u = random_unit_tangent(space, center, rng, count)
    return exp_map(space, center, r * u)


# ---------------------------------------------------------------------------
# closed-form kinds


def geodesic_ball(space: ModelSpace, center, r, spacing=None, rng=None) -> SetRep:
    center = np.asarray(center, dtype=float)
    if not r > 0:
        raise ValueError("ball radius must be positive")
    spacing = spacing or r / 6

    def contains(p):
        return distance(space, p, center) <= r + MEMBERSHIP_TOL

    def dist(p):
        return np.maximum(distance(space, p, center) - r, 0.0)

    interior = fill_region(space, contains, center, r, spacing, rng)
    rim = sphere_points(space, center, r, spacing, rng)
    support = np.concatenate([interior, rim])
    return SetRep(space, "geodesic_ball", support, center, float(r), contains, dist, {"ball_radius": float(r)})


def half_space(space: ModelSpace, base, normal, spacing=0.25, extent=2.0) -> SetRep:
    """Closed half-space through ``base`` on the side opposite the unit normal.

    Unbounded, so the bounding radius is infinite; the support cloud only
    covers B(base, extent) within the half-space.
    """
    base = np.asarray(base, dtype=float)
    nu = np.asarray(normal, dtype=float)
    nu = nu + space.k**2 * minkowski_form(base, nu) * base
    nu = nu / tangent_norm(nu)
    k = space.k

    def signed(p):
        return np.arcsinh(k * minkowski_form(p, nu)) / k

    def contains(p):
        return signed(p) <= MEMBERSHIP_TOL

    def dist(p):
        return np.maximum(signed(p), 0.0)

    support = fill_region(space, contains, base, extent, spacing)
    return SetRep(space, "half_space", support, base, math.inf, contains, dist, {"normal": nu})


def geodesic_segment(space: ModelSpace, a, b, spacing=0.05) -> SetRep:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    L = float(distance(space, a, b))
    count = max(2, int(math.ceil(L / spacing)) + 1)
    t = np.linspace(0.0, 1.0, count)
    support = exp_map(space, a, t[:, None] * log_map(space, a, b))
    mid = support[count // 2]

    def dist(p):
        return segment_distance(space, p, a, b)

    def contains(p):
        # the closed-form foot carries ~1e-9 roundoff once coordinates grow
        return dist(p) <= SEGMENT_TOL

    radius = max(float(distance(space, mid, a)), float(distance(space, mid, b)))
    return SetRep(space, "geodesic_segment", support, mid, radius, contains, dist, {"length": L})


def union(sets) -> SetRep:
    sets = list(sets)
    if not sets:
        raise ValueError("union of nothing")
    space = sets[0].space
    exact = all(s.distance_fn is not None for s in sets)

    def contains(p):
        out = np.zeros(len(p), dtype=bool)
        for s in sets:
            out |= s.contains(p)
        return out

    def dist(p):
        return np.min([s.distance(p) for s in sets], axis=0)

    center = lorentz_centroid(space, [s.center for s in sets])
    radius = max(float(distance(space, center, s.center)) + s.radius for s in sets)
    support = np.concatenate([s.support for s in sets])
    return SetRep(space, "union", support, center, radius, contains, dist if exact else None,
                  {"members": len(sets)})


def delta_neighborhood(space: ModelSpace, s: SetRep, delta: float) -> SetRep:
    """N(s, delta); in a geodesic space dist(p, N(s, d)) = max(0, dist(p, s) - d)."""
    if not delta > 0:
        raise ValueError("delta must be positive")

    def contains(p):
        return s.distance(p) <= delta + MEMBERSHIP_TOL

    def dist(p):
        return np.maximum(s.distance(p) - delta, 0.0)

    return SetRep(space, "neighborhood", s.support, s.center, s.radius + delta, contains, dist,
                  {"base_kind": s.kind, "delta": float(delta)})


# ---------------------------------------------------------------------------
# geodesic hulls


class Polytope:
    """Geodesic convex hull of finitely many points in general position.

    Facets come from the Euclidean hull of the projective (Klein) images
    x_bar / x_0; each facet hyperplane is the zero set of <x, nu> for a
    unit spacelike normal nu.
    """

    def __init__(self, space: ModelSpace, points):
        self.space = space
        pts = np.asarray(points, dtype=float)
        hull = ConvexHull(pts[:, 1:] / pts[:, :1])
        self.vertices = pts[hull.vertices]
        remap = {int(v): i for i, v in enumerate(hull.vertices)}
        simplices = np.vectorize(remap.get)(hull.simplices)
        eq = hull.equations
        nu = np.concatenate([-eq[:, -1:], eq[:, :-1]], axis=1)
        self.normals = nu / np.sqrt(minkowski_form(nu, nu))[:, None]
        faces = {}
        for size in range(2, space.dim + 1):
            subsets = {tuple(sorted(c)) for simp in simplices for c in itertools.combinations(simp, size)}
            if subsets:
                faces[size] = np.array(sorted(subsets), dtype=int)
        self._faces = []
        for size, idx in faces.items():
            V = self.vertices[idx]
            gram = minkowski_form(V[:, :, None, :], V[:, None, :, :])
            diam = np.max(distance(space, V[:, :, None, :], V[:, None, :, :]), axis=(1, 2))
            # vertex -> incident faces, CSR style
            flat = idx.ravel()
            order = np.argsort(flat, kind="stable")
            ptr = np.searchsorted(flat[order], np.arange(len(self.vertices) + 1))
            incident = order // size
            self._faces.append((V, np.linalg.inv(gram), float(diam.max()), ptr, incident))
        self._tree = cloud_tree(space, self.vertices)

    def signed_facet_distance(self, pts):
        """Per-facet signed distances; all <= 0 inside."""
        k = self.space.k
        return np.arcsinh(k * self._facet_forms(pts)) / k

    def _facet_forms(self, pts):
        # one matmul against J-flipped normals instead of a broadcast product
        flipped = self.normals.copy()
        flipped[:, 0] *= -1.0
        return np.asarray(pts, dtype=float) @ flipped.T

    def contains(self, pts):
        k = self.space.k
        # arcsinh is monotone, so compare forms against the mapped tolerance
        return np.all(k * self._facet_forms(pts) <= math.sinh(k * MEMBERSHIP_TOL), axis=-1)

    def inradius_at(self, p) -> float:
        return float(max(0.0, -np.max(self.signed_facet_distance(p))))

    def nearest(self, pts):
        """Distances to the polytope and nearest points (exact).

        A face can only hold the nearest point if one of its vertices lies
        within (nearest vertex distance + largest face diameter), so only
        faces incident to such vertices are projected onto.
        """
        space = self.space
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        dist_out = np.empty(len(pts))
        foot_out = np.empty_like(pts)
        sign = np.ones(space.dim + 1)
        sign[0] = -1.0
        for lo in range(0, len(pts), _QUERY_CHUNK):
            P = pts[lo:lo + _QUERY_CHUNK]
            best, near = nearest_in_cloud(space, self.vertices, P, self._tree, keep=1)
            foot = self.vertices[near[:, 0]]
            u = poincare_coords(space, P)
            for V, ginv, diam, ptr, incident in self._faces:
                lists = self._tree.query_ball_point(u, r=poincare_reach(space, P, best + diam))
                counts = np.fromiter((len(x) for x in lists), dtype=int, count=len(lists))
                verts = np.fromiter((v for x in lists for v in x), dtype=int, count=int(counts.sum()))
                owner = np.repeat(np.arange(len(P)), counts)
                nf = ptr[verts + 1] - ptr[verts]
                start = np.repeat(ptr[verts], nf)
                offs = np.arange(int(nf.sum())) - np.repeat(np.cumsum(nf) - nf, nf)
                fi = incident[start + offs]
                ci = np.repeat(owner, nf)
                key = np.unique(ci.astype(np.int64) * len(V) + fi)
                ci, fi = key // len(V), key % len(V)
                if len(ci) == 0:
                    continue
                Vp = V[fi]
                b = np.einsum("pjd,pd->pj", Vp, P[ci] * sign)
                c = np.einsum("pij,pj->pi", ginv[fi], b)
                ok = np.all(c >= -1e-12, axis=-1)
                ci, Vp, c = ci[ok], Vp[ok], c[ok]
                if len(ci) == 0:
                    continue
                par = np.einsum("pj,pjd->pd", c, Vp)
                par = par / (space.k * np.sqrt(np.maximum(-minkowski_form(par, par), 1e-300)))[:, None]
                dface = distance(space, P[ci], par)
                order = np.lexsort((dface, ci))
                first = order[np.r_[True, ci[order][1:] != ci[order][:-1]]]
                rows = ci[first]
                better = dface[first] < best[rows]
                rows, win = rows[better], first[better]
                best[rows] = dface[win]
                foot[rows] = par[win]
            inside = self.contains(P)
            best[inside] = 0.0
            foot[inside] = P[inside]
            dist_out[lo:lo + len(P)] = best
            foot_out[lo:lo + len(P)] = foot
        return dist_out, foot_out

    def distance(self, pts):
        return self.nearest(pts)[0]


def midpoint_closure(space: ModelSpace, seeds, tol, max_points=MAX_CLOUD_POINTS, rng=None):
    """Close a cloud under geodesic midpoints until none is farther than tol.

    Each round pairs every point with its nearest neighbours (all points
    while the cloud is small) and keeps midpoints that are not yet within
    tol of the cloud, thinned to tol spacing.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    cloud = np.asarray(seeds, dtype=float)
    while True:
        m = len(cloud)
        if m < 2:
            return cloud
        if m <= 400:
            i, j = np.triu_indices(m, 1)
        else:
            tree = cloud_tree(space, cloud)
            _, nb = tree.query(poincare_coords(space, cloud), k=min(9, m))
            far = rng.integers(0, m, size=(m, 4))
            partners = np.concatenate([nb[:, 1:], far], axis=1)
            i = np.repeat(np.arange(m), partners.shape[1])
            j = partners.ravel()
        mids = exp_map(space, cloud[i], 0.5 * log_map(space, cloud[i], cloud[j]))
        far_enough = nearest_in_cloud(space, cloud, mids)[0] > tol
        fresh = _thin(space, mids[far_enough], tol)
        if len(fresh) == 0:
            return cloud
        cloud = np.concatenate([cloud, fresh])
        if len(cloud) > max_points:
            raise ResourceLimitError(f"midpoint closure exceeded {max_points} points", achieved_tol=None)


def poincare_coords(space: ModelSpace, pts) -> np.ndarray:
    """Coordinates in the unit Poincare ball (conformal, so k-d tree neighbourhoods stay round)."""
    x = np.asarray(pts, dtype=float)
    k = space.k
    return k * x[..., 1:] / (1.0 + k * x[..., :1])


def cloud_tree(space: ModelSpace, cloud) -> cKDTree:
    return cKDTree(poincare_coords(space, cloud))


def poincare_reach(space: ModelSpace, pts, d):
    """Ball-coordinate gap exceeding |u(x) - u(y)| whenever x is in pts and d(x, y) <= d.

    The conformal factor (1 + cosh(k r))/k is smallest where r is, and a
    geodesic of length d from x never gets closer to the origin than r_x - d.
    Vectorised over pts and d.
    """
    k = space.k
    x0 = np.asarray(pts, dtype=float)[..., 0]
    d = np.asarray(d, dtype=float)
    r = np.arccosh(np.maximum(k * x0, 1.0)) / k
    out = k * d / (1.0 + np.cosh(k * np.maximum(r - d, 0.0))) * (1 + 1e-9) + 1e-15
    return float(out) if out.ndim == 0 else out


def _thin(space: ModelSpace, pts, tol):
    if len(pts) == 0:
        return pts
    keep = []
    tree = cloud_tree(space, pts)
    u = poincare_coords(space, pts)
    reach = poincare_reach(space, pts, tol)
    taken = np.zeros(len(pts), dtype=bool)
    for idx in range(len(pts)):
        if taken[idx]:
            continue
        keep.append(idx)
        near = np.asarray(tree.query_ball_point(u[idx], r=reach[idx]), dtype=int)
        if len(near):
            close = near[distance(space, pts[near], pts[idx]) <= tol]
            taken[close] = True
    return pts[keep]


def geodesic_hull(space: ModelSpace, seeds, tol=1e-3, spacing=None, rng=None) -> SetRep:
    """Approximate geodesic convex hull of a finite seed set.

    Full-dimensional seed sets give an exact polytope whose support cloud is
    a tol-spaced fill (closed under midpoints up to tol since the polytope is
    convex).  Degenerate seed sets fall back to explicit midpoint closure.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    if len(seeds) == 0:
        raise ValueError("geodesic_hull needs at least one seed")
    if tol <= 0:
        raise ValueError("tol must be positive")
    spacing = spacing or tol
    try:
        poly = Polytope(space, seeds) if len(seeds) > space.dim else None
    except QhullError:
        poly = None
    if poly is None:
        cloud = midpoint_closure(space, seeds, tol, rng=rng)
        center = lorentz_centroid(space, cloud)
        radius = float(np.max(distance(space, cloud, center))) + 2 * tol
        tree = cloud_tree(space, cloud)

        def dist(p):
            return np.maximum(cloud_distance(space, cloud, p, tree) - 2 * tol, 0.0)

        def contains(p):
            return cloud_distance(space, cloud, p, tree) <= 2 * tol

        return SetRep(space, "hull_cloud", cloud, center, radius, contains, dist,
                      {"tol": tol, "exact": False, "seeds": len(seeds)})
    center = lorentz_centroid(space, poly.vertices)
    radius = float(np.max(distance(space, poly.vertices, center)))
    interior = fill_region(space, poly.contains, center, radius, spacing, rng)
    support = np.concatenate([poly.vertices, interior])
    return SetRep(space, "hull_cloud", support, center, radius, poly.contains, poly.distance,
                  {"tol": tol, "exact": True, "polytope": poly, "seeds": len(seeds),
                   "vertices": len(poly.vertices)})


def hull_of_set(space: ModelSpace, base: SetRep, tol=1e-3, spacing=None, rng=None) -> SetRep:
    """Geodesic hull of a region, as the hull of its support united with the region.

    The polytope spanned by the support can miss thin slivers of a curved
    boundary between support points; adding the region back keeps
    base a subset of the hull exactly.  The support is base's support plus
    polytope fill points outside base.
    """
    poly_set = geodesic_hull(space, base.support, tol=tol, spacing=spacing, rng=rng)

    def contains(p):
        return poly_set.contains(p) | base.contains(p)

    def dist(p):
        return np.minimum(poly_set.distance(p), base.distance(p))

    extra = poly_set.support[~base.contains(poly_set.support)]
    support = np.concatenate([base.support, extra])
    center = poly_set.center
    radius = max(poly_set.radius, float(distance(space, center, base.center)) + base.radius)
    meta = {**poly_set.meta, "contains_base": True}
    return SetRep(space, "hull_cloud", support, center, radius, contains, dist, meta)


def set_diameter(s: SetRep) -> float:
    """Diameter of the support cloud (via hull vertices when available)."""
    pts = s.meta["polytope"].vertices if "polytope" in s.meta else s.support
    if len(pts) > 4000:
        pts = pts[np.unique(np.linspace(0, len(pts) - 1, 4000).astype(int))]
    best = 0.0
    for lo in range(0, len(pts), 512):
        best = max(best, float(np.max(distance(s.space, pts[lo:lo + 512, None, :], pts[None]))))
    return best


# ---------------------------------------------------------------------------
# scenario construction and probes


def make_lambda_convex_suite(space: ModelSpace, m_rho: int, lam: float, common_point, spread: float,
                             rng: np.random.Generator, spacing=None) -> list:
    """m_rho geodesic balls sharing common_point.

    Balls in curvature -k^2 have normal curvature k coth(k r) > k, so they
    are lambda-convex for every lambda <= k.
    """
    if lam > space.k:
        raise UnsupportedConfiguration(f"lambda={lam} exceeds curvature scale k={space.k}")
    if m_rho < 1:
        raise ValueError("need at least one generator set")
    if spread < 0.5:
        raise ValueError("spread must be >= 0.5")
    common_point = np.asarray(common_point, dtype=float)
    radii = rng.uniform(0.5, spread, size=m_rho)
    dirs = random_unit_tangent(space, common_point, rng, m_rho)
    offsets = rng.uniform(0.0, 0.8, size=m_rho) * radii
    centers = exp_map(space, common_point, offsets[:, None] * dirs)
    return [geodesic_ball(space, c, r, spacing=spacing, rng=rng) for c, r in zip(centers, radii)]


def hull_gap(space: ModelSpace, t_set: SetRep, hull: SetRep, probes: int, rng) -> float:
    """Largest distance from a hull support point back to t_set (the measured C)."""
    pts = hull.support
    if probes < len(pts):
        pts = pts[rng.choice(len(pts), size=probes, replace=False)]
    return float(np.max(t_set.distance(pts)))


def sample_members(s: SetRep, count: int, rng, max_rounds=50):
    """Uniform members of s by rejection from its bounding ball."""
    if not math.isfinite(s.radius):
        raise ValueError("set is unbounded")
    got = []
    have = 0
    for _ in range(max_rounds):
        pts = sample_ball_uniform(s.space, s.center, s.radius, rng, max(4 * count, 1024))
        pts = pts[s.contains(pts)]
        got.append(pts)
        have += len(pts)
        if have >= count:
            break
    pts = np.concatenate(got)
    if len(pts) < count:
        raise RuntimeError(f"rejection sampling found only {len(pts)} of {count} members")
    return pts[:count]


def convexity_probe(space: ModelSpace, s: SetRep, trials: int, rng, tol=1e-4) -> dict:
    """Test 9 interior points on geodesics between member pairs.

    Pairs mix support points (which include boundary points) with uniform
    members.  A violation is an interior point outside s by more than tol.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    n_sup = trials // 2
    sup = s.support[rng.integers(0, len(s.support), size=(n_sup, 2))]
    if math.isfinite(s.radius):
        uni = sample_members(s, 2 * (trials - n_sup), rng).reshape(trials - n_sup, 2, -1)
    else:
        uni = s.support[rng.integers(0, len(s.support), size=(trials - n_sup, 2))]
    pairs = np.concatenate([sup, uni])
    p, q = pairs[:, 0], pairs[:, 1]
    v = log_map(space, p, q)
    ts = np.arange(1, 10) / 10.0
    interior = exp_map(space, p[None], ts[:, None, None] * v[None]).reshape(-1, space.dim + 1)
    inside = s.contains(interior)
    worst = 0.0
    violations = 0
    if not np.all(inside):
        depth = s.distance(interior[~inside])
        violations = int(np.count_nonzero(depth > tol))
        worst = float(np.max(depth))
    return {"violations": violations, "worst_depth": worst, "pairs": int(trials), "points": int(len(interior))}


def write_support_csv(path, s: SetRep):
    """One point per row, n+1 Minkowski coordinates; a comment header carries kind/k/n."""
    with open(path, "w", newline="") as fh:
        fh.write(f"# kind={s.kind},k={s.space.k!r},n={s.space.dim}\n")
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(s.space.dim + 1)])
        w.writerows(s.support.tolist())


def read_support_csv(path):
    with open(path, newline="") as fh:
        header = fh.readline().lstrip("#").strip()
        meta = dict(item.split("=", 1) for item in header.split(","))
        rows = list(csv.reader(fh))
    meta = {"kind": meta["kind"], "k": float(meta["k"]), "n": int(meta["n"])}
    return meta, np.array(rows[1:], dtype=float)
