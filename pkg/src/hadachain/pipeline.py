"""Configuration-driven verification pipeline.

A run builds T (a union of round(m^rho) balls through a common point) at
each curvature endpoint, its exact hull T_h, and compares volumes, covering
profiles and the chaining functional of the two.
"""
from __future__ import annotations

import contextlib
import json
import math
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Optional

import numpy as np

from .bounds import ScenarioParams, bound_report, find_a
from .chaining import FiniteMetricSpace, dudley_integral, greedy_gamma
from .covering import (
    UNIT_BALL_NOTE,
    covering_profile,
    covering_ratio_check,
    eps_grid,
    farthest_point_order,
    hyperbolic_metric,
)
from .envelope import make_envelope
from .hyperbolic import ModelSpace, exp_map, sample_ball_uniform
from .sets import (
    fill_region,
    geodesic_hull,
    hull_gap,
    hull_of_set,
    make_lambda_convex_suite,
    sample_members,
    set_diameter,
    union,
)
from .volume import ball_surface, mc_volume, mc_volumes_common, shell_volume_ratio

PASS = "pass"
FAIL = "fail"
SHELL_DELTAS = (0.2, 0.1, 0.05)
SHELL_FACTOR = 1.5
SHELL_MIN_SAMPLES = 100_000


def not_assertable(reason: str) -> str:
    return f"not-assertable: {reason}"


def combine_flags(flags) -> str:
    flags = [f for f in flags if f is not None]
    if any(f == FAIL for f in flags):
        return FAIL
    if flags and all(f == PASS for f in flags):
        return PASS
    reasons = sorted({f for f in flags if f != PASS})
    return reasons[0] if len(reasons) == 1 else not_assertable("mixed: " + "; ".join(reasons))


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, cause, partial):
        super().__init__(f"stage {stage!r} failed: {cause}")
        self.stage = stage
        self.partial = partial


@dataclass
class ExperimentConfig:
    n: int = 2
    k1: float = 1.0
    k2: float = 2.0
    m: int = 16
    rho: float = 0.5
    lam: float = 1.0
    beta: Optional[float] = None
    alpha: float = 2.0
    seed: int = 42
    samples_volume: int = 200_000
    trials_gaussian: int = 0
    eps_grid_size: int = 16
    hull_tol: float = 0.05
    spread: float = 1.5
    endpoints: list = field(default_factory=lambda: ["k1", "k2"])
    output_path: str = "report.json"

    def __post_init__(self):
        if self.samples_volume < 1000:
            raise ConfigError("samples_volume must be >= 1000")
        if self.trials_gaussian and self.trials_gaussian < 1000:
            raise ConfigError("trials_gaussian must be 0 or >= 1000")
        if self.eps_grid_size < 2:
            raise ConfigError("eps_grid_size must be >= 2")
        if not self.hull_tol > 0:
            raise ConfigError("hull_tol must be positive")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if not self.endpoints or any(e not in ("k1", "k2") for e in self.endpoints):
            raise ConfigError("endpoints must be a nonempty subset of ['k1', 'k2']")
        try:
            self.params(beta=1.0 if self.beta is None else self.beta)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def params(self, beta=None) -> ScenarioParams:
        return ScenarioParams(self.n, self.k1, self.k2, self.m, self.rho, self.lam,
                              self.beta if beta is None else beta, self.alpha)

    @property
    def generators(self) -> int:
        return max(1, int(round(self.m ** self.rho)))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["lambda"] = d.pop("lam")
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        d = dict(d)
        if "lambda" in d:
            d["lam"] = d.pop("lambda")
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        if path in (None, "default"):
            return cls()
        try:
            with open(path) as fh:
                data = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a flat JSON object")
        return cls.from_dict(data)


def default_config(**overrides) -> ExperimentConfig:
    return ExperimentConfig(**overrides)


@dataclass
class PipelineReport:
    """Deterministic report body plus wall-clock timings kept alongside it."""

    data: dict
    timing: dict = field(default_factory=dict)

    @property
    def flags(self) -> dict:
        return self.data["flags"]

    def to_dict(self) -> dict:
        return {**self.data, "timing": self.timing}

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2, allow_nan=False, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj)}")


def _streams(seed: int, count: int):
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


# ---------------------------------------------------------------------------
# scenario


@dataclass
class Scenario:
    space: ModelSpace
    balls: list
    T: object
    Th: object
    samples: np.ndarray
    beta: float


def build_scenario(config: ExperimentConfig, k: float, rng, hull_samples=True) -> Scenario:
    space = ModelSpace(config.n, k)
    balls = make_lambda_convex_suite(space, config.generators, config.lam, space.origin, config.spread, rng,
                                     spacing=config.hull_tol)
    T = union(balls)
    Th = hull_of_set(space, T, tol=config.hull_tol, spacing=config.hull_tol, rng=rng)
    samples = sample_members(T, config.m, rng) if hull_samples else None
    beta = min(ball_surface(space, b.radius) for b in balls) if config.beta is None else config.beta
    return Scenario(space, balls, T, Th, samples, beta)


def hull_subsample(scn: Scenario, size: int) -> np.ndarray:
    """Farthest-point subsample of the hull cloud, starting at its first vertex."""
    order, _ = farthest_point_order(scn.Th.support, hyperbolic_metric(scn.space), max_centers=size)
    return scn.Th.support[order]


def cover_spacing(config: ExperimentConfig, grid) -> float:
    """Cloud spacing for covering counts: at most a quarter of the smallest eps."""
    return min(config.hull_tol, float(np.min(grid)) / 4)


def covering_cloud(s, spacing, rng) -> np.ndarray:
    """Dense fill of a region plus its own support, for covering counts."""
    fill = fill_region(s.space, s.contains, s.center, s.radius, spacing, rng)
    return np.concatenate([s.support, fill])


def covering_clouds(scn: Scenario, spacing, rng):
    """Clouds for T and T_h; the T_h cloud extends the T cloud by fill points of T_h outside T."""
    T, Th = scn.T, scn.Th
    cT = covering_cloud(T, spacing, rng)
    extra = fill_region(Th.space, lambda p: Th.contains(p) & ~T.contains(p), Th.center, Th.radius, spacing, rng)
    return cT, np.concatenate([cT, extra])


def scenario_volumes(scn: Scenario, samples: int, rng):
    """Vol(T) and Vol(T_h) from one shared sample of T_h's bounding ball."""
    return mc_volumes_common(scn.space, [scn.T, scn.Th], samples, rng, (scn.Th.center, scn.Th.radius))


def _gamma_block(space, pts, alpha):
    fms = FiniteMetricSpace.from_points(space, pts)
    return {"gamma": greedy_gamma(fms, alpha).value, "dudley": dudley_integral(fms, alpha), "points": len(pts)}


def _endpoint(config: ExperimentConfig, k: float, seed: int, timing: dict, partial: dict) -> dict:
    rngs = _streams(seed, 5)
    out = {"k": k}
    partial[str(k)] = out

    @contextlib.contextmanager
    def stage(name):
        t0 = time.perf_counter()
        try:
            yield
        except StageError:
            raise
        except Exception as exc:
            raise StageError(name, exc, partial) from exc
        finally:
            timing[f"{k}:{name}"] = time.perf_counter() - t0

    with stage("scenario"):
        scn = build_scenario(config, k, rngs[0])
        space = scn.space
    with stage("geometry"):
        gap = hull_gap(space, scn.T, scn.Th, 4000, rngs[1])
        out["geometry"] = {
            "generators": config.generators,
            "ball_radii": [b.radius for b in scn.balls],
            "diam_T": set_diameter(scn.T),
            "diam_Th": set_diameter(scn.Th),
            "hull_gap": gap,
            "hull_vertices": scn.Th.meta.get("vertices"),
            "beta": scn.beta,
        }
    with stage("volume"):
        vT, vTh = scenario_volumes(scn, config.samples_volume, rngs[2])
        out["volumes"] = {"T": vT.value, "T_stderr": vT.stderr, "Th": vTh.value, "Th_stderr": vTh.stderr,
                          "ratio": vTh.value / vT.value}
    with stage("bounds"):
        # the formulas depend on the pinching interval, not on the endpoint being sampled
        params = config.params(beta=scn.beta)
        rep = bound_report(params, vol_Th=vTh.value, vol_T=vT.value)
        out["bounds"] = rep.to_dict()
        out["volumes"]["C_ub"] = rep.C_ub
        out["volumes"]["C_lb"] = rep.C_lb
        R = rep.R_hada
        L = rep.L_hada
    with stage("covering"):
        grid = eps_grid(out["geometry"]["diam_T"], config.eps_grid_size)
        spacing = cover_spacing(config, grid)
        metric = hyperbolic_metric(space)
        cT, cTh = covering_clouds(scn, spacing, rngs[4])
        pT = covering_profile(cT, metric, grid)
        pTh = covering_profile(cTh, metric, grid)
        ratio = covering_ratio_check(pT, pTh, R, config.n)
        lemma4 = [PASS if ok else FAIL if a else not_assertable("N_T < 2")
                  for ok, a in zip(ratio["ok"], ratio["assertable"])]
        out["covering"] = {"T": pT.to_dict(), "Th": pTh.to_dict(), **ratio, "flags": lemma4,
                           "cloud_spacing": spacing, "cloud_points": {"T": len(cT), "Th": len(cTh)},
                           "unit_ball": UNIT_BALL_NOTE}
        out["_profiles"] = (pT, pTh)
    with stage("chaining"):
        gT = _gamma_block(space, scn.samples, config.alpha)
        sub = hull_subsample(scn, config.m)
        gTh = _gamma_block(space, sub, config.alpha)
        out["_clouds"] = {"T_sample": scn.samples, "Th_sample": sub}
        gratio = gTh["gamma"] / gT["gamma"] if gT["gamma"] > 0 else None
        if gT["gamma"] == 0 and gTh["gamma"] == 0:
            th2 = PASS
        else:
            th2 = PASS if gTh["gamma"] <= L * gT["gamma"] else FAIL
        out["chaining"] = {"T_sample": gT, "Th_sample": gTh, "gamma_ratio": gratio, "L_hada": L, "R_fitted": R}
    with stage("shell"):
        shells = shell_volume_ratio(space, scn.Th, SHELL_DELTAS, SHELL_MIN_SAMPLES, rngs[3])
        vals = [r for _, r, _ in shells]
        spread = max(vals) / min(vals) if min(vals) > 0 else math.inf
        out["shell"] = {"deltas": list(SHELL_DELTAS), "ratios": vals, "stderr": [e for _, _, e in shells],
                        "spread": spread}
    if config.trials_gaussian:
        with stage("gaussian"):
            from .chaining import GaussianIndexSet, fernique_band

            vecs = rngs[4].standard_normal((config.m, 8))
            out["gaussian"] = fernique_band(GaussianIndexSet(vecs), 2.0, config.trials_gaussian, rngs[4])
    else:
        out["gaussian"] = {"gamma_greedy": None, "mean_sup": None, "stderr": None, "L_lower": None,
                           "L_upper": None, "flag": not_assertable("not requested (trials_gaussian = 0)")}
    out["flags"] = {
        "lemma1": PASS if math.isfinite(gap) else FAIL,
        "lemma2": PASS if spread <= SHELL_FACTOR else FAIL,
        "lemma4": combine_flags(lemma4),
        "theorem1": rep.flags.get("theorem1"),
        "theorem2": th2,
        "R_hada": rep.flags.get("R_hada"),
    }
    return out


def run_pipeline(config: ExperimentConfig, side_dir=None) -> PipelineReport:
    """Run every stage at each requested curvature endpoint.

    The report body is a pure function of the config; timings are separate.
    """
    timing = {}
    partial = {}
    seeds = np.random.SeedSequence(config.seed).generate_state(len(config.endpoints), dtype=np.uint64)
    results = {}
    t0 = time.perf_counter()
    for name, s in zip(config.endpoints, seeds):
        k = config.k1 if name == "k1" else config.k2
        results[name] = _endpoint(config, k, int(s), timing, partial)
    timing["total"] = time.perf_counter() - t0
    profiles = {name: r.pop("_profiles") for name, r in results.items()}
    clouds = {name: r.pop("_clouds") for name, r in results.items()}
    flags = {key: combine_flags(r["flags"][key] for r in results.values())
             for key in next(iter(results.values()))["flags"]}
    data = {"config": config.to_dict(), "seed": config.seed, "endpoints": results, "flags": flags,
            "overall": overall(flags)}
    report = PipelineReport(data, timing)
    if side_dir is not None:
        from pathlib import Path

        side = Path(side_dir)
        side.mkdir(parents=True, exist_ok=True)
        for name, (pT, pTh) in profiles.items():
            pT.to_csv(side / f"covering_T_{name}.csv")
            pTh.to_csv(side / f"covering_Th_{name}.csv")
            for label, pts in clouds[name].items():
                np.savetxt(side / f"{label}_{name}.csv", pts, delimiter=",",
                           header=",".join(f"x{i}" for i in range(pts.shape[1])), comments="")
    return report


def overall(flags: dict) -> str:
    return FAIL if any(v == FAIL for v in flags.values()) else PASS


# ---------------------------------------------------------------------------
# named checks


def default_envelope(config: ExperimentConfig, rng, seeds=12, seed_radius=1.5, far=4.0):
    """Envelope G for a random hull in B(o, seed_radius) plus one point at distance far."""
    space = ModelSpace(config.n, config.k1)
    pts = sample_ball_uniform(space, space.origin, seed_radius, rng, seeds)
    hull = geodesic_hull(space, pts, tol=config.hull_tol, rng=rng)
    direction = np.zeros(config.n + 1)
    direction[1] = far
    return make_envelope(space, hull, exp_map(space, space.origin, direction), decay=find_a(config.k1), k1=config.k1)


def verify_lemma1(config: ExperimentConfig) -> dict:
    out = {}
    for name in config.endpoints:
        k = config.k1 if name == "k1" else config.k2
        rng = _streams(config.seed, 1)[0]
        scn = build_scenario(config, k, rng, hull_samples=False)
        gap = hull_gap(scn.space, scn.T, scn.Th, 4000, rng)
        out[name] = {"hull_gap": gap, "flag": PASS if math.isfinite(gap) else FAIL}
    return {"check": "lemma1", "results": out, "flag": combine_flags(r["flag"] for r in out.values())}


def verify_lemma2(config: ExperimentConfig, samples=None) -> dict:
    rngs = _streams(config.seed, 2)
    env = default_envelope(config, rngs[0])
    G = env.as_set(spacing=config.hull_tol, rng=rngs[0])
    samples = max(samples or config.samples_volume, SHELL_MIN_SAMPLES)
    shells = shell_volume_ratio(env.space, G, SHELL_DELTAS, samples, rngs[1])
    vals = [r for _, r, _ in shells]
    spread = max(vals) / min(vals)
    return {
        "check": "lemma2",
        "decay": env.decay,
        "deltas": list(SHELL_DELTAS),
        "shell_ratios": vals,
        "stderr": [e for _, _, e in shells],
        "samples": samples,
        "spread": spread,
        "stable": spread <= SHELL_FACTOR,
        "flag": PASS if spread <= SHELL_FACTOR else FAIL,
    }


def verify_theorem1(config: ExperimentConfig, family=(2, 4, 8, 16, 32)) -> dict:
    """Fit C_ub over a family of m and report how Vol(T_h) grows with m."""
    rows = []
    for m in family:
        cfg = ExperimentConfig(**{**asdict(config), "m": m})
        rng = _streams(config.seed, 1)[0]
        scn = build_scenario(cfg, config.k1, rng, hull_samples=False)
        vol = mc_volume(scn.space, scn.Th, config.samples_volume, rng).value
        rep = bound_report(cfg.params(beta=scn.beta))
        rows.append({"m": m, "generators": cfg.generators, "vol_Th": vol,
                     "shape": rep.vol_Th_upper_shape, "exponent": 1 + config.rho - rep.varpi})
    C_ub = max(r["vol_Th"] / r["shape"] for r in rows)
    logs = np.log([r["m"] for r in rows])
    slope = float(np.polyfit(logs, np.log([r["vol_Th"] for r in rows]), 1)[0]) if len(rows) > 1 else None
    return {"check": "theorem1", "rows": rows, "C_ub_fitted": C_ub, "loglog_slope": slope,
            "exponent": rows[0]["exponent"], "flag": not_assertable("C_ub is fitted, not given")}


def verify_lemma4(config: ExperimentConfig) -> dict:
    rep = run_pipeline(config)
    return {"check": "lemma4", "flag": rep.flags["lemma4"],
            "results": {name: {"max_ratio": r["covering"]["max_ratio"], "R_fitted": r["covering"]["R"],
                               "bound_factor": r["covering"]["bound_factor"], "flags": r["covering"]["flags"]}
                        for name, r in rep.data["endpoints"].items()}}


def verify_theorem2(config: ExperimentConfig) -> dict:
    rep = run_pipeline(config)
    return {"check": "theorem2", "flag": rep.flags["theorem2"],
            "results": {name: r["chaining"] for name, r in rep.data["endpoints"].items()}}


CHECKS = {
    "lemma1": verify_lemma1,
    "lemma2": verify_lemma2,
    "theorem1": verify_theorem1,
    "lemma4": verify_lemma4,
    "theorem2": verify_theorem2,
}
