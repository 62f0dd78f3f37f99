"""Command-line entry point: hadachain <subcommand> [options]."""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import pipeline as pl
from .bounds import check_a, eta_star, factor_L, find_a, varpi
from .chaining import (
    FiniteMetricSpace,
    GaussianIndexSet,
    dudley_integral,
    exact_gamma_small,
    fernique_band,
    greedy_gamma,
)
from .covering import covering_profile, covering_ratio_check, eps_grid, hyperbolic_metric
from .hyperbolic import ModelSpace, distance, exp_map, log_map, sample_ball_uniform
from .volume import ball_volume, ball_volume_closed_form, mc_volume

SUBCOMMANDS = ("selftest", "volume", "covering", "gamma", "gaussian", "verify", "pipeline")


def _flag(ok: bool) -> str:
    return pl.PASS if ok else pl.FAIL


def selftest(config: pl.ExperimentConfig, samples=None) -> dict:
    """Fast oracle checks on geometry, volumes, constants and chaining."""
    rng = np.random.default_rng(config.seed)
    out = {}
    space = ModelSpace(2, 1.0)
    p = sample_ball_uniform(space, space.origin, 3.0, rng, 2000)
    q = sample_ball_uniform(space, space.origin, 3.0, rng, 2000)
    back = exp_map(space, p, log_map(space, p, q))
    out["exp_log"] = _flag(float(np.max(distance(space, back, q))) <= 1e-8)
    a, b, c = (sample_ball_uniform(space, space.origin, 3.0, rng, 5000) for _ in range(3))
    slack = distance(space, a, c) - distance(space, a, b) - distance(space, b, c)
    out["triangle"] = _flag(float(np.max(slack)) <= 1e-9)
    ok = all(abs(ball_volume(ModelSpace(n, 1.0), r) - ball_volume_closed_form(ModelSpace(n, 1.0), r)) <= 1e-10
             * max(1.0, ball_volume_closed_form(ModelSpace(n, 1.0), r)) for n in (2, 3) for r in (0.5, 1.0, 2.0))
    out["ball_quadrature"] = _flag(ok)
    est = mc_volume(space, _unit_ball(space), samples or 100_000, rng, bounding=(space.origin, 1.5))
    out["ball_mc"] = _flag(abs(est.value - 2 * math.pi * (math.cosh(1) - 1)) <= 3 * est.stderr)
    out["find_a"] = _flag(find_a(1.0) >= 0.25 and all(check_a(0.25, 1.0)))
    out["varpi"] = _flag(abs(varpi(1, 1, 2, 2) - 1 / 9) <= 1e-12)
    out["eta_star"] = _flag(abs(eta_star(16, 1, 2, 2, 0.25) - math.log(16) / 2.25) <= 1e-12)
    out["factor_L"] = _flag(abs(factor_L(1, 2, 2) - math.sqrt(math.log2(9) + 1)) <= 1e-12)
    two = FiniteMetricSpace([[0, 1.5], [1.5, 0]])
    tri = FiniteMetricSpace([[0, 1, 1], [1, 0, 1], [1, 1, 0]])
    out["gamma_exact"] = _flag(abs(exact_gamma_small(two) - 1.5) < 1e-12 and abs(exact_gamma_small(tri) - 1) < 1e-12)
    out["gamma_greedy"] = _flag(abs(greedy_gamma(two).value - 1.5) < 1e-12)
    out["dudley_two_point"] = _flag(abs(dudley_integral(FiniteMetricSpace([[0, 1], [1, 0]])) - math.sqrt(math.log(2)))
                                    < 1e-12)
    return {"check": "selftest", "results": out, "flag": pl.combine_flags(out.values())}


def _unit_ball(space):
    from .sets import geodesic_ball

    return geodesic_ball(space, space.origin, 1.0, spacing=0.25)


def cmd_volume(config, args) -> dict:
    rng = np.random.default_rng(config.seed)
    samples = args.samples or config.samples_volume
    scn = pl.build_scenario(config, config.k1, rng, hull_samples=False)
    vT, vTh = pl.scenario_volumes(scn, samples, rng)
    ball = mc_volume(scn.space, _unit_ball(scn.space), samples, rng, bounding=(scn.space.origin, 1.5))
    exact = ball_volume(scn.space, 1.0)
    return {
        "check": "volume",
        "k": config.k1,
        "T": vT.record("union", scn.space),
        "Th": vTh.record("hull_cloud", scn.space),
        "unit_ball": {**ball.record("geodesic_ball", scn.space), "exact": exact},
        "ratio": vTh.value / vT.value,
        "flag": _flag(abs(ball.value - exact) <= 3 * ball.stderr),
    }


def cmd_covering(config, args, side_dir: Path) -> dict:
    rng = np.random.default_rng(config.seed)
    scn = pl.build_scenario(config, config.k1, rng, hull_samples=False)
    vT, vTh = (v.value for v in pl.scenario_volumes(scn, args.samples or config.samples_volume, rng))
    from .sets import set_diameter

    grid = eps_grid(set_diameter(scn.T), args.eps_grid or config.eps_grid_size)
    spacing = pl.cover_spacing(config, grid)
    metric = hyperbolic_metric(scn.space)
    cT, cTh = pl.covering_clouds(scn, spacing, rng)
    pT = covering_profile(cT, metric, grid)
    pTh = covering_profile(cTh, metric, grid)
    side_dir.mkdir(parents=True, exist_ok=True)
    pT.to_csv(side_dir / "covering_T.csv")
    pTh.to_csv(side_dir / "covering_Th.csv")
    ratio = covering_ratio_check(pT, pTh, vTh / vT, config.n)
    flags = [pl.PASS if ok else pl.FAIL if a else pl.not_assertable("N_T < 2")
             for ok, a in zip(ratio["ok"], ratio["assertable"])]
    return {"check": "covering", "T": pT.to_dict(), "Th": pTh.to_dict(), **ratio, "flags": flags,
            "flag": pl.combine_flags(flags)}


def cmd_gamma(config, args) -> dict:
    if args.matrix:
        fms = FiniteMetricSpace.from_csv(args.matrix)
    else:
        rng = np.random.default_rng(config.seed)
        scn = pl.build_scenario(config, config.k1, rng)
        fms = FiniteMetricSpace.from_points(scn.space, scn.samples)
    seq = greedy_gamma(fms, config.alpha)
    seq.check(fms)
    out = {"check": "gamma", "points": len(fms), "alpha": config.alpha, "greedy": seq.value,
           "levels": len(seq.partitions), "dudley": dudley_integral(fms, config.alpha),
           "exact": exact_gamma_small(fms, config.alpha) if len(fms) <= 6 else None}
    ok = out["exact"] is None or out["greedy"] >= out["exact"] - 1e-12
    out["flag"] = _flag(ok)
    return out


def cmd_gaussian(config, args) -> dict:
    rng = np.random.default_rng(config.seed)
    if args.vectors:
        gset = GaussianIndexSet.from_csv(args.vectors)
    else:
        v = rng.standard_normal((32, 8))
        gset = GaussianIndexSet(v / np.linalg.norm(v, axis=1)[:, None])
    trials = args.samples or config.trials_gaussian or 10_000
    band = fernique_band(gset, 2.0, trials, rng)
    return {"check": "gaussian", "vectors": len(gset.vectors), "trials": trials, **band}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hadachain", description="Volume-ratio chaining experiments on hyperbolic space")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="default", help="JSON config file, or 'default'")
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None, help="JSON report path (overrides output_path)")
    common.add_argument("--samples", type=int, default=None, help="Monte Carlo samples or Gaussian trials")
    common.add_argument("--eps-grid", type=int, default=None, help="Size of the covering eps grid")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("selftest", parents=[common], help="run the oracle checks")
    sub.add_parser("volume", parents=[common], help="Monte Carlo volumes of T, T_h and the unit ball")
    sub.add_parser("covering", parents=[common], help="covering profiles of T and T_h")
    g = sub.add_parser("gamma", parents=[common], help="chaining functional estimators")
    g.add_argument("--matrix", default=None, help="CSV distance matrix")
    ga = sub.add_parser("gaussian", parents=[common], help="Gaussian supremum band")
    ga.add_argument("--vectors", default=None, help="CSV of index vectors, one per row")
    v = sub.add_parser("verify", parents=[common], help="run one named check")
    v.add_argument("name", choices=sorted(pl.CHECKS))
    sub.add_parser("pipeline", parents=[common], help="run the full pipeline")
    return parser


def _load_config(args) -> pl.ExperimentConfig:
    config = pl.ExperimentConfig.load(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output_path"] = args.out
    if args.samples is not None and args.command in ("pipeline", "verify"):
        overrides["samples_volume"] = args.samples
    if args.eps_grid is not None:
        overrides["eps_grid_size"] = args.eps_grid
    if overrides:
        d = config.to_dict()
        d.update(overrides)
        config = pl.ExperimentConfig.from_dict(d)
    return config


def _summary(result: dict) -> str:
    lines = [f"{result.get('check', 'report')}: {result.get('flag', result.get('overall'))}"]
    for key in ("results", "flags"):
        if isinstance(result.get(key), dict):
            for name, val in result[key].items():
                flag = val.get("flag") if isinstance(val, dict) else val
                lines.append(f"  {name}: {flag}")
    return "\n".join(lines)


def _write(path, payload):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, default=pl._json_default)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        config = _load_config(args)
    except pl.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    out_path = Path(config.output_path)
    try:
        if args.command == "pipeline":
            report = pl.run_pipeline(config, side_dir=out_path.parent / (out_path.stem + "_csv"))
            report.write(out_path)
            result = {"check": "pipeline", **report.data}
        elif args.command == "selftest":
            result = selftest(config, args.samples)
        elif args.command == "volume":
            result = cmd_volume(config, args)
        elif args.command == "covering":
            result = cmd_covering(config, args, out_path.parent / (out_path.stem + "_csv"))
        elif args.command == "gamma":
            result = cmd_gamma(config, args)
        elif args.command == "gaussian":
            result = cmd_gaussian(config, args)
        else:
            result = pl.CHECKS[args.name](config)
    except pl.StageError as exc:
        _write(out_path, {"error": str(exc), "stage": exc.stage, "partial": _strip(exc.partial)})
        print(str(exc), file=sys.stderr)
        return 1
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.command != "pipeline":
        result["config"] = config.to_dict()
        _write(out_path, result)
    print(_summary(result))
    flags = _collect_flags(result)
    return 1 if any(f == pl.FAIL for f in flags) else 0


def _strip(partial):
    return {k: {kk: vv for kk, vv in v.items() if not kk.startswith("_")} for k, v in partial.items()}


def _collect_flags(result) -> list:
    flags = []
    if isinstance(result.get("flag"), str):
        flags.append(result["flag"])
    if isinstance(result.get("flags"), dict):
        flags.extend(result["flags"].values())
    elif isinstance(result.get("flags"), list):
        flags.extend(result["flags"])
    return flags


if __name__ == "__main__":
    sys.exit(main())
