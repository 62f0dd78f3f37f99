"""Explicit constants of the volume-ratio argument.

Decay constant ``a`` of the envelope functions, the balancing radius eta*,
the volume exponent deficit varpi, the hull volume and surface-area volume
bound shapes, the volume ratio R and the chaining multiplier L.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

GRID_POINTS = 10_000
GRID_UPPER = 20.0
A_STEP = 1e-3


class InfeasibleError(ValueError):
    pass


def _tau_split() -> float:
    # positive root of tanh(t) = t/2
    t = 2.0
    for _ in range(100):
        t -= (math.tanh(t) - t / 2) / (1 / math.cosh(t) ** 2 - 0.5)
    return t


TAU_SPLIT = _tau_split()


@dataclass(frozen=True)
class ScenarioParams:
    n: int
    k1: float
    k2: float
    m: int
    rho: float
    lam: float
    beta: float
    alpha: float = 2.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError("n must be an integer >= 2")
        if not (self.k1 >= 1 and self.k2 > self.k1):
            raise ValueError("need k2 > k1 >= 1")
        if int(self.m) != self.m or self.m < 1:
            raise ValueError("m must be a positive integer")
        if not 0 <= self.rho <= 1:
            raise ValueError("rho must lie in [0, 1]")
        if not 0 < self.lam <= self.k2:
            raise ValueError("lambda must lie in (0, k2]")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")


def _grid():
    return np.linspace(GRID_UPPER / GRID_POINTS, GRID_UPPER, GRID_POINTS)


def check_a(a: float, k1: float) -> tuple[bool, bool]:
    """Grid check of the two sufficient conditions for convexity of the envelope.

    Case (I), tanh(t) >= t/2: 2 a^2 t < (k1^2 - 1/2) tanh(t).
    Case (II), with the small-exponential side e^{-a r} <= 1/2:
    2 a e^{-a r} / (k1^2 - 1/2) < 1/2.
    """
    c = k1**2 - 0.5
    t = _grid()
    t1 = t[t <= TAU_SPLIT]
    case1 = bool(np.all(2 * a * a * t1 < c * np.tanh(t1)))
    r = t[np.exp(-a * t) <= 0.5]
    case2 = bool(len(r) > 0 and np.all(2 * a * np.exp(-a * r) / c < 0.5))
    return case1, case2


def find_a(k1: float) -> float:
    """Largest a in (0, 1] on a 1e-3 grid satisfying both grid checks."""
    if k1 < 1:
        raise ValueError("k1 must be >= 1")
    steps = int(round(1 / A_STEP))
    for i in range(steps, 0, -1):
        a = i / steps
        if all(check_a(a, k1)):
            return a
    raise InfeasibleError(f"no feasible decay constant for k1={k1}")


def eta_star(m: int, rho: float, n: int, k2: float, a: float) -> float:
    """Ball radius ln(m^rho) / ((n-1)(k2 + a)) splitting the envelope volume."""
    if m < 2:
        return 0.0
    return rho * math.log(m) / ((n - 1) * (k2 + a))


def varpi(rho: float, k1: float, k2: float, n: int) -> float:
    """Exponent deficit rho a / ((n-1)(k2 + a)) with a = find_a(k1)."""
    a = find_a(k1)
    return rho * a / ((n - 1) * (k2 + a))


def envelope_volume_shape(eta, m, rho, n, k2, a, c2=1.0, c3=1.0, c4=1.0):
    """Tube + ball + collar terms of the envelope volume bound, as a function of eta."""
    return (c2 * math.exp(-a * (n - 1) * eta) + c3 * math.exp(k2 * (n - 1) * eta)
            + c4 * m**rho * math.exp(-a * eta))


def vol_bounds(params: ScenarioParams, C_ub: float, C_lb: float) -> dict:
    if not (C_ub > 0 and C_lb > 0):
        raise ValueError("C_ub and C_lb must be positive")
    w = varpi(params.rho, params.k1, params.k2, params.n)
    return {
        "upper": C_ub * params.m ** (1 + params.rho - w),
        "lower": C_lb * params.lam * params.beta / params.k2,
        "exponent": 1 + params.rho - w,
    }


def ratio_R(params: ScenarioParams, C_ub: float, C_lb: float) -> float:
    b = vol_bounds(params, C_ub, C_lb)
    if b["lower"] == 0:
        raise ValueError("volume lower bound is zero")
    return b["upper"] / b["lower"]


def factor_L(R: float, n: int, alpha: float) -> float:
    """(log(R 3^n)/log 2 + 1)^(1/alpha), with R clamped up to 1."""
    R = max(R, 1.0)
    return (math.log(R * 3**n) / math.log(2) + 1) ** (1 / alpha)


def fit_constants(params: ScenarioParams, vol_Th: float, vol_T: float) -> dict:
    """Smallest C_ub, C_lb making both volume bounds hold for the measured volumes."""
    shape = vol_bounds(params, 1.0, 1.0)
    return {"C_ub": vol_Th / shape["upper"], "C_lb": vol_T / shape["lower"]}


@dataclass
class BoundReport:
    params: dict
    a: float
    eta_star: float
    varpi: float
    vol_Th_upper_shape: float
    vol_T_lower_shape: float
    R_hada: Optional[float]
    L_hada: Optional[float]
    C_ub: Optional[float] = None
    C_lb: Optional[float] = None
    measured: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


def bound_report(params: ScenarioParams, vol_Th: Optional[float] = None, vol_T: Optional[float] = None) -> BoundReport:
    """Evaluate every constant; with measured volumes, fit C_ub/C_lb and derive R, L."""
    a = find_a(params.k1)
    shape = vol_bounds(params, 1.0, 1.0)
    report = BoundReport(
        params=asdict(params),
        a=a,
        eta_star=eta_star(params.m, params.rho, params.n, params.k2, a),
        varpi=varpi(params.rho, params.k1, params.k2, params.n),
        vol_Th_upper_shape=shape["upper"],
        vol_T_lower_shape=shape["lower"],
        R_hada=None,
        L_hada=None,
    )
    if vol_Th is None or vol_T is None or vol_T <= 0:
        report.flags["R_hada"] = "not-assertable: volumes not measured"
        return report
    fit = fit_constants(params, vol_Th, vol_T)
    report.C_ub, report.C_lb = fit["C_ub"], fit["C_lb"]
    report.R_hada = ratio_R(params, fit["C_ub"], fit["C_lb"])
    report.L_hada = factor_L(report.R_hada, params.n, params.alpha)
    report.measured = {"vol_Th": vol_Th, "vol_T": vol_T}
    report.flags["R_hada"] = "pass" if report.R_hada >= 1 else "not-assertable: R < 1 clamped to 1 in L"
    report.flags["theorem1"] = "not-assertable: C_ub is fitted, not given"
    return report
