"""Choice of the second measurement strength p_u.

Strategies: ``matched`` (exact no-jump restoration), ``equal`` (p_u = p,
standard uncollapsing), ``fixed:V``, ``optimal`` (maximize the scaled
average fidelity) and ``optimal-pf:V`` (hit a target average selection
probability).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import bisect

from .analysis import bloch_avg_fidelity, scaled_fidelity
from .core import check_unit_interval
from .errors import ImpossibleSelectionError, InfeasibleTargetError
from .protocol import ProtocolParams, matched_pu

GRID_POINTS = 100
PU_TOL = 1e-9
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Strategy:
    name: str
    value: float | None = None

    def __str__(self):
        return self.name if self.value is None else f"{self.name}:{self.value:g}"


def parse_strategy(text: str) -> Strategy:
    """Parse ``matched``, ``equal``, ``optimal``, ``fixed:V`` or ``optimal-pf:V``."""
    name, _, value = text.strip().partition(":")
    if name in ("matched", "equal", "optimal") and not value:
        return Strategy(name)
    if name in ("fixed", "optimal-pf") and value:
        try:
            return Strategy(name, check_unit_interval(name, float(value)))
        except ValueError as exc:
            raise ValueError(f"bad value in p_u strategy {text!r}: {exc}") from None
    raise ValueError(f"unknown p_u strategy {text!r}")


@dataclass(frozen=True)
class PuChoice:
    p_u: float
    F_av_s: float
    P_f_avg: float


def evaluate(params: ProtocolParams) -> PuChoice:
    F_av, P_f_avg = bloch_avg_fidelity(params)
    return PuChoice(params.p_u, scaled_fidelity(F_av), P_f_avg)


def _objective(params: ProtocolParams, p_u: float) -> float:
    try:
        return evaluate(params.with_pu(p_u)).F_av_s
    except ImpossibleSelectionError:
        return -math.inf


def golden_section_max(f, lo: float, hi: float, tol: float = PU_TOL) -> float:
    """Maximizer of a unimodal ``f`` on ``[lo, hi]`` to within ``tol``."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    # the endpoints themselves are candidates when the optimum sits on the boundary
    best = max((lo, hi, 0.5 * (a + b)), key=f)
    return best


def optimize_pu(params: ProtocolParams, mode: str = "max-F", target: float | None = None) -> PuChoice:
    """Optimize p_u at fixed ``params.p``.

    ``max-F`` scans a grid of p_u and refines the best cell by golden-section
    search. ``max-F-at-fixed-Pf`` solves ``P_f_avg(p_u) = target`` by
    bisection (``P_f_avg`` is non-increasing in p_u) and reports the
    fidelity there.
    """
    if mode == "max-F":
        grid = np.linspace(0.0, 1.0, GRID_POINTS + 1)
        values = [_objective(params, float(x)) for x in grid]
        i = int(np.argmax(values))
        if not math.isfinite(values[i]):
            raise ImpossibleSelectionError("no p_u gives a non-zero selection probability")
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, GRID_POINTS)]
        p_u = golden_section_max(lambda x: _objective(params, x), float(lo), float(hi))
        return evaluate(params.with_pu(p_u))

    if mode == "max-F-at-fixed-Pf":
        if target is None:
            raise ValueError("fixed-Pf mode needs a target selection probability")

        def excess(x):
            return bloch_avg_fidelity(params.with_pu(x))[1] - target

        hi_pf, lo_pf = excess(0.0) + target, excess(1.0) + target
        if not (lo_pf - 1e-15 <= target <= hi_pf + 1e-15):
            raise InfeasibleTargetError(
                f"target P_f_avg = {target:.6g} outside reachable range "
                f"[{lo_pf:.6g}, {hi_pf:.6g}] at p = {params.p:.6g}")
        if abs(excess(0.0)) <= 1e-15:
            p_u = 0.0
        elif abs(excess(1.0)) <= 1e-15:
            p_u = 1.0
        else:
            p_u = bisect(excess, 0.0, 1.0, xtol=PU_TOL * 1e-3, rtol=4 * np.finfo(float).eps)
        return evaluate(params.with_pu(p_u))

    raise ValueError(f"unknown optimization mode {mode!r}")


def choose_pu(strategy: Strategy, params: ProtocolParams) -> float:
    """p_u for the given strategy at ``params.p``.

    Raises:
        InfeasibleMatchingError, InfeasibleTargetError: when the strategy has no solution.
    """
    if strategy.name == "matched":
        return matched_pu(params)
    if strategy.name == "equal":
        return params.p
    if strategy.name == "fixed":
        return strategy.value
    if strategy.name == "optimal":
        return optimize_pu(params, "max-F").p_u
    if strategy.name == "optimal-pf":
        return optimize_pu(params, "max-F-at-fixed-Pf", strategy.value).p_u
    raise ValueError(f"unknown p_u strategy {strategy}")


def matched_at_selection(target: float, params: ProtocolParams) -> PuChoice:
    """Matched-strategy operating point whose average selection probability equals ``target``.

    Searches over the first strength p, which is how the matched curve
    trades fidelity for selection probability.
    """
    def matched(p):
        q = params.with_p(p)
        return evaluate(q.with_pu(matched_pu(q)))

    # matching needs k1 k2 (1 - p) <= k3 k4
    ratio = params.kappa3 * params.kappa4 / (params.kappa1 * params.kappa2)
    p_lo = 0.0 if ratio >= 1.0 else 1.0 - ratio + 1e-12
    p_hi = 1.0 - 1e-12
    f_lo, f_hi = matched(p_lo).P_f_avg, matched(p_hi).P_f_avg
    if not (f_hi <= target <= f_lo):
        raise InfeasibleTargetError(f"matched curve does not reach P_f_avg = {target:.6g}")
    p = bisect(lambda x: matched(x).P_f_avg - target, p_lo, p_hi, xtol=1e-14)
    return matched(p)
