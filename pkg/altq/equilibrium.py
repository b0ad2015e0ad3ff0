from __future__ import annotations

import logging
from typing import Callable

from .errors import GenfuncUnavailable, NoSignChange
from .model import strategy_for
from .payoff import unconditional_benefit
from .schemas import EquilibriumCase, EquilibriumResult, SolveMethod, ValidatedParams

logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-9
Q_WIDTH = 1e-12
MAX_BISECTIONS = 200


def benefit_curve(
    params: ValidatedParams,
    method: SolveMethod | str = SolveMethod.QBD,
    cap: int | None = None,
) -> Callable[[float], float]:
    """q -> U(n_e, n_s, q); genfunc evaluations fall back to qbd when unavailable."""
    method = SolveMethod(method)

    def benefit(q: float) -> float:
        strategy = strategy_for(params, q, cap)
        if method is SolveMethod.GENFUNC:
            try:
                return unconditional_benefit(strategy, params, SolveMethod.GENFUNC)
            except GenfuncUnavailable as exc:
                logger.warning("genfunc unavailable at q=%.6g (%s), using qbd", q, exc)
        return unconditional_benefit(strategy, params, SolveMethod.QBD)

    return benefit


def equilibrium_q(
    params: ValidatedParams,
    method: SolveMethod | str = SolveMethod.QBD,
    cap: int | None = None,
) -> EquilibriumResult:
    method = SolveMethod(method)
    if method is SolveMethod.BOTH:
        method = SolveMethod.QBD
    benefit = benefit_curve(params, method, cap)
    strategy = strategy_for(params, 0.0, cap)
    tol = RESIDUAL_TOLERANCE * params.money_scale

    def result(q: float, case: EquilibriumCase, residual: float, iterations: int) -> EquilibriumResult:
        logger.info("equilibrium %s q_e=%.12g after %d bisections", case.value, q, iterations)
        return EquilibriumResult(
            q_e=q,
            case=case,
            residual=residual,
            iterations=iterations,
            n_e=strategy.n_e,
            n_s=strategy.n_s,
            method=method,
        )

    u0, u1 = benefit(0.0), benefit(1.0)
    if u0 <= 0 and u1 >= 0 and u1 > u0:
        raise NoSignChange(f"benefit increases in q: U(0)={u0:.6g}, U(1)={u1:.6g}")
    if u0 <= 0:
        return result(0.0, EquilibriumCase.ALL_BALK, u0, 0)
    if u1 >= 0:
        return result(1.0, EquilibriumCase.ALL_JOIN, u1, 0)

    lo, hi = 0.0, 1.0
    q, u = 0.5, u0
    for iterations in range(1, MAX_BISECTIONS + 1):
        q = 0.5 * (lo + hi)
        u = benefit(q)
        logger.debug("bisection %d: q=%.15g U=%.6e", iterations, q, u)
        if abs(u) <= tol or hi - lo <= Q_WIDTH:
            break
        if u > 0:
            lo = q
        else:
            hi = q
    return result(q, EquilibriumCase.INTERIOR, u, iterations)


def unobservable_benchmark_q(params: ValidatedParams) -> float:
    """Joining probability that zeroes R - f_e - f_s - C/(mu - lambda q), clipped to [0, 1]."""
    net = params.R - params.f_e - params.f_s
    q = (params.mu - params.C / net) / params.lam
    return min(max(q, 0.0), 1.0)
