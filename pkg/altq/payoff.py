from __future__ import annotations

import math

import numpy as np

from .genfunc import PgfValues, pgf_eval, solve_boundary
from .schemas import BenefitBreakdown, SolveMethod, Strategy, ValidatedParams
from .steady_state import SteadyState, solve_censored_qbd


def _service_odds(params: ValidatedParams) -> float:
    """Probability that one service completes before the hidden period ends."""
    return params.mu / (params.mu + params.theta)


def _late_constant(params: ValidatedParams, n_s: int) -> float:
    return params.R - params.r - params.f_s - params.C * n_s / params.mu + params.C / params.theta


def conditional_benefit(n: int, strategy: Strategy, params: ValidatedParams) -> BenefitBreakdown:
    """Expected net benefit of joining behind n customers during a hidden period."""
    if n < strategy.n_s:
        fees = params.f_e + params.f_s
        waiting = params.C * (n + 1) / params.mu
        return BenefitBreakdown(
            value=params.R - fees - waiting,
            reward=params.R,
            fees=fees,
            waiting_cost=waiting,
            refund=0.0,
        )

    # beyond n_s the customer stays only if the queue drains to n_s before the switch
    stay = _service_odds(params) ** (n + 1 - strategy.n_s)
    value = params.r - params.f_e - params.C / params.theta + _late_constant(params, strategy.n_s) * stay
    return BenefitBreakdown(
        value=value,
        reward=params.R * stay,
        fees=params.f_e + params.f_s * stay,
        waiting_cost=params.C * ((1.0 - stay) / params.theta + strategy.n_s * stay / params.mu),
        refund=params.r * (1.0 - stay),
    )


def benefit_from_steady_state(ss: SteadyState, strategy: Strategy, params: ValidatedParams) -> float:
    n_s = strategy.n_s
    n = np.arange(n_s)
    early = params.R - params.f_e - params.f_s - params.C * (n + 1) / params.mu
    head = math.fsum(ss.p0[:n_s] * early)

    # tail: sum_k rho^k p(n_s,0) [a + K g^(k+1)], two geometric series
    rho, g = ss.rho_minus, _service_odds(params)
    a = params.r - params.f_e - params.C / params.theta
    tail = ss.boundary_mass * (a / (1.0 - rho) + _late_constant(params, n_s) * g / (1.0 - rho * g))

    return (params.zeta + params.theta) / params.zeta * (head + tail)


def benefit_from_pgf(values: PgfValues, strategy: Strategy, params: ValidatedParams) -> float:
    mu, C = params.mu, params.C
    g = _service_odds(params)
    total = math.fsum(
        [
            (params.R - params.f_e - params.f_s - C / mu) * (values.p0a + values.p0b),
            -C * strategy.n_e / mu * values.p0b,
            (params.r - params.f_e - C / params.theta) * values.p0c,
            -C / mu * (values.d_p0a + values.d_p0b),
            _late_constant(params, strategy.n_s) * g * values.p0c_at_g,
        ]
    )
    return (params.zeta + params.theta) / params.zeta * total


def unconditional_benefit(
    strategy: Strategy,
    params: ValidatedParams,
    method: SolveMethod | str = SolveMethod.QBD,
) -> float:
    """Expected net benefit of an arrival that joins while the queue is hidden.

    Solver errors propagate; GenfuncUnavailable means the caller should use qbd.
    """
    method = SolveMethod(method)
    if method is SolveMethod.GENFUNC:
        bp = solve_boundary(params, strategy)
        return benefit_from_pgf(pgf_eval(params, strategy, bp), strategy, params)
    return benefit_from_steady_state(solve_censored_qbd(params, strategy), strategy, params)
