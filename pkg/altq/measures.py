"""Equilibrium performance measures.

Social welfare counts fees as transfers between customers and provider, so
they cancel: S_e = R mu_e + r a_e - C E[N].
"""

from __future__ import annotations

import math

import numpy as np

from .genfunc import BoundaryProbs, PgfValues
from .schemas import Measures, Strategy, ValidatedParams
from .steady_state import SteadyState


def throughput(ss: SteadyState, mu: float) -> float:
    return mu * (1.0 - ss.p0[0] - ss.p1[0])


def abandonment_rate(ss: SteadyState, theta: float) -> float:
    rho = ss.rho_minus
    return theta * ss.boundary_mass * rho / (1.0 - rho) ** 2


def mean_number(ss: SteadyState) -> float:
    n = np.arange(ss.n_s + 1)
    rho = ss.rho_minus
    body = math.fsum(n * (ss.p0 + ss.p1))
    return body + ss.boundary_mass * (ss.n_s * rho / (1.0 - rho) + rho / (1.0 - rho) ** 2)


def join_rate(ss: SteadyState) -> float:
    r = ss.rates
    return r.lam * math.fsum(ss.p1[: r.n_e]) + r.lam_q * ss.unobservable_mass


def social_welfare(params: ValidatedParams, ss: SteadyState, measures: Measures | None = None) -> float:
    if measures is None:
        mu_e, a_e, en = throughput(ss, params.mu), abandonment_rate(ss, params.theta), mean_number(ss)
    else:
        mu_e, a_e, en = measures.mu_e, measures.a_e, measures.EN
    return params.R * mu_e + params.r * a_e - params.C * en


def compute_measures(params: ValidatedParams, ss: SteadyState, q_e: float) -> Measures:
    mu_e = throughput(ss, params.mu)
    a_e = abandonment_rate(ss, params.theta)
    en = mean_number(ss)
    return Measures(
        q_e=q_e,
        mu_e=mu_e,
        a_e=a_e,
        EN=en,
        S_e=params.R * mu_e + params.r * a_e - params.C * en,
        join_rate=join_rate(ss),
    )


def measures_from_pgf(
    params: ValidatedParams,
    strategy: Strategy,
    bp: BoundaryProbs,
    values: PgfValues,
) -> Measures:
    """Same measures, read off the generating functions instead of the full vector."""
    n_e, n_s = strategy.n_e, strategy.n_s
    # abandonment via P0c'(1): theta * sum_k k p(n_s + k, 0)
    a_e = params.theta * values.d_p0c
    mu_e = params.mu * (1.0 - bp[(0, 0)] - bp[(0, 1)])
    en = math.fsum(
        [
            values.d_p0a + values.d_p1a,
            n_e * (values.p0b + values.p1b) + values.d_p0b + values.d_p1b,
            n_s * values.p0c + values.d_p0c,
            n_s * values.p_ns1,
        ]
    )
    join = params.lam * values.p1a + params.lam * strategy.q * values.unobservable_mass
    return Measures(
        q_e=strategy.q,
        mu_e=mu_e,
        a_e=a_e,
        EN=en,
        S_e=params.R * mu_e + params.r * a_e - params.C * en,
        join_rate=join,
    )
