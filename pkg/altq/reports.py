"""The solve pipeline shared by the CLI, the HTTP routes and the sweep runner."""

from __future__ import annotations

import logging

from .equilibrium import equilibrium_q
from .errors import GenfuncUnavailable
from .genfunc import pgf_eval, solve_boundary
from .measures import compute_measures, measures_from_pgf
from .model import strategy_for, validate
from .payoff import benefit_from_pgf
from .schemas import EquilibriumResult, Measures, ModelParams, SolveMethod, SolveReport, ValidatedParams
from .steady_state import SteadyState, solve_censored_qbd

logger = logging.getLogger(__name__)


def equilibrium_measures(
    params: ValidatedParams,
    eq: EquilibriumResult,
    method: SolveMethod,
) -> tuple[Measures, SteadyState]:
    strategy = strategy_for(params, eq.q_e)
    ss = solve_censored_qbd(params, strategy)
    if method is SolveMethod.GENFUNC:
        try:
            bp = solve_boundary(params, strategy)
            return measures_from_pgf(params, strategy, bp, pgf_eval(params, strategy, bp)), ss
        except GenfuncUnavailable as exc:
            logger.warning("genfunc measures unavailable at q_e=%.6g (%s), using qbd", eq.q_e, exc)
    return compute_measures(params, ss, eq.q_e), ss


def genfunc_gap(params: ValidatedParams, eq: EquilibriumResult) -> float | None:
    """|U_genfunc(q_e) - U_qbd(q_e)|, or None when the genfunc path is unavailable."""
    strategy = strategy_for(params, eq.q_e)
    try:
        bp = solve_boundary(params, strategy)
        u = benefit_from_pgf(pgf_eval(params, strategy, bp), strategy, params)
    except GenfuncUnavailable as exc:
        logger.warning("genfunc cross-check skipped at q_e=%.6g (%s)", eq.q_e, exc)
        return None
    return abs(u - eq.residual)


def solve_params(params: ModelParams, method: SolveMethod | str = SolveMethod.QBD) -> tuple[SolveReport, SteadyState]:
    method = SolveMethod(method)
    vp = validate(params)
    eq = equilibrium_q(vp, method)
    measures, ss = equilibrium_measures(vp, eq, method)
    gap = genfunc_gap(vp, eq) if method is SolveMethod.BOTH else None

    report = SolveReport(
        params=params,
        method=method,
        n_e=eq.n_e,
        n_s=eq.n_s,
        q_e=eq.q_e,
        case=eq.case,
        residual=eq.residual,
        iterations=eq.iterations,
        rho_minus=ss.rho_minus,
        gamma=vp.gamma,
        cycle=vp.cycle,
        mu_e=measures.mu_e,
        a_e=measures.a_e,
        EN=measures.EN,
        S_e=measures.S_e,
        genfunc_gap=gap,
    )
    return report, ss


def solve_report(params: ModelParams, method: SolveMethod | str = SolveMethod.QBD) -> SolveReport:
    return solve_params(params, method)[0]
