from __future__ import annotations

from fastapi import APIRouter

from ..equilibrium import equilibrium_q
from ..model import strategy_for, validate
from ..reports import solve_report
from ..schemas import ModelParams, SimConfig, SimEstimates, SimulateRequest, SolveMethod, SolveReport
from ..simulator import simulate

router = APIRouter(tags=["solve"])


@router.post("/solve", response_model=SolveReport)
def solve(params: ModelParams, method: SolveMethod = SolveMethod.QBD) -> SolveReport:
    return solve_report(params, method)


@router.post("/simulate", response_model=SimEstimates)
def simulate_strategy(body: SimulateRequest) -> SimEstimates:
    params = validate(body.params)
    q = equilibrium_q(params).q_e if body.q is None else body.q
    config = SimConfig(
        seed=body.seed,
        events=body.events,
        replications=body.reps,
        warmup_fraction=body.warmup_fraction,
    )
    # one worker: the request already runs in the server's thread pool
    return simulate(params, strategy_for(params, q), config, workers=1)
