from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from enum import Enum
from pathlib import Path
from typing import IO, Iterable, Sequence

import pandas as pd

from .config import get_settings
from .errors import AltqError, InvalidSweep
from .reports import solve_report
from .schemas import ModelParams, SolveMethod, SweepFamily, SweepRow, SweepSpec

logger = logging.getLogger(__name__)

CSV_COLUMNS = ["value", "theta", "zeta", "r", "n_e", "n_s", "q_e", "case", "mu_e", "a_e", "EN", "S_e", "error"]
TIE_TOLERANCE = 1e-9
GRID_DECIMALS = 12

DEFAULT_GRIDS = {
    SweepFamily.GAMMA: "0.02:0.98:0.02",
    SweepFamily.REFUND: "0:1:0.05",
}

# family -> SweepSpec fields it needs
REQUIRED_EXTRAS = {
    SweepFamily.GAMMA: ("cycle",),
    SweepFamily.THETA: ("zeta",),
    SweepFamily.REFUND: (),
    SweepFamily.ARRIVAL: (),
    SweepFamily.CYCLE: ("gamma",),
    SweepFamily.FEESPLIT: ("total_fee", "refund_ratio"),
}


class Shape(str, Enum):
    INCREASING = "Increasing"
    DECREASING = "Decreasing"
    UNIMODAL = "Unimodal"
    OTHER = "Other"


def parse_grid(text: str) -> list[float]:
    """'a:b:step' (b included when hit) or a comma-separated list."""
    text = text.strip()
    try:
        if ":" not in text:
            return [float(v) for v in text.split(",") if v.strip()]
        start, stop, step = (float(v) for v in text.split(":"))
    except ValueError as exc:
        raise InvalidSweep(f"bad grid {text!r}: {exc}") from exc
    if step <= 0 or stop < start:
        raise InvalidSweep(f"bad grid {text!r}: need step > 0 and stop >= start")
    count = math.floor((stop - start) / step + 1e-9)
    return [round(start + k * step, GRID_DECIMALS) for k in range(count + 1)]


def gamma_rates(cycle: float, gamma: float) -> tuple[float, float]:
    """(theta, zeta) with 1/theta + 1/zeta = cycle and theta/(theta+zeta) = gamma."""
    return 1.0 / ((1.0 - gamma) * cycle), 1.0 / (gamma * cycle)


def check_spec(spec: SweepSpec) -> None:
    grid = spec.grid
    if not grid:
        raise InvalidSweep("empty grid")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise InvalidSweep("grid must be strictly increasing")
    for name in REQUIRED_EXTRAS[spec.family]:
        if getattr(spec, name) is None:
            raise InvalidSweep(f"{spec.family.value} sweep needs {name}")
    if spec.family is SweepFamily.GAMMA and not (0 < grid[0] and grid[-1] < 1):
        raise InvalidSweep("gamma grid must lie inside (0, 1)")
    if spec.family in (SweepFamily.REFUND,) and not (0 <= grid[0] and grid[-1] <= 1):
        raise InvalidSweep("refund-ratio grid must lie inside [0, 1]")
    if spec.family is SweepFamily.CYCLE and not 0 < spec.gamma < 1:
        raise InvalidSweep("gamma must lie inside (0, 1)")


def point_params(spec: SweepSpec, value: float) -> ModelParams:
    base = spec.base
    match spec.family:
        case SweepFamily.GAMMA:
            theta, zeta = gamma_rates(spec.cycle, value)
            return base.replace(theta=theta, zeta=zeta)
        case SweepFamily.THETA:
            return base.replace(theta=value, zeta=spec.zeta)
        case SweepFamily.REFUND:
            return base.replace(r=value * base.f_e)
        case SweepFamily.ARRIVAL:
            return base.replace(lam=value)
        case SweepFamily.CYCLE:
            theta, zeta = gamma_rates(value, spec.gamma)
            return base.replace(theta=theta, zeta=zeta)
        case SweepFamily.FEESPLIT:
            return base.replace(f_e=value, f_s=spec.total_fee - value, r=spec.refund_ratio * value)
    raise InvalidSweep(f"unknown family {spec.family}")


def _solve_point(spec: SweepSpec, value: float, method: SolveMethod) -> SweepRow:
    try:
        params = point_params(spec, value)
    except (AltqError, ValueError) as exc:
        return SweepRow(value=value, error=f"{type(exc).__name__}: {exc}")
    row = {"value": value, "theta": params.theta, "zeta": params.zeta, "r": params.r}
    try:
        report = solve_report(params, method)
    except AltqError as exc:
        logger.info("sweep point %s=%g failed: %s", spec.family.value, value, exc)
        return SweepRow(**row, error=f"{type(exc).__name__}: {exc}")
    return SweepRow(
        **row,
        n_e=report.n_e,
        n_s=report.n_s,
        q_e=report.q_e,
        case=report.case,
        mu_e=report.mu_e,
        a_e=report.a_e,
        EN=report.EN,
        S_e=report.S_e,
    )


def run_sweep(
    spec: SweepSpec,
    method: SolveMethod | str = SolveMethod.QBD,
    workers: int | None = None,
) -> list[SweepRow]:
    check_spec(spec)
    method = SolveMethod(method)
    workers = get_settings().threads if workers is None else workers
    workers = max(1, min(workers, len(spec.grid)))
    logger.info("%s sweep over %d points (%s, %d worker(s))", spec.family.value, len(spec.grid), method.value, workers)

    if workers == 1:
        return [_solve_point(spec, v, method) for v in spec.grid]
    n = len(spec.grid)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        # map keeps grid order whatever the completion order
        return list(pool.map(_solve_point, [spec] * n, spec.grid, [method] * n))


def rows_to_frame(rows: Iterable[SweepRow]) -> pd.DataFrame:
    frame = pd.DataFrame([row.model_dump(mode="json") for row in rows], columns=CSV_COLUMNS)
    frame["n_e"] = frame["n_e"].astype("Int64")
    frame["n_s"] = frame["n_s"].astype("Int64")
    return frame


def write_csv(rows: Iterable[SweepRow], target: str | Path | IO[str]) -> None:
    rows_to_frame(rows).to_csv(target, index=False, float_format="%.17g", lineterminator="\n")


def detect_shape(column: Sequence[float], tol: float = TIE_TOLERANCE) -> Shape:
    """Non-decreasing / non-increasing / single-peaked / other, ties within tol ignored."""
    if len(column) < 3:
        raise ValueError("need at least 3 points to classify a shape")
    values = [float(v) for v in column if v is not None and not math.isnan(float(v))]
    if len(values) < 3:
        return Shape.OTHER
    steps = [b - a for a, b in zip(values, values[1:])]
    signs = [1 if d > tol else -1 for d in steps if abs(d) > tol]
    if -1 not in signs:
        return Shape.INCREASING
    if 1 not in signs:
        return Shape.DECREASING
    turns = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    if turns == 1 and signs[0] == 1:
        return Shape.UNIMODAL
    return Shape.OTHER


def shape_table(rows: Sequence[SweepRow], columns: Sequence[str] = ("q_e", "mu_e", "S_e")) -> dict[str, Shape]:
    return {name: detect_shape([getattr(row, name) for row in rows]) for name in columns}
