from __future__ import annotations

import io
from typing import Literal

from fastapi import APIRouter, Response

from ..experiments import run_sweep, write_csv
from ..schemas import SweepRequest, SweepRow

router = APIRouter(prefix="/sweeps", tags=["sweeps"])


@router.post("", response_model=list[SweepRow])
def run(body: SweepRequest, format: Literal["json", "csv"] = "json"):
    rows = run_sweep(body.spec, body.method)
    if format == "csv":
        buffer = io.StringIO()
        write_csv(rows, buffer)
        return Response(content=buffer.getvalue(), media_type="text/csv")
    return rows
