from __future__ import annotations

import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import ValidationError

from . import __version__
from .config import configure_logging
from .errors import AltqError
from .routers import solve, sweeps

logger = logging.getLogger(__name__)

configure_logging()

app = FastAPI(title="altq", version=__version__)


@app.exception_handler(AltqError)
async def altq_error_handler(request: Request, exc: AltqError) -> JSONResponse:
    if exc.status_code >= 500:
        logger.error("%s %s failed: %s", request.method, request.url.path, exc)
    return JSONResponse(
        status_code=exc.status_code,
        content={"error": type(exc).__name__, "detail": str(exc)},
    )


@app.exception_handler(ValidationError)
async def validation_error_handler(request: Request, exc: ValidationError) -> JSONResponse:
    detail = exc.errors(include_url=False, include_context=False, include_input=False)
    return JSONResponse(status_code=422, content={"error": "ValidationError", "detail": detail})


@app.get("/health")
def health() -> dict[str, str]:
    return {"status": "ok", "version": __version__}


app.include_router(solve.router)
app.include_router(sweeps.router)
