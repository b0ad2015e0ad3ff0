from __future__ import annotations

import logging
import math
from pathlib import Path

from .config import get_settings
from .errors import InstantReneger, NegativeFee, NonPositiveRate, ThresholdCapExceeded, TrivialSystem
from .schemas import ModelParams, Strategy, ValidatedParams

logger = logging.getLogger(__name__)

# thresholds are floors of money ratios; nudge by a few ulps so 3.9999999999999996 -> 4
FLOOR_ULPS = 4


def guarded_floor(x: float) -> int:
    return math.floor(x + FLOOR_ULPS * math.ulp(x))


def load_params(path: Path) -> ModelParams:
    return ModelParams.model_validate_json(Path(path).read_text(encoding="utf-8"), by_alias=True, by_name=False)


def validate(params: ModelParams) -> ValidatedParams:
    for name in ("lam", "mu", "theta", "zeta", "C"):
        value = getattr(params, name)
        if value <= 0:
            raise NonPositiveRate(f"{name} must be > 0, got {value}")
    for name in ("f_e", "f_s"):
        value = getattr(params, name)
        if value < 0:
            raise NegativeFee(f"{name} must be >= 0, got {value}")

    if params.R <= params.f_e + params.f_s + params.C / params.mu:
        raise TrivialSystem(
            f"R={params.R} <= f_e + f_s + C/mu = {params.f_e + params.f_s + params.C / params.mu}"
        )
    if params.r > params.f_e:
        raise InstantReneger(f"r={params.r} exceeds f_e={params.f_e}")

    return ValidatedParams.from_fields(**params.model_dump())


def threshold_ne(params: ValidatedParams) -> int:
    """Largest queue position an informed arrival accepts (joins on ties)."""
    return guarded_floor(params.mu * (params.R - params.f_e - params.f_s) / params.C)


def threshold_ns(params: ValidatedParams, cap: int | None = None) -> int:
    """Largest position at which a customer stays when the queue becomes visible."""
    cap = get_settings().threshold_cap if cap is None else cap
    x = params.mu * (params.R - params.r - params.f_s) / params.C
    if not math.isfinite(x) or x > cap + 1:
        raise ThresholdCapExceeded(f"n_s = floor({x}) exceeds the cap {cap}")
    n_s = guarded_floor(x)
    if n_s > cap:
        raise ThresholdCapExceeded(f"n_s = {n_s} exceeds the cap {cap}")
    return n_s


def strategy_for(params: ValidatedParams, q: float, cap: int | None = None) -> Strategy:
    n_e, n_s = threshold_ne(params), threshold_ns(params, cap)
    logger.debug("thresholds n_e=%d n_s=%d", n_e, n_s)
    return Strategy(n_e=n_e, n_s=n_s, q=q)
