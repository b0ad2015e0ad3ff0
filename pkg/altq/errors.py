from __future__ import annotations


class AltqError(Exception):
    """Base class for every failure raised by altq."""

    exit_code = 1
    status_code = 500


# ---------- Invalid input (CLI exit 2, HTTP 422) ----------
class InvalidParameters(AltqError):
    exit_code = 2
    status_code = 422


class NonPositiveRate(InvalidParameters):
    pass


class NegativeFee(InvalidParameters):
    pass


class TrivialSystem(InvalidParameters):
    """Nobody joins an empty system: R <= f_e + f_s + C/mu."""


class InstantReneger(InvalidParameters):
    """r > f_e: a customer would join only to renege."""


class ThresholdCapExceeded(InvalidParameters):
    pass


class InvalidStrategy(InvalidParameters):
    pass


class InvalidSweep(InvalidParameters):
    pass


# ---------- Numerical failure (CLI exit 3, HTTP 500) ----------
class NumericalFailure(AltqError):
    exit_code = 3
    status_code = 500


class SingularSystem(NumericalFailure):
    pass


class NoSignChange(NumericalFailure):
    pass


class GenfuncUnavailable(NumericalFailure):
    """The generating-function solver cannot be used; fall back to QBD."""


class DegenerateQ(GenfuncUnavailable):
    pass


class EmptyBand(GenfuncUnavailable):
    pass


class IllConditioned(GenfuncUnavailable):
    pass


class RootMultiplicity(IllConditioned):
    pass
