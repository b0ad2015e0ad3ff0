"""Stationary distribution of the queue under a fixed (n_e, n_s, q) strategy.

Levels 0..n_s of the chain are solved as a finite level-dependent QBD with
two phases (0 = unobservable, 1 = observable). Unobservable states above n_s
are censored away: while the queue is hidden they form a geometric tail with
ratio rho_minus, and the censored chain sees them only through the boosted
switching rate theta / (1 - rho_minus) out of (n_s, 0).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from .errors import NonPositiveRate, SingularSystem
from .schemas import Strategy, ValidatedParams

logger = logging.getLogger(__name__)

NEGATIVE_TOLERANCE = 1e-9


@dataclass(frozen=True)
class ChainRates:
    lam: float
    lam_q: float
    mu: float
    theta: float
    zeta: float
    n_e: int
    n_s: int

    @classmethod
    def from_inputs(cls, params: ValidatedParams, strategy: Strategy) -> ChainRates:
        return cls(
            lam=params.lam,
            lam_q=params.lam * strategy.q,
            mu=params.mu,
            theta=params.theta,
            zeta=params.zeta,
            n_e=strategy.n_e,
            n_s=strategy.n_s,
        )


@dataclass(frozen=True)
class SteadyState:
    p0: np.ndarray
    p1: np.ndarray
    rho_minus: float
    rates: ChainRates

    def __post_init__(self) -> None:
        self.p0.flags.writeable = False
        self.p1.flags.writeable = False

    @property
    def n_s(self) -> int:
        return self.rates.n_s

    @property
    def boundary_mass(self) -> float:
        """p(n_s, 0)."""
        return float(self.p0[-1])

    @property
    def tail_mass(self) -> float:
        """Probability of the unobservable states strictly above n_s."""
        rho = self.rho_minus
        return self.boundary_mass * rho / (1.0 - rho)

    @property
    def unobservable_mass(self) -> float:
        return math.fsum(self.p0) + self.tail_mass

    @property
    def observable_mass(self) -> float:
        return math.fsum(self.p1)

    @property
    def total_mass(self) -> float:
        return self.unobservable_mass + self.observable_mass


def rho_minus(lambda_q: float, mu: float, theta: float) -> float:
    """Sub-unit root of mu x^2 - (lambda_q + mu + theta) x + lambda_q = 0."""
    if mu <= 0 or theta <= 0:
        raise NonPositiveRate(f"mu and theta must be > 0, got mu={mu}, theta={theta}")
    if lambda_q < 0:
        raise NonPositiveRate(f"lambda*q must be >= 0, got {lambda_q}")
    b = lambda_q + mu + theta
    s = math.sqrt(max(b * b - 4.0 * lambda_q * mu, 0.0))
    # rationalised form of (b - s) / (2 mu); no cancellation when lambda_q is small
    return 2.0 * lambda_q / (b + s)


def tail_probability(ss: SteadyState, n: int) -> float:
    if n < ss.n_s:
        raise ValueError(f"tail starts at n_s={ss.n_s}, got n={n}")
    return ss.rho_minus ** (n - ss.n_s) * ss.boundary_mass


def _level_blocks(rates: ChainRates, rho: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Per-level pieces of the censored generator.

    up[n] holds the diagonal of the block n -> n+1, down[n] the service rate
    of the block n -> n-1, local[n] the 2x2 block within level n.
    """
    n_s = rates.n_s
    levels = np.arange(n_s + 1)

    up = np.zeros((n_s + 1, 2))
    up[:n_s, 0] = rates.lam_q
    up[:, 1] = np.where(levels <= rates.n_e - 1, rates.lam, 0.0)
    up[n_s, :] = 0.0

    down = np.where(levels >= 1, rates.mu, 0.0)

    switch = np.full(n_s + 1, rates.theta)
    switch[n_s] = rates.theta / (1.0 - rho)

    local = np.zeros((n_s + 1, 2, 2))
    local[:, 0, 1] = switch
    local[:, 1, 0] = rates.zeta
    local[:, 0, 0] = -(up[:, 0] + down + switch)
    local[:, 1, 1] = -(up[:, 1] + down + rates.zeta)
    return up, down, local


def solve_censored_qbd(params: ValidatedParams, strategy: Strategy) -> SteadyState:
    rates = ChainRates.from_inputs(params, strategy)
    rho = rho_minus(rates.lam_q, rates.mu, rates.theta)
    up, down, local = _level_blocks(rates, rho)
    n_s = rates.n_s

    # linear level reduction from the top: pi[n] = pi[n-1] @ ratio[n]
    ratio = np.zeros((n_s + 1, 2, 2))
    reduced = local[n_s]
    # mass[n] @ pi[n] == probability of all levels >= n, tail included
    mass = np.array([1.0 / (1.0 - rho), 1.0])
    try:
        for n in range(n_s, 0, -1):
            ratio_n = -up[n - 1][:, None] * np.linalg.inv(reduced)
            ratio[n] = ratio_n
            reduced = local[n - 1] + ratio_n * down[n]
            mass = 1.0 + ratio_n @ mass

        # level 0: one balance column swapped for the normalisation
        bordered = np.column_stack([reduced[:, 0], mass])
        pi0 = np.linalg.solve(bordered.T, np.array([0.0, 1.0]))
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"level reduction broke down: {exc}") from exc

    pi = np.empty((n_s + 1, 2))
    pi[0] = pi0
    for n in range(1, n_s + 1):
        pi[n] = pi[n - 1] @ ratio[n]

    if not np.all(np.isfinite(pi)):
        raise SingularSystem("non-finite stationary probabilities")
    if pi.min() < -NEGATIVE_TOLERANCE:
        raise SingularSystem(f"negative stationary probability {pi.min():.3e}")
    pi = np.clip(pi, 0.0, None)

    logger.debug("qbd n_e=%d n_s=%d q=%.6g rho=%.6g", rates.n_e, n_s, strategy.q, rho)
    return SteadyState(p0=pi[:, 0].copy(), p1=pi[:, 1].copy(), rho_minus=rho, rates=rates)


def _relative(inflow: np.ndarray, outflow: np.ndarray) -> float:
    if inflow.size == 0:
        return 0.0
    return float(np.max(np.abs(inflow - outflow) / (np.abs(inflow) + np.abs(outflow) + 1e-300)))


def balance_residuals(ss: SteadyState, extra_tail: int = 5) -> dict[str, float]:
    """Worst relative balance residual per family of states of the full chain."""
    r = ss.rates
    n_s, n_e = r.n_s, r.n_e
    p1 = np.asarray(ss.p1)
    # unobservable occupancies through n_s + extra_tail + 1 (one beyond the last checked state)
    p0 = np.concatenate(
        [ss.p0, ss.boundary_mass * ss.rho_minus ** np.arange(1, extra_tail + 2)]
    )

    n1 = np.arange(n_s + 1)
    joins1 = np.where(n1 <= n_e - 1, r.lam, 0.0)
    serve1 = np.where(n1 >= 1, r.mu, 0.0)
    out1 = (joins1 + serve1 + r.zeta) * p1
    in1 = np.zeros(n_s + 1)
    in1[1:] += joins1[:-1] * p1[:-1]
    in1[:-1] += r.mu * p1[1:]
    in1[:-1] += r.theta * p0[:n_s]
    in1[n_s] += r.theta * ss.boundary_mass / (1.0 - ss.rho_minus)

    last = n_s + extra_tail
    n0 = np.arange(last + 1)
    out0 = (r.lam_q + np.where(n0 >= 1, r.mu, 0.0) + r.theta) * p0[: last + 1]
    in0 = r.mu * p0[1 : last + 2]
    in0[1:] += r.lam_q * p0[:last]
    in0[: n_s + 1] += r.zeta * p1

    return {
        "observable": _relative(in1, out1),
        "unobservable": _relative(in0[: n_s + 1], out0[: n_s + 1]),
        "tail": _relative(in0[n_s + 1 :], out0[n_s + 1 :]),
    }


def to_frame(ss: SteadyState, extra_tail: int = 0) -> pd.DataFrame:
    """Stationary vector as columns n, p0, p1 (p1 is zero above n_s)."""
    tail = ss.boundary_mass * ss.rho_minus ** np.arange(1, extra_tail + 1)
    n = np.arange(ss.n_s + extra_tail + 1)
    return pd.DataFrame(
        {
            "n": n,
            "p0": np.concatenate([ss.p0, tail]),
            "p1": np.concatenate([ss.p1, np.zeros(extra_tail)]),
        }
    )
