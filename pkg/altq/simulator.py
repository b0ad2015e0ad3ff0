"""Discrete-event Monte Carlo of the queue under a fixed strategy.

Streams: numpy PCG64, replication k seeded with child k of
SeedSequence(seed).spawn(replications). Exponential and uniform variates are
drawn in blocks, so a replication is a deterministic function of its child
seed only.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .config import get_settings
from .schemas import (
    CoupledPath,
    Estimate,
    EventAccounting,
    SimConfig,
    SimEstimates,
    Strategy,
    ValidatedParams,
)

logger = logging.getLogger(__name__)

BLOCK = 65_536
TAGGED_CELLS = 4_000_000


class _Stream:
    """Block-buffered exponential / uniform draws from one generator."""

    def __init__(self, seed: np.random.SeedSequence) -> None:
        self._rng = np.random.Generator(np.random.PCG64(seed))
        self._exp = self._rng.standard_exponential(BLOCK)
        self._uni = self._rng.random(BLOCK)
        self._i = 0
        self._j = 0

    def exponential(self) -> float:
        if self._i == BLOCK:
            self._exp = self._rng.standard_exponential(BLOCK)
            self._i = 0
        x = self._exp[self._i]
        self._i += 1
        return float(x)

    def uniform(self) -> float:
        if self._j == BLOCK:
            self._uni = self._rng.random(BLOCK)
            self._j = 0
        u = self._uni[self._j]
        self._j += 1
        return float(u)


@dataclass
class _Replication:
    elapsed: float
    occupancy0: np.ndarray
    occupancy1: np.ndarray
    completions: int
    reneges: int
    area: float
    benefit_sum: float
    benefit_count: int
    hidden_joins: int
    joins: int
    total_completions: int
    total_reneges: int
    in_system: int


def _settle(
    ledger: deque[tuple[float, bool, bool]],
    observable: bool,
    t: float,
    params: ValidatedParams,
    n_s: int,
    stream: _Stream,
) -> tuple[float, int]:
    """Benefits of the hidden joiners still queued at the horizon.

    The queue runs on with arrivals shut off until each of them has left.
    Customers behind a joiner never change its outcome: service is FCFS and
    reneging takes the back of the queue.
    """
    stay_reward = params.R - params.f_e - params.f_s
    leave_reward = params.r - params.f_e
    pending = sum(1 for _, hidden, counted in ledger if hidden and counted)
    total_benefit = 0.0
    settled = 0
    while settled < pending:
        switch = params.zeta if observable else params.theta
        total = params.mu + switch
        t += stream.exponential() / total
        if stream.uniform() * total < params.mu:
            arrived, hidden, counted = ledger.popleft()
            if counted and hidden:
                total_benefit += stay_reward - params.C * (t - arrived)
                settled += 1
        else:
            if not observable:
                while len(ledger) > n_s:
                    arrived, hidden, counted = ledger.pop()
                    if counted and hidden:
                        total_benefit += leave_reward - params.C * (t - arrived)
                        settled += 1
            observable = not observable
    return total_benefit, settled


def _replicate(
    params: ValidatedParams,
    strategy: Strategy,
    events: int,
    warmup: int,
    levels: int,
    seed: np.random.SeedSequence,
) -> _Replication:
    stream = _Stream(seed)
    lam, mu, theta, zeta = params.lam, params.mu, params.theta, params.zeta
    n_e, n_s, q = strategy.n_e, strategy.n_s, strategy.q
    stay_reward = params.R - params.f_e - params.f_s
    leave_reward = params.r - params.f_e
    C = params.C

    t = 0.0
    n = 0
    observable = False
    # FCFS ledger of (arrival time, joined while hidden, joined after warm-up)
    ledger: deque[tuple[float, bool, bool]] = deque()

    occ0 = np.zeros(levels + 1)
    occ1 = np.zeros(levels + 1)
    t0 = 0.0
    completions = reneges = 0
    area = 0.0
    benefit_sum = 0.0
    benefit_count = hidden_joins = 0
    joins = total_completions = total_reneges = 0
    counting = warmup == 0

    for event in range(events):
        if event == warmup and not counting:
            counting = True
            t0 = t

        switch = zeta if observable else theta
        serve = mu if n > 0 else 0.0
        total = lam + serve + switch
        dt = stream.exponential() / total
        if counting:
            level = n if n < levels else levels
            if observable:
                occ1[level] += dt
            else:
                occ0[level] += dt
            area += n * dt
        t += dt

        pick = stream.uniform() * total
        if pick < lam:
            hidden = not observable
            if observable:
                join = n <= n_e - 1
            else:
                join = stream.uniform() < q
            if join:
                ledger.append((t, hidden, counting))
                n += 1
                joins += 1
                if hidden and counting:
                    hidden_joins += 1
        elif pick < lam + serve:
            arrived, hidden, counted = ledger.popleft()
            n -= 1
            total_completions += 1
            if counting:
                completions += 1
            if counted and hidden:
                benefit_sum += stay_reward - C * (t - arrived)
                benefit_count += 1
        else:
            if not observable:
                while n > n_s:
                    arrived, hidden, counted = ledger.pop()
                    n -= 1
                    total_reneges += 1
                    if counting:
                        reneges += 1
                    if counted and hidden:
                        benefit_sum += leave_reward - C * (t - arrived)
                        benefit_count += 1
            observable = not observable

    late_sum, late_count = _settle(ledger, observable, t, params, n_s, stream)
    benefit_sum += late_sum
    benefit_count += late_count

    return _Replication(
        elapsed=t - t0,
        occupancy0=occ0,
        occupancy1=occ1,
        completions=completions,
        reneges=reneges,
        area=area,
        benefit_sum=benefit_sum,
        benefit_count=benefit_count,
        hidden_joins=hidden_joins,
        joins=joins,
        total_completions=total_completions,
        total_reneges=total_reneges,
        in_system=n,
    )


def _estimate(samples: list[float]) -> Estimate:
    k = len(samples)
    mean = math.fsum(samples) / k
    var = math.fsum((x - mean) ** 2 for x in samples) / (k - 1)
    return Estimate(mean=mean, se=math.sqrt(var / k))


def simulate(
    params: ValidatedParams,
    strategy: Strategy,
    config: SimConfig | None = None,
    workers: int | None = None,
) -> SimEstimates:
    config = config or SimConfig()
    workers = get_settings().threads if workers is None else workers
    workers = max(1, min(workers, config.replications))
    levels = strategy.n_s + config.extra_levels + 1
    warmup = int(config.warmup_fraction * config.events)
    seeds = np.random.SeedSequence(config.seed).spawn(config.replications)
    args = [(params, strategy, config.events, warmup, levels, s) for s in seeds]

    logger.info(
        "simulating q=%.6g n_e=%d n_s=%d: %d x %d events on %d worker(s)",
        strategy.q, strategy.n_e, strategy.n_s, config.replications, config.events, workers,
    )
    if workers == 1:
        reps = [_replicate(*a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            reps = list(pool.map(_replicate, *zip(*args)))

    def per_rep(fn) -> Estimate:
        return _estimate([fn(rep) for rep in reps])

    # p0[-1] aggregates every hidden level above n_s + extra_levels
    p0 = [per_rep(lambda rep, n=n: rep.occupancy0[n] / rep.elapsed) for n in range(levels + 1)]
    p1 = [per_rep(lambda rep, n=n: rep.occupancy1[n] / rep.elapsed) for n in range(strategy.n_s + 1)]

    mu_e = per_rep(lambda rep: rep.completions / rep.elapsed)
    a_e = per_rep(lambda rep: rep.reneges / rep.elapsed)
    en = per_rep(lambda rep: rep.area / rep.elapsed)
    s_e = per_rep(
        lambda rep: (params.R * rep.completions + params.r * rep.reneges - params.C * rep.area) / rep.elapsed
    )
    with_joiners = [rep for rep in reps if rep.benefit_count > 0]
    u = None
    if len(with_joiners) >= 2:
        u = _estimate([rep.benefit_sum / rep.benefit_count for rep in with_joiners])

    logger.info("simulation done: mu_e=%.6g a_e=%.6g EN=%.6g", mu_e.mean, a_e.mean, en.mean)
    return SimEstimates(
        n_e=strategy.n_e,
        n_s=strategy.n_s,
        q=strategy.q,
        seed=config.seed,
        events=config.events,
        replications=config.replications,
        p0=p0,
        p1=p1,
        mu_e=mu_e,
        a_e=a_e,
        EN=en,
        S_e=s_e,
        U=u,
        unobservable_joins=sum(rep.benefit_count for rep in reps),
        accounting=EventAccounting(
            joins=sum(rep.joins for rep in reps),
            completions=sum(rep.total_completions for rep in reps),
            reneges=sum(rep.total_reneges for rep in reps),
            in_system=sum(rep.in_system for rep in reps),
        ),
    )


def simulate_tagged(
    n: int,
    strategy: Strategy,
    params: ValidatedParams,
    reps: int,
    seed: int = 0,
) -> Estimate:
    """Net benefit of a customer joining behind n others while the queue is hidden.

    Only the tagged customer's own race matters: n + 1 service epochs against
    one exponential switch clock; at the switch it reneges iff its position
    still exceeds n_s.
    """
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))
    positions = n + 1
    chunk = max(1, TAGGED_CELLS // positions)
    stay_reward = params.R - params.f_e - params.f_s
    leave_reward = params.r - params.f_e
    values = []
    done = 0
    while done < reps:
        size = min(chunk, reps - done)
        epochs = np.cumsum(rng.standard_exponential((size, positions)), axis=1) / params.mu
        switch = rng.standard_exponential(size) / params.theta
        served_before = np.sum(epochs < switch[:, None], axis=1)
        stays = positions - served_before <= strategy.n_s
        values.append(np.where(stays, stay_reward - params.C * epochs[:, -1], leave_reward - params.C * switch))
        done += size
    sample = np.concatenate(values)
    return Estimate(mean=float(sample.mean()), se=float(sample.std(ddof=1) / math.sqrt(reps)))


def simulate_coupled(
    params: ValidatedParams,
    strategy: Strategy,
    q_low: float,
    q_high: float,
    events: int,
    seed: int = 0,
) -> CoupledPath:
    """Two copies of the queue driven by the same event stream.

    A hidden arrival joins copy k iff its uniform is below q_k, so the
    low-q copy never holds more customers than the high-q one.
    """
    stream = _Stream(np.random.SeedSequence(seed))
    lam, mu = params.lam, params.mu
    n_e, n_s = strategy.n_e, strategy.n_s
    low = high = 0
    observable = False
    max_gap = -(10**9)
    for _ in range(events):
        switch = params.zeta if observable else params.theta
        total = lam + mu + switch
        pick = stream.uniform() * total
        if pick < lam:
            if observable:
                low += low <= n_e - 1
                high += high <= n_e - 1
            else:
                u = stream.uniform()
                low += u < q_low
                high += u < q_high
        elif pick < lam + mu:
            low = max(low - 1, 0)
            high = max(high - 1, 0)
        else:
            if not observable:
                low, high = min(low, n_s), min(high, n_s)
            observable = not observable
        max_gap = max(max_gap, low - high)
    return CoupledPath(
        q_low=q_low, q_high=q_high, events=events, max_gap=max_gap, final_low=low, final_high=high
    )
