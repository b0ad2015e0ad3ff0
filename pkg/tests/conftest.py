from __future__ import annotations

import math
import os
import sys
from pathlib import Path
from typing import Iterator

import numpy as np
import pytest
from fastapi.testclient import TestClient


# ------------------------------------------------------------------
# Pin settings BEFORE importing altq.* (get_settings is cached)
# ------------------------------------------------------------------
PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

os.environ["ALTQ_THREADS"] = "1"
os.environ["ALTQ_LOG_LEVEL"] = "WARNING"
os.environ["ALTQ_THRESHOLD_CAP"] = "100000"

from altq.experiments import gamma_rates  # noqa: E402
from altq.main import app  # noqa: E402
from altq.model import validate  # noqa: E402
from altq.schemas import ModelParams, Strategy, ValidatedParams  # noqa: E402
from altq.steady_state import rho_minus  # noqa: E402


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run long Monte Carlo checks")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo run, needs --runslow")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


# ------------------------------------------------------------------
# Parameter sets
# ------------------------------------------------------------------
def make_params(**overrides: float) -> ValidatedParams:
    base = {"lam": 1.1, "mu": 1.0, "theta": 1.0, "zeta": 1.0, "R": 4.0, "C": 1.0, "f_e": 0.0, "f_s": 0.0, "r": -30.0}
    base.update(overrides)
    return validate(ModelParams.from_fields(**base))


def alternating_params(lam: float, gamma: float, cycle: float = 0.1) -> ValidatedParams:
    """B = 0.1, mu = 1, R = 4, C = 1, no fees, r = -30 (n_e = 4, n_s = 34)."""
    theta, zeta = gamma_rates(cycle, gamma)
    return make_params(lam=lam, theta=theta, zeta=zeta)


def fast_server_params(lam: float, theta: float) -> ValidatedParams:
    """zeta = 300, mu = 8, R = 5, C = 10, no fees or refund (n_e = n_s = 4)."""
    return make_params(lam=lam, mu=8.0, theta=theta, zeta=300.0, R=5.0, C=10.0, r=0.0)


def fee_case_params(R: float = 7.0, ratio: float = 0.0, f_e: float = 5.0, f_s: float = 0.0) -> ValidatedParams:
    """lambda = 1.3, mu = 1, theta = 1, zeta = 10, C = 1, refund = ratio * f_e."""
    return make_params(lam=1.3, mu=1.0, theta=1.0, zeta=10.0, R=R, C=1.0, f_e=f_e, f_s=f_s, r=ratio * f_e)


@pytest.fixture()
def params_factory():
    return make_params


@pytest.fixture()
def alternating():
    return alternating_params


@pytest.fixture()
def fast_server():
    return fast_server_params


@pytest.fixture()
def fee_case():
    return fee_case_params


# ------------------------------------------------------------------
# Brute-force oracle: the full generator truncated far into the tail
# ------------------------------------------------------------------
def dense_stationary(params: ValidatedParams, strategy: Strategy) -> tuple[np.ndarray, np.ndarray]:
    """p(n,0) for n = 0..N and p(n,1) for n = 0..n_s from one dense solve."""
    lam_q = params.lam * strategy.q
    rho = rho_minus(lam_q, params.mu, params.theta)
    n_s, n_e = strategy.n_s, strategy.n_e
    top = n_s + max(400, math.ceil(20.0 / (1.0 - rho)))

    size = (top + 1) + (n_s + 1)
    hidden = lambda n: n  # noqa: E731
    shown = lambda n: top + 1 + n  # noqa: E731
    gen = np.zeros((size, size))
    for n in range(top + 1):
        if n < top:
            gen[hidden(n), hidden(n + 1)] += lam_q
        if n >= 1:
            gen[hidden(n), hidden(n - 1)] += params.mu
        gen[hidden(n), shown(min(n, n_s))] += params.theta
    for n in range(n_s + 1):
        if n <= n_e - 1:
            gen[shown(n), shown(n + 1)] += params.lam
        if n >= 1:
            gen[shown(n), shown(n - 1)] += params.mu
        gen[shown(n), hidden(n)] += params.zeta
    gen[np.diag_indices(size)] = -gen.sum(axis=1)

    system = gen.T.copy()
    system[-1, :] = 1.0
    rhs = np.zeros(size)
    rhs[-1] = 1.0
    pi = np.linalg.solve(system, rhs)
    return pi[: top + 1], pi[top + 1 :]


@pytest.fixture()
def dense_oracle():
    return dense_stationary


@pytest.fixture()
def client() -> Iterator[TestClient]:
    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture()
def params_file(tmp_path):
    """Write a parameter document with the wire names and return its path."""

    def _write(params: ModelParams, name: str = "params.json") -> Path:
        path = tmp_path / name
        path.write_text(params.model_dump_json(by_alias=True), encoding="utf-8")
        return path

    return _write
