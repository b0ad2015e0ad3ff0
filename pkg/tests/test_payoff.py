from __future__ import annotations

import numpy as np
import pytest

from altq.model import strategy_for
from altq.payoff import conditional_benefit, unconditional_benefit
from altq.schemas import SolveMethod, Strategy
from altq.simulator import simulate_tagged


@pytest.fixture()
def unit_rates(params_factory):
    """mu = theta = 1, R = 4, C = 1, no fees, r = 0: n_e = n_s = 4."""
    return params_factory(theta=1.0, r=0.0)


def test_conditional_benefit_worked_examples(unit_rates):
    strategy = Strategy(n_e=4, n_s=4, q=0.5)
    assert conditional_benefit(0, strategy, unit_rates).value == pytest.approx(3.0, abs=1e-12)
    assert conditional_benefit(4, strategy, unit_rates).value == pytest.approx(-0.5, abs=1e-12)


def test_breakdown_components_add_up(fee_case):
    params = fee_case(10.0, 0.4, f_s=1.0)
    strategy = strategy_for(params, 0.5)
    for n in range(strategy.n_s + 20):
        parts = conditional_benefit(n, strategy, params)
        assert parts.value == pytest.approx(parts.reward - parts.fees - parts.waiting_cost + parts.refund, abs=1e-12)
        assert parts.waiting_cost >= 0.0


def test_conditional_benefit_strictly_decreasing_through_the_junction(alternating, fast_server, fee_case, params_factory):
    parameter_sets = [
        alternating(1.1, 0.5),
        alternating(2.3, 0.9),
        fast_server(7.0, 5.0),
        fee_case(7.0, 0.3),
        fee_case(15.0, 1.0),
        params_factory(theta=0.01, r=-1.0),
        params_factory(mu=3.0, theta=50.0, R=2.0, C=2.0, r=-5.0),
    ]
    for params in parameter_sets:
        strategy = strategy_for(params, 0.5)
        g = params.mu / (params.mu + params.theta)
        values = [conditional_benefit(n, strategy, params).value for n in range(strategy.n_s + 51)]
        for n, (a, b) in enumerate(zip(values, values[1:])):
            # deep in the bottom branch the step shrinks like g**k and drops below float resolution
            if g ** (n + 1 - strategy.n_s) > 1e-6:
                assert a - b > 1e-12, (params, n)
            else:
                assert a >= b, (params, n)


def test_bottom_branch_tends_to_certain_reneging(params_factory):
    params = params_factory(theta=1.0, r=-3.0)
    strategy = strategy_for(params, 0.5)
    far = conditional_benefit(10_000, strategy, params).value
    assert far == pytest.approx(params.r - params.f_e - params.C / params.theta, abs=1e-10)


def test_unconditional_benefit_strictly_decreasing_in_q(alternating, fast_server, fee_case):
    for params in (alternating(0.8, 0.5), alternating(2.3, 0.25), fast_server(10.0, 3.0), fee_case(10.0, 0.5)):
        values = [
            unconditional_benefit(strategy_for(params, float(q)), params) for q in np.linspace(0.0, 1.0, 11)
        ]
        assert all(a - b > 1e-12 for a, b in zip(values, values[1:])), params


def test_nearly_empty_system_sees_the_first_position(params_factory):
    params = params_factory(lam=1e-6)
    u = unconditional_benefit(strategy_for(params, 1.0), params)
    assert u == pytest.approx(params.R - params.C / params.mu, abs=1e-4)


def test_both_methods_agree_on_alternating_case(alternating):
    params = alternating(1.1, 0.5)
    strategy = strategy_for(params, 0.5)
    u_qbd = unconditional_benefit(strategy, params, SolveMethod.QBD)
    u_pgf = unconditional_benefit(strategy, params, SolveMethod.GENFUNC)
    assert abs(u_qbd - u_pgf) <= 1e-8 * params.money_scale
    assert unconditional_benefit(strategy, params, "both") == u_qbd


def test_tagged_customer_monte_carlo_matches_formula(unit_rates, alternating, fee_case, params_factory):
    parameter_sets = [
        unit_rates,
        alternating(1.1, 0.5),
        fee_case(10.0, 0.4),
        params_factory(theta=0.5, zeta=2.0, R=6.0, C=1.5, f_e=1.0, f_s=0.5, r=-2.0),
        params_factory(mu=2.0, theta=3.0, R=3.0, C=1.0, r=-4.0),
    ]
    for k, params in enumerate(parameter_sets):
        strategy = strategy_for(params, 0.5)
        n_s = strategy.n_s
        for n in sorted({0, max(n_s - 1, 0), n_s, n_s + 1, n_s + 10}):
            exact = conditional_benefit(n, strategy, params).value
            estimate = simulate_tagged(n, strategy, params, reps=100_000, seed=1000 * k + n)
            assert estimate.covers(exact, k=4.0, floor=1e-12), (k, n, exact, estimate)


def test_tagged_customer_at_the_threshold(unit_rates):
    strategy = strategy_for(unit_rates, 0.5)
    estimate = simulate_tagged(4, strategy, unit_rates, reps=100_000, seed=5)
    assert estimate.covers(-0.5, k=4.0)
