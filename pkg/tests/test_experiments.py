from __future__ import annotations

import io
import math
from itertools import groupby

import pytest

from altq.errors import InvalidSweep
from altq.experiments import (
    CSV_COLUMNS,
    Shape,
    detect_shape,
    gamma_rates,
    parse_grid,
    point_params,
    rows_to_frame,
    run_sweep,
    shape_table,
    write_csv,
)
from altq.schemas import SweepFamily, SweepSpec


def _spec(family: SweepFamily, base, grid, **extra) -> SweepSpec:
    return SweepSpec(family=family, base=base, grid=grid, **extra)


def test_parse_grid_handles_ranges_and_lists():
    grid = parse_grid("0.05:0.95:0.05")
    assert len(grid) == 19
    assert grid[0] == 0.05 and grid[-1] == 0.95
    assert grid[2] == 0.15
    assert parse_grid("0:1:0.25") == [0.0, 0.25, 0.5, 0.75, 1.0]
    assert parse_grid("1, 2.5,4") == [1.0, 2.5, 4.0]
    for bad in ("1:0:0.1", "0:1:0", "a:b:c", "0:1"):
        with pytest.raises(InvalidSweep):
            parse_grid(bad)


def test_detect_shape_examples():
    assert detect_shape([1, 2, 3]) is Shape.INCREASING
    assert detect_shape([1, 3, 2]) is Shape.UNIMODAL
    assert detect_shape([1, 3, 2, 4]) is Shape.OTHER
    assert detect_shape([3, 2, 2, 1]) is Shape.DECREASING
    assert detect_shape([1, 1 + 1e-12, 1]) is Shape.INCREASING
    assert detect_shape([2, 1, 3]) is Shape.OTHER
    with pytest.raises(ValueError):
        detect_shape([1, 2])


def test_gamma_rates_keep_cycle_and_fraction():
    for gamma in parse_grid("0.02:0.98:0.02"):
        theta, zeta = gamma_rates(0.1, gamma)
        assert 1 / theta + 1 / zeta == pytest.approx(0.1, rel=1e-12)
        assert theta / (theta + zeta) == pytest.approx(gamma, rel=1e-12)


def test_spec_checks_reject_bad_sweeps(alternating):
    base = alternating(1.1, 0.5)
    with pytest.raises(InvalidSweep):
        run_sweep(_spec(SweepFamily.GAMMA, base, [0.1, 0.5]))
    with pytest.raises(InvalidSweep):
        run_sweep(_spec(SweepFamily.GAMMA, base, [0.0, 0.5], cycle=0.1))
    with pytest.raises(InvalidSweep):
        run_sweep(_spec(SweepFamily.REFUND, base, [0.5, 0.2]))
    with pytest.raises(InvalidSweep):
        run_sweep(_spec(SweepFamily.THETA, base, [], zeta=1.0))
    with pytest.raises(InvalidSweep):
        run_sweep(_spec(SweepFamily.FEESPLIT, base, [1.0, 2.0], total_fee=3.0))


def test_gamma_sweep_rows_carry_derived_rates(alternating):
    rows = run_sweep(_spec(SweepFamily.GAMMA, alternating(1.1, 0.5), [0.25, 0.5, 0.75], cycle=0.1))
    assert [row.value for row in rows] == [0.25, 0.5, 0.75]
    for row in rows:
        assert row.error is None
        assert 1 / row.theta + 1 / row.zeta == pytest.approx(0.1, rel=1e-12)
        assert (row.n_e, row.n_s) == (4, 34)


def test_gamma_sweep_shapes_follow_traffic(alternating):
    grid = parse_grid("0.05:0.95:0.05")
    light = run_sweep(_spec(SweepFamily.GAMMA, alternating(0.8, 0.5), grid, cycle=0.1))
    assert detect_shape([row.q_e for row in light]) is Shape.INCREASING

    heavy = run_sweep(_spec(SweepFamily.GAMMA, alternating(2.3, 0.5), grid, cycle=0.1))
    shapes = shape_table(heavy)
    assert shapes["q_e"] is Shape.DECREASING
    assert shapes["mu_e"] in (Shape.INCREASING, Shape.UNIMODAL)


def test_theta_sweep_throughput_rises_then_may_saturate(fast_server):
    for lam in (7.0, 10.0):
        rows = run_sweep(_spec(SweepFamily.THETA, fast_server(lam, 1.0), parse_grid("0.5:9.5:0.5"), zeta=300.0))
        assert all(row.error is None for row in rows)
        assert all((row.n_e, row.n_s) == (4, 4) for row in rows)
        assert detect_shape([row.mu_e for row in rows]) in (Shape.INCREASING, Shape.UNIMODAL)


def test_refund_sweep_jumps_where_reneging_threshold_moves(fee_case):
    rows = run_sweep(_spec(SweepFamily.REFUND, fee_case(7.0, 0.0), parse_grid("0:1:0.05")))
    thresholds = [row.n_s for row in rows]
    assert thresholds[0] == 7 and thresholds[-1] == 2
    assert all(a >= b for a, b in zip(thresholds, thresholds[1:]))
    # each n_s value occupies one contiguous block of refund ratios
    blocks = [key for key, _ in groupby(thresholds)]
    assert len(blocks) == len(set(blocks))
    assert set(blocks) == set(range(2, 8))

    for _, block in groupby(rows, key=lambda row: row.n_s):
        q_values = [row.q_e for row in block]
        assert all(b - a >= -1e-9 for a, b in zip(q_values, q_values[1:]))

    for before, after in zip(rows, rows[1:]):
        if before.n_s != after.n_s:
            assert abs(after.EN - before.EN) > 1e-9
            assert abs(after.mu_e - before.mu_e) > 1e-9


def test_arrival_sweep_cross_lambda_claims(alternating):
    rows = run_sweep(_spec(SweepFamily.ARRIVAL, alternating(1.1, 0.5), parse_grid("0.6:2.4:0.2")))
    assert detect_shape([row.q_e for row in rows]) in (Shape.DECREASING,)
    assert detect_shape([row.mu_e for row in rows]) is Shape.INCREASING


def test_cycle_and_feesplit_families(alternating, fee_case):
    rows = run_sweep(_spec(SweepFamily.CYCLE, alternating(1.1, 0.5), [0.1, 1.0, 10.0], gamma=0.5))
    for row in rows:
        assert row.theta == pytest.approx(row.zeta)
        assert 1 / row.theta + 1 / row.zeta == pytest.approx(row.value, rel=1e-12)

    spec = _spec(SweepFamily.FEESPLIT, fee_case(7.0, 0.0), [1.0, 3.0, 5.0], total_fee=5.0, refund_ratio=0.4)
    for value, row in zip(spec.grid, run_sweep(spec)):
        params = point_params(spec, value)
        assert (params.f_e, params.f_s, params.r) == pytest.approx((value, 5.0 - value, 0.4 * value))
        assert row.r == pytest.approx(0.4 * value)
        assert row.n_e == 2
        assert row.error is None


def test_failing_points_keep_the_sweep_going(alternating):
    rows = run_sweep(_spec(SweepFamily.THETA, alternating(1.1, 0.5), [0.0, 1.0, 2.0], zeta=1.0))
    assert rows[0].error is not None and rows[0].error.startswith("NonPositiveRate")
    assert rows[0].q_e is None
    assert all(row.error is None for row in rows[1:])

    capped = run_sweep(_spec(SweepFamily.ARRIVAL, alternating(1.1, 0.5).replace(r=-2e5), [1.0, 2.0]))
    assert all(row.error.startswith("ThresholdCapExceeded") for row in capped)


def test_parallel_sweep_keeps_grid_order(alternating):
    spec = _spec(SweepFamily.GAMMA, alternating(2.3, 0.5), parse_grid("0.1:0.9:0.1"), cycle=0.1)
    assert run_sweep(spec, workers=3) == run_sweep(spec, workers=1)


def test_csv_has_fixed_header_and_round_trip_digits(alternating):
    rows = run_sweep(_spec(SweepFamily.THETA, alternating(1.1, 0.5), [0.0, 1.0 / 3.0], zeta=20.0))
    buffer = io.StringIO()
    write_csv(rows, buffer)
    lines = buffer.getvalue().split("\n")
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[-1] == ""
    assert len(lines) == 4

    first = lines[1].split(",")
    assert first[:2] == ["0", "0"]
    assert first[CSV_COLUMNS.index("n_e")] == ""
    assert first[-1].startswith("NonPositiveRate")

    second = dict(zip(CSV_COLUMNS, lines[2].split(",")))
    assert float(second["value"]) == 1.0 / 3.0
    assert second["n_e"] == "4" and second["n_s"] == "34"
    assert float(second["q_e"]) == rows[1].q_e


def test_frame_columns_and_integer_thresholds(alternating):
    rows = run_sweep(_spec(SweepFamily.GAMMA, alternating(1.1, 0.5), [0.5], cycle=0.1))
    frame = rows_to_frame(rows)
    assert list(frame.columns) == CSV_COLUMNS
    assert str(frame["n_e"].dtype) == "Int64"
    assert not math.isnan(frame["S_e"].iloc[0])
