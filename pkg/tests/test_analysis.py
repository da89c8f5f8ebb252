"""
误差分析测试: 上界、收敛趋势、基线比较与伪逆计数
"""

import numpy as np
import pytest
from pydantic import ValidationError

from pwi.analysis import (
    BuildProtocol,
    ConvergenceRow,
    ErrorReport,
    compare_filters,
    convergence_study,
    error_bound,
    per_signal_error,
    run_averaging,
    run_gol,
    run_piecewise,
    trend_holds,
)
from pwi.errors import ConfigurationError, InvalidInputError
from pwi.noise import apply_noise
from pwi.signal_model import (
    SCHEDULE_STEPS,
    LipschitzEstimates,
    SignalSet,
    TimeGrid,
    duplicate_rows,
    estimate_lipschitz,
    gen_lipschitz_set,
    gen_two_cluster_pair,
    make_uniform_partition,
    stepped_partition,
)


def _row(p, mean):
    return ConvergenceRow(p=p, mean=mean, max=mean, pinv_calls=p - 1, wall_time=0.0)


# ======================== 报告 ========================

def test_per_signal_error_examples():
    assert per_signal_error(np.eye(2), np.eye(2)) == 0.0
    assert per_signal_error(np.zeros((2, 2)), np.array([[1.0, 2.0], [3.0, 4.0]])) == 30.0
    with pytest.raises(InvalidInputError):
        per_signal_error(np.zeros((2, 2)), np.zeros((2, 3)))


def test_error_report_aggregates():
    r = ErrorReport.from_errors("x", [1.0, 3.0], pinv_calls=2, wall_time=0.1)
    assert r.mean == 2.0 and r.max == 3.0
    with pytest.raises(ValidationError):
        ErrorReport(label="x", per_signal=[1.0, 3.0], mean=5.0, max=3.0, pinv_calls=0, wall_time=0.0)
    with pytest.raises(ValidationError):
        ErrorReport.from_errors("x", [-1.0], pinv_calls=0, wall_time=0.0)


# ======================== 误差上界 ========================

@pytest.mark.parametrize("p", [5, 9, 17])
def test_time_averaged_error_within_bound(lipschitz_pair, oracle_protocol, p):
    x, y = lipschitz_pair
    part = make_uniform_partition(x.n_points, p)
    filt, _, report = run_piecewise(x, y, part, oracle_protocol)
    lip = estimate_lipschitz(x, y, part, x.at(1))
    bound = error_bound(lip, filt, None, part.delta_t(x.grid), report.per_signal, x.grid)
    assert len(bound.per_interval_terms) == p - 1
    assert bound.empirical_error == pytest.approx(report.mean / x.q)
    assert bound.empirical_error <= bound.bound


def test_frobenius_bound_is_not_tighter(lipschitz_pair, oracle_protocol):
    x, y = lipschitz_pair
    part = make_uniform_partition(x.n_points, 5)
    filt, _, report = run_piecewise(x, y, part, oracle_protocol)
    lip = estimate_lipschitz(x, y, part, x.at(1))
    dt = part.delta_t(x.grid)
    spectral = error_bound(lip, filt, None, dt, report.per_signal, x.grid)
    frobenius = error_bound(lip, filt, None, dt, report.per_signal, x.grid, norm="frobenius")
    assert frobenius.bound >= spectral.bound


def test_bound_with_zero_gain_is_lipschitz_plus_trace(lipschitz_pair):
    x, y = lipschitz_pair
    protocol = BuildProtocol(initial="oracle", estimator="prior")
    part = make_uniform_partition(x.n_points, 5)
    filt, _, report = run_piecewise(x, y, part, protocol)
    assert all(not np.any(s.b) for s in filt.subfilters)
    lip = estimate_lipschitz(x, y, part, x.at(1))
    dt = part.delta_t(x.grid)
    bound = error_bound(lip, filt, None, dt, report.per_signal, x.grid)
    expected = max(
        lam * d + float(np.trace(s.cov.e_zz))
        for lam, d, s in zip(lip.lambdas, dt, filt.subfilters)
    )
    assert bound.bound == pytest.approx(expected, rel=1e-12)
    assert all(t.explained == 0.0 for t in bound.per_interval_terms)


def test_bound_of_constant_signals_is_zero(rng, oracle_protocol):
    c = rng.standard_normal((3, 8))
    x = SignalSet.from_matrices(TimeGrid.uniform(5), [c] * 5)
    part = make_uniform_partition(5, 3)
    filt, _, report = run_piecewise(x, x, part, oracle_protocol)
    lip = estimate_lipschitz(x, x, part, x.at(1))
    bound = error_bound(lip, filt, None, part.delta_t(x.grid), report.per_signal, x.grid)
    assert bound.bound == pytest.approx(0.0, abs=1e-12)
    assert bound.empirical_error == pytest.approx(0.0, abs=1e-12)


def test_bound_grows_with_lipschitz_constants_and_interval_length(lipschitz_pair, oracle_protocol):
    x, y = lipschitz_pair
    part = make_uniform_partition(x.n_points, 5)
    filt, _, report = run_piecewise(x, y, part, oracle_protocol)
    lip = estimate_lipschitz(x, y, part, x.at(1))
    dt = part.delta_t(x.grid)

    def bound(l, d):
        return error_bound(l, filt, None, d, report.per_signal, x.grid).bound

    base = bound(lip, dt)
    larger_lambda = LipschitzEstimates(lambdas=[2 * v for v in lip.lambdas], gammas=lip.gammas, c1=lip.c1)
    larger_gamma = LipschitzEstimates(lambdas=lip.lambdas, gammas=[2 * v for v in lip.gammas], c1=lip.c1)
    assert bound(larger_lambda, dt) >= base
    assert bound(larger_gamma, dt) >= base
    assert bound(lip, 2 * dt) >= base


def test_bound_rejects_wrong_interval_count(lipschitz_pair, oracle_protocol):
    x, y = lipschitz_pair
    part = make_uniform_partition(x.n_points, 5)
    filt, _, report = run_piecewise(x, y, part, oracle_protocol)
    lip = estimate_lipschitz(x, y, make_uniform_partition(x.n_points, 9), x.at(1))
    with pytest.raises(InvalidInputError):
        error_bound(lip, filt, None, part.delta_t(x.grid), report.per_signal, x.grid)


# ======================== 收敛 ========================

def test_trend_holds_rules():
    assert trend_holds([_row(5, 1.0), _row(9, 1.04), _row(17, 0.9)])
    assert not trend_holds([_row(5, 1.0), _row(9, 1.2), _row(17, 0.9)])
    assert not trend_holds([_row(5, 1.0), _row(9, 1.0)])
    assert trend_holds([_row(2, 1.0)])


def test_error_decreases_with_more_knots(lipschitz_pair, oracle_protocol):
    x, y = lipschitz_pair
    rows = convergence_study(x, y, [5, 9, 17, 33], oracle_protocol)
    assert [r.p for r in rows] == [5, 9, 17, 33]
    assert [r.pinv_calls for r in rows] == [4, 8, 16, 32]
    assert rows[-1].mean < rows[0].mean
    assert trend_holds(rows, slack=0.05)


def test_single_p_gives_single_row(tiny_pair, oracle_protocol):
    x, y = tiny_pair
    rows = convergence_study(x, y, [2], oracle_protocol)
    assert len(rows) == 1 and rows[0].p == 2 and rows[0].pinv_calls == 1


def test_two_knot_row_matches_direct_build(tiny_pair, oracle_protocol):
    x, y = tiny_pair
    row = convergence_study(x, y, [2], oracle_protocol)[0]
    filt, estimates, report = run_piecewise(x, y, make_uniform_partition(x.n_points, 2), oracle_protocol)
    assert filt.partition.knot_indices == (1, x.n_points)
    assert row.mean == pytest.approx(report.mean, rel=1e-12)
    assert row.max == pytest.approx(report.max, rel=1e-12)
    direct = [per_signal_error(x.at(k), filt.apply(y.at(k), k)) for k in range(1, x.n_points + 1)]
    assert row.mean == pytest.approx(np.mean(direct), rel=1e-12)


def test_schedule_mixes_counts_and_partitions(tiny_pair, oracle_protocol):
    x, y = tiny_pair
    rows = convergence_study(x, y, [3, stepped_partition(x.n_points, 2)], oracle_protocol)
    assert [r.p for r in rows] == [3, stepped_partition(x.n_points, 2).p]


# ======================== 比较 ========================

def test_pinv_counts_per_filter(tiny_pair, oracle_protocol):
    x, y = tiny_pair
    part = make_uniform_partition(x.n_points, 4)
    reports = compare_filters(x, y, part, oracle_protocol)
    assert [r.label for r in reports] == ["piecewise p=4", "gol", "averaging"]
    assert [r.pinv_calls for r in reports] == [3, x.n_points, 1]
    assert all(r.wall_time >= 0 for r in reports)


def test_empty_baselines_give_piecewise_only(tiny_pair, oracle_protocol):
    x, y = tiny_pair
    reports = compare_filters(x, y, make_uniform_partition(x.n_points, 3), oracle_protocol, baselines=())
    assert len(reports) == 1


def test_unknown_baseline_rejected(tiny_pair, oracle_protocol):
    x, y = tiny_pair
    with pytest.raises(ConfigurationError):
        compare_filters(x, y, make_uniform_partition(x.n_points, 3), oracle_protocol, baselines=("kalman",))


def test_piecewise_beats_averaging_on_two_clusters(oracle_protocol):
    x, y = gen_two_cluster_pair(8, 64, 129, 0.05, seed=11)
    reports = compare_filters(x, y, make_uniform_partition(x.n_points, 17), oracle_protocol)
    by_label = {r.label: r for r in reports}
    assert by_label["piecewise p=17"].mean < by_label["averaging"].mean


def test_noise_free_observations_give_near_zero_errors(tiny_pair, oracle_protocol):
    x, _ = tiny_pair
    scale = float(np.mean([np.sum(x.at(k) ** 2) for k in range(1, x.n_points + 1)]))
    reports = compare_filters(x, x, make_uniform_partition(x.n_points, 3), oracle_protocol)
    assert [r.label for r in reports] == ["piecewise p=3", "gol", "averaging"]
    for r in reports:
        assert r.max <= 1e-10 * scale


@pytest.mark.parametrize("threads", [0, -2])
def test_protocol_rejects_non_positive_threads(threads):
    with pytest.raises(ValidationError):
        BuildProtocol(threads=threads)


def test_all_filters_exist_for_singular_observations(lipschitz_pair, oracle_protocol):
    x, y = lipschitz_pair
    y_dup = duplicate_rows(y, 3)
    reports = compare_filters(x, y_dup, make_uniform_partition(x.n_points, 9), oracle_protocol)
    for r in reports:
        assert np.all(np.isfinite(r.per_signal))


def test_reconstructed_protocol_runs(tiny_pair):
    x, y = tiny_pair
    _, estimates, report = run_piecewise(x, y, make_uniform_partition(x.n_points, 3), BuildProtocol())
    assert len(estimates) == x.n_points
    assert np.isfinite(report.mean)


def test_given_initial_requires_matrix(tiny_pair):
    x, y = tiny_pair
    with pytest.raises(ConfigurationError):
        run_piecewise(x, y, make_uniform_partition(x.n_points, 3), BuildProtocol(initial="given"))


def test_additive_estimator_requires_noise_power(tiny_pair):
    x, y = tiny_pair
    with pytest.raises(ConfigurationError):
        run_piecewise(x, y, make_uniform_partition(x.n_points, 3), BuildProtocol(estimator="additive"))


def test_additive_estimator_uses_only_observations(lipschitz_pair):
    x, y = lipschitz_pair
    protocol = BuildProtocol(initial="oracle", estimator="additive", xi_power=0.05**2)
    _, _, report = run_piecewise(x, y, make_uniform_partition(x.n_points, 9), protocol)
    assert np.isfinite(report.mean)
    assert report.pinv_calls == 8


def test_prior_estimator_holds_initial_estimate(tiny_pair):
    x, y = tiny_pair
    protocol = BuildProtocol(initial="oracle", estimator="prior")
    filt, estimates, _ = run_piecewise(x, y, make_uniform_partition(x.n_points, 3), protocol)
    for est in estimates:
        np.testing.assert_array_equal(est, x.at(1))


def test_gol_and_averaging_runners(tiny_pair, oracle_protocol):
    x, y = tiny_pair
    gol_est, gol = run_gol(x, y, oracle_protocol)
    avg_est, avg = run_averaging(x, y, oracle_protocol)
    assert len(gol_est) == len(avg_est) == x.n_points
    # 逐信号拟合的 GOL 不会比整体的平均滤波器差
    assert gol.mean <= avg.mean


# ======================== 大规模 ========================

@pytest.mark.slow
def test_large_ensemble_stepped_schedules():
    x = gen_lipschitz_set(116, 256, 141, 1.0, seed=7, column_coherence=4.0, offset=5.0)
    y = apply_noise(x, "hadamard-randn-rand", seed=7)
    schedule = [stepped_partition(141, s) for s in SCHEDULE_STEPS]
    rows = convergence_study(x, y, schedule, BuildProtocol())
    assert [r.p for r in rows] == [5, 8, 15, 29]
    assert [r.pinv_calls for r in rows] == [4, 7, 14, 28]
    assert all(np.isfinite(r.mean) for r in rows)
    assert trend_holds(rows, slack=0.05)
