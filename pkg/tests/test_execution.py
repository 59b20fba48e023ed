import numpy as np
import pytest

from lobvol.execution import (ACModel, ExecutionOutcome, ExecutionSpec,
                              ac_expected_cost, ac_variance, run_vwap,
                              variance_ratio_experiment)


class TestExecutionSpec:
    def test_non_integer_slice_count_rejected(self):
        with pytest.raises(ValueError):
            ExecutionSpec(total_shares=60, horizon=1000.0, tau=600.0)

    def test_schedule_must_sum_to_total(self):
        with pytest.raises(ValueError):
            ExecutionSpec(total_shares=10, horizon=20.0, tau=10.0,
                          schedule=(4.0, 4.0))

    def test_negative_slice_rejected(self):
        with pytest.raises(ValueError):
            ExecutionSpec(total_shares=0, horizon=20.0, tau=10.0,
                          schedule=(-1.0, 1.0))

    def test_uniform_default(self):
        spec = ExecutionSpec(total_shares=60, horizon=12000.0, tau=600.0)
        assert spec.n_slices == 20
        assert spec.uniform
        assert np.allclose(spec.slices, 3.0)
        assert spec.slice_times[0] == 600.0 and spec.slice_times[-1] == 12000.0


class TestOutcome:
    def test_shortfall_identity_enforced(self):
        with pytest.raises(ValueError):
            ExecutionOutcome(fills=((101.0, 10.0),), p0=100.0, shortfall=0.0)

    def test_consistent_outcome_accepted(self):
        out = ExecutionOutcome(fills=((101.0, 10.0),), p0=100.0, shortfall=10.0)
        assert out.shortfall == 10.0


class TestACVariance:
    def test_single_slice_closed_form(self):
        # N=1: variance of one fill at time tau is S^2 sigma^2 tau
        model = ACModel(sigma2=0.3)
        spec = ExecutionSpec(total_shares=7, horizon=5.0, tau=5.0)
        assert ac_variance(model, spec) == pytest.approx(0.3 * 5.0 * 49.0)

    def test_uniform_closed_form_matches_quadratic_form(self):
        model = ACModel(sigma2=1.7e-5)
        spec = ExecutionSpec(total_shares=60, horizon=12000.0, tau=600.0)
        N, tau = spec.n_slices, spec.tau
        v = spec.slices
        B = np.minimum.outer(np.arange(1, N + 1), np.arange(1, N + 1))
        direct = model.sigma2 * tau * v @ B @ v
        assert ac_variance(model, spec) == pytest.approx(direct, rel=1e-14)

    def test_random_schedules_match_quadratic_form(self):
        rng = np.random.default_rng(4)
        model = ACModel(sigma2=2.5e-4)
        for _ in range(20):
            N = int(rng.integers(2, 12))
            v = rng.random(N)
            v = v / v.sum() * 10.0
            spec = ExecutionSpec(total_shares=10, horizon=N * 60.0, tau=60.0,
                                 schedule=tuple(v))
            B = np.minimum.outer(np.arange(1, N + 1), np.arange(1, N + 1))
            direct = model.sigma2 * 60.0 * v @ B @ v
            assert ac_variance(model, spec) == pytest.approx(direct, rel=1e-12)

    def test_expected_cost_algebra(self):
        model = ACModel(sigma2=0.0, permanent=2.0, temporary=3.0)
        spec = ExecutionSpec(total_shares=6, horizon=20.0, tau=10.0,
                             schedule=(2.0, 4.0))
        # (perm+temp) * (4+16) + perm * ((36-20)/2)
        assert ac_expected_cost(model, spec) == pytest.approx(5.0 * 20.0 + 2.0 * 8.0)


class TestRunVWAP:
    def test_surrogate_shortfall_identity(self):
        model = ACModel(sigma2=1e-4)
        spec = ExecutionSpec(total_shares=60, horizon=12000.0, tau=600.0)
        out = run_vwap(model, spec, seed=5)
        total = sum(p * v for p, v in out.fills)
        assert out.shortfall == pytest.approx(total - 60 * model.p0)

    def test_surrogate_deterministic(self):
        model = ACModel(sigma2=1e-4)
        spec = ExecutionSpec(total_shares=60, horizon=12000.0, tau=600.0)
        assert run_vwap(model, spec, seed=5) == run_vwap(model, spec, seed=5)

    def test_frozen_book_pays_half_spread(self, qr_default):
        spec = ExecutionSpec(total_shares=10, horizon=1200.0, tau=600.0)
        out = run_vwap(qr_default, spec, seed=6, frozen_book=True)
        ask = out.fills[0][0]
        assert out.shortfall == pytest.approx(10 * (ask - out.p0))

    def test_book_execution_fills_full_size(self, qr_default):
        spec = ExecutionSpec(total_shares=10, horizon=1200.0, tau=600.0)
        out = run_vwap(qr_default, spec, seed=7)
        assert out.diagnostics["filled"] == 10
        assert sum(v for _, v in out.fills) == 10
        # a buy program cannot fill below the initial best bid region and
        # pays at least something relative to a frictionless mid
        assert all(p > 0 for p, _ in out.fills)

    def test_fractional_sizes_rejected(self, qr_default):
        spec = ExecutionSpec(total_shares=5, horizon=20.0, tau=10.0,
                             schedule=(2.5, 2.5))
        with pytest.raises(ValueError):
            run_vwap(qr_default, spec, seed=0)

    def test_unknown_model_rejected(self):
        spec = ExecutionSpec(total_shares=2, horizon=20.0, tau=10.0)
        with pytest.raises(TypeError):
            run_vwap("book", spec)


@pytest.mark.slow
def test_surrogate_variance_matches_prediction():
    # law of large numbers: empirical Var[shortfall] vs the closed form
    model = ACModel(sigma2=4e-4)
    spec = ExecutionSpec(total_shares=60, horizon=12000.0, tau=600.0)
    sf = np.array([run_vwap(model, spec, seed=3000 + i).shortfall
                   for i in range(2000)])
    assert float(np.var(sf, ddof=1)) == pytest.approx(ac_variance(model, spec),
                                                      rel=0.10)


@pytest.mark.slow
def test_variance_ratio_identical_models_near_one():
    model = ACModel(sigma2=2e-4)
    spec = ExecutionSpec(total_shares=60, horizon=12000.0, tau=600.0)
    empirical, predicted = variance_ratio_experiment(
        model, model, spec, n_runs=400, seed=8,
        n_pred_paths=4, pred_horizon=7200.0)
    assert empirical == pytest.approx(1.0, abs=0.25)
    assert predicted == pytest.approx(1.0, abs=0.10)


def test_variance_ratio_validation():
    model = ACModel(sigma2=1e-4)
    spec = ExecutionSpec(total_shares=2, horizon=20.0, tau=10.0)
    with pytest.raises(ValueError):
        variance_ratio_experiment(model, model, spec, n_runs=10)
    with pytest.raises(KeyError):
        variance_ratio_experiment(model, model, spec, n_runs=30,
                                  spot_estimator_id="spot.bogus")
