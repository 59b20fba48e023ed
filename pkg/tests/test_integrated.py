import math

import numpy as np
import pytest

from lobvol.book import LogPriceGrid
from lobvol.integrated import (INTEGRATED, IVEstimate, iv_alternation,
                               iv_bias_corrected, iv_fourier, iv_kernel,
                               iv_mle, iv_range, iv_realized, iv_two_scale,
                               iv_unified, select_fourier_cutoff)
from lobvol.surrogate import bachelier_log_grid
from lobvol.tuning import (EstimatorParams, TuningInputs, realized_variance,
                           subsampled_rv)

SIGMA2, OMEGA = 1e-8, 5e-5

ALL_IDS = ("iv.rv", "iv.bc", "iv.fourier", "iv.mle", "iv.two_scale",
           "iv.multi_scale", "iv.kernel", "iv.preavg", "iv.alternation",
           "iv.range", "iv.unified")

# explicit knobs so invariance tests exercise fixed configurations
FIXED = {
    "iv.rv": EstimatorParams(),
    "iv.bc": EstimatorParams(q=5),
    "iv.fourier": EstimatorParams(N=200),
    "iv.mle": EstimatorParams(),
    "iv.two_scale": EstimatorParams(q=10),
    "iv.multi_scale": EstimatorParams(q=8),
    "iv.kernel": EstimatorParams(q=10),
    "iv.preavg": EstimatorParams(h=60),
    "iv.alternation": EstimatorParams(),
    "iv.range": EstimatorParams(q=20),
    "iv.unified": EstimatorParams(q1=5, m=3),
}


def _tuning_for(grid):
    n = grid.n
    return TuningInputs(iv_hat=SIGMA2 * n, iq_hat=(SIGMA2 * n) ** 2,
                        omega2_hat=OMEGA**2, n=n)


def test_registry_complete():
    assert tuple(sorted(INTEGRATED)) == tuple(sorted(ALL_IDS))
    for key, fn in INTEGRATED.items():
        assert callable(fn)


def test_nonfinite_estimate_rejected():
    with pytest.raises(ValueError):
        IVEstimate(value=math.nan, estimator_id="x", params_used=EstimatorParams())


def test_too_short_grid_rejected():
    g = LogPriceGrid(values=np.zeros(5), mesh=1.0)
    for fn in INTEGRATED.values():
        with pytest.raises(ValueError):
            fn(g)


def test_constant_grid_gives_zero():
    g = LogPriceGrid(values=np.full(4000, math.log(100.0)), mesh=1.0)
    for key, fn in INTEGRATED.items():
        assert abs(fn(g).value) < 1e-15, key


def test_shift_invariance(noisy_grid):
    shifted = LogPriceGrid(values=noisy_grid.values + 0.73, mesh=noisy_grid.mesh)
    for key, fn in INTEGRATED.items():
        a = fn(noisy_grid).value
        b = fn(shifted).value
        assert b == pytest.approx(a, rel=1e-8), key


def test_scale_by_c_scales_estimate_by_c2(noisy_grid):
    c = 3.7
    t = _tuning_for(noisy_grid)
    scaled = LogPriceGrid(values=noisy_grid.values * c, mesh=noisy_grid.mesh)
    t_scaled = TuningInputs(iv_hat=t.iv_hat * c**2, iq_hat=t.iq_hat * c**4,
                            omega2_hat=t.omega2_hat * c**2, n=t.n)
    for key, fn in INTEGRATED.items():
        a = fn(noisy_grid, tuning=t, overrides=FIXED[key]).value
        b = fn(scaled, tuning=t_scaled, overrides=FIXED[key]).value
        assert b == pytest.approx(c**2 * a, rel=1e-6), key


def test_noise_free_unbiasedness(clean_grids):
    # range and unified carry discretization bias that only fades at the
    # full-day sample size; they get their own full-scale test below
    truth = SIGMA2 * clean_grids[0].n
    for key, fn in INTEGRATED.items():
        if key in ("iv.range", "iv.unified"):
            continue
        vals = np.array([fn(g).value for g in clean_grids])
        rel_bias = vals.mean() / truth - 1.0
        assert abs(rel_bias) < 0.05, (key, rel_bias)


def test_noise_free_unbiasedness_full_scale_block_estimators():
    n, n_paths = 23400, 40
    truth = SIGMA2 * n
    grids = [bachelier_log_grid(SIGMA2, n, seed=300 + i) for i in range(n_paths)]
    for key in ("iv.range", "iv.unified"):
        vals = np.array([INTEGRATED[key](g).value for g in grids])
        assert abs(vals.mean() / truth - 1.0) < 0.05, key


def test_rv_noise_bias_matches_analytic(noisy_grids):
    n = noisy_grids[0].n
    truth = SIGMA2 * n
    vals = np.array([iv_realized(g).value for g in noisy_grids])
    expected = truth + 2.0 * n * OMEGA**2
    se = vals.std(ddof=1) / math.sqrt(len(vals))
    assert abs(vals.mean() - expected) < 3.0 * se


def test_robust_estimators_shed_noise(noisy_grids):
    truth = SIGMA2 * noisy_grids[0].n
    for key in ("iv.two_scale", "iv.preavg", "iv.kernel", "iv.fourier", "iv.mle"):
        vals = np.array([INTEGRATED[key](g).value for g in noisy_grids])
        assert abs(vals.mean() / truth - 1.0) < 0.15, key


def test_fourier_nyquist_matches_rv(clean_grid):
    n = clean_grid.n
    est = iv_fourier(clean_grid, overrides=EstimatorParams(N=n // 2))
    assert est.value == pytest.approx(realized_variance(clean_grid.values), rel=0.05)


def test_fourier_cutoff_pushes_to_nyquist_without_noise():
    assert select_fourier_cutoff(20000, 1e-4, 0.0) == 10000


def test_fourier_cutoff_shrinks_with_noise():
    assert select_fourier_cutoff(20000, 1e-4, 1e-8) < \
        select_fourier_cutoff(20000, 1e-4, 1e-10)


def test_mle_recovers_ma1_structure(noisy_grid):
    est = iv_mle(noisy_grid)
    assert est.diagnostics["phi"] < -0.05
    truth = SIGMA2 * noisy_grid.n
    assert est.value == pytest.approx(truth, rel=0.2)


def test_kernel_q1_hand_formula(clean_grid):
    r = np.diff(clean_grid.values)
    est = iv_kernel(clean_grid, overrides=EstimatorParams(q=1))
    # flat-top weight at lag 1 is k(0) = 1
    expect = float(np.sum(r**2) + 2.0 * np.sum(r[:-1] * r[1:]))
    assert est.value == pytest.approx(expect, rel=1e-12)


def test_two_scale_kills_pure_noise():
    rng = np.random.default_rng(3)
    g = LogPriceGrid(values=rng.standard_normal(20001) * OMEGA, mesh=1.0)
    t = TuningInputs(iv_hat=0.0, iq_hat=0.0, omega2_hat=OMEGA**2, n=20000)
    est = iv_two_scale(g, tuning=t, overrides=EstimatorParams(q=40))
    rv = realized_variance(g.values)
    assert abs(est.value) < 0.02 * rv


def test_alternating_path_alternation_is_zero():
    vals = math.log(100.0) + 1e-4 * np.tile([0.0, 1.0], 50)[:100]
    g = LogPriceGrid(values=vals, mesh=1.0)
    est = iv_alternation(g)
    assert est.value == 0.0
    assert est.diagnostics["n_c"] == 0


def test_monotone_path_alternation_falls_back_to_rv():
    vals = math.log(100.0) + 1e-5 * np.arange(100.0)
    g = LogPriceGrid(values=vals, mesh=1.0)
    est = iv_alternation(g)
    assert est.diagnostics.get("fallback") == "no alternations"
    assert est.value == pytest.approx(realized_variance(vals))


def test_range_matches_discrete_walk_oracle():
    # a q-step Gaussian walk has a smaller mean squared range than the
    # continuous-limit value 4 log(2) q sigma^2, so compare the estimator
    # mean against a brute-force oracle for the discrete block range
    n, q, n_paths = 2000, 20, 200
    rng = np.random.default_rng(77)
    steps = rng.standard_normal((200_000, q)) * math.sqrt(SIGMA2)
    walks = np.concatenate([np.zeros((200_000, 1)), np.cumsum(steps, axis=1)],
                           axis=1)
    r2 = (walks.max(axis=1) - walks.min(axis=1)) ** 2
    nb = n // q
    expect = nb * r2.mean() / (4.0 * math.log(2.0)) * (n / (nb * q))
    se_oracle = nb * r2.std(ddof=1) / math.sqrt(len(r2)) / (4.0 * math.log(2.0))
    vals = []
    for i in range(n_paths):
        g = bachelier_log_grid(SIGMA2, n, seed=900 + i)
        vals.append(iv_range(g, tuning=_tuning_for(g),
                             overrides=EstimatorParams(q=q)).value)
    vals = np.array(vals)
    se = math.hypot(vals.std(ddof=1) / math.sqrt(n_paths), se_oracle)
    assert abs(vals.mean() - expect) < 3.0 * se


def test_unified_single_scale_is_subsampled_rv(clean_grid):
    est = iv_unified(clean_grid, overrides=EstimatorParams(q1=30, m=1))
    assert est.value == pytest.approx(subsampled_rv(clean_grid.values, 30), rel=1e-12)


def test_unified_weights_sum_rules(clean_grid):
    # noise cancellation: pure-noise input maps near zero
    rng = np.random.default_rng(5)
    g = LogPriceGrid(values=rng.standard_normal(20001) * OMEGA, mesh=1.0)
    est = iv_unified(g, tuning=TuningInputs(iv_hat=0, iq_hat=0,
                                            omega2_hat=OMEGA**2, n=20000))
    rv = realized_variance(g.values)
    assert abs(est.value) < 0.02 * rv


def test_bc_override_clamped(clean_grid):
    est = iv_bias_corrected(clean_grid, overrides=EstimatorParams(q=10**9))
    assert est.diagnostics["q"] == clean_grid.n // 2
    assert "q_clamped" in est.diagnostics


def test_params_provenance_recorded(noisy_grid):
    for key, fn in INTEGRATED.items():
        est = fn(noisy_grid)
        assert isinstance(est.params_used.provenance, str)
        assert est.estimator_id == key
