import math

import numpy as np
import pytest
from scipy.stats import chi2

from lobvol.book import LogPriceGrid
from lobvol.noise import (CHI2_95, CHI2_99, NoiseTestResult, frequency_sweep,
                          hausman_test, render_sweep_table)
from lobvol.surrogate import bachelier_log_grid, bachelier_tick_path

SIGMA2, OMEGA = 1e-8, 5e-5


class TestResultValidation:
    def test_bad_statistic_rejected(self):
        with pytest.raises(ValueError):
            NoiseTestResult(-1.0, 0.5, False, False, 1.0, 1.0, 0.0, 100)

    def test_bad_p_value_rejected(self):
        with pytest.raises(ValueError):
            NoiseTestResult(1.0, 1.5, False, False, 1.0, 1.0, 0.0, 100)


def test_constant_grid_degenerate():
    g = LogPriceGrid(values=np.full(501, math.log(100.0)), mesh=1.0)
    res = hausman_test(g)
    assert res.statistic == 0.0 and res.p_value == 1.0
    assert not res.reject_at_5pct
    assert "degenerate" in res.diagnostics


def test_short_grid_rejected():
    with pytest.raises(ValueError):
        hausman_test(LogPriceGrid(values=np.zeros(50), mesh=1.0))


def test_p_value_consistent_with_statistic(noisy_grid):
    res = hausman_test(noisy_grid)
    assert res.p_value == pytest.approx(float(chi2.sf(res.statistic, df=1)), rel=1e-12)
    assert res.reject_at_5pct == (res.statistic > CHI2_95)
    assert res.reject_at_1pct == (res.statistic > CHI2_99)


def test_scale_invariance(noisy_grid):
    scaled = LogPriceGrid(values=noisy_grid.values * 4.2, mesh=noisy_grid.mesh)
    a = hausman_test(noisy_grid)
    b = hausman_test(scaled)
    assert b.statistic == pytest.approx(a.statistic, rel=1e-4)


@pytest.mark.slow
def test_size_under_null():
    # noise-free paths: rejection rate should sit near the nominal 5%
    n_paths, rejections = 200, 0
    for i in range(n_paths):
        g = bachelier_log_grid(SIGMA2, 2340, seed=1500 + i)
        rejections += hausman_test(g).reject_at_5pct
    rate = rejections / n_paths
    assert 0.0 <= rate <= 0.12, rate


@pytest.mark.slow
def test_power_under_noise():
    # realistic microstructure noise at one-second sampling: always caught
    for i in range(25):
        g = bachelier_log_grid(SIGMA2, 23400, noise_std=OMEGA, seed=1600 + i)
        res = hausman_test(g)
        assert res.reject_at_5pct, (i, res.statistic)
        assert res.omega2_hat == pytest.approx(OMEGA**2, rel=0.4)


def test_sweep_rejects_fine_not_coarse():
    path = bachelier_tick_path(SIGMA2, horizon=23400.0, mesh=1.0,
                               noise_std=OMEGA, seed=10)
    results = frequency_sweep(path)
    by_mesh = {r.frequency: r for r in results}
    assert by_mesh[1.0].reject_at_5pct
    # at one-minute sampling the noise share of RV is tiny
    assert not by_mesh[60.0].reject_at_5pct


def test_sweep_skips_short_samples():
    path = bachelier_tick_path(SIGMA2, horizon=3000.0, mesh=1.0, seed=2)
    results = frequency_sweep(path, meshes=(1, 60))
    assert [r.frequency for r in results] == [1.0]


def test_render_table_marks_rejections():
    res = [NoiseTestResult(30.0, float(chi2.sf(30.0, 1)), True, True,
                           1.0, 1.0, 0.0, 1000, frequency=1.0),
           NoiseTestResult(0.5, float(chi2.sf(0.5, 1)), False, False,
                           1.0, 1.0, 0.0, 1000, frequency=60.0)]
    text = render_sweep_table(res)
    lines = text.splitlines()
    assert len(lines) == 3
    assert lines[1].rstrip().endswith("**")
    assert not lines[2].rstrip().endswith("*")
