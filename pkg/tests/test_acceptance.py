"""Release gate: one end-to-end check per shipping criterion.

Each test prints a single CRITERION line (visible even under output
capture) and then asserts both the substance and its runtime budget.
"""

import itertools
import math
import time
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from scipy.stats import kstest

from lobvol.cli import main
from lobvol.execution import ACModel, ExecutionSpec, ac_variance, run_vwap
from lobvol.integrated import INTEGRATED
from lobvol.noise import frequency_sweep, hausman_test
from lobvol.sim import (ZIParams, _run_core, default_qr_params,
                        estimate_true_variance, simulate_qr, simulate_zi,
                        zi_to_qr)
from lobvol.spot import (SPOT, constant_spot_path, default_spot_times,
                         integrated_metrics)
from lobvol.surrogate import bachelier_log_grid

pytestmark = pytest.mark.acceptance

SIGMA2 = 1e-8
N_DAY = 23400


def _line(capsys, n: int, ok: bool, detail: str) -> None:
    with capsys.disabled():
        print(f"CRITERION {n}: {'PASS' if ok else 'FAIL'} — {detail}")


@pytest.fixture(scope="module", autouse=True)
def _warm_compiled_core():
    # compile the event loop outside every runtime budget
    simulate_zi(ZIParams(1.0, 0.5, 0.1), 5.0, seed=0)


def test_criterion_1_simulator_oracles(capsys):
    t0 = time.monotonic()
    raw = _run_core(default_qr_params(), 2400.0, seed=0, ks_cap=10_000,
                    freeze_ref=True)
    u = raw["ks_u"]
    ks_p = float(kstest(u, "expon").pvalue)

    zi = ZIParams(lambda_L=2.0, lambda_C=0.4, lambda_M=0.1)
    lam, horizon, runs = 2.5, 100.0, 200
    qr = zi_to_qr(zi)
    counts = np.array([_run_core(qr, horizon, seed=5000 + i)["n_events"]
                       for i in range(runs)])
    z = (counts.mean() - lam * horizon) / math.sqrt(lam * horizon / runs)
    dt = time.monotonic() - t0
    ok = u.size == 10_000 and ks_p > 0.01 and abs(z) < 3.0 and dt < 60.0
    _line(capsys, 1, ok,
          f"inter-arrival KS p={ks_p:.4f} (>0.01), ZI count z={z:+.2f} "
          f"(|z|<3) over {runs} runs, {dt:.0f}s (<60s)")
    assert u.size == 10_000
    assert ks_p > 0.01
    assert abs(z) < 3.0
    assert dt < 60.0


def test_criterion_2_true_variance_three_series(capsys):
    t0 = time.monotonic()
    res = estimate_true_variance(default_qr_params(), m=18000.0, n_sims=500,
                                 seed=0)
    worst = 0.0
    for a, b in itertools.combinations(("mid", "micro", "trade"), 2):
        se = math.hypot(res.std_error[a], res.std_error[b])
        worst = max(worst, abs(res.variance[a] - res.variance[b]) / se)
    dt = time.monotonic() - t0
    ok = worst < 3.0 and dt < 600.0
    _line(capsys, 2, ok,
          f"mid/micro/trade variance rates agree pairwise, worst "
          f"|diff|/se={worst:.2f} (<3) at m=18000 n_sims=500, {dt:.0f}s (<600s)")
    assert worst < 3.0
    assert dt < 600.0


def test_criterion_3_integrated_estimators(capsys):
    t0 = time.monotonic()
    n_paths = 500
    truth = SIGMA2 * N_DAY
    omega = 5e-5

    clean_sums = {k: 0.0 for k in INTEGRATED}
    for i in range(n_paths):
        g = bachelier_log_grid(SIGMA2, N_DAY, seed=40_000 + i)
        for k, fn in INTEGRATED.items():
            clean_sums[k] += fn(g).value
    clean_bias = {k: v / n_paths / truth - 1.0 for k, v in clean_sums.items()}
    worst_clean = max(abs(b) for b in clean_bias.values())

    noisy = {k: [] for k in INTEGRATED}
    for i in range(n_paths):
        g = bachelier_log_grid(SIGMA2, N_DAY, noise_std=omega, seed=50_000 + i)
        for k, fn in INTEGRATED.items():
            noisy[k].append(fn(g).value)
    rv = np.array(noisy["iv.rv"])
    rv_se = rv.std(ddof=1) / math.sqrt(n_paths)
    rv_z = abs(rv.mean() - (truth + 2.0 * N_DAY * omega**2)) / rv_se
    robust_bias = {k: float(np.mean(v)) / truth - 1.0
                   for k, v in noisy.items() if k != "iv.rv"}
    robust_fail = {k: b for k, b in robust_bias.items() if abs(b) >= 0.15}
    dt = time.monotonic() - t0

    ok = worst_clean < 0.05 and rv_z < 3.0 and not robust_fail and dt < 900.0
    _line(capsys, 3, ok,
          f"noise-free worst |rel bias|={worst_clean:.4f} (<0.05); RV noise "
          f"bias z={rv_z:.2f} (<3); robust set outside 0.15: "
          f"{ {k: round(v, 3) for k, v in robust_fail.items()} or 'none'}; "
          f"{dt:.0f}s (<900s)")
    assert worst_clean < 0.05
    assert rv_z < 3.0
    assert not robust_fail, robust_fail
    assert dt < 900.0


def test_criterion_4_spot_estimators(capsys):
    # noise level set so its variance load is twice the per-second signal
    t0 = time.monotonic()
    n_paths, omega = 250, 1e-4
    times = default_spot_times(float(N_DAY))
    truth = constant_spot_path(SIGMA2, times)
    metrics = {k: [] for k in SPOT}
    for i in range(n_paths):
        g = bachelier_log_grid(SIGMA2, N_DAY, noise_std=omega, seed=1000 + i)
        for k, fn in SPOT.items():
            metrics[k].append(integrated_metrics(fn(g, out_times=times), truth))
    bias = {k: float(np.mean([m[0] for m in v])) for k, v in metrics.items()}
    mse = {k: float(np.mean([m[1] for m in v])) for k, v in metrics.items()}
    order = sorted(mse, key=mse.get)
    dt = time.monotonic() - t0
    ok = abs(bias["spot.fourier"]) < 0.05 and order[0] == "spot.fourier" \
        and dt < 1200.0
    ranking = ", ".join(f"{k.split('.')[1]}={mse[k]:.3f}" for k in order)
    _line(capsys, 4, ok,
          f"fourier |int bias|={abs(bias['spot.fourier']):.4f} (<0.05) and "
          f"smallest int MSE; full MSE order: {ranking}; {dt:.0f}s (<1200s)")
    assert abs(bias["spot.fourier"]) < 0.05
    assert order[0] == "spot.fourier"
    assert dt < 1200.0


def test_criterion_5_noise_test_characteristics(capsys):
    t0 = time.monotonic()
    size = np.mean([hausman_test(bachelier_log_grid(SIGMA2, 2340,
                                                    seed=20_000 + i)).reject_at_5pct
                    for i in range(1000)])
    power = np.mean([hausman_test(
        bachelier_log_grid(SIGMA2, N_DAY, noise_std=5e-5,
                           seed=30_000 + i)).reject_at_5pct
        for i in range(200)])
    path = simulate_qr(default_qr_params(), float(N_DAY), seed=0)
    sweep = {r.frequency: r.reject_at_5pct for r in frequency_sweep(path, (1, 60))}
    dt = time.monotonic() - t0
    ok = 0.02 <= size <= 0.09 and power > 0.90 and sweep[1.0] \
        and not sweep[60.0] and dt < 600.0
    _line(capsys, 5, ok,
          f"size={size:.3f} (in [0.02, 0.09]), power={power:.3f} (>0.90), "
          f"book sweep rejects at 1s and not at 60s: "
          f"{sweep[1.0]}/{not sweep[60.0]}; {dt:.0f}s (<600s)")
    assert 0.02 <= size <= 0.09
    assert power > 0.90
    assert sweep[1.0] and not sweep[60.0]
    assert dt < 600.0


def test_criterion_6_gmm_self_calibration(capsys):
    from lobvol.calibrate import calibrate_theta_gmm, simulated_moments
    t0 = time.monotonic()
    model = default_qr_params(0.6, 0.85)
    target_seeds = np.random.SeedSequence(99).generate_state(50, dtype=np.uint32)
    sig, zet = simulated_moments(model, float(N_DAY), target_seeds)
    targets = (float(sig.mean()), float(zet.mean()))
    res = calibrate_theta_gmm(model, targets, T=50, seed=0)
    dt = time.monotonic() - t0
    err_t, err_r = abs(res.theta - 0.6), abs(res.theta_reinit - 0.85)
    ok = err_t <= 0.1 and err_r <= 0.15 and dt < 1800.0
    _line(capsys, 6, ok,
          f"recovered theta={res.theta:.3f} (err {err_t:.3f} <= 0.1), "
          f"reinit={res.theta_reinit:.3f} (err {err_r:.3f} <= 0.15) at T=50; "
          f"{dt:.0f}s (<1800s)")
    assert err_t <= 0.1
    assert err_r <= 0.15
    assert dt < 1800.0


def test_criterion_7_execution_variance(capsys):
    t0 = time.monotonic()
    spec = ExecutionSpec(total_shares=60, horizon=12000.0, tau=600.0)
    model_b = ACModel(sigma2=1e-4)
    model_a = ACModel(sigma2=2e-4)
    n_runs = 5000

    def var(model, base):
        sf = np.array([run_vwap(model, spec, seed=base + i).shortfall
                       for i in range(n_runs)])
        return float(np.var(sf, ddof=1))

    va, vb = var(model_a, 100_000), var(model_b, 200_000)
    ratio = va / vb
    pred_err = abs(vb / ac_variance(model_b, spec) - 1.0)

    rng = np.random.default_rng(7)
    worst_identity = 0.0
    for _ in range(50):
        N = int(rng.integers(1, 41))
        S = float(rng.integers(1, 500))
        tau = float(rng.uniform(1.0, 900.0))
        s2 = float(rng.uniform(1e-6, 1e-2))
        sp = ExecutionSpec(total_shares=int(S), horizon=N * tau, tau=tau)
        v = sp.slices
        B = np.minimum.outer(np.arange(1, N + 1), np.arange(1, N + 1))
        direct = s2 * tau * v @ B @ v
        worst_identity = max(worst_identity,
                             abs(ac_variance(ACModel(s2), sp) / direct - 1.0))
    dt = time.monotonic() - t0
    ok = abs(ratio - 2.0) < 0.3 and pred_err < 0.10 \
        and worst_identity < 1e-12 and dt < 600.0
    _line(capsys, 7, ok,
          f"shortfall-variance ratio={ratio:.3f} (within 15% of 2), "
          f"model-vs-empirical error={pred_err:.3f} (<0.10), closed-form "
          f"identity worst rel dev={worst_identity:.1e} (<1e-12); "
          f"{dt:.0f}s (<600s)")
    assert abs(ratio - 2.0) < 0.3  # within 15% of 2
    assert pred_err < 0.10
    assert worst_identity < 1e-12
    assert dt < 600.0


def test_criterion_8_reference_anchors_format_only(capsys):
    # headline numbers from an external benchmark whose calibrated
    # intensity table is not published; they are kept as schema/format
    # fixtures and ordering anchors, never as reproduction targets
    anchors = pd.read_csv(Path(__file__).parent / "data" / "report_anchors.csv")
    schema_ok = list(anchors.columns) == ["estimator", "series", "rel_bias",
                                          "rel_mse"]
    ids_ok = set(anchors["estimator"]) == set(SPOT)
    headline_ok = anchors.sort_values("rel_mse").iloc[0]["estimator"] == "spot.fourier"
    ok = schema_ok and ids_ok and headline_ok
    _line(capsys, 8, ok,
          "external reference values kept as format fixtures only (source "
          "intensity table unpublished, numeric reproduction out of scope); "
          f"schema={schema_ok}, ids={ids_ok}, headline ordering={headline_ok}")
    assert schema_ok and ids_ok and headline_ok


def test_criterion_9_cli_rerun_byte_identical(capsys, tmp_path):
    rank_cfg = tmp_path / "rank.yaml"
    rank_cfg.write_text(
        "model:\n  type: surrogate\n  sigma2: 1.0e-8\n  noise_std: 5.0e-5\n"
        "horizon: 4000\nn_paths: 4\nestimators: [iv.rv, iv.bc, iv.two_scale]\n"
        "seed: 11\n")
    sim_cfg = tmp_path / "sim.yaml"
    sim_cfg.write_text(
        "model:\n  type: qr\n  theta: 0.6\n  theta_reinit: 0.85\n"
        "horizon: 2000\nseed: 11\n")
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        main(["rank", "--config", str(rank_cfg), "--out", str(out)])
        outs.append(out.read_bytes())
    sim_outs = []
    for name in ("sa.csv", "sb.csv"):
        out = tmp_path / name
        main(["simulate", "--config", str(sim_cfg), "--out", str(out)])
        sim_outs.append(out.read_bytes())
    ok = outs[0] == outs[1] and sim_outs[0] == sim_outs[1]
    _line(capsys, 9, ok,
          f"rank rerun identical={outs[0] == outs[1]}, simulate rerun "
          f"identical={sim_outs[0] == sim_outs[1]} (same config and seed)")
    assert outs[0] == outs[1]
    assert sim_outs[0] == sim_outs[1]
