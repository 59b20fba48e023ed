"""Two-step GMM recovery of (theta, theta_reinit) from moment targets.

A tiny self-calibration: moments are simulated from a known model, then
the calibrator searches the unit square for the pair that reproduces
them. T is kept small here so the demo finishes in a couple of minutes;
the release-gate run uses T=50.

    python3 demos/calibrate_quickstart.py
"""

import numpy as np

from lobvol.calibrate import calibrate_theta_gmm, simulated_moments
from lobvol.sim import default_qr_params

model = default_qr_params(theta=0.6, theta_reinit=0.85)
seeds = np.random.SeedSequence(1).generate_state(8, dtype=np.uint32)
sig, zet = simulated_moments(model, 23400.0, seeds)
targets = (float(sig.mean()), float(zet.mean()))
print(f"targets: return dispersion={targets[0]:.3e}, reversion ratio={targets[1]:.3f}")

res = calibrate_theta_gmm(model, targets, T=8, grid_step=0.2, seed=0)
print(f"recovered theta={res.theta:.3f} theta_reinit={res.theta_reinit:.3f}")
print(f"objectives: step1={res.step1_objective:.3e} step2={res.step2_objective:.3e}")
