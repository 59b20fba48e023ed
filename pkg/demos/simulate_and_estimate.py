"""Simulate a queue-reactive trading day and rank integrated-variance
estimators against the model's own long-horizon variance rate.

Runs in about a minute:

    python3 demos/simulate_and_estimate.py
"""

from lobvol.harness import ScenarioConfig, run_scenario
from lobvol.sim import default_qr_params

cfg = ScenarioConfig(
    model=default_qr_params(theta=0.6, theta_reinit=0.85),
    n_paths=10,
    horizon=4000.0,
    estimators=("iv.rv", "iv.bc", "iv.two_scale", "iv.kernel", "iv.preavg"),
    seed=7,
)
report = run_scenario(cfg)
print(report.render())
print()
print(report.rankings(by="rel_mse").to_string(index=False))
