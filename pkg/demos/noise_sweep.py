"""Microstructure-noise diagnosis on a simulated book.

Samples the mid price on grids from 1s to 60s and runs the
realized-variance vs noise-robust comparison test on each. The book's
bid-ask bounce shows up as rejections on the fine grids that disappear
as the sampling coarsens.

    python3 demos/noise_sweep.py
"""

from lobvol.noise import frequency_sweep, render_sweep_table
from lobvol.sim import default_qr_params, simulate_qr

path = simulate_qr(default_qr_params(), 23400.0, seed=0)
results = frequency_sweep(path, (1, 2, 5, 10, 15, 30, 60))
print(render_sweep_table(results))
