"""Specification test for observation noise in sampled prices.

Compares realized variance against the MA(1) quasi-likelihood variance
estimate; under no noise both target the same quantity and the squared,
variance-normalized difference is asymptotically chi-squared with one
degree of freedom.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from lobvol.book import LogPriceGrid, TickPath, sample_grid
from lobvol.tuning import feasible_tuning, fit_ma1_whittle, realized_variance

__all__ = ["NoiseTestResult", "hausman_test", "frequency_sweep", "render_sweep_table"]

CHI2_95 = float(chi2.ppf(0.95, df=1))
CHI2_99 = float(chi2.ppf(0.99, df=1))


@dataclass
class NoiseTestResult:
    statistic: float
    p_value: float
    reject_at_5pct: bool
    reject_at_1pct: bool
    rv: float
    iv_ml: float
    omega2_hat: float
    n: int
    frequency: float = float("nan")
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.statistic) or self.statistic < 0:
            raise ValueError("statistic must be finite and non-negative")
        if not 0.0 <= self.p_value <= 1.0:
            raise ValueError("p_value must lie in [0, 1]")


def hausman_test(grid: LogPriceGrid) -> NoiseTestResult:
    """Noise test on one sampled log-price grid.

    The statistic is ``(RV - IV_ML)^2 / (V_ML - V_RV)`` where the
    denominator is the difference of the delta-method variances of the two
    estimators, floored at a small positive value so the statistic stays
    defined when the variance ordering inverts in finite samples.
    """
    n = grid.n
    if n < 100:
        raise ValueError("need at least 100 returns for the noise test")
    r = grid.returns()
    rv = realized_variance(grid.values)
    diag: dict = {}
    if rv == 0.0:
        return NoiseTestResult(0.0, 1.0, False, False, 0.0, 0.0, 0.0, n,
                               diagnostics={"degenerate": "constant grid"})
    phi, s2w, ok = fit_ma1_whittle(r)
    iv_ml = n * s2w * (1.0 + phi) ** 2
    omega2 = max(-phi * s2w, 0.0)
    # delta-method asymptotic variances of the two window estimates
    iq_window = n * float(np.sum(r**4)) / 3.0
    v_rv = 2.0 * iq_window / n
    one_phi = 1.0 + phi
    v_ml = n * s2w**2 * (2.0 * one_phi**4 + 4.0 * one_phi**2 * (1.0 - phi**2))
    floor = 1e-16 * max(iq_window, rv**2)
    denom = max(v_ml - v_rv, floor)
    stat = (rv - iv_ml) ** 2 / denom
    p = float(chi2.sf(stat, df=1))
    diag.update(phi=phi, sigma2_w=s2w, v_rv=v_rv, v_ml=v_ml,
                denominator_floored=v_ml - v_rv < floor, fit_converged=ok)
    return NoiseTestResult(stat, p, stat > CHI2_95, stat > CHI2_99,
                           rv, iv_ml, omega2, n, diagnostics=diag)


def frequency_sweep(path: TickPath, meshes=(1, 2, 5, 10, 15, 30, 60),
                    kind: str = "mid") -> list[NoiseTestResult]:
    """Noise test at each sampling interval, coarsest meshes included only
    while at least 100 returns remain."""
    out = []
    for mesh in meshes:
        n = int(path.horizon // mesh)
        if n < 100:
            continue
        res = hausman_test(sample_grid(path, float(mesh), kind))
        res.frequency = float(mesh)
        out.append(res)
    return out


def render_sweep_table(results: list[NoiseTestResult]) -> str:
    """Plain-text table: one row per frequency, stars mark rejections.

    ``*`` rejects at 5%, ``**`` at 1%.
    """
    lines = [f"{'mesh_s':>7} {'n':>7} {'stat':>12} {'p':>8}  sig"]
    for r in results:
        mark = "**" if r.reject_at_1pct else ("*" if r.reject_at_5pct else "")
        lines.append(f"{r.frequency:>7.0f} {r.n:>7d} "
                     f"{r.statistic:>12.4f} {r.p_value:>8.4f}  {mark}")
    return "\n".join(lines)
