"""Feasible plug-in inputs for MSE-optimal estimator tuning.

The tuning formulas consume three plug-in moments: the integrated variance
over the estimation window (dimensionless, in squared log units), the
integrated quarticity, and the second moment of the observation noise.
Quarticity is stored in "window units" (for constant volatility it equals
the squared integrated variance); formulas that need it per sampling
interval divide by ``n``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import minimize_scalar

from lobvol.book import LogPriceGrid

__all__ = [
    "EstimatorParams",
    "TuningInputs",
    "fit_ma1_whittle",
    "feasible_tuning",
    "realized_variance",
    "subsampled_rv",
]


@dataclass
class EstimatorParams:
    """Tuning knobs an estimator may consume, with their provenance."""

    q: Optional[int] = None
    N: Optional[int] = None
    M: Optional[int] = None
    h: Optional[int] = None
    s: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    m: Optional[int] = None
    q1: Optional[int] = None
    kernel: Optional[str] = None
    bandwidth: Optional[float] = None
    iq_variant: str = "paper"
    provenance: str = "default"


@dataclass
class TuningInputs:
    iv_hat: float
    iq_hat: float
    omega2_hat: float
    n: int
    source: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.iv_hat < 0 or self.iq_hat < 0 or self.omega2_hat < 0:
            raise ValueError("tuning moments must be non-negative")

    @property
    def omega4_hat(self) -> float:
        return self.omega2_hat**2

    @property
    def iq_per_step(self) -> float:
        """Quarticity with time measured in sampling intervals."""
        return self.iq_hat / self.n


def realized_variance(values: np.ndarray) -> float:
    return float(np.sum(np.diff(values) ** 2))


def subsampled_rv(values: np.ndarray, q: int, edge_correct: bool = False) -> float:
    """Average over offsets of the sum of squared q-step returns.

    Equals ``(1/q) * sum_i (p_{i+q} - p_i)^2`` over all start indices; with
    ``edge_correct`` the ``n / (n - q + 1)`` small-sample factor is applied.
    """
    n = values.size - 1
    if not 1 <= q <= n:
        raise ValueError("need 1 <= q <= n")
    r = values[q:] - values[:-q]
    out = float(np.sum(r**2)) / q
    if edge_correct:
        out *= n / (n - q + 1)
    return out


def fit_ma1_whittle(x: np.ndarray) -> tuple[float, float, bool]:
    """Gaussian Whittle fit of an MA(1) model ``x_i = w_i + phi w_{i-1}``.

    Returns ``(phi, sigma2_w, converged)``. The innovation variance is
    profiled out, leaving a bounded one-dimensional search over ``phi``.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 8:
        raise ValueError("too few observations for an MA(1) fit")
    per = np.abs(np.fft.rfft(x - x.mean())) ** 2 / n
    lam = np.arange(per.size) * (2.0 * np.pi / n)
    per, lam = per[1:], lam[1:]  # drop the mean frequency
    cos_lam = np.cos(lam)

    def profiled(phi: float) -> float:
        g = 1.0 + phi * phi + 2.0 * phi * cos_lam
        s2 = np.mean(per / g)
        return float(np.log(s2) + np.mean(np.log(g)))

    res = minimize_scalar(profiled, bounds=(-0.999, 0.999), method="bounded",
                          options={"xatol": 1e-7})
    phi = float(res.x)
    g = 1.0 + phi * phi + 2.0 * phi * cos_lam
    sigma2_w = float(np.mean(per / g))
    return phi, sigma2_w, bool(res.success)


def feasible_tuning(grid: LogPriceGrid, subsample_seconds: float = 300.0,
                    iq_variant: str = "paper") -> TuningInputs:
    """Plug-in IV, IQ and noise-variance estimates from the grid itself.

    IV and IQ come from subsampling at the (noise-free) 5-minute scale;
    the noise second moment from the MA(1) fit of the returns, clamped to
    a small positive floor when the fit turns negative.
    """
    n = grid.n
    if grid.horizon < 1800:
        raise ValueError("grid must span at least 30 minutes")
    q = int(np.clip(round(subsample_seconds / grid.mesh), 1, max(1, n // 2)))
    p = grid.values
    rv = realized_variance(p)
    iv_hat = subsampled_rv(p, q, edge_correct=True)

    r = p[q:] - p[:-q]
    quartic = float(np.sum(r**4))
    edge2 = (n / (n - q + 1)) ** 2
    if iq_variant == "paper":
        iq_hat = edge2 * (26.0 / q) * quartic
    elif iq_variant == "textbook":
        iq_hat = (n**2 / (3.0 * q * q * (n - q + 1))) * quartic
    else:
        raise ValueError(f"unknown iq_variant {iq_variant!r}")

    source = {"q_subsample": q, "iq_variant": iq_variant}
    floor = max(1e-6 * rv / (2 * n), 1e-300)
    if rv == 0.0:
        omega2 = floor
        source["omega2"] = "floored (constant grid)"
    else:
        try:
            phi, s2w, ok = fit_ma1_whittle(np.diff(p))
            omega2 = -phi * s2w
            source["omega2"] = "ma1"
            source["phi"] = phi
            source["sigma2_w"] = s2w
            if not ok:
                omega2 = rv / (2 * n)
                source["omega2"] = "rv-fallback"
        except (ValueError, FloatingPointError):
            omega2 = rv / (2 * n)
            source["omega2"] = "rv-fallback"
        if omega2 <= floor:
            omega2 = floor
            source["omega2_floored"] = True
    return TuningInputs(iv_hat=iv_hat, iq_hat=iq_hat, omega2_hat=float(omega2), n=n, source=source)
