"""Noise-robust estimators of the integrated variance.

Every estimator maps an equally spaced log-price grid to a single number,
the variance accumulated over the grid's span (squared log units). Tuning
parameters default to their feasible MSE-optimal plug-in values; explicit
overrides always win and out-of-range values are clamped with a
diagnostic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import quad

from lobvol.book import LogPriceGrid
from lobvol.tuning import (
    EstimatorParams,
    TuningInputs,
    feasible_tuning,
    fit_ma1_whittle,
    realized_variance,
    subsampled_rv,
)

__all__ = [
    "IVEstimate",
    "INTEGRATED",
    "iv_realized",
    "iv_bias_corrected",
    "iv_fourier",
    "iv_mle",
    "iv_two_scale",
    "iv_multi_scale",
    "iv_kernel",
    "iv_preaveraging",
    "iv_alternation",
    "iv_range",
    "iv_unified",
]


@dataclass
class IVEstimate:
    value: float
    estimator_id: str
    params_used: EstimatorParams
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not math.isfinite(self.value):
            raise ValueError(f"{self.estimator_id}: non-finite estimate")


def _prepare(grid: LogPriceGrid, tuning: Optional[TuningInputs]) -> tuple[np.ndarray, int, TuningInputs]:
    n = grid.n
    if n < 10:
        raise ValueError("need at least 10 returns")
    if tuning is None:
        tuning = feasible_tuning(grid)
    return grid.values, n, tuning


def _clamp(value: float, lo: int, hi: int, diagnostics: dict, name: str) -> int:
    out = int(round(value)) if math.isfinite(value) else hi
    if out < lo or out > hi:
        diagnostics[f"{name}_clamped"] = out
        out = min(max(out, lo), hi)
    return out


def iv_realized(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
                overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Plain sum of squared log-returns (noise-naive baseline)."""
    p, _, _ = _prepare(grid, tuning) if tuning is not None else (grid.values, grid.n, None)
    if grid.n < 10:
        raise ValueError("need at least 10 returns")
    return IVEstimate(realized_variance(grid.values), "iv.rv", overrides or EstimatorParams())


def iv_bias_corrected(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
                      overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Subsampled realized variance plus twice the first-order autocovariance."""
    p, n, tuning = _prepare(grid, tuning)
    diag: dict = {}
    if overrides and overrides.q is not None:
        q = _clamp(overrides.q, 1, n // 2, diag, "q")
        params = overrides
    else:
        q_star = 2 * n * tuning.omega2_hat / (tuning.iv_hat * math.sqrt(3.0)) if tuning.iv_hat > 0 else 1.0
        q = _clamp(max(1.0, q_star), 1, n // 2, diag, "q")
        params = EstimatorParams(q=q, provenance="feasible q* = max(1, [2 n w2 / (IV sqrt(3))])")
    total = 0.0
    for j in range(q):
        sub = p[j::q]
        r = np.diff(sub)
        total += float(np.sum(r**2) + 2.0 * np.sum(r[:-1] * r[1:]))
    c = n / ((n - q + 1) * q)
    diag["q"] = q
    return IVEstimate(c * total, "iv.bc", params, diag)


def iv_fourier(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
               overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Fejer-weighted convolution of the Fourier coefficients of the returns."""
    p, n, tuning = _prepare(grid, tuning)
    diag: dict = {}
    if overrides and overrides.N is not None:
        N = _clamp(overrides.N, 1, n // 2, diag, "N")
        params = overrides
    else:
        N = select_fourier_cutoff(n, tuning.iv_hat, tuning.omega2_hat)
        params = EstimatorParams(N=N, provenance="grid-search MSE proxy")
    F2 = np.abs(np.fft.rfft(np.diff(p))) ** 2
    k = np.arange(1, N + 1)
    weights = 1.0 - k / (N + 1.0)
    value = (F2[0] + 2.0 * float(weights @ F2[1 : N + 1])) / (N + 1.0)
    diag["N"] = N
    return IVEstimate(value, "iv.fourier", params, diag)


def select_fourier_cutoff(n: int, iv_hat: float, omega2_hat: float) -> int:
    """Cutting frequency minimizing a feasible MSE proxy.

    The proxy balances the signal variance term ``2 IV^2 / N`` against the
    squared noise-induced bias ``(4 N w2)^2``; with negligible noise it
    pushes N to the Nyquist limit, where the Fejer sum reproduces the
    realized variance.
    """
    lo, hi = max(2, n // 100), max(3, n // 2)
    if iv_hat <= 0:
        return int(math.sqrt(n))
    candidates = np.unique(np.clip(np.linspace(lo, hi, 400).astype(int), lo, hi))
    proxy = 2.0 * iv_hat**2 / candidates + (4.0 * candidates * omega2_hat) ** 2
    return int(candidates[int(np.argmin(proxy))])


def iv_mle(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
           overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Quasi-maximum-likelihood estimator from an MA(1) fit of the returns."""
    p, n, _ = _prepare(grid, tuning)
    r = np.diff(p)
    if np.allclose(r, 0.0):
        return IVEstimate(0.0, "iv.mle", overrides or EstimatorParams(), {"constant_grid": True})
    phi, s2w, ok = fit_ma1_whittle(r)
    value = n * s2w * (1.0 + phi) ** 2
    return IVEstimate(value, "iv.mle", overrides or EstimatorParams(provenance="ma1 whittle"),
                      {"phi": phi, "sigma2_w": s2w, "converged": ok})


def iv_two_scale(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
                 overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Two-scale realized variance (slow scale minus rescaled fast scale)."""
    p, n, tuning = _prepare(grid, tuning)
    diag: dict = {}
    if overrides and overrides.q is not None:
        q = _clamp(overrides.q, 2, n // 2, diag, "q")
        params = overrides
    else:
        iq_step = tuning.iq_per_step
        q_star = n ** (2.0 / 3.0) * (12.0 * tuning.omega4_hat / iq_step) ** (1.0 / 3.0) if iq_step > 0 else 2.0
        q = _clamp(q_star, 2, n // 2, diag, "q")
        params = EstimatorParams(q=q, provenance="feasible q* = n^(2/3) (12 w4 / IQ)^(1/3)")
    slow = subsampled_rv(p, q)
    fast = realized_variance(p)
    ratio = (n - q + 1) / (n * q)
    c = 1.0 / (1.0 - ratio)
    diag["q"] = q
    return IVEstimate(c * (slow - ratio * fast), "iv.two_scale", params, diag)


def _multi_scale_weights(q: int) -> np.ndarray:
    j = np.arange(1, q + 1, dtype=float)
    return j / (1.0 - 1.0 / q**2) * (12.0 * (j / q - 0.5) / q**2 - 6.0 / q**3)


def iv_multi_scale(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
                   overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Weighted combination of subsampled realized variances over scales 1..q."""
    p, n, tuning = _prepare(grid, tuning)
    diag: dict = {}
    if overrides and overrides.q is not None:
        q = _clamp(overrides.q, 2, n // 4, diag, "q")
        params = overrides
    else:
        iq_step = tuning.iq_per_step
        if iq_step > 0:
            beta = (48.0 / 5.0) * tuning.omega2_hat * (tuning.iv_hat + tuning.omega2_hat / 2.0) / ((208.0 / 35.0) * iq_step)
            inner = beta + math.sqrt(beta**2 + 144.0 * tuning.omega4_hat / ((104.0 / 35.0) * iq_step))
            q_star = math.sqrt(n) * math.sqrt(inner)
        else:
            q_star = 2.0
        q = _clamp(q_star, 2, n // 4, diag, "q")
        params = EstimatorParams(q=q, provenance="feasible q* (multi-scale beta formula)")
    weights = _multi_scale_weights(q)
    value = sum(w * subsampled_rv(p, j) for j, w in enumerate(weights, start=1))
    diag["q"] = q
    return IVEstimate(float(value), "iv.multi_scale", params, diag)


def tukey_hanning2(x: float) -> float:
    return math.sin(math.pi / 2.0 * (1.0 - x) ** 2) ** 2


def _th2_second_derivative(x: float) -> float:
    u = math.pi / 2.0 * (1.0 - x) ** 2
    du = -math.pi * (1.0 - x)
    d2u = math.pi
    return 2.0 * math.cos(2.0 * u) * du**2 + math.sin(2.0 * u) * d2u


def _th2_third_derivative(x: float) -> float:
    u = math.pi / 2.0 * (1.0 - x) ** 2
    du = -math.pi * (1.0 - x)
    d2u = math.pi
    return -4.0 * math.sin(2.0 * u) * du**3 + 6.0 * math.cos(2.0 * u) * du * d2u


@lru_cache(maxsize=1)
def th2_kernel_constants() -> tuple[float, float, float]:
    """(a, b, c) constants of the Tukey-Hanning-2 bandwidth formula."""
    a = quad(lambda x: tukey_hanning2(x) ** 2, 0.0, 1.0)[0]
    b = -8.0 * quad(lambda x: tukey_hanning2(x) * _th2_second_derivative(x), 0.0, 1.0)[0]
    c = 12.0 * (_th2_third_derivative(0.0) + quad(lambda x: tukey_hanning2(x) * _th2_third_derivative(x), 0.0, 1.0)[0])
    return a, b, c


def iv_kernel(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
              overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Realized kernel with Tukey-Hanning-2 weights."""
    p, n, tuning = _prepare(grid, tuning)
    diag: dict = {}
    if overrides and overrides.q is not None:
        q = _clamp(overrides.q, 1, n // 4, diag, "q")
        params = overrides
    else:
        a, b, c = th2_kernel_constants()
        iq_step = tuning.iq_per_step
        if iq_step > 0:
            beta = b * tuning.omega2_hat * (tuning.iv_hat + tuning.omega2_hat / 2.0) / (2.0 * a * iq_step)
            q_star = math.sqrt(n) * math.sqrt(beta + math.sqrt(beta**2 + c * tuning.omega4_hat / (a * iq_step)))
        else:
            q_star = 1.0
        q = _clamp(q_star, 1, n // 4, diag, "q")
        params = EstimatorParams(q=q, kernel="tukey-hanning-2",
                                 provenance="feasible q* (kernel a,b,c formula)")
    r = np.diff(p)
    value = float(np.sum(r**2))
    for j in range(1, q + 1):
        w = tukey_hanning2((j - 1) / q)
        value += 2.0 * w * float(np.sum(r[:-j] * r[j:]))
    diag["q"] = q
    return IVEstimate(value, "iv.kernel", params, diag)


def _preavg_psi(h: int) -> tuple[float, float]:
    """Exact squared-weight sums of the half-window averaging scheme."""
    i = np.arange(1, h)
    g = (2.0 / h) * np.minimum(i, h - i)
    psi = float(np.sum(g**2))
    g_pad = np.concatenate(([0.0], g, [0.0]))
    psi_prime = float(np.sum(np.diff(g_pad) ** 2))
    return psi, psi_prime


def iv_preaveraging(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
                    overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Window-averaged squared increments with a noise bias correction.

    The window defaults to roughly four minutes of samples, rounded even;
    normalization uses the exact squared-weight sum of the half-window
    scheme so the estimator is unbiased on noise-free Brownian paths.
    """
    p, n, tuning = _prepare(grid, tuning)
    diag: dict = {}
    if overrides and overrides.h is not None:
        h = int(overrides.h)
        params = overrides
    else:
        h = int(round(240.0 / grid.mesh))
        params = EstimatorParams(h=h, provenance="4-minute window")
    h = max(4, min(h, n // 2))
    h -= h % 2
    diag["h"] = h
    csum = np.concatenate(([0.0], np.cumsum(p)))
    half = h // 2
    n_win = n - h + 2
    first = csum[half : half + n_win] - csum[:n_win]
    second = csum[h : h + n_win] - csum[half : half + n_win]
    D = (second - first) / half
    psi, psi_prime = _preavg_psi(h)
    rv = realized_variance(p)
    value = (n / (n_win * psi)) * float(np.sum(D**2)) - (psi_prime / (2.0 * psi)) * rv
    return IVEstimate(value, "iv.preavg", params, diag)


def iv_alternation(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
                   overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Realized variance rescaled by continuations over alternations.

    With no alternations the factor is undefined; the estimator then falls
    back to the plain realized variance with a diagnostic.
    """
    p, n, _ = _prepare(grid, tuning) if tuning is not None else (grid.values, grid.n, None)
    if grid.n < 10:
        raise ValueError("need at least 10 returns")
    rv = realized_variance(grid.values)
    signs = np.sign(np.diff(grid.values))
    signs = signs[signs != 0]
    diag: dict = {}
    if signs.size < 2:
        diag["fallback"] = "too few nonzero moves"
        return IVEstimate(rv, "iv.alternation", overrides or EstimatorParams(), diag)
    prod = signs[:-1] * signs[1:]
    n_c = int(np.sum(prod > 0))
    n_a = int(np.sum(prod < 0))
    if n_a == 0:
        diag["fallback"] = "no alternations"
        return IVEstimate(rv, "iv.alternation", overrides or EstimatorParams(), diag)
    diag.update(n_c=n_c, n_a=n_a)
    return IVEstimate((n_c / n_a) * rv, "iv.alternation", overrides or EstimatorParams(), diag)


def iv_range(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
             overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Block range estimator: squared high-low ranges over blocks of q."""
    p, n, tuning = _prepare(grid, tuning)
    diag: dict = {}
    hi = max(2, n // 20)
    if overrides and overrides.q is not None:
        q = _clamp(overrides.q, 2, hi, diag, "q")
        params = overrides
    else:
        iq_step = tuning.iq_per_step
        q_star = (iq_step / tuning.omega4_hat) ** (1.0 / 3.0) if tuning.omega4_hat > 0 else float(hi)
        q = _clamp(q_star, 2, hi, diag, "q")
        params = EstimatorParams(q=q, provenance="feasible q* = (IQ/w4)^(1/3)")
    nb = n // q
    blocks = p[: nb * q + 1]
    # block i spans samples [(i-1)q, iq]; shared endpoints mimic contiguous ranges
    total = 0.0
    for i in range(nb):
        seg = blocks[i * q : (i + 1) * q + 1]
        total += (float(seg.max()) - float(seg.min())) ** 2
    value = total / (4.0 * math.log(2.0)) * (n / (nb * q))
    diag.update(q=q, n_blocks=nb)
    return IVEstimate(value, "iv.range", params, diag)


def iv_unified(grid: LogPriceGrid, tuning: Optional[TuningInputs] = None,
               overrides: Optional[EstimatorParams] = None) -> IVEstimate:
    """Multi-scale weighted subsampled-RV combination robust to rounding noise.

    Weights solve ``sum w_l = 1`` and ``sum w_l n_l = 0`` so the noise
    contribution, linear in the per-scale sample counts, cancels.
    """
    p, n, tuning = _prepare(grid, tuning)
    diag: dict = {}
    q1 = overrides.q1 if overrides and overrides.q1 is not None else 30
    m = overrides.m if overrides and overrides.m is not None else 20
    q1 = int(np.clip(q1, 1, max(1, n // 4)))
    m = int(np.clip(m, 1, max(1, n // (2 * q1))))
    params = overrides or EstimatorParams(q1=q1, m=m, provenance="documented defaults")
    scales = q1 + np.arange(m)
    n_l = n / scales
    if m == 1:
        weights = np.array([1.0])
    else:
        n_bar = float(np.mean(n_l))
        den = float(np.sum(n_l**2) - m * n_bar**2)
        if den <= 1e-12 * n_bar**2:
            weights = np.full(m, 1.0 / m)
            diag["degenerate_scales"] = True
        else:
            weights = 1.0 / m - n_bar * (n_l - n_bar) / den
    value = sum(w * subsampled_rv(p, int(q)) for q, w in zip(scales, weights))
    diag.update(q1=q1, m=m)
    return IVEstimate(float(value), "iv.unified", params, diag)


INTEGRATED: dict[str, Callable[..., IVEstimate]] = {
    "iv.rv": iv_realized,
    "iv.bc": iv_bias_corrected,
    "iv.fourier": iv_fourier,
    "iv.mle": iv_mle,
    "iv.two_scale": iv_two_scale,
    "iv.multi_scale": iv_multi_scale,
    "iv.kernel": iv_kernel,
    "iv.preavg": iv_preaveraging,
    "iv.alternation": iv_alternation,
    "iv.range": iv_range,
    "iv.unified": iv_unified,
}
