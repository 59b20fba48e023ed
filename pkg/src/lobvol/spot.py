"""Spot-variance estimators on an intraday grid.

All estimators return variance per second at the requested output
instants. Negative pointwise values from bias-corrected local estimators
are kept in the raw output; use :meth:`SpotPath.floored` for a clipped
view. Metrics always use raw values, since flooring biases MSE
comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from lobvol.book import LogPriceGrid
from lobvol.integrated import select_fourier_cutoff
from lobvol.tuning import EstimatorParams, TuningInputs, feasible_tuning

__all__ = [
    "SpotPath",
    "SPOT",
    "default_spot_times",
    "constant_spot_path",
    "spot_fourier",
    "spot_regularized",
    "spot_kernel",
    "spot_preaveraging",
    "spot_two_scale",
    "spot_preavg_kernel",
    "integrated_metrics",
]


@dataclass
class SpotPath:
    times: np.ndarray
    values: np.ndarray
    estimator_id: str
    params_used: EstimatorParams = field(default_factory=EstimatorParams)
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be matching vectors")
        if not np.isfinite(v).all():
            raise ValueError("spot values must be finite")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def floored(self) -> "SpotPath":
        """Copy with negative pointwise values clipped at zero."""
        return replace(self, values=np.maximum(self.values, 0.0))

    def day_average(self) -> float:
        return float(np.mean(self.values))


def default_spot_times(horizon: float, n_t: int = 390) -> np.ndarray:
    """Interval midpoints of the n_t-point intraday estimation grid."""
    return (np.arange(n_t) + 0.5) * (horizon / n_t)


def constant_spot_path(sigma2: float, times: np.ndarray) -> SpotPath:
    return SpotPath(times=np.asarray(times, float), values=np.full(len(times), sigma2), estimator_id="truth")


def _setup(grid: LogPriceGrid, out_times, tuning: Optional[TuningInputs]):
    n = grid.n
    if n < 10:
        raise ValueError("need at least 10 returns")
    if out_times is None:
        out_times = default_spot_times(grid.horizon)
    out_times = np.asarray(out_times, dtype=float)
    if tuning is None:
        tuning = feasible_tuning(grid)
    return grid.values, n, out_times, tuning


def spot_fourier(grid: LogPriceGrid, out_times=None, tuning: Optional[TuningInputs] = None,
                 overrides: Optional[EstimatorParams] = None) -> SpotPath:
    """Global Fourier-Fejer inversion of the variance coefficients."""
    p, n, out_times, tuning = _setup(grid, out_times, tuning)
    diag: dict = {}
    N = overrides.N if overrides and overrides.N is not None else select_fourier_cutoff(n, tuning.iv_hat, tuning.omega2_hat)
    N = int(np.clip(N, 2, n // 2))
    M = overrides.M if overrides and overrides.M is not None else max(1, int(math.sqrt(N)))
    M = int(np.clip(M, 1, N))
    params = overrides or EstimatorParams(N=N, M=M, provenance="N from MSE proxy, M = floor(sqrt(N))")

    F = np.fft.fft(np.diff(p))
    # return coefficients c_s for s = -N..N (stored with offset N)
    s = np.arange(-N, N + 1)
    A = np.where(s >= 0, F[s % n], np.conj(F[(-s) % n])) / (2.0 * math.pi)
    # variance coefficients c_k for k = 0..M via truncated self-convolution
    ck = np.empty(M + 1, dtype=complex)
    for k in range(M + 1):
        lo = max(-N, k - N)
        left = A[lo + N : N + 1 + N]            # s = lo..N
        right = A[k - np.arange(lo, N + 1) + N]  # k - s
        ck[k] = (2.0 * math.pi / (2 * N + 1)) * np.dot(left, right)

    theta = 2.0 * math.pi * out_times / grid.horizon
    w = 1.0 - np.arange(M + 1) / (M + 1.0)
    recon = np.full(out_times.size, 0j)
    recon += w[0] * ck[0]
    for k in range(1, M + 1):
        phase = np.exp(1j * k * theta)
        recon += w[k] * (phase * ck[k] + np.conj(phase * ck[k]))
    values = recon.real * (2.0 * math.pi / grid.horizon)
    denom = np.max(np.abs(recon.real)) or 1.0
    diag.update(N=N, M=M, imag_residual=float(np.max(np.abs(recon.imag)) / denom))
    return SpotPath(out_times, values, "spot.fourier", params, diag)


def _increment_weight_norm(coeffs: np.ndarray) -> float:
    """Sum of squared increment weights of a linear price functional."""
    return float(np.sum(np.cumsum(coeffs[::-1])[::-1][1:] ** 2))


def spot_regularized(grid: LogPriceGrid, out_times=None, tuning: Optional[TuningInputs] = None,
                     overrides: Optional[EstimatorParams] = None) -> SpotPath:
    """Pre-smoothed squared block increments averaged over a local window.

    Prices are smoothed by an s-point moving average (s = 2q); squared
    block increments at lag q are normalized by their exact Brownian
    weight sum and averaged over roughly sqrt(n/q) blocks around each
    output instant.
    """
    p, n, out_times, tuning = _setup(grid, out_times, tuning)
    n_t = out_times.size
    diag: dict = {}
    q = overrides.q if overrides and overrides.q is not None else max(1, round(n / n_t))
    q = int(np.clip(q, 1, n // 4))
    s = int(overrides.s) if overrides and overrides.s is not None else 2 * q
    params = overrides or EstimatorParams(q=q, s=s, provenance="q = [n/n_t], s = 2q")

    # linear functional: difference of s-averages ending q apart
    coeffs = np.zeros(s + q + 1)
    coeffs[q + 1 :] += 1.0 / s
    coeffs[1 : s + 1] -= 1.0 / s
    psi = _increment_weight_norm(coeffs)

    first = s + q  # first price index with a full smoothing window
    t_idx = np.arange(first, n + 1, q)
    smoothed_hi = np.convolve(p, np.ones(s) / s, mode="valid")  # avg of p[i..i+s-1]
    bar = smoothed_hi[t_idx - s + 1]
    d2 = (bar[1:] - bar[:-1]) ** 2 / psi
    block_times = t_idx[1:] * grid.mesh

    W = max(3, int(round(math.sqrt(n / q))))
    half = W // 2
    values = np.empty(n_t)
    boundary = np.zeros(n_t, dtype=bool)
    centers = np.searchsorted(block_times, out_times)
    for j, c in enumerate(centers):
        lo, hi = max(0, c - half), min(d2.size, c + half + 1)
        values[j] = float(np.mean(d2[lo:hi])) / grid.mesh
        boundary[j] = (hi - lo) < (2 * half + 1)
    diag.update(q=q, s=s, window_blocks=W, boundary_points=int(boundary.sum()))
    return SpotPath(out_times, values, "spot.regularized", params, diag)


def spot_kernel(grid: LogPriceGrid, out_times=None, tuning: Optional[TuningInputs] = None,
                overrides: Optional[EstimatorParams] = None) -> SpotPath:
    """Epanechnikov-weighted local realized variance.

    The raw localized sum carries the full noise bias of squared returns;
    the supplied noise moment is subtracted from each squared return so
    the estimator stays inside its accuracy envelope on noisy data.
    """
    p, n, out_times, tuning = _setup(grid, out_times, tuning)
    diag: dict = {}
    q = overrides.q if overrides and overrides.q is not None else max(2, int(round(math.sqrt(n) / math.log(n))))
    q = int(np.clip(q, 2, n // 2))
    params = overrides or EstimatorParams(q=q, kernel="epanechnikov", provenance="q = [sqrt(n)/log n]")
    r2 = np.diff(p) ** 2 - 2.0 * tuning.omega2_hat
    values = np.empty(out_times.size)
    boundary = np.zeros(out_times.size, dtype=bool)
    for j, t in enumerate(out_times):
        c = int(round(t / grid.mesh))
        lo, hi = max(0, c - q), min(r2.size, c + q + 1)
        x = (np.arange(lo, hi) - c) / q
        w = 0.75 * (1.0 - x**2)
        w = np.maximum(w, 0.0)
        wsum = float(np.sum(w))
        values[j] = float(np.sum(w * r2[lo:hi])) / (wsum * grid.mesh) if wsum > 0 else 0.0
        boundary[j] = (hi - lo) < (2 * q + 1)
    diag.update(q=q, boundary_points=int(boundary.sum()), noise_corrected=True)
    return SpotPath(out_times, values, "spot.kernel", params, diag)


def _half_window_psis(s: int) -> tuple[float, float]:
    i = np.arange(1, s)
    g = (2.0 / s) * np.minimum(i, s - i)
    g_pad = np.concatenate(([0.0], g, [0.0]))
    return float(np.sum(g**2)), float(np.sum(np.diff(g_pad) ** 2))


def spot_preaveraging(grid: LogPriceGrid, out_times=None, tuning: Optional[TuningInputs] = None,
                      overrides: Optional[EstimatorParams] = None) -> SpotPath:
    """Localized pre-averaged squared increments minus a noise term."""
    p, n, out_times, tuning = _setup(grid, out_times, tuning)
    diag: dict = {}
    c1 = overrides.c1 if overrides and overrides.c1 is not None else 1.0 / 3.0
    c2 = overrides.c2 if overrides and overrides.c2 is not None else 1.0
    q = overrides.q if overrides and overrides.q is not None else int(round(c1 * n**0.75))
    s = int(overrides.s) if overrides and overrides.s is not None else int(round(c2 * math.sqrt(n)))
    s = max(4, min(s, max(4, q // 2)))
    s -= s % 2
    q = int(np.clip(q, s + 2, n))
    params = overrides or EstimatorParams(q=q, s=s, c1=c1, c2=c2,
                                          provenance="q = [c1 n^(3/4)], s = [c2 n^(1/2)]")
    psi, psi_prime = _half_window_psis(s)
    csum = np.concatenate(([0.0], np.cumsum(p)))
    half = s // 2
    n_win_all = n + 1 - s + 1
    firsts = csum[half : half + n_win_all] - csum[:n_win_all]
    seconds = csum[s : s + n_win_all] - csum[half : half + n_win_all]
    D2 = ((seconds - firsts) / half) ** 2
    r2 = np.diff(p) ** 2
    r2_csum = np.concatenate(([0.0], np.cumsum(r2)))
    D2_csum = np.concatenate(([0.0], np.cumsum(D2)))

    values = np.empty(out_times.size)
    boundary = np.zeros(out_times.size, dtype=bool)
    for j, t in enumerate(out_times):
        c = int(round(t / grid.mesh))
        lo, hi = max(0, c - q // 2), min(D2.size, c + q // 2)
        m = hi - lo
        mean_d2 = (D2_csum[hi] - D2_csum[lo]) / m
        rlo, rhi = max(0, c - q // 2), min(r2.size, c + q // 2)
        omega2_loc = (r2_csum[rhi] - r2_csum[rlo]) / (2.0 * (rhi - rlo))
        values[j] = (mean_d2 / psi - (psi_prime / psi) * omega2_loc) / grid.mesh
        boundary[j] = m < q
    diag.update(q=q, s=s, boundary_points=int(boundary.sum()))
    return SpotPath(out_times, values, "spot.preavg", params, diag)


def spot_two_scale(grid: LogPriceGrid, out_times=None, tuning: Optional[TuningInputs] = None,
                   overrides: Optional[EstimatorParams] = None) -> SpotPath:
    """Localized two-scale difference over a data-driven window."""
    p, n, out_times, tuning = _setup(grid, out_times, tuning)
    diag: dict = {}
    iq_step = tuning.iq_per_step
    if overrides and overrides.q is not None:
        q = int(overrides.q)
    else:
        q0 = (12.0 * tuning.omega4_hat / iq_step) ** (1.0 / 3.0) if iq_step > 0 else 0.0
        q = int(round(q0 * n ** (2.0 / 3.0)))
    q = int(np.clip(q, 2, max(2, n // 20 - 1)))
    if overrides and overrides.s is not None:
        s_frac = float(overrides.s)
    else:
        s_pilot = max(2, int(round(math.sqrt(n))))
        r2 = np.diff(p) ** 2
        pilot = np.convolve(r2, np.ones(s_pilot) / s_pilot, mode="valid")
        gamma = float(np.sum(np.diff(pilot) ** 2))
        q0 = q / n ** (2.0 / 3.0)
        if gamma > 0 and q0 > 0:
            s0 = math.sqrt((8.0 * tuning.omega4_hat / q0**2 + (4.0 / 3.0) * q0 * tuning.iq_hat / n) / (gamma / 3.0))
            s_frac = s0 * n ** (-1.0 / 6.0)
        else:
            s_frac = 0.25
        diag["gamma"] = gamma
    L = int(np.clip(round(s_frac * n), 2 * q + 2, n // 10))
    params = overrides or EstimatorParams(q=q, s=s_frac, provenance="q* = q0 n^(2/3), s* = s0 n^(-1/6)")

    rq2 = (p[q:] - p[:-q]) ** 2
    r2 = np.diff(p) ** 2
    rq2_csum = np.concatenate(([0.0], np.cumsum(rq2)))
    r2_csum = np.concatenate(([0.0], np.cumsum(r2)))
    values = np.empty(out_times.size)
    boundary = np.zeros(out_times.size, dtype=bool)
    for j, t in enumerate(out_times):
        c = int(round(t / grid.mesh))
        lo = max(0, c - L // 2)
        hi = min(r2.size, c + L // 2)
        n2 = hi - lo
        qlo, qhi = min(lo, rq2.size), min(hi - q + 1, rq2.size)
        n1 = max(qhi - qlo, 0)
        if n1 < 2:
            values[j] = 0.0
            boundary[j] = True
            continue
        num1 = rq2_csum[qhi] - rq2_csum[qlo]
        rv_loc = r2_csum[hi] - r2_csum[lo]
        # exactly unbiased for Brownian + iid noise: both terms carry the
        # same per-return noise load, and the q-lag sum carries q-fold signal
        est = (num1 - (n1 / n2) * rv_loc) / (n1 * (q - 1.0))
        values[j] = est / grid.mesh
        boundary[j] = n2 < L
    diag.update(q=q, window_samples=L, boundary_points=int(boundary.sum()))
    return SpotPath(out_times, values, "spot.two_scale", params, diag)


def spot_preavg_kernel(grid: LogPriceGrid, out_times=None, tuning: Optional[TuningInputs] = None,
                       overrides: Optional[EstimatorParams] = None) -> SpotPath:
    """Exponential-kernel weighted pre-averaged blocks."""
    p, n, out_times, tuning = _setup(grid, out_times, tuning)
    diag: dict = {}
    s = int(overrides.s) if overrides and overrides.s is not None else max(4, int(round(math.sqrt(n) / 5.0)))
    # bandwidth shrinks with the pre-averaging scale so the estimator
    # actually localizes as the mesh refines
    bw = overrides.bandwidth if overrides and overrides.bandwidth is not None \
        else 3.0 * s * grid.mesh / grid.horizon
    params = overrides or EstimatorParams(s=s, bandwidth=bw, kernel="exponential",
                                          provenance="s = 1/(5 sqrt(dt)), bandwidth = 3 s dt / T")
    i = np.arange(s + 1)
    g = np.minimum(2.0 * i / s, 1.0 - i / s)
    dg = np.diff(g)
    f_g = float(np.sum(g[1:] ** 2))
    eff = f_g - 0.5 * float(np.sum(dg**2))
    r = np.diff(p)
    bar = np.convolve(r, g[1:s][::-1], mode="valid")     # weighted pre-averages
    hat = np.convolve(r**2, (dg**2)[::-1], mode="valid")  # noise proxies
    m = min(bar.size, hat.size)
    stat = bar[:m] ** 2 - 0.5 * hat[:m]
    t_blocks = (np.arange(m) + s / 2.0) * grid.mesh / grid.horizon

    values = np.empty(out_times.size)
    for j, t in enumerate(out_times):
        x = (t_blocks - t / grid.horizon) / bw
        w = 0.5 * np.exp(-np.abs(np.clip(x, -30, 30)))
        den = float(np.sum(w)) / n
        values[j] = float(np.sum(w * stat)) / (eff * den) / grid.horizon if den > 0 else 0.0
    diag.update(s=s, bandwidth=bw)
    return SpotPath(out_times, values, "spot.preavg_kernel", params, diag)


def integrated_metrics(spot: SpotPath, truth: SpotPath) -> tuple[float, float]:
    """Relative integrated bias and MSE of a spot path against the truth."""
    if spot.times.shape != truth.times.shape or not np.allclose(spot.times, truth.times):
        raise ValueError("spot and truth grids must match")
    if (truth.values <= 0).any():
        raise ValueError("truth path must be strictly positive")
    rel = (spot.values - truth.values) / truth.values
    return float(np.mean(rel)), float(np.mean(rel**2))


SPOT: dict[str, Callable[..., SpotPath]] = {
    "spot.fourier": spot_fourier,
    "spot.regularized": spot_regularized,
    "spot.kernel": spot_kernel,
    "spot.preavg": spot_preaveraging,
    "spot.two_scale": spot_two_scale,
    "spot.preavg_kernel": spot_preavg_kernel,
}
