"""Gaussian price-path surrogates with analytic moments.

These paths stand in for the order-book simulator wherever a closed-form
oracle is needed: a Brownian log-price with optional i.i.d. observation
noise, exposed both as a raw log-price grid and behind the ``TickPath``
interface.
"""

from __future__ import annotations

import math

import numpy as np

from lobvol.book import LogPriceGrid, PriceQuote, TickPath

__all__ = [
    "bachelier_log_grid",
    "bachelier_tick_path",
    "bachelier_price_path",
    "piecewise_variance_log_grid",
]


def bachelier_log_grid(
    sigma2: float,
    n: int,
    mesh: float = 1.0,
    noise_std: float = 0.0,
    seed: int | None = None,
    kind: str = "mid",
    p0: float = math.log(100.0),
) -> LogPriceGrid:
    """Brownian log-price on ``n + 1`` grid points plus i.i.d. noise.

    ``sigma2`` is the variance per second of the efficient log-price and
    ``noise_std`` the standard deviation of the additive observation noise.
    """
    if sigma2 < 0 or n < 1:
        raise ValueError("need sigma2 >= 0 and n >= 1")
    rng = np.random.default_rng(seed)
    increments = rng.standard_normal(n) * math.sqrt(sigma2 * mesh)
    values = p0 + np.concatenate(([0.0], np.cumsum(increments)))
    if noise_std > 0:
        values = values + rng.standard_normal(n + 1) * noise_std
    return LogPriceGrid(values=values, mesh=mesh, series_kind=kind)


def piecewise_variance_log_grid(
    sigma2_levels: np.ndarray,
    n: int,
    mesh: float = 1.0,
    noise_std: float = 0.0,
    seed: int | None = None,
    kind: str = "mid",
    p0: float = math.log(100.0),
) -> LogPriceGrid:
    """Brownian log-price whose variance steps through equal-length regimes."""
    levels = np.asarray(sigma2_levels, dtype=float)
    if levels.ndim != 1 or levels.size < 1 or (levels < 0).any():
        raise ValueError("sigma2_levels must be a vector of non-negative variances")
    rng = np.random.default_rng(seed)
    regime = np.minimum((np.arange(n) * levels.size) // n, levels.size - 1)
    increments = rng.standard_normal(n) * np.sqrt(levels[regime] * mesh)
    values = p0 + np.concatenate(([0.0], np.cumsum(increments)))
    if noise_std > 0:
        values = values + rng.standard_normal(n + 1) * noise_std
    return LogPriceGrid(values=values, mesh=mesh, series_kind=kind)


def bachelier_tick_path(
    sigma2: float,
    horizon: float,
    mesh: float = 1.0,
    noise_std: float = 0.0,
    seed: int | None = None,
) -> TickPath:
    """Surrogate path dressed up as a ``TickPath``.

    Quotes are locked (bid = ask) and each instant also prints a trade, so
    all three series coincide with the surrogate price.
    """
    n = int(round(horizon / mesh))
    grid = bachelier_log_grid(sigma2, n, mesh=mesh, noise_std=noise_std, seed=seed)
    prices = np.exp(grid.values)
    times = np.arange(n + 1) * mesh
    quotes = tuple(
        PriceQuote(best_bid=p, best_ask=p, bid_vol=1, ask_vol=1, timestamp=t)
        for t, p in zip(times, prices)
    )
    trades = tuple((float(t), float(p)) for t, p in zip(times, prices))
    return TickPath(quotes=quotes, trades=trades, horizon=horizon, diagnostics={"surrogate": "bachelier"})


def bachelier_price_path(
    sigma2: float,
    times: np.ndarray,
    p0: float = 100.0,
    seed: int | None = None,
) -> np.ndarray:
    """Arithmetic Brownian cash price sampled at the given instants.

    ``sigma2`` is the variance of the cash price per second; increments
    between consecutive instants are independent Gaussians.
    """
    t = np.asarray(times, dtype=float)
    if t.ndim != 1 or (np.diff(t) < 0).any():
        raise ValueError("times must be non-decreasing")
    rng = np.random.default_rng(seed)
    dt = np.diff(np.concatenate(([0.0], t)))
    shocks = rng.standard_normal(t.size) * np.sqrt(sigma2 * dt)
    return p0 + np.cumsum(shocks)
