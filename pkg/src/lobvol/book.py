"""Core order-book and price-series types.

Prices inside the simulator live on an integer tick grid; log-prices only
appear when a tick path is sampled onto an equally spaced grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OrderBookState",
    "PriceQuote",
    "TickPath",
    "LogPriceGrid",
    "mid_price",
    "micro_price",
    "sample_grid",
]


@dataclass(frozen=True)
class OrderBookState:
    """Snapshot of the 2K queues around a reference price.

    ``queues`` holds volumes for levels ``-K..-1, 1..K`` in that order.
    Bid level ``i`` sits at ``ref_price - (i - 1)`` ticks, ask level ``i``
    at ``ref_price + i`` ticks, so a book with both level-1 queues filled
    quotes a one-tick spread.
    """

    ref_price: int
    queues: np.ndarray
    tick_size: float = 0.01

    def __post_init__(self) -> None:
        q = np.asarray(self.queues, dtype=np.int64)
        if q.ndim != 1 or q.size % 2 != 0 or q.size < 2:
            raise ValueError("queues must be a flat vector of 2K volumes")
        if (q < 0).any():
            raise ValueError("queue volumes must be non-negative")
        object.__setattr__(self, "queues", q)

    @property
    def depth(self) -> int:
        return self.queues.size // 2

    def bid_volume(self, level: int) -> int:
        """Volume at bid level ``level`` (1 = best)."""
        return int(self.queues[self.depth - level])

    def ask_volume(self, level: int) -> int:
        """Volume at ask level ``level`` (1 = best)."""
        return int(self.queues[self.depth + level - 1])

    def bid_price_ticks(self, level: int) -> int:
        return self.ref_price - (level - 1)

    def ask_price_ticks(self, level: int) -> int:
        return self.ref_price + level

    @property
    def degenerate(self) -> bool:
        """True when either side of the window is completely empty."""
        K = self.depth
        return not (self.queues[:K].any() and self.queues[K:].any())

    def best_bid_level(self) -> int:
        """Best (lowest index) nonempty bid level; raises if side empty."""
        K = self.depth
        for i in range(1, K + 1):
            if self.queues[K - i] > 0:
                return i
        raise ValueError("bid side is empty")

    def best_ask_level(self) -> int:
        K = self.depth
        for i in range(1, K + 1):
            if self.queues[K + i - 1] > 0:
                return i
        raise ValueError("ask side is empty")

    def quote(self, timestamp: float = 0.0) -> "PriceQuote":
        """Best-quote view of the state in cash prices."""
        ib = self.best_bid_level()
        ia = self.best_ask_level()
        return PriceQuote(
            best_bid=self.bid_price_ticks(ib) * self.tick_size,
            best_ask=self.ask_price_ticks(ia) * self.tick_size,
            bid_vol=self.bid_volume(ib),
            ask_vol=self.ask_volume(ia),
            timestamp=timestamp,
        )


@dataclass(frozen=True)
class PriceQuote:
    best_bid: float
    best_ask: float
    bid_vol: float
    ask_vol: float
    timestamp: float = 0.0

    def __post_init__(self) -> None:
        if self.best_ask < self.best_bid:
            raise ValueError("crossed quote: best_ask < best_bid")
        if self.bid_vol < 0 or self.ask_vol < 0:
            raise ValueError("negative quote volume")


def mid_price(q: PriceQuote) -> float:
    """Arithmetic average of the best quotes."""
    return 0.5 * (q.best_bid + q.best_ask)


def micro_price(q: PriceQuote) -> float:
    """Volume-weighted average of the best quotes.

    Tilts toward the side with the smaller queue; always lies inside the
    spread.
    """
    total = q.bid_vol + q.ask_vol
    if total <= 0:
        raise ValueError("micro price undefined for zero total volume")
    return (q.best_bid * q.ask_vol + q.best_ask * q.bid_vol) / total


@dataclass(frozen=True)
class TickPath:
    """Event-time record of quotes and trades over ``[0, horizon]``."""

    quotes: tuple[PriceQuote, ...]
    trades: tuple[tuple[float, float], ...]
    horizon: float
    diagnostics: dict = field(default_factory=dict, compare=False)

    def __post_init__(self) -> None:
        tq = [q.timestamp for q in self.quotes]
        tt = [t for t, _ in self.trades]
        for ts in (tq, tt):
            if any(b < a for a, b in zip(ts, ts[1:])):
                raise ValueError("timestamps must be non-decreasing")
            if ts and (ts[0] < 0 or ts[-1] > self.horizon):
                raise ValueError("timestamps must lie within [0, horizon]")

    def quote_times(self) -> np.ndarray:
        return np.array([q.timestamp for q in self.quotes])

    def series(self, kind: str) -> tuple[np.ndarray, np.ndarray]:
        """(times, prices) of the requested series kind."""
        if kind == "mid":
            return self.quote_times(), np.array([mid_price(q) for q in self.quotes])
        if kind == "micro":
            return self.quote_times(), np.array([micro_price(q) for q in self.quotes])
        if kind == "trade":
            times = np.array([t for t, _ in self.trades])
            prices = np.array([p for _, p in self.trades])
            return times, prices
        raise ValueError(f"unknown series kind {kind!r}")


@dataclass(frozen=True)
class LogPriceGrid:
    """Log-prices at ``n + 1`` equally spaced instants."""

    values: np.ndarray
    mesh: float
    series_kind: str = "mid"

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 1:
            raise ValueError("grid values must be a non-empty vector")
        if not np.isfinite(v).all():
            raise ValueError("grid values must be finite")
        if self.mesh <= 0:
            raise ValueError("mesh must be positive")
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        """Number of returns."""
        return self.values.size - 1

    @property
    def horizon(self) -> float:
        return self.n * self.mesh

    def returns(self) -> np.ndarray:
        return np.diff(self.values)


def sample_grid(path: TickPath, mesh: float, kind: str = "mid") -> LogPriceGrid:
    """Last-tick sampling of log prices onto an equally spaced grid.

    Grid instants preceding the first observation carry the first
    observation backward, so the grid is always complete.
    """
    times, prices = path.series(kind)
    if times.size == 0:
        raise ValueError(f"path has no observations for kind {kind!r}")
    if (prices <= 0).any():
        raise ValueError("prices must be positive to take logs")
    n = int(np.floor(path.horizon / mesh + 1e-9))
    grid_times = np.arange(n + 1) * mesh
    idx = np.searchsorted(times, grid_times, side="right") - 1
    idx = np.clip(idx, 0, times.size - 1)
    return LogPriceGrid(values=np.log(prices[idx]), mesh=mesh, series_kind=kind)
