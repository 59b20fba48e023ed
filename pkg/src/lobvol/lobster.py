"""Reader for LOBSTER message/orderbook CSV pairs.

Message rows are (time, type, order_id, size, price, direction) with
times in seconds after midnight and prices in dollars x 10^4; the book
file carries ask/bid price/size columns for k levels, one row per
message, snapshotted after the message applies.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import pandas as pd

from lobvol.book import PriceQuote, TickPath
from lobvol.calibrate import EventRecord

__all__ = ["LobsterSession", "load_lobster", "to_event_records", "to_tick_path"]

MESSAGE_COLUMNS = ("time", "type", "order_id", "size", "price", "direction")
PRICE_SCALE = 1e4
# event types: 1 limit, 2 partial cancel, 3 delete, 4 visible execution,
# 5 hidden execution (skipped), 6 cross, 7 halt
KIND_MAP = {1: "limit", 2: "cancel", 3: "cancel", 4: "market"}


@dataclass
class LobsterSession:
    messages: pd.DataFrame
    book: pd.DataFrame
    levels: int
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if len(self.messages) != len(self.book):
            raise ValueError("message and book files must align row for row")
        t = self.messages["time"].to_numpy()
        if (np.diff(t) < 0).any():
            raise ValueError("message times must be non-decreasing")

    def __len__(self) -> int:
        return len(self.messages)

    def trim(self, start: float = 34200.0 + 3600.0,
             end: float = 57600.0 - 1800.0) -> "LobsterSession":
        """Drop the first hour and last half hour of the trading day."""
        keep = (self.messages["time"] >= start) & (self.messages["time"] <= end)
        return LobsterSession(
            messages=self.messages[keep].reset_index(drop=True),
            book=self.book[keep.to_numpy()].reset_index(drop=True),
            levels=self.levels,
            diagnostics={**self.diagnostics, "trimmed": int((~keep).sum())})


def _book_columns(levels: int) -> list[str]:
    cols = []
    for k in range(1, levels + 1):
        cols += [f"ask_p{k}", f"ask_s{k}", f"bid_p{k}", f"bid_s{k}"]
    return cols


def load_lobster(message_file, book_file, levels: int = 2) -> LobsterSession:
    """Parse an aligned message/book file pair.

    Malformed rows (wrong field count or unparsable numbers) are dropped
    from both files with their line numbers reported in diagnostics.
    """
    if levels < 1:
        raise ValueError("need levels >= 1")
    try:
        msgs = pd.read_csv(message_file, header=None, usecols=range(6),
                           names=MESSAGE_COLUMNS, on_bad_lines="skip")
    except pd.errors.EmptyDataError:
        msgs = pd.DataFrame(columns=MESSAGE_COLUMNS)
    try:
        book = pd.read_csv(book_file, header=None, names=_book_columns(levels),
                           usecols=range(4 * levels), on_bad_lines="skip")
    except pd.errors.EmptyDataError:
        book = pd.DataFrame(columns=_book_columns(levels))
    bad_rows = []
    for df in (msgs, book):
        numeric = df.apply(pd.to_numeric, errors="coerce")
        bad_rows += list(df.index[numeric.isna().any(axis=1)])
        df.loc[:, :] = numeric
    if len(msgs) != len(book):
        raise ValueError(f"row-count mismatch: {len(msgs)} messages vs {len(book)} book rows")
    keep = sorted(set(range(len(msgs))) - set(bad_rows))
    diag = {"rejected_lines": sorted(set(bad_rows))} if bad_rows else {}
    return LobsterSession(messages=msgs.iloc[keep].reset_index(drop=True),
                          book=book.iloc[keep].reset_index(drop=True),
                          levels=levels, diagnostics=diag)


def to_event_records(session: LobsterSession,
                     median_size_normalization: bool = True) -> list[EventRecord]:
    """Map messages to events with pre-event queue states attached.

    The pre-event book of row i is the snapshot of row i-1 (the first
    row uses its own snapshot). Sizes are expressed as multiples of the
    median event size, rounded to at least one unit. Hidden executions
    and other unmappable types are skipped and counted in the session
    diagnostics.
    """
    msgs = session.messages
    book = session.book
    K = session.levels
    if len(msgs) == 0:
        return []
    med = float(msgs["size"].median()) if median_size_normalization else 1.0
    med = med if med > 0 else 1.0
    records: list[EventRecord] = []
    skipped = 0
    out_of_window = 0
    for i in range(len(msgs)):
        row = msgs.iloc[i]
        kind = KIND_MAP.get(int(row["type"]))
        if kind is None:
            skipped += 1
            continue
        pre = book.iloc[max(i - 1, 0)]
        side = "bid" if int(row["direction"]) == 1 else "ask"
        level = 0
        for k in range(1, K + 1):
            if pre[f"{side}_p{k}"] == row["price"]:
                level = k
                break
        if level == 0:
            out_of_window += 1
            continue
        opp = "ask" if side == "bid" else "bid"
        size_units = max(1, round(float(row["size"]) / med)) if median_size_normalization \
            else float(row["size"])
        records.append(EventRecord(
            timestamp=float(row["time"]),
            level=level if side == "ask" else -level,
            kind=kind,
            size=size_units,
            own_q=float(pre[f"{side}_s{level}"]),
            opposite_q=float(pre[f"{opp}_s{level}"]),
            best_empty=bool(level > 1 and pre[f"{side}_s1"] <= 0)))
    session.diagnostics["skipped_events"] = skipped
    session.diagnostics["out_of_window_events"] = out_of_window
    session.diagnostics["median_size"] = med
    return records


def to_tick_path(session: LobsterSession) -> TickPath:
    """Best-quote and trade series of the session as a TickPath.

    Times are re-based to the start of the (possibly trimmed) session.
    """
    if len(session) == 0:
        return TickPath(quotes=(), trades=(), horizon=0.0)
    msgs = session.messages
    book = session.book
    t0 = float(msgs["time"].iloc[0])
    horizon = float(msgs["time"].iloc[-1]) - t0
    quotes = tuple(
        PriceQuote(best_bid=book["bid_p1"].iloc[i] / PRICE_SCALE,
                   best_ask=book["ask_p1"].iloc[i] / PRICE_SCALE,
                   bid_vol=float(book["bid_s1"].iloc[i]),
                   ask_vol=float(book["ask_s1"].iloc[i]),
                   timestamp=float(msgs["time"].iloc[i]) - t0)
        for i in range(len(msgs)))
    trades = tuple(
        (float(row.time) - t0, float(row.price) / PRICE_SCALE)
        for row in msgs.itertuples(index=False) if int(row.type) == 4)
    return TickPath(quotes=quotes, trades=trades, horizon=horizon)
