"""Event-driven limit-order-book simulators.

Two models share one compiled event loop: a zero-intelligence book with
constant arrival rates, and a queue-reactive book whose limit/cancel
rates depend on the own-queue size and the regime of the opposite queue.
The book is a 2K window of integer queues around an integer reference
price; when the reference price moves, surviving price levels keep their
volume and newly exposed levels are drawn from the invariant queue-size
distribution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import pandas as pd
from numba import njit

from lobvol.book import PriceQuote, TickPath

__all__ = [
    "ZIParams",
    "QRIntensityTable",
    "QRParams",
    "RegimeSchedule",
    "simulate_zi",
    "simulate_qr",
    "estimate_invariant_distribution",
    "estimate_true_variance",
    "default_qr_params",
    "zi_to_qr",
    "TrueVarianceResult",
]

N_REGIMES = 4  # opposite-queue buckets: empty, small, medium, large
REGIME_NAMES = ("Q0", "Qminus", "Qbar", "Qplus")


@dataclass(frozen=True)
class ZIParams:
    """Constant-rate book: total limit/cancel/market intensities per second."""

    lambda_L: float
    lambda_C: float
    lambda_M: float
    K: int = 2
    tick_size: float = 0.01

    def __post_init__(self) -> None:
        if min(self.lambda_L, self.lambda_C, self.lambda_M) < 0:
            raise ValueError("rates must be non-negative")
        if self.lambda_L + self.lambda_C + self.lambda_M <= 0:
            raise ValueError("at least one rate must be positive")
        if self.K < 1:
            raise ValueError("need K >= 1")


@dataclass(frozen=True)
class QRIntensityTable:
    """State-dependent arrival rates, side-symmetric.

    ``limit`` and ``cancel`` have shape (K, q_max + 1, 4, 2), indexed by
    (level - 1, own-queue size clamped at q_max, opposite-queue regime,
    best-queue-empty flag). The flag only matters for levels beyond the
    first. Market orders arrive at constant rates and consume the best
    queue of their side. Thresholds ``m`` and ``l`` bucket the opposite
    queue: 0 -> Q0, (0, m] -> Qminus, (m, l] -> Qbar, (l, inf) -> Qplus.
    """

    limit: np.ndarray
    cancel: np.ndarray
    lambda_M_buy: float
    lambda_M_sell: float
    m: float
    l: float

    def __post_init__(self) -> None:
        for name in ("limit", "cancel"):
            a = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if a.ndim != 4 or a.shape[2] != N_REGIMES or a.shape[3] != 2:
                raise ValueError(f"{name} must have shape (K, q_max+1, 4, 2)")
            if not np.isfinite(a).all() or (a < 0).any():
                raise ValueError(f"{name} rates must be finite and non-negative")
            object.__setattr__(self, name, a)
        if self.limit.shape != self.cancel.shape:
            raise ValueError("limit and cancel tables must share a shape")
        if self.lambda_M_buy < 0 or self.lambda_M_sell < 0:
            raise ValueError("market rates must be non-negative")
        if not 0 <= self.m <= self.l:
            raise ValueError("need 0 <= m <= l")

    @property
    def K(self) -> int:
        return self.limit.shape[0]

    @property
    def q_max(self) -> int:
        return self.limit.shape[1] - 1

    def regime(self, opposite_q: float) -> int:
        if opposite_q == 0:
            return 0
        if opposite_q <= self.m:
            return 1
        if opposite_q <= self.l:
            return 2
        return 3

    def max_total_rate(self) -> float:
        """Upper bound on the instantaneous total event rate."""
        per_level = self.limit.max(axis=(1, 2, 3)) + self.cancel.max(axis=(1, 2, 3))
        return 2.0 * float(per_level.sum()) + self.lambda_M_buy + self.lambda_M_sell

    def to_frame(self) -> pd.DataFrame:
        """Long-format view: (level, kind, own_q, opposite_regime, best_empty, rate).

        Market rates appear as kind 'market' with level +1 (buy) / -1
        (sell); thresholds as kind 'threshold' with the name in
        opposite_regime and the value in rate.
        """
        K, Q = self.K, self.q_max + 1
        lvl, q, reg, flag = np.unravel_index(np.arange(K * Q * N_REGIMES * 2),
                                             (K, Q, N_REGIMES, 2))
        frames = []
        for kind, table in (("limit", self.limit), ("cancel", self.cancel)):
            frames.append(pd.DataFrame({
                "level": lvl + 1, "kind": kind, "own_q": q,
                "opposite_regime": np.asarray(REGIME_NAMES)[reg],
                "best_empty": flag.astype(bool), "rate": table.ravel()}))
        extra = pd.DataFrame(
            [(1, "market", 0, "", False, self.lambda_M_buy),
             (-1, "market", 0, "", False, self.lambda_M_sell),
             (0, "threshold", 0, "m", False, self.m),
             (0, "threshold", 0, "l", False, self.l)],
            columns=["level", "kind", "own_q", "opposite_regime", "best_empty", "rate"])
        return pd.concat(frames + [extra], ignore_index=True)

    def to_csv(self, path_or_buf) -> None:
        # 17 significant digits round-trip float64 exactly
        self.to_frame().to_csv(path_or_buf, index=False, float_format="%.17g")

    @classmethod
    def from_frame(cls, df: pd.DataFrame) -> "QRIntensityTable":
        core = df[df["kind"].isin(["limit", "cancel"])]
        if core.empty:
            raise ValueError("table has no limit/cancel rows")
        K = int(core["level"].max())
        q_max = int(core["own_q"].max())
        tables = {k: np.zeros((K, q_max + 1, N_REGIMES, 2)) for k in ("limit", "cancel")}
        reg_idx = {name: i for i, name in enumerate(REGIME_NAMES)}
        for row in core.itertuples(index=False):
            flag = 1 if row.best_empty in (True, "True", 1) else 0
            tables[row.kind][int(row.level) - 1, int(row.own_q),
                             reg_idx[str(row.opposite_regime)], flag] = float(row.rate)
        mk = df[df["kind"] == "market"]
        buy = float(mk[mk["level"] == 1]["rate"].iloc[0]) if len(mk) else 0.0
        sell = float(mk[mk["level"] == -1]["rate"].iloc[0]) if len(mk) else 0.0
        th = df[df["kind"] == "threshold"]
        m = float(th[th["opposite_regime"] == "m"]["rate"].iloc[0])
        l = float(th[th["opposite_regime"] == "l"]["rate"].iloc[0])
        return cls(limit=tables["limit"], cancel=tables["cancel"],
                   lambda_M_buy=buy, lambda_M_sell=sell, m=m, l=l)

    @classmethod
    def from_csv(cls, path_or_buf) -> "QRIntensityTable":
        return cls.from_frame(pd.read_csv(path_or_buf,
                                          float_precision="round_trip"))


@dataclass(frozen=True)
class QRParams:
    """Queue-reactive model: intensity table plus price-move mechanism.

    ``theta`` is the probability that the reference price follows a
    mid-price move; ``theta_reinit`` the probability that such a move
    triggers a full book redraw from ``invariant_dist`` (per-level
    distribution over queue sizes 0..q_max, side-pooled).
    """

    intensities: QRIntensityTable
    theta: float
    theta_reinit: float
    invariant_dist: np.ndarray
    tick_size: float = 0.01
    start_price: float = 100.0

    def __post_init__(self) -> None:
        if not (0 <= self.theta <= 1 and 0 <= self.theta_reinit <= 1):
            raise ValueError("theta and theta_reinit must lie in [0, 1]")
        d = np.ascontiguousarray(self.invariant_dist, dtype=np.float64)
        if d.shape != (self.intensities.K, self.intensities.q_max + 1):
            raise ValueError("invariant_dist must have shape (K, q_max + 1)")
        if (d < 0).any() or not np.allclose(d.sum(axis=1), 1.0, atol=1e-8):
            raise ValueError("each invariant_dist row must be a distribution")
        object.__setattr__(self, "invariant_dist", d)

    @property
    def K(self) -> int:
        return self.intensities.K


@dataclass(frozen=True)
class RegimeSchedule:
    """(theta, theta_reinit) pairs over fractions of the horizon."""

    fractions: tuple[float, ...]
    thetas: tuple[float, ...]
    reinits: tuple[float, ...]

    def __post_init__(self) -> None:
        if not (len(self.fractions) == len(self.thetas) == len(self.reinits)):
            raise ValueError("schedule components must have equal length")
        if len(self.fractions) < 1 or any(f <= 0 for f in self.fractions):
            raise ValueError("fractions must be positive")
        if abs(sum(self.fractions) - 1.0) > 1e-9:
            raise ValueError("fractions must sum to 1")
        for v in (*self.thetas, *self.reinits):
            if not 0 <= v <= 1:
                raise ValueError("probabilities must lie in [0, 1]")

    @classmethod
    def constant(cls, theta: float, theta_reinit: float) -> "RegimeSchedule":
        return cls((1.0,), (theta,), (theta_reinit,))

    @classmethod
    def from_pairs(cls, pairs: Sequence[tuple[float, float]]) -> "RegimeSchedule":
        """Equal-length regimes from (theta, theta_reinit) pairs."""
        return cls(tuple(1.0 / len(pairs) for _ in pairs),
                   tuple(p[0] for p in pairs), tuple(p[1] for p in pairs))

    def end_times(self, horizon: float) -> np.ndarray:
        return np.cumsum(np.asarray(self.fractions)) * horizon


# --------------------------------------------------------------------------
# compiled event loop
# --------------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _draw_from_cdf(cdf_row):
    u = np.random.random()
    for v in range(cdf_row.size):
        if u <= cdf_row[v]:
            return v
    return cdf_row.size - 1


@njit(cache=True, nogil=True)
def _redraw_side(q, base, K, inv_cdf):
    """Redraw one side (base 0 = bids, K = asks) from the invariant CDF,
    forcing at least one unit somewhere so the side stays quotable."""
    for _ in range(10):
        total = 0
        for i in range(K):
            v = _draw_from_cdf(inv_cdf[i])
            q[base + i] = v
            total += v
        if total > 0:
            return
    q[base] = 1


@njit(cache=True, nogil=True)
def _best(q, base, K):
    for i in range(K):
        if q[base + i] > 0:
            return i
    return -1


@njit(cache=True, nogil=True)
def _shift_window(q, K, direction, inv_cdf):
    """Relabel queues after a one-tick reference-price move.

    The price level that switches sides carries its volume; the far level
    scrolled into the window is drawn from the invariant distribution.
    """
    if direction > 0:
        carry = q[K]
        for j in range(K, 2 * K - 1):
            q[j] = q[j + 1]
        q[2 * K - 1] = _draw_from_cdf(inv_cdf[K - 1])
        for i in range(K - 1, 0, -1):
            q[i] = q[i - 1]
        q[0] = carry
    else:
        carry = q[0]
        for i in range(K - 1):
            q[i] = q[i + 1]
        q[K - 1] = _draw_from_cdf(inv_cdf[K - 1])
        for j in range(2 * K - 1, K, -1):
            q[j] = q[j - 1]
        q[K] = carry


@njit(cache=True, nogil=True)
def _post_event(q, K, ref, mid_before, theta, reinit, inv_cdf, counters):
    """Degeneracy repair plus the reference-price move mechanism.

    ``counters`` is (redraws, ref_moves, reinits); returns the updated ref.
    """
    if _best(q, 0, K) < 0:
        _redraw_side(q, 0, K, inv_cdf)
        counters[0] += 1
    if _best(q, K, K) < 0:
        _redraw_side(q, K, K, inv_cdf)
        counters[0] += 1
    if mid_before == 0:
        return ref
    nb = _best(q, 0, K)
    na = _best(q, K, K)
    mid_after = 2 * ref + (na + 1) - nb
    if mid_after != mid_before and np.random.random() < theta:
        direction = 1 if mid_after > mid_before else -1
        _shift_window(q, K, direction, inv_cdf)
        ref += direction
        counters[1] += 1
        if np.random.random() < reinit:
            _redraw_side(q, 0, K, inv_cdf)
            _redraw_side(q, K, K, inv_cdf)
            counters[2] += 1
    return ref


@njit(cache=True, nogil=True)
def _qr_core(K, q_max, limit_rate, cancel_rate, lam_mb, lam_ms, m_thr, l_thr,
             inv_cdf, regime_ends, thetas, reinits, horizon, seed,
             q0, ref0, exec_times, exec_sizes, freeze_ref, burn_in,
             record_quotes, qt, qbb, qba, qvb, qva, tt, tp,
             ks_cap, ks_u, collect_hist, hist,
             record_events, ev_t, ev_level, ev_kind, ev_ownq, ev_oppq, ev_flag):
    """Shared event loop. ``q0`` holds bids then asks, best level first.

    Returns (n_quotes, n_trades, n_ks, n_events, redraws, ref_moves,
    reinits, exec_redraws, exec_cash_ticks, exec_filled, final_ref,
    overflow_flag, n_recorded_events).
    """
    np.random.seed(seed)
    q = q0.copy()
    ref = ref0
    t = 0.0
    nq = 0
    ntr = 0
    nks = 0
    n_events = 0
    counters = np.zeros(3, dtype=np.int64)
    n_exec_redraws = 0
    exec_cash = 0.0
    exec_filled = 0
    e_ptr = 0
    r_ptr = 0
    overflow = 0
    nev = 0
    last_bb = np.int64(-(1 << 60))
    last_ba = np.int64(-(1 << 60))
    last_vb = np.int64(-1)
    last_va = np.int64(-1)

    while True:
        bb = _best(q, 0, K)
        ba = _best(q, K, K)
        if record_quotes == 1 and bb >= 0 and ba >= 0:
            pb = ref - bb
            pa = ref + ba + 1
            vb = q[bb]
            va = q[K + ba]
            if pb != last_bb or pa != last_ba or vb != last_vb or va != last_va:
                if nq < qt.size:
                    qt[nq] = t
                    qbb[nq] = pb
                    qba[nq] = pa
                    qvb[nq] = vb
                    qva[nq] = va
                    nq += 1
                else:
                    overflow = 1
                last_bb, last_ba, last_vb, last_va = pb, pa, vb, va

        # total rate over the 4K + 2 event categories
        total = 0.0
        for side in range(2):
            base = side * K
            obase = K - base
            b1 = q[base]
            for i in range(K):
                qi = q[base + i]
                qo = q[obase + i]
                if qo == 0:
                    reg = 0
                elif qo <= m_thr:
                    reg = 1
                elif qo <= l_thr:
                    reg = 2
                else:
                    reg = 3
                flag = 1 if (i > 0 and b1 == 0) else 0
                qc = qi if qi < q_max else q_max
                total += limit_rate[i, qc, reg, flag]
                if qi > 0:
                    total += cancel_rate[i, qc, reg, flag]
        if ba >= 0:
            total += lam_mb
        if bb >= 0:
            total += lam_ms
        if total <= 0.0:
            break

        dt = np.random.exponential(1.0 / total)
        # scheduled executions interrupt the clock (memoryless restart)
        if e_ptr < exec_times.size and exec_times[e_ptr] <= t + dt and exec_times[e_ptr] <= horizon:
            t = exec_times[e_ptr]
            size = exec_sizes[e_ptr]
            e_ptr += 1
            while r_ptr < regime_ends.size - 1 and t > regime_ends[r_ptr]:
                r_ptr += 1
            mid_before = 0
            if bb >= 0 and ba >= 0:
                mid_before = 2 * ref + (ba + 1) - bb
            slice_cash = 0.0
            for _ in range(size):
                a = _best(q, K, K)
                if a < 0:
                    _redraw_side(q, K, K, inv_cdf)
                    n_exec_redraws += 1
                    a = _best(q, K, K)
                slice_cash += ref + a + 1
                q[K + a] -= 1
            exec_cash += slice_cash
            exec_filled += size
            if size > 0 and ntr < tt.size:
                tt[ntr] = t
                tp[ntr] = slice_cash / size
                ntr += 1
            ref = _post_event(q, K, ref, 0 if freeze_ref == 1 else mid_before,
                              thetas[r_ptr], reinits[r_ptr], inv_cdf, counters)
            continue

        t += dt
        if t > horizon:
            break
        n_events += 1
        if nks < ks_cap:
            ks_u[nks] = dt * total
            nks += 1
        while r_ptr < regime_ends.size - 1 and t > regime_ends[r_ptr]:
            r_ptr += 1

        mid_before = 0
        if bb >= 0 and ba >= 0:
            mid_before = 2 * ref + (ba + 1) - bb

        # categorical draw walking the same enumeration as the rate sum
        u = np.random.random() * total
        acc = 0.0
        done = 0
        trade_price = np.int64(-(1 << 60))
        evt_level = 0
        evt_kind = -1
        evt_ownq = 0
        evt_oppq = 0
        evt_flag = 0
        for side in range(2):
            if done == 1:
                break
            base = side * K
            obase = K - base
            b1 = q[base]
            for i in range(K):
                qi = q[base + i]
                qo = q[obase + i]
                if qo == 0:
                    reg = 0
                elif qo <= m_thr:
                    reg = 1
                elif qo <= l_thr:
                    reg = 2
                else:
                    reg = 3
                flag = 1 if (i > 0 and b1 == 0) else 0
                qc = qi if qi < q_max else q_max
                acc += limit_rate[i, qc, reg, flag]
                if u < acc:
                    q[base + i] += 1
                    evt_level = (i + 1) if side == 1 else -(i + 1)
                    evt_kind = 0
                    evt_ownq = qi
                    evt_oppq = qo
                    evt_flag = flag
                    done = 1
                    break
                if qi > 0:
                    acc += cancel_rate[i, qc, reg, flag]
                    if u < acc:
                        q[base + i] -= 1
                        evt_level = (i + 1) if side == 1 else -(i + 1)
                        evt_kind = 1
                        evt_ownq = qi
                        evt_oppq = qo
                        evt_flag = flag
                        done = 1
                        break
        if done == 0 and ba >= 0:
            acc += lam_mb
            if u < acc:
                evt_level = ba + 1
                evt_kind = 2
                evt_ownq = q[K + ba]
                evt_oppq = q[ba]
                evt_flag = 1 if (ba > 0 and q[K] == 0) else 0
                q[K + ba] -= 1
                trade_price = ref + ba + 1
                done = 1
        if done == 0 and bb >= 0:
            evt_level = -(bb + 1)
            evt_kind = 2
            evt_ownq = q[bb]
            evt_oppq = q[K + bb]
            evt_flag = 1 if (bb > 0 and q[0] == 0) else 0
            q[bb] -= 1
            trade_price = ref - bb
        if record_events == 1 and evt_kind >= 0 and nev < ev_t.size:
            ev_t[nev] = t
            ev_level[nev] = evt_level
            ev_kind[nev] = evt_kind
            ev_ownq[nev] = evt_ownq
            ev_oppq[nev] = evt_oppq
            ev_flag[nev] = evt_flag
            nev += 1
        if trade_price != -(1 << 60) and ntr < tt.size:
            tt[ntr] = t
            tp[ntr] = float(trade_price)
            ntr += 1

        if collect_hist == 1 and t > burn_in:
            for i in range(K):
                v = q[i] if q[i] < q_max else q_max
                hist[i, v] += 1
                v = q[K + i] if q[K + i] < q_max else q_max
                hist[i, v] += 1

        ref = _post_event(q, K, ref, 0 if freeze_ref == 1 else mid_before,
                          thetas[r_ptr], reinits[r_ptr], inv_cdf, counters)

    return (nq, ntr, nks, n_events, counters[0], counters[1], counters[2],
            n_exec_redraws, exec_cash, exec_filled, ref, overflow, nev)


# --------------------------------------------------------------------------
# python wrappers
# --------------------------------------------------------------------------


def _empty_exec():
    return np.empty(0, dtype=np.float64), np.empty(0, dtype=np.int64)


def _inv_cdf(dist: np.ndarray) -> np.ndarray:
    cdf = np.cumsum(dist, axis=1)
    cdf[:, -1] = 1.0
    return np.ascontiguousarray(cdf)


def _draw_start_state(params: QRParams, rng: np.random.Generator) -> np.ndarray:
    """Initial queues from the invariant distribution, never one-sided."""
    K = params.K
    sizes = np.arange(params.intensities.q_max + 1)
    for _ in range(100):
        q = np.empty(2 * K, dtype=np.int64)
        for i in range(K):
            q[i] = rng.choice(sizes, p=params.invariant_dist[i])
            q[K + i] = rng.choice(sizes, p=params.invariant_dist[i])
        if q[:K].any() and q[K:].any():
            return q
    q = np.ones(2 * K, dtype=np.int64)
    return q


def _run_core(params: QRParams, horizon: float, seed: int,
              schedule: RegimeSchedule | None = None,
              exec_times: np.ndarray | None = None,
              exec_sizes: np.ndarray | None = None,
              record_quotes: bool = True,
              ks_cap: int = 0,
              freeze_ref: bool = False,
              collect_hist: bool = False,
              burn_in: float = 0.0,
              record_events: bool = False,
              q0: np.ndarray | None = None) -> dict:
    """Run the compiled loop once and return raw arrays plus diagnostics."""
    table = params.intensities
    if schedule is None:
        schedule = RegimeSchedule.constant(params.theta, params.theta_reinit)
    seq = np.random.SeedSequence(seed)
    core_seed = int(seq.generate_state(1, dtype=np.uint32)[0])
    rng = np.random.default_rng(seq.spawn(1)[0])
    if q0 is None:
        q0 = _draw_start_state(params, rng)
    ref0 = int(round(params.start_price / params.tick_size)) - 1
    if exec_times is None:
        exec_times, exec_sizes = _empty_exec()
    exec_times = np.ascontiguousarray(exec_times, dtype=np.float64)
    exec_sizes = np.ascontiguousarray(exec_sizes, dtype=np.int64)

    mean_events = table.max_total_rate() * horizon
    cap = int(mean_events + 6.0 * math.sqrt(mean_events + 1.0) + 1024 + exec_sizes.size)
    hist = np.zeros((table.K, table.q_max + 1), dtype=np.int64)
    ks_u = np.empty(max(ks_cap, 1), dtype=np.float64)
    for attempt in range(4):
        ev_cap = cap if record_events else 1
        ev_t = np.empty(ev_cap, dtype=np.float64)
        ev_level = np.empty(ev_cap, dtype=np.int64)
        ev_kind = np.empty(ev_cap, dtype=np.int64)
        ev_ownq = np.empty(ev_cap, dtype=np.int64)
        ev_oppq = np.empty(ev_cap, dtype=np.int64)
        ev_flag = np.empty(ev_cap, dtype=np.int64)
        qt = np.empty(cap, dtype=np.float64)
        qbb = np.empty(cap, dtype=np.int64)
        qba = np.empty(cap, dtype=np.int64)
        qvb = np.empty(cap, dtype=np.int64)
        qva = np.empty(cap, dtype=np.int64)
        tt = np.empty(cap, dtype=np.float64)
        tp = np.empty(cap, dtype=np.float64)
        hist[:] = 0
        out = _qr_core(
            table.K, table.q_max, table.limit, table.cancel,
            table.lambda_M_buy, table.lambda_M_sell, float(table.m), float(table.l),
            _inv_cdf(params.invariant_dist),
            schedule.end_times(horizon), np.asarray(schedule.thetas, dtype=np.float64),
            np.asarray(schedule.reinits, dtype=np.float64),
            float(horizon), core_seed, q0, ref0, exec_times, exec_sizes,
            1 if freeze_ref else 0, float(burn_in),
            1 if record_quotes else 0, qt, qbb, qba, qvb, qva, tt, tp,
            ks_cap, ks_u, 1 if collect_hist else 0, hist,
            1 if record_events else 0, ev_t, ev_level, ev_kind,
            ev_ownq, ev_oppq, ev_flag)
        (nq, ntr, nks, n_events, n_redraws, n_ref_moves, n_reinits,
         n_exec_redraws, exec_cash, exec_filled, final_ref, overflow, nev) = out
        if not overflow:
            break
        cap *= 2
    return {
        "quote_times": qt[:nq], "bid_ticks": qbb[:nq], "ask_ticks": qba[:nq],
        "bid_vol": qvb[:nq], "ask_vol": qva[:nq],
        "trade_times": tt[:ntr], "trade_ticks": tp[:ntr],
        "ks_u": ks_u[:nks], "hist": hist,
        "event_times": ev_t[:nev], "event_levels": ev_level[:nev],
        "event_kinds": ev_kind[:nev], "event_own_q": ev_ownq[:nev],
        "event_opp_q": ev_oppq[:nev], "event_flags": ev_flag[:nev],
        "n_events": n_events, "n_redraws": n_redraws,
        "n_ref_moves": n_ref_moves, "n_reinits": n_reinits,
        "n_exec_redraws": n_exec_redraws,
        "exec_cash_ticks": exec_cash, "exec_filled": exec_filled,
        "final_ref": final_ref, "tick_size": params.tick_size,
        "horizon": float(horizon),
    }


def _to_tick_path(raw: dict) -> TickPath:
    tick = raw["tick_size"]
    quotes = tuple(
        PriceQuote(best_bid=bb * tick, best_ask=ba * tick,
                   bid_vol=int(vb), ask_vol=int(va), timestamp=t)
        for t, bb, ba, vb, va in zip(raw["quote_times"], raw["bid_ticks"],
                                     raw["ask_ticks"], raw["bid_vol"], raw["ask_vol"])
    )
    trades = tuple((float(t), float(p) * tick)
                   for t, p in zip(raw["trade_times"], raw["trade_ticks"]))
    diagnostics = {k: raw[k] for k in ("n_events", "n_redraws", "n_ref_moves",
                                       "n_reinits", "n_exec_redraws")}
    return TickPath(quotes=quotes, trades=trades, horizon=raw["horizon"],
                    diagnostics=diagnostics)


def zi_to_qr(params: ZIParams, invariant_dist: np.ndarray | None = None,
             q_max: int = 30) -> QRParams:
    """Express the constant-rate model in queue-reactive form.

    Limit and cancel totals are split uniformly over the 2K levels, the
    market rate equally between sides; the reference price always follows
    the mid (theta = 1) and never triggers redraws.
    """
    K = params.K
    limit = np.full((K, q_max + 1, N_REGIMES, 2), params.lambda_L / (2 * K))
    cancel = np.full((K, q_max + 1, N_REGIMES, 2), params.lambda_C / (2 * K))
    table = QRIntensityTable(limit=limit, cancel=cancel,
                             lambda_M_buy=params.lambda_M / 2,
                             lambda_M_sell=params.lambda_M / 2,
                             m=1.0, l=2.0)
    if invariant_dist is None:
        invariant_dist = np.zeros((K, q_max + 1))
        invariant_dist[:, 1] = 1.0
    return QRParams(intensities=table, theta=1.0, theta_reinit=0.0,
                    invariant_dist=invariant_dist, tick_size=params.tick_size)


def simulate_zi(params: ZIParams, horizon: float, seed: int = 0) -> TickPath:
    """Constant-rate book simulation over ``[0, horizon]``."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    return _to_tick_path(_run_core(zi_to_qr(params), horizon, seed))


def simulate_qr(params: QRParams, horizon: float, seed: int = 0,
                schedule: RegimeSchedule | None = None) -> TickPath:
    """Queue-reactive simulation over ``[0, horizon]``."""
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    return _to_tick_path(_run_core(params, horizon, seed, schedule=schedule))


def estimate_invariant_distribution(table: QRIntensityTable,
                                    burn_in: float = 300.0,
                                    sample_horizon: float = 3600.0,
                                    seed: int = 0) -> np.ndarray:
    """Empirical stationary law of queue sizes per level, side-pooled.

    Runs the book with a frozen reference price, histograms queue sizes
    at event times after burn-in, then repeats once with the first-pass
    law driving the degenerate-state redraws.
    """
    K, q_max = table.K, table.q_max
    bootstrap = np.zeros((K, q_max + 1))
    bootstrap[:, 1] = 1.0
    dist = bootstrap
    for ipass in range(2):
        params = QRParams(intensities=table, theta=0.0, theta_reinit=0.0,
                          invariant_dist=dist)
        raw = _run_core(params, burn_in + sample_horizon, seed + ipass,
                        record_quotes=False, freeze_ref=True,
                        collect_hist=True, burn_in=burn_in)
        hist = raw["hist"].astype(float)
        counts = hist.sum(axis=1)
        if (counts < 10 * q_max).any():
            raise ValueError("insufficient samples; increase sample_horizon")
        dist = hist / counts[:, None]
    return dist


@dataclass(frozen=True)
class TrueVarianceResult:
    """Per-second variance of each price series with jackknife errors."""

    variance: dict
    std_error: dict
    m: float
    n_sims: int


def _endpoint_log_return(times: np.ndarray, prices: np.ndarray, m: float) -> float:
    idx = np.searchsorted(times, m, side="right") - 1
    return math.log(prices[idx]) - math.log(prices[0])


def _jackknife_mean_se(x: np.ndarray) -> float:
    n = x.size
    loo = (x.sum() - x) / (n - 1)
    return float(math.sqrt((n - 1) / n * np.sum((loo - loo.mean()) ** 2)))


def estimate_true_variance(model, m: float = 18000.0, n_sims: int = 100,
                           seed: int = 0, schedule: RegimeSchedule | None = None,
                           ) -> TrueVarianceResult:
    """Long-horizon variance rate of mid, micro and trade prices.

    ``model`` is a :class:`ZIParams`, a :class:`QRParams`, or a callable
    ``(horizon, seed) -> TickPath`` (surrogate injection point). Each of
    the ``n_sims`` runs contributes (log p(m) - log p(0))^2 / m per
    series.
    """
    if m < 1:
        raise ValueError("need m >= 1 second")
    if n_sims < 2:
        raise ValueError("need n_sims >= 2")
    kinds = ("mid", "micro", "trade")
    d2 = {k: np.empty(n_sims) for k in kinds}
    seeds = np.random.SeedSequence(seed).generate_state(n_sims, dtype=np.uint32)
    use_arrays = isinstance(model, (ZIParams, QRParams))
    qr = zi_to_qr(model) if isinstance(model, ZIParams) else model
    for s in range(n_sims):
        if use_arrays:
            raw = _run_core(qr, m, int(seeds[s]), schedule=schedule)
            tick = raw["tick_size"]
            qt = raw["quote_times"]
            bb = raw["bid_ticks"] * tick
            ba = raw["ask_ticks"] * tick
            vb, va = raw["bid_vol"], raw["ask_vol"]
            series = {
                "mid": (qt, 0.5 * (bb + ba)),
                "micro": (qt, (bb * va + ba * vb) / (vb + va)),
                "trade": (raw["trade_times"], raw["trade_ticks"] * tick),
            }
        else:
            path = model(m, int(seeds[s]))
            series = {k: path.series(k) for k in kinds}
        for k in kinds:
            times, prices = series[k]
            d2[k][s] = _endpoint_log_return(times, prices, m) ** 2 / m if times.size else 0.0
    variance = {k: float(np.mean(d2[k])) for k in kinds}
    se = {k: _jackknife_mean_se(d2[k]) for k in kinds}
    return TrueVarianceResult(variance=variance, std_error=se, m=float(m), n_sims=n_sims)


def default_qr_params(theta: float = 0.6, theta_reinit: float = 0.85,
                      seed: int = 12345) -> QRParams:
    """Synthetic queue-reactive model shipped with the package.

    Limit rates fall and cancel rates rise with the own-queue size, with
    mild modulation by the opposite-queue regime; second-level rates
    react to an empty best queue. The invariant distribution is estimated
    once per process and cached.
    """
    table = _default_table()
    dist = _cached_invariant(table, seed)
    return QRParams(intensities=table, theta=theta, theta_reinit=theta_reinit,
                    invariant_dist=dist)


def _default_table(q_max: int = 30) -> QRIntensityTable:
    K = 2
    q = np.arange(q_max + 1, dtype=float)
    base_limit = np.array([1.10, 0.55])     # events/s at an empty own queue
    base_cancel = np.array([0.42, 0.30])    # events/s per queue unit, saturating
    limit = np.zeros((K, q_max + 1, N_REGIMES, 2))
    cancel = np.zeros((K, q_max + 1, N_REGIMES, 2))
    limit_reg = np.array([0.85, 0.95, 1.0, 1.10])
    cancel_reg = np.array([1.15, 1.05, 1.0, 0.90])
    for lvl in range(K):
        lshape = base_limit[lvl] / (1.0 + 0.25 * q)
        cshape = base_cancel[lvl] * q / (1.0 + 0.08 * q)
        for reg in range(N_REGIMES):
            limit[lvl, :, reg, 0] = lshape * limit_reg[reg]
            cancel[lvl, :, reg, 0] = cshape * cancel_reg[reg]
    limit[..., 1] = limit[..., 0]
    cancel[..., 1] = cancel[..., 0]
    # a vanished best queue makes the second level shier and faster to cancel
    limit[1, :, :, 1] *= 0.70
    cancel[1, :, :, 1] *= 1.60
    return QRIntensityTable(limit=limit, cancel=cancel,
                            lambda_M_buy=0.35, lambda_M_sell=0.35,
                            m=1.0, l=3.0)


_INVARIANT_CACHE: dict = {}


def _cached_invariant(table: QRIntensityTable, seed: int) -> np.ndarray:
    key = (table.limit.tobytes(), table.cancel.tobytes(),
           table.lambda_M_buy, table.lambda_M_sell, table.m, table.l, seed)
    if key not in _INVARIANT_CACHE:
        _INVARIANT_CACHE[key] = estimate_invariant_distribution(table, seed=seed)
    return _INVARIANT_CACHE[key]
