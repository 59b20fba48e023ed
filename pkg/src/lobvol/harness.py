"""Experiment orchestration: Monte Carlo sweeps, rankings, reports.

A scenario bundles a model, a path budget and an estimator list; running
it produces per-path estimates, relative bias/MSE per estimator and
series, rankings, and Welch t-tests between estimator means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.stats import ttest_ind

from lobvol.book import LogPriceGrid, TickPath, sample_grid
from lobvol.integrated import INTEGRATED
from lobvol.sim import (QRParams, RegimeSchedule, ZIParams, _run_core,
                        estimate_true_variance, zi_to_qr)
from lobvol.spot import SPOT, SpotPath, default_spot_times, integrated_metrics
from lobvol.surrogate import bachelier_log_grid, piecewise_variance_log_grid

__all__ = [
    "SurrogateSpec",
    "ScenarioConfig",
    "ExperimentReport",
    "run_scenario",
    "pairwise_ttests",
    "five_regime_scenario",
    "resolve_regime_truth",
    "spread_statistics",
    "FIVE_REGIME_PAIRS",
]

FIVE_REGIME_PAIRS = ((0.7, 0.6), (0.4, 0.6), (0.6, 0.85), (0.4, 0.9), (0.8, 0.9))


@dataclass(frozen=True)
class SurrogateSpec:
    """Gaussian log-price stand-in: one variance level or one per regime."""

    sigma2: Union[float, tuple[float, ...]]
    noise_std: float = 0.0

    def levels(self) -> tuple[float, ...]:
        return self.sigma2 if isinstance(self.sigma2, tuple) else (self.sigma2,)


@dataclass(frozen=True)
class ScenarioConfig:
    model: Union[ZIParams, QRParams, SurrogateSpec]
    n_paths: int = 250
    horizon: float = 23400.0
    mesh: float = 1.0
    series_kinds: tuple[str, ...] = ("mid",)
    estimators: tuple[str, ...] = tuple(sorted(INTEGRATED))
    schedule: Optional[RegimeSchedule] = None
    truth_levels: Optional[tuple[float, ...]] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_paths < 1:
            raise ValueError("need n_paths >= 1")
        for est in self.estimators:
            if est not in INTEGRATED and est not in SPOT:
                raise KeyError(f"unresolvable estimator id {est!r}")

    @property
    def n_regimes(self) -> int:
        return len(self.schedule.fractions) if self.schedule else 1


@dataclass
class ExperimentReport:
    table: pd.DataFrame          # estimator x series metrics
    raw: dict                    # (estimator, series) -> per-path estimates
    truth: dict                  # series -> truth value(s)
    failures: dict               # (estimator, series) -> failed path count
    config: ScenarioConfig

    def rankings(self, by: str = "rel_mse") -> pd.DataFrame:
        out = self.table.copy()
        key = out[by].abs() if by == "rel_bias" else out[by]
        out["rank"] = key.groupby(out["series"]).rank(method="first").astype(int)
        return out.sort_values(["series", "rank"]).reset_index(drop=True)

    def to_csv(self, path_or_buf) -> None:
        """Deterministic CSV dump (fixed float formatting)."""
        self.table.to_csv(path_or_buf, index=False, float_format="%.12g")

    def render(self) -> str:
        return self.table.to_string(index=False, float_format=lambda x: f"{x:.5g}")


def _truth_per_second(cfg: ScenarioConfig) -> tuple[float, ...]:
    if cfg.truth_levels is not None:
        return cfg.truth_levels
    if isinstance(cfg.model, SurrogateSpec):
        return cfg.model.levels()
    return tuple(resolve_regime_truth(cfg).values())


def _surrogate_grid(spec: SurrogateSpec, cfg: ScenarioConfig, seed: int) -> LogPriceGrid:
    n = int(round(cfg.horizon / cfg.mesh))
    levels = spec.levels()
    if len(levels) == 1:
        return bachelier_log_grid(levels[0], n, mesh=cfg.mesh,
                                  noise_std=spec.noise_std, seed=seed)
    return piecewise_variance_log_grid(np.asarray(levels), n, mesh=cfg.mesh,
                                       noise_std=spec.noise_std, seed=seed)


def _model_grids(cfg: ScenarioConfig, seed: int) -> dict[str, LogPriceGrid]:
    if isinstance(cfg.model, SurrogateSpec):
        g = _surrogate_grid(cfg.model, cfg, seed)
        return {k: g for k in cfg.series_kinds}
    qr = zi_to_qr(cfg.model) if isinstance(cfg.model, ZIParams) else cfg.model
    raw = _run_core(qr, cfg.horizon, seed, schedule=cfg.schedule)
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
    out = {}
    n = int(round(cfg.horizon / cfg.mesh))
    grid_times = np.arange(n + 1) * cfg.mesh
    for k in cfg.series_kinds:
        times, prices = series[k]
        if times.size == 0:
            raise RuntimeError(f"no observations for series {k!r}")
        idx = np.clip(np.searchsorted(times, grid_times, side="right") - 1,
                      0, times.size - 1)
        out[k] = LogPriceGrid(values=np.log(prices[idx]), mesh=cfg.mesh, series_kind=k)
    return out


def _truth_spot_path(levels: tuple[float, ...], times: np.ndarray,
                     horizon: float) -> SpotPath:
    r = len(levels)
    idx = np.minimum((times / horizon * r).astype(int), r - 1)
    return SpotPath(times, np.asarray(levels)[idx], "truth")


def run_scenario(cfg: ScenarioConfig) -> ExperimentReport:
    """Monte Carlo sweep of every estimator over every series kind.

    Integrated estimators report relative bias mean/truth - 1 and
    relative MSE mean((est - truth)^2)/truth^2 against the window truth;
    spot estimators report relative integrated bias/MSE against the
    (piecewise-)constant truth path. Estimator failures are counted and
    excluded, never fatal.
    """
    levels = _truth_per_second(cfg)
    iv_truth = float(np.mean(levels)) * cfg.horizon
    spot_times = default_spot_times(cfg.horizon)
    truth_path = _truth_spot_path(levels, spot_times, cfg.horizon)

    seeds = np.random.SeedSequence(cfg.seed).generate_state(cfg.n_paths,
                                                            dtype=np.uint32)
    iv_ids = [e for e in cfg.estimators if e in INTEGRATED]
    spot_ids = [e for e in cfg.estimators if e in SPOT]
    raw: dict = {(e, k): [] for e in cfg.estimators for k in cfg.series_kinds}
    spot_sums: dict = {(e, k): np.zeros(spot_times.size)
                       for e in spot_ids for k in cfg.series_kinds}
    spot_mses: dict = {(e, k): [] for e in spot_ids for k in cfg.series_kinds}
    failures: dict = {}

    for s in seeds:
        grids = _model_grids(cfg, int(s))
        for k, grid in grids.items():
            for e in iv_ids:
                try:
                    raw[(e, k)].append(INTEGRATED[e](grid).value)
                except Exception:
                    failures[(e, k)] = failures.get((e, k), 0) + 1
            for e in spot_ids:
                try:
                    sp = SPOT[e](grid, spot_times)
                    _, mse = integrated_metrics(sp, truth_path)
                    spot_sums[(e, k)] += sp.values
                    spot_mses[(e, k)].append(mse)
                    raw[(e, k)].append(sp.day_average())
                except Exception:
                    failures[(e, k)] = failures.get((e, k), 0) + 1

    rows = []
    for k in cfg.series_kinds:
        for e in cfg.estimators:
            vals = np.asarray(raw[(e, k)], dtype=float)
            n_ok = vals.size
            if n_ok == 0:
                rows.append((e, k, math.nan, math.nan, 0))
                continue
            if e in INTEGRATED:
                bias = float(vals.mean() / iv_truth - 1.0)
                mse = float(np.mean((vals - iv_truth) ** 2) / iv_truth**2)
            else:
                mean_path = spot_sums[(e, k)] / n_ok
                bias = float(np.mean((mean_path - truth_path.values)
                                     / truth_path.values))
                mse = float(np.mean(spot_mses[(e, k)]))
            rows.append((e, k, bias, mse, n_ok))
    table = pd.DataFrame(rows, columns=["estimator", "series", "rel_bias",
                                        "rel_mse", "n_paths"])
    truth = {"per_second_levels": levels, "iv_window": iv_truth}
    return ExperimentReport(table=table, raw={k: np.asarray(v) for k, v in raw.items()},
                            truth=truth, failures=failures, config=cfg)


def pairwise_ttests(report: ExperimentReport, series: str = "mid") -> pd.DataFrame:
    """Welch two-sample t-test p-values for every estimator pair."""
    ests = [e for e in report.config.estimators]
    out = pd.DataFrame(np.ones((len(ests), len(ests))), index=ests, columns=ests)
    for i, a in enumerate(ests):
        xa = report.raw[(a, series)]
        for j, b in enumerate(ests):
            if j <= i:
                continue
            xb = report.raw[(b, series)]
            if xa.size < 2 or xb.size < 2:
                p = math.nan
            elif xa.std() == 0 and xb.std() == 0:
                p = 1.0 if xa.mean() == xb.mean() else 0.0
            else:
                p = float(ttest_ind(xa, xb, equal_var=False).pvalue)
            out.iloc[i, j] = out.iloc[j, i] = p
    return out


def five_regime_scenario(model: Optional[QRParams] = None, n_paths: int = 250,
                         truth_levels: Optional[tuple[float, ...]] = None,
                         seed: int = 0, **kwargs) -> ScenarioConfig:
    """Day split into five equal (theta, theta_reinit) regimes.

    Truth levels default to unresolved; call :func:`resolve_regime_truth`
    to fill them from long-horizon simulations of each regime.
    """
    if model is None:
        from lobvol.sim import default_qr_params
        model = default_qr_params()
    schedule = RegimeSchedule.from_pairs(FIVE_REGIME_PAIRS)
    return ScenarioConfig(model=model, n_paths=n_paths, schedule=schedule,
                          truth_levels=truth_levels, seed=seed, **kwargs)


def resolve_regime_truth(cfg: ScenarioConfig, m: float = 18000.0,
                         n_sims: int = 100, seed: int = 7) -> dict:
    """Per-regime variance rate of the mid series via long simulations."""
    if isinstance(cfg.model, SurrogateSpec):
        levels = cfg.model.levels()
        return {i: v for i, v in enumerate(levels)}
    qr = zi_to_qr(cfg.model) if isinstance(cfg.model, ZIParams) else cfg.model
    out = {}
    if cfg.schedule is None:
        res = estimate_true_variance(qr, m=m, n_sims=n_sims, seed=seed)
        return {0: res.variance["mid"]}
    from dataclasses import replace
    for i, (th, re) in enumerate(zip(cfg.schedule.thetas, cfg.schedule.reinits)):
        p = replace(qr, theta=th, theta_reinit=re)
        res = estimate_true_variance(p, m=m, n_sims=n_sims, seed=seed + i)
        out[i] = res.variance["mid"]
    return out


def spread_statistics(paths: Sequence[TickPath], tick_size: float = 0.01) -> float:
    """Time-weighted average quoted spread in ticks across paths."""
    num = 0.0
    den = 0.0
    for path in paths:
        if not path.quotes:
            continue
        t = np.array([q.timestamp for q in path.quotes])
        sp = np.array([(q.best_ask - q.best_bid) / tick_size for q in path.quotes])
        w = np.diff(np.append(t, path.horizon))
        num += float(np.sum(sp * w))
        den += float(np.sum(w))
    if den == 0:
        raise ValueError("no quoted time in the supplied paths")
    return num / den
