"""Limit-order-book simulation and noise-robust volatility estimation lab.

The package bundles an event-driven order-book simulator (zero-intelligence
and queue-reactive dynamics), a battery of integrated and spot variance
estimators with feasible tuning, a Hausman-type noise test, model
calibration routines, and a VWAP execution-cost study harness.
"""

from lobvol.book import (LogPriceGrid, OrderBookState, PriceQuote, TickPath,
                         mid_price, micro_price, sample_grid)
from lobvol.calibrate import (EventRecord, GMMResult, calibrate_theta_gmm,
                              estimate_qr_intensities, estimate_zi_rates,
                              mean_reversion_ratio)
from lobvol.execution import (ACModel, ExecutionOutcome, ExecutionSpec,
                              ac_expected_cost, ac_variance, run_vwap,
                              variance_ratio_experiment)
from lobvol.harness import (ExperimentReport, ScenarioConfig, SurrogateSpec,
                            five_regime_scenario, pairwise_ttests,
                            resolve_regime_truth, run_scenario,
                            spread_statistics)
from lobvol.integrated import INTEGRATED, IVEstimate
from lobvol.noise import (NoiseTestResult, frequency_sweep, hausman_test,
                          render_sweep_table)
from lobvol.sim import (QRIntensityTable, QRParams, RegimeSchedule, ZIParams,
                        default_qr_params, estimate_invariant_distribution,
                        estimate_true_variance, simulate_qr, simulate_zi)
from lobvol.spot import SPOT, SpotPath, default_spot_times, integrated_metrics
from lobvol.tuning import EstimatorParams, TuningInputs, feasible_tuning

__all__ = [
    "ACModel", "EstimatorParams", "EventRecord", "ExecutionOutcome",
    "ExecutionSpec", "ExperimentReport", "GMMResult", "INTEGRATED",
    "IVEstimate", "LogPriceGrid", "NoiseTestResult", "OrderBookState",
    "PriceQuote", "QRIntensityTable", "QRParams", "RegimeSchedule",
    "SPOT", "ScenarioConfig", "SpotPath", "SurrogateSpec", "TickPath",
    "TuningInputs", "ZIParams", "ac_expected_cost", "ac_variance",
    "calibrate_theta_gmm", "default_qr_params", "default_spot_times",
    "estimate_invariant_distribution", "estimate_qr_intensities",
    "estimate_true_variance", "estimate_zi_rates", "feasible_tuning",
    "five_regime_scenario", "frequency_sweep", "hausman_test",
    "integrated_metrics", "mean_reversion_ratio", "mid_price", "micro_price",
    "pairwise_ttests", "render_sweep_table", "resolve_regime_truth",
    "run_scenario", "run_vwap", "sample_grid", "simulate_qr", "simulate_zi",
    "spread_statistics", "variance_ratio_experiment",
]

__version__ = "0.1.0"
