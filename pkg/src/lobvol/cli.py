"""Command-line front end.

Subcommands: simulate, estimate, rank, noisetest, vwap-experiment,
calibrate, ingest. Model and scenario settings come from a YAML config;
every CSV is written with fixed float formatting so a rerun with the
same config and seed is byte-identical.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

import numpy as np
import pandas as pd
import yaml

from lobvol.book import sample_grid
from lobvol.calibrate import calibrate_theta_gmm, simulated_moments
from lobvol.execution import ExecutionSpec, variance_ratio_experiment
from lobvol.harness import (ScenarioConfig, SurrogateSpec, pairwise_ttests,
                            run_scenario)
from lobvol.integrated import INTEGRATED
from lobvol.noise import frequency_sweep, render_sweep_table
from lobvol.sim import (QRIntensityTable, QRParams, RegimeSchedule, ZIParams,
                        default_qr_params, estimate_invariant_distribution,
                        simulate_qr, simulate_zi)
from lobvol.spot import SPOT

FLOAT_FORMAT = "%.12g"


def _write_csv(df: pd.DataFrame, path: str) -> None:
    df.to_csv(path, index=False, float_format=FLOAT_FORMAT)


def _load_config(path: str) -> dict:
    with open(path) as fh:
        cfg = yaml.safe_load(fh) or {}
    if not isinstance(cfg, dict):
        raise SystemExit(f"config {path} must be a mapping")
    return cfg


def _build_model(cfg: dict):
    spec = cfg.get("model", {"type": "qr"})
    kind = spec.get("type", "qr")
    if kind == "zi":
        return ZIParams(lambda_L=float(spec["lambda_L"]),
                        lambda_C=float(spec["lambda_C"]),
                        lambda_M=float(spec["lambda_M"]),
                        K=int(spec.get("K", 2)),
                        tick_size=float(spec.get("tick_size", 0.01)))
    if kind == "surrogate":
        sigma2 = spec["sigma2"]
        sigma2 = tuple(float(x) for x in sigma2) if isinstance(sigma2, list) else float(sigma2)
        return SurrogateSpec(sigma2=sigma2, noise_std=float(spec.get("noise_std", 0.0)))
    if kind == "qr":
        theta = float(spec.get("theta", 0.6))
        reinit = float(spec.get("theta_reinit", 0.85))
        if "intensity_table" in spec:
            table = QRIntensityTable.from_csv(spec["intensity_table"])
            dist = estimate_invariant_distribution(table, seed=int(spec.get("seed", 0)))
            return QRParams(intensities=table, theta=theta, theta_reinit=reinit,
                            invariant_dist=dist,
                            tick_size=float(spec.get("tick_size", 0.01)))
        return default_qr_params(theta=theta, theta_reinit=reinit)
    raise SystemExit(f"unknown model type {kind!r}")


def _build_schedule(cfg: dict):
    sched = cfg.get("schedule")
    if sched is None:
        return None
    return RegimeSchedule.from_pairs([(float(a), float(b)) for a, b in sched])


def _resolve_estimators(tokens) -> tuple[str, ...]:
    out: list[str] = []
    known = {**INTEGRATED, **SPOT}
    for tok in tokens:
        if tok == "iv.*":
            out += sorted(INTEGRATED)
        elif tok == "spot.*":
            out += sorted(SPOT)
        elif tok in known:
            out.append(tok)
        else:
            raise SystemExit(f"unknown estimator id {tok!r}")
    return tuple(dict.fromkeys(out))


def _cmd_simulate(args) -> None:
    cfg = _load_config(args.config)
    model = _build_model(cfg)
    horizon = float(cfg.get("horizon", 23400.0))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    schedule = _build_schedule(cfg)
    if isinstance(model, SurrogateSpec):
        raise SystemExit("simulate needs a book model; use a zi or qr config")
    if isinstance(model, ZIParams):
        path = simulate_zi(model, horizon, seed)
    else:
        path = simulate_qr(model, horizon, seed, schedule=schedule)
    rows = [(q.timestamp, "quote", q.best_bid, q.best_ask, q.bid_vol, q.ask_vol)
            for q in path.quotes]
    rows += [(t, "trade", p, p, 0.0, 0.0) for t, p in path.trades]
    rows.sort(key=lambda r: (r[0], r[1]))
    df = pd.DataFrame(rows, columns=["time", "kind", "bid_or_price", "ask_or_price",
                                     "bid_vol", "ask_vol"])
    _write_csv(df, args.out)
    print(f"wrote {len(df)} rows ({len(path.quotes)} quotes, "
          f"{len(path.trades)} trades) to {args.out}")


def _scenario_from_config(cfg: dict, args) -> ScenarioConfig:
    estimators = _resolve_estimators(
        args.estimators.split(",") if args.estimators else cfg.get("estimators", ["iv.*"]))
    truth = cfg.get("truth_levels")
    return ScenarioConfig(
        model=_build_model(cfg),
        n_paths=int(cfg.get("n_paths", 50)),
        horizon=float(cfg.get("horizon", 23400.0)),
        mesh=float(cfg.get("mesh", 1.0)),
        series_kinds=tuple(cfg.get("series", ["mid"])),
        estimators=estimators,
        schedule=_build_schedule(cfg),
        truth_levels=tuple(float(x) for x in truth) if truth else None,
        seed=args.seed if args.seed is not None else int(cfg.get("seed", 0)))


def _cmd_estimate(args) -> None:
    cfg = _load_config(args.config)
    scen = _scenario_from_config(cfg, args)
    report = run_scenario(scen)
    rows = []
    for (est, series), vals in sorted(report.raw.items()):
        for i, v in enumerate(np.asarray(vals)):
            rows.append((est, series, i, v))
    _write_csv(pd.DataFrame(rows, columns=["estimator", "series", "path", "estimate"]),
               args.out)
    print(report.render())


def _cmd_rank(args) -> None:
    cfg = _load_config(args.config)
    report = run_scenario(_scenario_from_config(cfg, args))
    ranked = report.rankings(by=args.by)
    _write_csv(ranked, args.out)
    print(ranked.to_string(index=False, float_format=lambda x: f"{x:.5g}"))
    if args.ttests:
        print(pairwise_ttests(report).round(4).to_string())


def _cmd_noisetest(args) -> None:
    cfg = _load_config(args.config)
    model = _build_model(cfg)
    horizon = float(cfg.get("horizon", 23400.0))
    seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
    if isinstance(model, SurrogateSpec):
        from lobvol.surrogate import bachelier_tick_path
        levels = model.levels()
        path = bachelier_tick_path(levels[0], horizon, noise_std=model.noise_std,
                                   seed=seed)
    elif isinstance(model, ZIParams):
        path = simulate_zi(model, horizon, seed)
    else:
        path = simulate_qr(model, horizon, seed, schedule=_build_schedule(cfg))
    freqs = tuple(int(f) for f in args.frequencies.split(","))
    results = frequency_sweep(path, freqs, kind=args.series)
    df = pd.DataFrame([(r.frequency, r.n, r.statistic, r.p_value,
                        r.reject_at_5pct, r.reject_at_1pct) for r in results],
                      columns=["frequency", "n", "statistic", "p_value",
                               "reject_5pct", "reject_1pct"])
    _write_csv(df, args.out)
    print(render_sweep_table(results))


def _cmd_vwap(args) -> None:
    cfg_a = _load_config(args.model_a)
    cfg_b = _load_config(args.model_b)
    model_a = _build_model(cfg_a)
    model_b = _build_model(cfg_b)
    if isinstance(model_a, SurrogateSpec) or isinstance(model_b, SurrogateSpec):
        raise SystemExit("vwap-experiment configs must describe book models; "
                         "surrogate cost models go through the library API")
    spec = ExecutionSpec(total_shares=args.shares, horizon=args.exec_horizon,
                         tau=args.tau)
    emp, pred = variance_ratio_experiment(model_a, model_b, spec,
                                          n_runs=args.runs,
                                          spot_estimator_id=args.estimator,
                                          seed=args.seed or 0)
    df = pd.DataFrame([("empirical", emp), ("predicted", pred)],
                      columns=["quantity", "ratio"])
    _write_csv(df, args.out)
    print(df.to_string(index=False))


def _cmd_calibrate(args) -> None:
    cfg = _load_config(args.config)
    model = _build_model(cfg)
    if not isinstance(model, QRParams):
        raise SystemExit("calibrate needs a qr model config")
    horizon = float(cfg.get("horizon", 23400.0))
    if args.targets:
        sigma_emp, zeta_emp = (float(x) for x in args.targets.split(","))
    else:
        seeds = np.random.SeedSequence(int(cfg.get("target_seed", 99))).generate_state(
            args.T, dtype=np.uint32)
        sig, zet = simulated_moments(model, horizon, seeds)
        sigma_emp, zeta_emp = float(sig.mean()), float(zet.mean())
        print(f"self-targets: sigma={sigma_emp:.6g} zeta={zeta_emp:.6g}")
    res = calibrate_theta_gmm(model, (sigma_emp, zeta_emp), T=args.T,
                              horizon=horizon, grid_step=args.grid_step,
                              seed=args.seed or 0)
    df = pd.DataFrame([("theta", res.theta), ("theta_reinit", res.theta_reinit),
                       ("step1_objective", res.step1_objective),
                       ("step2_objective", res.step2_objective)],
                      columns=["parameter", "value"])
    _write_csv(df, args.out)
    print(df.to_string(index=False))


def _cmd_ingest(args) -> None:
    from lobvol.lobster import load_lobster, to_event_records
    session = load_lobster(args.messages, args.book, levels=args.levels)
    if args.trim:
        session = session.trim()
    records = to_event_records(session)
    df = pd.DataFrame([(r.timestamp, r.level, r.kind, r.size, r.own_q,
                        r.opposite_q, r.best_empty) for r in records],
                      columns=["timestamp", "level", "kind", "size", "own_q",
                               "opposite_q", "best_empty"])
    _write_csv(df, args.out)
    print(f"wrote {len(df)} events to {args.out}; diagnostics: {session.diagnostics}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lobvol",
                                     description="order-book simulation and "
                                                 "volatility estimation toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a book model to a tick CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("estimate", help="per-path estimator values")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--estimators", help="comma list; iv.* / spot.* expand")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_estimate)

    p = sub.add_parser("rank", help="bias/MSE ranking over a scenario")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--estimators")
    p.add_argument("--by", default="rel_mse", choices=["rel_mse", "rel_bias"])
    p.add_argument("--ttests", action="store_true")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_rank)

    p = sub.add_parser("noisetest", help="noise test across sampling frequencies")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--frequencies", default="1,2,5,10,15,30,60")
    p.add_argument("--series", default="mid")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_noisetest)

    p = sub.add_parser("vwap-experiment", help="cost-variance ratio of two models")
    p.add_argument("--model-a", required=True)
    p.add_argument("--model-b", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--estimator", default="spot.fourier")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--shares", type=int, default=60)
    p.add_argument("--exec-horizon", type=float, default=12000.0)
    p.add_argument("--tau", type=float, default=600.0)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_vwap)

    p = sub.add_parser("calibrate", help="two-step GMM for (theta, theta_reinit)")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--targets", help="sigma_emp,zeta_emp (self-targets if omitted)")
    p.add_argument("--T", type=int, default=100)
    p.add_argument("--grid-step", type=float, default=0.05)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("ingest", help="LOBSTER files to an event CSV")
    p.add_argument("--messages", required=True)
    p.add_argument("--book", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--levels", type=int, default=2)
    p.add_argument("--trim", action="store_true")
    p.set_defaults(func=_cmd_ingest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())
