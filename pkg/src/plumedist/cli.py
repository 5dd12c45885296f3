"""Command-line entry point: ``plumedist <command> --config FILE [--seed N] [--out DIR]``.

Every command writes into ``--out``; failures exit nonzero after printing a
single JSON error line on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import harness as H
from .estimators import chi_error, fit_velocity_scale
from .features import feature_matrix, read_feature_csv, write_feature_csv
from .mlp import MlpModel, mlp_forward, train
from .plume import PlumeSimulator
from .trajio import TrajectoryHeader, read_snapshots, write_snapshots


def _config(args) -> H.ScenarioConfig:
    if args.config:
        return H.load_config(args.config, args.seed)
    cfg = H.ScenarioConfig()
    return cfg.replace(seed=args.seed) if args.seed is not None else cfg


def _products(cfg, trajectories):
    if not trajectories:
        return H.simulate_products(cfg)
    header, snaps = read_snapshots(trajectories)
    return H.tabulate(snaps, H.place_receivers(cfg), header.source_position, cfg.calib_every)


def _windows(cfg, args):
    if getattr(args, "windows", None):
        return H.read_windows(args.windows), {}
    data = H.build_dataset(_products(cfg, getattr(args, "trajectories", None)), cfg)
    return data.windows, {"n_drawn": data.n_drawn, "n_discarded": data.n_discarded}


def cmd_simulate(cfg, args, out: Path) -> dict:
    tx, params = cfg.tx_config(), cfg.sim_params()
    n = args.steps or cfg.n_sim_steps
    sim = PlumeSimulator(tx, params)
    nbytes = write_snapshots(TrajectoryHeader.from_run(tx, params, n), sim.run(n), out / "trajectories.plum")
    return {"n_steps": n, "bytes": nbytes, "released": sim.n_released, "degraded": sim.n_degraded,
            "culled": sim.n_culled, "alive": len(sim)}


def cmd_sample(cfg, args, out: Path) -> dict:
    windows, info = _windows(cfg, args)
    H.write_windows(out / "windows.csv", windows)
    return {"n_windows": len(windows), **info}


def cmd_features(cfg, args, out: Path) -> dict:
    windows, info = _windows(cfg, args)
    mask = cfg.masks[0]
    X = feature_matrix(windows, mask, cfg.epsilon)
    write_feature_csv(out / "features.csv", X, mask, [w.true_distance for w in windows])
    return {"n_windows": len(windows), "mask": list(mask), **info}


def cmd_calibrate(cfg, args, out: Path) -> dict:
    if args.trajectories:
        header, snaps = read_snapshots(args.trajectories)
        fit = fit_velocity_scale(snaps, header.source_position, every=cfg.calib_every)
        return {"v": fit.v, "r2": fit.r2, "n_points": fit.n_points}
    prod = H.simulate_products(cfg)
    return {"v": prod.velocity, "r2": prod.velocity_r2}


def _feature_data(cfg, args):
    if args.features:
        X, mask, d, log = read_feature_csv(args.features)
        if d is None or not log:
            raise ValueError("feature file needs log features and a distance column")
        return X, mask, d
    windows, _ = _windows(cfg, args)
    mask = cfg.masks[0]
    return feature_matrix(windows, mask, cfg.epsilon), mask, np.array([w.true_distance for w in windows])


def cmd_train(cfg, args, out: Path) -> dict:
    X, mask, d = _feature_data(cfg, args)
    tr, te = H.split(d, cfg.split_ratio, seed=cfg.seed)
    model = train(X[tr], d[tr], mask, cfg.train_config())
    (out / "model.json").write_text(model.to_json() + "\n")
    chi = chi_error(mlp_forward(model, X[te]), d[te]) if len(te) >= 2 else None
    return {"mask": list(mask), "n_train": int(tr.size), "n_test": int(te.size),
            "epochs": len(model.train_log), "train_loss": model.final_loss, "chi": chi}


def cmd_evaluate(cfg, args, out: Path) -> dict:
    if args.model:
        model = MlpModel.from_json(Path(args.model).read_text())
        X, mask, d = _feature_data(cfg, args)
        if tuple(mask) != model.mask:
            raise ValueError(f"feature mask {mask} does not match model mask {model.mask}")
        _, te = H.split(d, cfg.split_ratio, seed=cfg.seed)
        est = mlp_forward(model, X[te])
        rep = H.ExperimentReport(cfg.name, "mlp", model.mask, chi_error(est, d[te]), d[te], est, cfg.seed,
                                 cfg.p_deg[1])
        reports = [rep]
    else:
        prod = H.simulate_products(cfg)
        reports = []
        for kind in cfg.estimators:
            for mask in (cfg.masks if kind == "mlp" else [None]):
                reports.append(H.run_experiment(cfg, kind, mask, prod))
    H.write_scatter(out / "scatter.csv", reports)
    return {"experiments": [r.to_dict() for r in reports]}


def cmd_sweep(cfg, args, out: Path) -> dict:
    specs = [(k, m) for k in cfg.estimators for m in (cfg.masks if k == "mlp" else [None])]
    reports = H.sweep_degradation(cfg, None, specs)
    H.write_sweep(out / "sweep.csv", reports)
    return {"sweep": [{k: v for k, v in r.to_dict().items() if k != "pairs"} for r in reports]}


def cmd_study(cfg, args, out: Path) -> dict:
    masks = None if args.panel_masks else list(cfg.masks)
    reports = H.feature_combination_study(cfg, masks)
    H.write_chi_grid(out / "chi_grid.csv", reports)
    return {"study": [{k: v for k, v in r.to_dict().items() if k != "pairs"} for r in reports]}


COMMANDS = {"simulate": cmd_simulate, "sample": cmd_sample, "features": cmd_features,
            "calibrate": cmd_calibrate, "train": cmd_train, "evaluate": cmd_evaluate,
            "sweep": cmd_sweep, "study": cmd_study}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="plumedist", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="YAML scenario file")
        s.add_argument("--seed", type=int, default=None)
        s.add_argument("--out", default=".", help="output directory")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "simulate":
            s.add_argument("--steps", type=int, default=None)
        if name in ("sample", "features", "calibrate", "train", "evaluate"):
            s.add_argument("--trajectories", help="PLUM file to use instead of simulating")
        if name in ("features", "train", "evaluate"):
            s.add_argument("--windows", help="windows.csv from `sample`")
        if name in ("train", "evaluate"):
            s.add_argument("--features", help="features.csv from `features`")
        if name == "evaluate":
            s.add_argument("--model", help="model.json from `train`")
        if name == "study":
            s.add_argument("--panel-masks", action="store_true",
                           help="use the standard feature-combination grid instead of config masks")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = _config(args)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        t0 = time.perf_counter()
        result = COMMANDS[args.command](cfg, args, out)
        H.write_json(out / "report.json", {"command": args.command, "config": cfg.to_dict(), **result})
        H.write_json(out / "timing.json", {"seconds": time.perf_counter() - t0})
    except Exception as exc:  # noqa: BLE001 - every failure becomes one machine-readable line
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
