"""Ratio-estimator (and optionally MLP) test chi across species-2 degradation rates.

    python3 scripts/degradation_sweep.py [--mlp]
"""
import argparse
from pathlib import Path

from plumedist import harness as H


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/scenario2.yaml")
    ap.add_argument("--out", default="results/sweep")
    ap.add_argument("--mlp", action="store_true", help="also train an r_obs MLP at every rate")
    args = ap.parse_args()
    cfg = H.load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    specs = [("lc", None)] + ([("mlp", ("r_obs",))] if args.mlp else [])
    reports = H.sweep_degradation(cfg, specs=specs)
    for r in reports:
        print(f"p_deg2={r.p_deg2:<7g} {r.estimator:4s} chi={r.chi:.3f}")
    H.write_sweep(out / "sweep.csv", reports)


if __name__ == "__main__":
    main()
