"""True vs estimated distance for the scenario-2 estimators.

    python3 scripts/scatter.py [--config configs/scenario2.yaml] [--out results/scatter]
"""
import argparse
from pathlib import Path

from plumedist import harness as H


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/scenario2.yaml")
    ap.add_argument("--out", default="results/scatter")
    args = ap.parse_args()
    cfg = H.load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    prod = H.simulate_products(cfg)
    reports = [H.run_experiment(cfg, "mean", None, prod), H.run_experiment(cfg, "lc", None, prod)]
    reports += [H.run_experiment(cfg, "mlp", m, prod) for m in cfg.masks]
    for r in reports:
        print(f"{r.estimator:5s} {'+'.join(r.mask) or '-':28s} chi={r.chi:.3f}  n_test={r.truths.size}")
    H.write_scatter(out / "scatter.csv", reports)
    H.write_json(out / "report.json", [r.to_dict() for r in reports])


if __name__ == "__main__":
    main()
