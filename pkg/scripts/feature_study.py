"""Test chi of the learned estimator for each feature combination.

Scenario 1 (species 1 only) covers every pair of z features plus all six;
scenario 2 adds each z feature to r_obs.

    python3 scripts/feature_study.py --config configs/scenario1.yaml
"""
import argparse
from pathlib import Path

from plumedist import harness as H


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default="configs/scenario1.yaml")
    ap.add_argument("--out", default="results/study")
    args = ap.parse_args()
    cfg = H.load_config(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    reports = H.feature_combination_study(cfg)
    for r in sorted(reports, key=lambda r: r.chi):
        print(f"{'+'.join(r.mask):32s} chi={r.chi:.3f}")
    H.write_chi_grid(out / f"chi_grid_{cfg.name}.csv", reports)


if __name__ == "__main__":
    main()
