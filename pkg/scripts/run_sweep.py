"""Low-resource sweep (pre-trained vs scratch over label fractions) on synthetic data."""

import argparse
import logging

from titlepress.config import load_config
from titlepress.experiments import DEFAULT_FRACTIONS, emit_report, low_resource_sweep, prepare_data
from titlepress.synthetic import generate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--config")
    ap.add_argument("--fractions", nargs="*", type=float, default=list(DEFAULT_FRACTIONS))
    ap.add_argument("--outdir", default="results/sweep")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = load_config(args.config)
    data = prepare_data(generate(args.n, cfg.training.seed).pairs, cfg)
    records = low_resource_sweep(args.fractions, data, cfg)
    for path in emit_report({"sweep": records}, args.outdir):
        print(path)


if __name__ == "__main__":
    main()
