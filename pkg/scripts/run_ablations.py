"""Ablation grid on synthetic data; writes tables to --outdir."""

import argparse
import logging

from titlepress.config import load_config
from titlepress.experiments import ABLATIONS, emit_report, prepare_data, run_ablation
from titlepress.synthetic import generate


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--config")
    ap.add_argument("--variants", nargs="*", default=list(ABLATIONS))
    ap.add_argument("--outdir", default="results/ablations")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = load_config(args.config)
    data = prepare_data(generate(args.n, cfg.training.seed).pairs, cfg)
    rows = [run_ablation(name, data, cfg) for name in args.variants]
    for path in emit_report({"ablations": rows}, args.outdir):
        print(path)


if __name__ == "__main__":
    main()
