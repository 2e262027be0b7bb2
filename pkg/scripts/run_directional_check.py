"""Synthetic low-resource check: does RTD pre-training help at 5% labels?"""

import argparse
import json
import logging

from titlepress.experiments import directional_check


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=5000)
    ap.add_argument("--fraction", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--weight-reading", choices=("equation", "text"))
    ap.add_argument("--out", help="optional JSON output path")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    res = directional_check(args.n, args.fraction, args.seed, weight_reading=args.weight_reading)
    text = json.dumps(res.to_dict(), indent=2)
    print(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)


if __name__ == "__main__":
    main()
