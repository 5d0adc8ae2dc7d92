"""Half-disk sequence: quadrature against closed forms, as a plot-ready CSV table."""

import argparse
import csv
import sys
from dataclasses import dataclass

from tensorineq.counterexamples import pompe_table

COLUMNS = [
    "n",
    "grad_norm_sq_num",
    "grad_norm_sq",
    "dev2_norm_sq_num",
    "dev2_norm_sq",
    "ratio_num",
    "ratio_closed_form",
    "dev3_norm_sq_num",
    "dev3_lower_bound",
]


@dataclass
class Config:
    max_n: int = 8
    resolution: int = 400


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--max-n", type=int, default=Config.max_n)
    ap.add_argument("--resolution", type=int, default=Config.resolution)
    args = ap.parse_args(argv)
    cfg = Config(args.max_n, args.resolution)
    out = csv.DictWriter(sys.stdout, COLUMNS, extrasaction="ignore", lineterminator="\n")
    out.writeheader()
    for rep in pompe_table(cfg.max_n, cfg.resolution):
        out.writerow(rep.to_dict())


if __name__ == "__main__":
    main()
