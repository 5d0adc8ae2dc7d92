"""Refinement study of discrete inequality constants on the unit cube (or the half disk)."""

import argparse
import json
import logging
import time
from dataclasses import asdict, dataclass, field

from tensorineq.spectra import refinement_study

DEFAULT_SPECS = ["DevDiv", "DevSymCurl", "DevSymDevCurl", "Maxwell", "SymDiv", "DevSymDevSymCurl", "DevSymSymCurl"]


@dataclass
class Config:
    specs: list[str] = field(default_factory=lambda: list(DEFAULT_SPECS))
    resolutions: tuple[int, ...] = (8, 12, 16)
    domain: str = "box"
    n: int = 3


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--specs", default=",".join(DEFAULT_SPECS))
    ap.add_argument("--resolutions", default="8,12,16")
    ap.add_argument("--domain", default="box", choices=["box", "half-disk"])
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--out", default=None)
    args = ap.parse_args(argv)
    cfg = Config(args.specs.split(","), tuple(int(r) for r in args.resolutions.split(",")), args.domain, args.n)
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    results = {"config": asdict(cfg), "studies": []}
    for name in cfg.specs:
        t0 = time.perf_counter()
        study = refinement_study(name, cfg.resolutions, cfg.domain, cfg.n)
        entry = study.to_dict()
        entry["seconds"] = round(time.perf_counter() - t0, 1)
        results["studies"].append(entry)
        consts = ", ".join(str(e["constant"]) for e in entry["estimates"])
        print(f"{name:18s} {study.verdict:10s} constants [{consts}]", flush=True)
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(results, fh, indent=2, sort_keys=True)


if __name__ == "__main__":
    main()
