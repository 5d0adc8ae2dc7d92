"""Command-line runner: ``tensorineq <command> [options]``.

Exit codes: 0 pass, 1 negative verdict, 2 usage or configuration error,
3 solver failure.  Reports are JSON with sorted keys (or flat CSV).
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import counterexamples as cx
from . import kernel as kn
from . import spectra, stokes
from .checks import convergence_orders, identity_checks

EXIT_PASS, EXIT_NEGATIVE, EXIT_USAGE, EXIT_SOLVER = 0, 1, 2, 3
COMMANDS = ("verify-identities", "estimate", "counterexample", "kernel", "stokes")


class UsageError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    command: str
    domain: str = "box"
    n: int = 3
    resolutions: tuple[int, ...] = (8,)
    spec: str = "DevDiv"
    mu: float = 1.0
    seed: int = 0
    format: str = "json"
    out: str | None = None
    pompe_max_n: int = 8

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise UsageError(f"unknown command {self.command!r}")
        if self.domain not in ("box", "half-disk"):
            raise UsageError(f"unknown domain {self.domain!r}")
        if not self.resolutions or min(self.resolutions) < 3:
            raise UsageError(f"resolution too small: need >= 3 nodes per axis, got {list(self.resolutions)}")
        if self.format not in ("json", "csv"):
            raise UsageError(f"unknown format {self.format!r}")

    @property
    def resolution(self) -> int:
        return self.resolutions[0]


# --------------------------------------------------------------------------
# Commands: each returns (exit code, report, csv rows)
# --------------------------------------------------------------------------


def cmd_verify_identities(cfg: RunConfig):
    if cfg.domain != "box":
        raise UsageError("the identity suite runs on box grids")
    grid = spectra.make_grid(cfg.domain, cfg.n, cfg.resolution)
    checks = [c.to_dict() for c in identity_checks(grid, cfg.seed)]
    for name, order in convergence_orders(cfg.n).items():
        checks.append({"name": f"order_{name}", "residual": order, "pass": order >= 1.8})
    ok = all(c["pass"] for c in checks)
    report = {"command": cfg.command, "grid": grid.describe(), "checks": checks, "pass": ok}
    return (EXIT_PASS if ok else EXIT_NEGATIVE), report, checks


def cmd_estimate(cfg: RunConfig):
    spec = spectra.get_spec(cfg.spec)
    opts = spectra.EstimateOptions(seed=cfg.seed)
    if len(cfg.resolutions) == 1:
        est = spectra.estimate_constant(spec, spectra.make_grid(cfg.domain, cfg.n, cfg.resolution), opts=opts)
        report = est.to_dict()
        rows = [report]
        ok = est.verdict == "finite"
    else:
        study = spectra.refinement_study(spec, cfg.resolutions, cfg.domain, cfg.n, opts)
        report = study.to_dict()
        rows = [{**e, "verdict": study.verdict} for e in report["estimates"]]
        for r in rows:
            r.pop("refinement_history", None)
        ok = study.verdict == "stable"
    report["command"] = cfg.command
    report["domain"] = cfg.domain
    return (EXIT_PASS if ok else EXIT_NEGATIVE), report, rows


def cmd_counterexample(cfg: RunConfig):
    table = [r.to_dict() for r in cx.pompe_table(cfg.pompe_max_n, cfg.resolution)]
    grid = spectra.make_grid("box", 3, 16)
    u = cx.bump(grid)
    witnesses = [cx.witness_no_devsym_devsymcurl(u).to_dict(), cx.witness_no_sym_div(u).to_dict()]
    ok = all(r["pass"] for r in table + witnesses)
    report = {"command": cfg.command, "pompe": table, "witnesses": witnesses, "pass": ok}
    return (EXIT_PASS if ok else EXIT_NEGATIVE), report, table + witnesses


def cmd_kernel(cfg: RunConfig):
    n = cfg.n
    rng = np.random.default_rng(cfg.seed)
    pts = rng.uniform(-1.0, 1.0, size=(max(50, 4 * kn.kernel_dimension(n)), n))
    gram = kn.basis_gram(n, pts)
    params = [kn.ConformalKillingParams.random(n, rng) for _ in range(20)]
    residual = max(kn.max_devsym_residual(p, pts) / max(p.norm(), 1.0) for p in params)
    patch, tangents = kn.face_patch(n, 4 * kn.kernel_dimension(n), rng)
    fit = kn.rigidity_fit(n, patch, tangents)
    record = {
        "dim": n,
        "kernel_dimension": gram.dimension,
        "gram_rank": gram.rank,
        "max_devsym_residual": residual,
        "rigidity_rank": fit.rank,
        "rigidity_param_norm": fit.params.norm(),
    }
    ok = gram.rank == gram.dimension and residual <= 1e-13 and fit.params.norm() <= 1e-10
    record["pass"] = ok
    report = {"command": cfg.command, **record}
    return (EXIT_PASS if ok else EXIT_NEGATIVE), report, [record]


def cmd_stokes(cfg: RunConfig):
    runs = [stokes.stokes_report(r, cfg.mu) for r in cfg.resolutions]
    report = {"command": cfg.command, "runs": runs}
    if len(runs) > 1:
        report["error_ratios"] = {
            k: [a["errors"][k] / b["errors"][k] for a, b in zip(runs, runs[1:])] for k in runs[0]["errors"]
        }
    rows = [{**{k: v for k, v in r.items() if k != "errors"}, **{f"error_{k}": v for k, v in r["errors"].items()}} for r in runs]
    ok = all(r["coercivity_eig"] > 0 for r in runs)
    report["pass"] = ok
    return (EXIT_PASS if ok else EXIT_NEGATIVE), report, rows


HANDLERS = {
    "verify-identities": cmd_verify_identities,
    "estimate": cmd_estimate,
    "counterexample": cmd_counterexample,
    "kernel": cmd_kernel,
    "stokes": cmd_stokes,
}


# --------------------------------------------------------------------------
# Parsing and output
# --------------------------------------------------------------------------


def _resolutions(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected R or R1,R2,... got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--domain", choices=["box", "half-disk"], default="box")
    common.add_argument("--n", type=int, choices=[2, 3, 4], default=None)
    common.add_argument("--dim", type=int, dest="n", help="alias of --n")
    common.add_argument("--resolution", type=_resolutions, default=None, help="nodes per axis: R or R1,R2,...")
    common.add_argument("--spec", default="DevDiv", help=f"one of {', '.join(sorted(spectra.SPECS))}")
    common.add_argument("--mu", type=float, default=1.0)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--format", choices=["json", "csv"], default="json")
    common.add_argument("--out", default=None)
    common.add_argument("--pompe-max-n", type=int, default=8)
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="tensorineq", description="Numerical experiments on tensor inequalities.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


DEFAULT_RESOLUTION = {"counterexample": (400,), "stokes": (8,)}


def config_from_args(args: argparse.Namespace) -> RunConfig:
    n = args.n
    if n is None:
        n = 2 if args.domain == "half-disk" else 3
    res = args.resolution or DEFAULT_RESOLUTION.get(args.command, (8,))
    return RunConfig(
        args.command, args.domain, n, tuple(res), args.spec, args.mu, args.seed, args.format, args.out, args.pompe_max_n
    )


def _scalar(v):
    return json.dumps(v, sort_keys=True) if isinstance(v, (dict, list)) else v


def render(report: dict, rows: list[dict], fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    keys = list(dict.fromkeys(k for r in rows for k in r))  # first-seen order
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: _scalar(r.get(k, "")) for k in keys})
    return buf.getvalue()


def _thread_limit():
    value = os.environ.get("TENSORINEQ_THREADS")
    if not value:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=int(value))


def run(argv: list[str] | None = None) -> tuple[int, str, str | None]:
    """Parse, execute and render; returns ``(exit code, output text, output path)``."""
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0), "", None
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        cfg = config_from_args(args)
        with _thread_limit():
            code, report, rows = HANDLERS[cfg.command](cfg)
    except (UsageError, KeyError, ValueError) as exc:  # UnsupportedDimensionError is a ValueError
        msg = exc.args[0] if exc.args else str(exc)
        return EXIT_USAGE, _error(msg), None
    except stokes.CoercivityFailure as exc:
        return EXIT_NEGATIVE, _error(exc), None
    except (spectra.ConvergenceError, np.linalg.LinAlgError, RuntimeError) as exc:
        return EXIT_SOLVER, _error(exc), None
    text = render(report, rows, cfg.format)
    if cfg.out:
        Path(cfg.out).write_text(text)
    return code, text, cfg.out


def _error(msg) -> str:
    return json.dumps({"error": str(msg)}, sort_keys=True) + "\n"


def main(argv: list[str] | None = None) -> int:
    code, text, out = run(argv)
    if code in (EXIT_USAGE, EXIT_SOLVER) or (code == EXIT_NEGATIVE and text.startswith('{"error"')):
        sys.stderr.write(text)
    elif not out:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
