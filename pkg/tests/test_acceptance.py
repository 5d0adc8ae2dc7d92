"""Acceptance criteria, one test per criterion.

Each test records a single PASS/FAIL line; the lines are printed in the
terminal summary (see conftest.py) and also when this file is run directly.
"""

import time

import numpy as np
import pytest

from tensorineq import kernel as kn
from tensorineq.calculus import BoundaryPartition, Grid, ScalarField, TensorField, VectorField, div_vector
from tensorineq.checks import convergence_orders, identity_checks
from tensorineq.counterexamples import bump, pompe_table, witness_no_devsym_devsymcurl, witness_no_sym_div
from tensorineq.spectra import estimate_constant, get_spec, refinement_study
from tensorineq.stokes import (
    IncompatibleDataError,
    StokesProblem,
    auxiliary_bounds,
    coercivity_eigenvalue,
    divergence_potential,
    manufactured_errors,
    manufactured_problem,
    solve_ls,
)

RESULTS: list[str] = []


def record(number: int, ok: bool, detail: str) -> None:
    RESULTS.append(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def pompe():
    t0 = time.perf_counter()
    table = pompe_table(8, 400)
    return table, time.perf_counter() - t0


def test_criterion_1_pompe_closed_forms(pompe):
    table, elapsed = pompe
    worst = max(max(r.values["rel_err_grad"], r.values["rel_err_dev2"]) for r in table)
    ok = worst <= 1e-3 and elapsed < 10.0
    record(1, ok, f"n=1..8 at resolution 400, worst relative error {worst:.2e} (<= 1e-3), {elapsed:.2f} s (< 10 s)")


def test_criterion_2_blowup_ratio_and_3d_contrast(pompe):
    table, _ = pompe
    ratio_err = max(abs(r.values["ratio_num"] - r.values["ratio_closed_form"]) / r.values["ratio_closed_form"] for r in table)
    ratios = [r.values["ratio_num"] for r in table]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    dev3_ok = all(r.values["dev3_norm_sq_num"] >= r.values["dev3_lower_bound"] for r in table if r.n >= 3)
    ok = ratio_err <= 3e-3 and increasing and dev3_ok
    record(
        2,
        ok,
        f"ratio vs 2(n^2+n+1) rel err {ratio_err:.2e} (<= 3e-3), increasing={increasing}, 3D deviator bound n=3..8 holds={dev3_ok}",
    )


def test_criterion_3_kernel_suite():
    rng = np.random.default_rng(2024)
    worst_rel = 0.0
    ranks = {}
    fits = {}
    for n in (3, 4):
        pts = rng.uniform(-1.0, 1.0, size=(80, n))
        for _ in range(20):
            p = kn.ConformalKillingParams.random(n, rng)
            scale = np.linalg.norm(kn.evaluate_kernel_gradient(p, pts), axis=(-2, -1)).max()
            worst_rel = max(worst_rel, kn.max_devsym_residual(p, pts) / scale)
        ranks[n] = kn.basis_gram(n, pts).rank
        patch, tangents = kn.face_patch(n, 40, rng)
        fits[n] = kn.rigidity_fit(n, patch, tangents).params.norm()
    ok = worst_rel <= 1e-13 and ranks == {3: 10, 4: 15} and max(fits.values()) <= 1e-10
    record(
        3,
        ok,
        f"max |dev sym Grad v| / scale {worst_rel:.1e} (<= 1e-13), Gram ranks {ranks}, rigidity |params| {max(fits.values()):.1e}",
    )


def test_criterion_4_operator_identities():
    checks = {c.name: c for c in identity_checks(Grid.box(3, 8), seed=0)}
    cg = checks["curl_grad_vector"].residual
    dc = checks["div_curl_tensor"].residual
    orders = {n: convergence_orders(n, (16, 32)) for n in (2, 3)}
    min_order = min(min(o.values()) for o in orders.values())
    ok = cg <= 1e-12 and dc <= 1e-12 and min_order >= 1.8
    record(4, ok, f"8^3 box: Curl Grad {cg:.1e}, Div Curl {dc:.1e} (<= 1e-12); observed order 16->32 {min_order:.2f} (>= 1.8)")


POSITIVE = ("DevDiv", "DevSymCurl", "DevSymDevCurl", "Maxwell")


def test_criterion_5_constant_estimation():
    small = Grid.box(3, 6)  # 216 nodes
    oracle_err = 0.0
    for name in POSITIVE:
        it = estimate_constant(name, small)
        dense = estimate_constant(name, small, method="dense")
        oracle_err = max(oracle_err, abs(it.lambda_min - dense.lambda_min) / dense.lambda_min)
    for name, grid in (("DevDiv", Grid.box(2, 16)), ("DevSymGrad", Grid.half_disk(16))):
        it = estimate_constant(name, grid)
        dense = estimate_constant(name, grid, method="dense")
        oracle_err = max(oracle_err, abs(it.lambda_min - dense.lambda_min) / dense.lambda_min)

    drifts = {}
    stable = True
    for name in POSITIVE:
        study = refinement_study(name, (8, 12))
        drifts[name] = round(max(study.drift), 4)
        stable &= study.verdict == "stable" and all(e.lambda_min > 0 and e.verdict == "finite" for e in study.estimates)

    extras = {"DevDiv": "Curl", "DevSymCurl": "Div", "DevSymDevCurl": "Div", "Maxwell": "dev", "SymDiv": "skew"}
    monotone = True
    for name, extra in extras.items():
        base = estimate_constant(name, small, method="dense").lambda_min
        more = estimate_constant(get_spec(name).with_extra(extra), small, method="dense").lambda_min
        monotone &= more >= base * (1 - 1e-12)

    ok = oracle_err <= 1e-8 and stable and monotone
    record(
        5,
        ok,
        f"iterative vs dense rel err {oracle_err:.1e} (<= 1e-8); drift 8->12 {drifts} (< 10%); monotone={monotone}",
    )


def test_criterion_6_negative_results():
    g = Grid.box(3, 16)
    u = bump(g)
    w1 = witness_no_devsym_devsymcurl(u).values
    w2 = witness_no_sym_div(u).values
    structural = max(w1["devsym_norm"], w1["symcurl_norm"], w2["sym_norm"], w2["div_norm"])
    sizes = min(w1["T_norm"], w2["A_norm"])
    verdicts = {name: refinement_study(name, (8, 12)).verdict for name in ("SymDiv", "DevSymDevSymCurl")}
    pompe_study = refinement_study("DevSymGrad", (32, 64), domain="half-disk", n=2)
    verdicts["DevSymGrad half disk"] = pompe_study.verdict
    ok = structural <= 1e-12 and sizes > 0.1 and all(v == "diverging" for v in verdicts.values())
    consts = [round(e.constant, 1) for e in pompe_study.estimates]
    record(
        6,
        ok,
        f"witness seminorms {structural:.1e} (<= 1e-12) with |T| >= {sizes:.2f}; verdicts {verdicts}; 2D constants 32/64 {consts}",
    )


def test_criterion_7_stokes():
    lam4 = coercivity_eigenvalue(StokesProblem.homogeneous(Grid.box(3, 4)), "dense")
    lam4_it = coercivity_eigenvalue(StokesProblem.homogeneous(Grid.box(3, 4)), "iterative")
    lam8 = coercivity_eigenvalue(StokesProblem.homogeneous(Grid.box(3, 8)), "iterative")
    drift = abs(lam8 - lam4) / lam4

    errs = []
    for res in (8, 16):
        prob, ms = manufactured_problem(res)
        errs.append(manufactured_errors(solve_ls(prob, check_coercivity=False), ms))
    factors = {k: round(errs[0][k] / errs[1][k], 2) for k in errs[0]}

    rng = np.random.default_rng(7)
    g = Grid.box(3, 6)
    bounds_ok = True
    for _ in range(100):
        mu = float(rng.uniform(0.1, 10.0))
        s = TensorField(g, rng.standard_normal(g.shape + (3, 3)))
        v = VectorField(g, rng.standard_normal(g.shape + (3,)))
        b = auxiliary_bounds(s, v, mu)
        bounds_ok &= b["skew"] <= b["residual"] and b["mu_div"] <= np.sqrt(3) * b["residual"]

    ok = (
        lam4 > 0
        and lam8 > 0
        and abs(lam4_it - lam4) <= 1e-8 * lam4
        and drift < 0.25
        and min(factors.values()) >= 3.0
        and bounds_ok
    )
    record(
        7,
        ok,
        f"coercivity 4^3 {lam4:.4g}, 8^3 {lam8:.4g}, drift {drift:.0%} (< 25%); "
        f"error reduction 8->16 {factors} (>= 3); auxiliary bounds on 100 fields={bounds_ok}",
    )


def _smooth_random(grid, rng, modes=4):
    x = grid.coords
    out = np.zeros(grid.shape)
    for _ in range(modes):
        k = rng.integers(0, 3, size=grid.n)
        out += rng.standard_normal() * np.cos(np.pi * (x @ k) + rng.uniform(0, np.pi))
    return out


def test_criterion_8_divergence_potential():
    residuals = []
    ratios = []
    for res in (16, 32):
        g = Grid.box(2, res)
        part = BoundaryPartition.from_tau(g, ["x1=0"])
        x = g.coords
        w = np.stack([x[..., 0] * np.cos(x[..., 1]), np.sin(x[..., 0] * x[..., 1])], -1)
        for data in (ScalarField(g, np.ones(g.shape)), div_vector(VectorField(g, w))):
            residuals.append(divergence_potential(data, part).residual)
        rng = np.random.default_rng(11)
        ratios.append(divergence_potential(ScalarField(g, _smooth_random(g, rng)), part).ratio)
    ratio_drift = abs(ratios[1] - ratios[0]) / ratios[0]

    g = Grid.box(2, 16)
    try:
        divergence_potential(ScalarField(g, np.ones(g.shape)), BoundaryPartition.from_tau(g, g.faces))
        rejected = False
    except IncompatibleDataError:
        rejected = True
    ok = max(residuals) <= 1e-8 and ratio_drift < 0.15 and rejected
    record(
        8,
        ok,
        f"feasible residual {max(residuals):.1e} (<= 1e-8 |g|); ratio 16/32 {ratios[0]:.4f}/{ratios[1]:.4f} "
        f"drift {ratio_drift:.1%} (< 15%); incompatible case rejected={rejected}",
    )


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q"]))
