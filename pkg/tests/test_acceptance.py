"""Acceptance suite: one test per criterion, each printing a pass line with
its runtime (run with `pytest -s tests/test_acceptance.py` to see them live).
"""

import json
import math
import time

import numpy as np

from hopfbound.cli import main as cli_main
from hopfbound.fields import FieldSpec
from hopfbound.inequalities import run_identity_sweep
from hopfbound.optimizer import OptimizerConfig, Workspace, minimize
from hopfbound.shape import energy, hopf_symmetric_values, sigma_batch
from hopfbound.sphere import (DomainSpec, build_quadrature, canonical_center,
                              random_points)
from hopfbound.transport import (jacobian_det_closed_form,
                                 jacobian_det_numeric_batch, jacobian_entry_errors,
                                 moment_identities)

CAP_RADII = (0.5, 1.0, math.pi / 2, 2.0)


def _report(name, elapsed, limit, detail=""):
    print(f"\n[acceptance] {name}: PASS in {elapsed:.2f}s (limit {limit:.0f}s) {detail}")


def test_criterion_1_hopf_symmetric_functions():
    start = time.perf_counter()
    detail = []
    for k in (1, 2):
        X = random_points(k, 1000, np.random.default_rng(100 + k))
        ref = hopf_symmetric_values(k)
        err_analytic = np.abs(sigma_batch(FieldSpec.hopf(k), X) - ref).max()
        err_fd = np.abs(sigma_batch(FieldSpec.hopf(k), X, mode="fd") - ref).max()
        assert err_analytic < 1e-8
        assert err_fd < 1e-5
        detail.append(f"k={k}: analytic {err_analytic:.1e}, fd {err_fd:.1e}")
    elapsed = time.perf_counter() - start
    assert elapsed < 5.0
    _report("criterion 1 (Hopf symmetric functions)", elapsed, 5, "; ".join(detail))


def test_criterion_2_hopf_energy_attains_bound():
    start = time.perf_counter()
    spec = FieldSpec.hopf(1)
    rep = energy(spec, build_quadrature(DomainSpec.full_sphere(1)))
    rel = abs(rep.energy - 5 * math.pi ** 2) / (5 * math.pi ** 2)
    assert rel < 1e-3
    gaps = [rel]
    for rho0 in CAP_RADII:
        rule = build_quadrature(DomainSpec.cap(canonical_center(1), rho0))
        cap_rep = energy(spec, rule)
        assert abs(cap_rep.energy - 2.5 * cap_rep.vol) < 1e-3 * cap_rep.vol
        gaps.append(abs(cap_rep.gap) / cap_rep.vol)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report("criterion 2 (Hopf energy attains the bound)", elapsed, 30,
            f"max relative gap {max(gaps):.1e}")


def test_criterion_3_jacobian_determinant():
    start = time.perf_counter()
    worst_det, worst_entry = 0.0, 0.0
    for k in (1, 2):
        spec = FieldSpec.hopf(k)
        X = random_points(k, 100, np.random.default_rng(200 + k))
        sig = sigma_batch(spec, X)
        for t in (0.01, 0.05, 0.1):
            dets = jacobian_det_numeric_batch(spec, X, t)
            closed = np.array([jacobian_det_closed_form(sig[b], t)
                               for b in range(X.shape[0])])
            worst_det = max(worst_det, np.abs(dets / closed - 1.0).max())
            errs = jacobian_entry_errors(spec, X, t)
            worst_entry = max(worst_entry, errs["max_leg_companion"],
                              errs["max_field_companion"])
    assert worst_det < 1e-5
    assert worst_entry < 1e-6
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report("criterion 3 (Jacobian determinant)", elapsed, 60,
            f"det rel {worst_det:.1e}, entries {worst_entry:.1e}")


def test_criterion_4_volume_transport_moments():
    start = time.perf_counter()
    worst = 0.0
    for rho0 in CAP_RADII:
        rule = build_quadrature(DomainSpec.cap(canonical_center(1), rho0), 32, 16)
        rep = moment_identities(FieldSpec.hopf(1), rule)
        assert rep.t_grid.max() <= 0.1
        assert rep.residual_direct.max() < 1e-6 * rep.vol
        assert rep.residual_fitted.max() < 1e-6 * rep.vol
        worst = max(worst, rep.residual_direct.max() / rep.vol,
                    rep.residual_fitted.max() / rep.vol)
    rule2 = build_quadrature(DomainSpec.cap(canonical_center(2), 1.0), 8, 6)
    rep2 = moment_identities(FieldSpec.hopf(2), rule2)
    assert rep2.residual_direct.max() < 1e-6 * rep2.vol
    assert rep2.residual_fitted.max() < 1e-6 * rep2.vol
    worst = max(worst, rep2.residual_fitted.max() / rep2.vol)
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report("criterion 4 (volume transport moments)", elapsed, 30,
            f"worst residual / vol {worst:.1e}")


def test_criterion_5_inequality_chain():
    start = time.perf_counter()
    report = run_identity_sweep(dims=(2, 4, 6), samples=1_000_000, seed=500,
                                skew_samples=100_000)
    worst_identity, worst_margin, worst_skew = 0.0, 0.0, 0.0
    for dim in ("2", "4", "6"):
        s = report["dims"][dim]["summary"]
        worst_identity = max(worst_identity, s["diag_spread"], s["tracefree_diag"],
                             s["tracefree_spread"], s["cross_square"],
                             s["cross_scaled"])
        worst_margin = min(worst_margin, s["offdiag_bound"], s["full_bound"])
        worst_skew = max(worst_skew,
                         report["dims"][dim]["skew"]["max_offdiag_margin_abs"])
    assert worst_identity <= 1e-10
    assert worst_margin >= -1e-12
    assert worst_skew < 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 60.0
    _report("criterion 5 (inequality chain)", elapsed, 60,
            f"identities {worst_identity:.1e}, min margin {worst_margin:.1e}, "
            f"skew {worst_skew:.1e}")


def test_criterion_6_optimizer_probe():
    start = time.perf_counter()
    cfg = OptimizerConfig(domain=DomainSpec.cap(canonical_center(1), 1.0))
    ws = Workspace(cfg)

    grad0 = np.linalg.norm(ws.gradient(np.zeros(ws.n_gen)))
    assert grad0 < 1e-4

    n_runs = 20
    converged_feasible = 0
    for seed in range(n_runs):
        rep = minimize(OptimizerConfig(domain=cfg.domain, seed=seed),
                       workspace=ws)
        feasible = (rep.final_div_residual < 1e-4 * rep.vol
                    and rep.final_boundary_mismatch < 1e-6)
        if rep.converged and feasible:
            converged_feasible += 1
            assert rep.final_energy >= 2.5 * rep.vol - 1e-3 * rep.vol, (
                f"seed {seed}: energy {rep.final_energy} below bound "
                f"{2.5 * rep.vol}")
    assert converged_feasible >= 15, f"only {converged_feasible}/20 usable runs"
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    _report("criterion 6 (optimizer bound probe)", elapsed, 300,
            f"{converged_feasible}/20 converged feasible, |grad0| {grad0:.1e}")


def test_criterion_7_determinism(tmp_path):
    start = time.perf_counter()
    jobs = [
        ("energy", ["--resolution", "24,12", "--domain", "cap:rho=1.0",
                    "--seed", "7"]),
        ("transport", ["--resolution", "16,8", "--seed", "7"]),
        ("jacobian", ["--samples", "25", "--seed", "7"]),
        ("verify-identities", ["--samples", "50000", "--seed", "7"]),
        ("optimize", ["--resolution", "8,4", "--max-iters", "6", "--seed", "7"]),
    ]
    for cmd, flags in jobs:
        paths = [tmp_path / f"{cmd}-{i}.json" for i in (0, 1)]
        codes = [cli_main([cmd, *flags, "--out", str(p)]) for p in paths]
        assert codes[0] == codes[1]
        assert codes[0] in (0, 2)
        a, b = (p.read_bytes() for p in paths)
        assert a == b, f"{cmd} reports differ between identical runs"
        json.loads(a)  # reports are valid JSON documents
    elapsed = time.perf_counter() - start
    _report("criterion 7 (byte-identical reports)", elapsed, 60,
            f"{len(jobs)} commands x 2 runs")
