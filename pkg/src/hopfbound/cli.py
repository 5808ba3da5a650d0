"""Command-line interface.

Subcommands: verify-identities, energy, transport, jacobian, optimize,
sweep. A JSON config file may supply any flag value (keys are the long flag
names with dashes as underscores); explicit flags win. Exit codes: 0 all
checks passed, 1 operational error, 2 mathematical check violated.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
import time

import numpy as np

from . import __version__
from .fields import FieldSpec, load_field
from .inequalities import run_identity_sweep, worst_sample
from .optimizer import OptimizerConfig, minimize, sweep as run_sweep
from .reporting import canonical_json, render_pretty, report_meta, rows_to_csv
from .shape import energy as compute_energy, sigma_batch
from .sphere import DomainSpec, build_quadrature, canonical_center, random_points
from .transport import (default_t_grid, jacobian_det_closed_form,
                        _jacobian_matrices, moment_identities)
from .errors import NonDiffeomorphicError

EXIT_OK = 0
EXIT_OPERATIONAL = 1
EXIT_VIOLATION = 2


class CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse uses exit code 2 for usage errors; 2 is reserved for math
    # violations here, so remap to 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise CliError(message)


def _parse_domain(text: str, k: int) -> DomainSpec:
    if text == "full":
        return DomainSpec.full_sphere(k)
    if text.startswith("cap:rho="):
        return DomainSpec.cap(canonical_center(k), float(text[len("cap:rho="):]))
    raise CliError(f"cannot parse domain {text!r} (expected 'full' or 'cap:rho=R')")


def _parse_resolution(text: str) -> tuple[int, int]:
    try:
        nr, na = (int(p) for p in text.split(","))
    except ValueError:
        raise CliError(f"cannot parse resolution {text!r} (expected 'NR,NA')") from None
    return nr, na


def _parse_floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _parse_field(text: str, k: int) -> FieldSpec:
    if text == "hopf":
        return FieldSpec.hopf(k)
    if text.startswith("file:"):
        spec = load_field(text[len("file:"):])
        if spec.k != k:
            raise CliError(f"field file has k={spec.k}, command uses k={k}")
        return spec
    raise CliError(f"cannot parse field {text!r} (expected 'hopf' or 'file:PATH')")


# per-command flag defaults; a config file overrides these, explicit flags
# override the config file
_DEFAULTS = {
    "verify-identities": {
        "samples": 100_000, "dims": "2,4,6", "seed": 0, "scale": 1.0,
        "heavy_tailed": False, "skew_samples": None, "identity_tol": 1e-10,
        "margin_tol": 1e-12, "s2_tol": 1e-12, "threads": 1,
        "out": None, "format": "json",
    },
    "energy": {
        "k": 1, "domain": "full", "resolution": None, "field": "hopf",
        "mode": "auto", "seed": 0, "threads": 1, "out": None, "format": "json",
    },
    "transport": {
        "k": 1, "domain": "cap:rho=1.0", "resolution": None, "field": "hopf",
        "t_grid": None, "mode": "auto", "seed": 0, "threads": 1,
        "out": None, "format": "json",
    },
    "jacobian": {
        "k": 1, "field": "hopf", "samples": 100, "t_grid": "0.01,0.05,0.1",
        "seed": 0, "det_tol": 1e-5, "entry_tol": 1e-6, "threads": 1,
        "out": None, "format": "json",
    },
    "optimize": {
        "k": 1, "domain": "cap:rho=1.0", "resolution": "12,8",
        "max_iters": 80, "seed": 0, "lambda_div": None, "mu_boundary": 1e4,
        "generators": None, "init_scale": 0.2, "div_tol_factor": 1e-4,
        "mismatch_tol": 1e-6, "threads": 1, "out": None, "format": "json",
    },
    "sweep": {
        "k": 1, "rhos": "0.5,1.0,1.5707963267948966,2.0", "resolution": "12,8",
        "starts": 3, "max_iters": 80, "seed": 0, "div_tol_factor": 1e-4,
        "mismatch_tol": 1e-6, "threads": 1, "out": None, "format": "json",
    },
}


def _add_common(sp):
    sp.add_argument("--config", help="JSON file of flag values (flags override)")
    sp.add_argument("--out", help="output path (default stdout)")
    sp.add_argument("--format", choices=["json", "csv", "pretty"])
    sp.add_argument("--seed", type=int)
    sp.add_argument("--threads", type=int)


def build_parser() -> _Parser:
    parser = _Parser(prog="hopfbound", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify-identities", parents=[], help="random-matrix identity chain")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--dims")
    sp.add_argument("--scale", type=float)
    sp.add_argument("--heavy-tailed", action="store_const", const=True, dest="heavy_tailed")
    sp.add_argument("--skew-samples", type=int, dest="skew_samples")
    sp.add_argument("--identity-tol", type=float, dest="identity_tol")
    sp.add_argument("--margin-tol", type=float, dest="margin_tol")
    sp.add_argument("--s2-tol", type=float, dest="s2_tol")
    _add_common(sp)

    sp = sub.add_parser("energy", help="energy report for a field on a domain")
    sp.add_argument("--k", type=int)
    sp.add_argument("--domain")
    sp.add_argument("--resolution")
    sp.add_argument("--field")
    sp.add_argument("--mode", choices=["auto", "analytic", "fd"])
    _add_common(sp)

    sp = sub.add_parser("transport", help="volume transport and moment identities")
    sp.add_argument("--k", type=int)
    sp.add_argument("--domain")
    sp.add_argument("--resolution")
    sp.add_argument("--field")
    sp.add_argument("--t-grid", dest="t_grid")
    sp.add_argument("--mode", choices=["auto", "analytic", "fd"])
    _add_common(sp)

    sp = sub.add_parser("jacobian", help="numeric vs closed-form displacement Jacobian")
    sp.add_argument("--k", type=int)
    sp.add_argument("--field")
    sp.add_argument("--samples", type=int)
    sp.add_argument("--t-grid", dest="t_grid")
    sp.add_argument("--det-tol", type=float, dest="det_tol")
    sp.add_argument("--entry-tol", type=float, dest="entry_tol")
    _add_common(sp)

    sp = sub.add_parser("optimize", help="penalized descent probing the energy bound")
    sp.add_argument("--k", type=int)
    sp.add_argument("--domain")
    sp.add_argument("--resolution")
    sp.add_argument("--max-iters", type=int, dest="max_iters")
    sp.add_argument("--lambda-div", type=float, dest="lambda_div")
    sp.add_argument("--mu-boundary", type=float, dest="mu_boundary")
    sp.add_argument("--generators", type=int)
    sp.add_argument("--init-scale", type=float, dest="init_scale")
    sp.add_argument("--div-tol-factor", type=float, dest="div_tol_factor")
    sp.add_argument("--mismatch-tol", type=float, dest="mismatch_tol")
    _add_common(sp)

    sp = sub.add_parser("sweep", help="optimizer sweep over cap radii")
    sp.add_argument("--k", type=int)
    sp.add_argument("--rhos")
    sp.add_argument("--resolution")
    sp.add_argument("--starts", type=int)
    sp.add_argument("--max-iters", type=int, dest="max_iters")
    sp.add_argument("--div-tol-factor", type=float, dest="div_tol_factor")
    sp.add_argument("--mismatch-tol", type=float, dest="mismatch_tol")
    _add_common(sp)
    return parser


def _effective_options(args: argparse.Namespace) -> dict:
    """Layer defaults < config file < explicit flags; reject unknown config
    keys before any computation."""
    defaults = dict(_DEFAULTS[args.command])
    opts = dict(defaults)
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise CliError("config file must hold a JSON object")
        unknown = sorted(set(cfg) - set(defaults))
        if unknown:
            raise CliError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
        opts.update(cfg)
    for key in defaults:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def _emit(opts, payload, pretty_lines, csv_text, wall):
    fmt = opts["format"]
    if fmt == "json":
        text = canonical_json(payload)
    elif fmt == "csv":
        text = csv_text if csv_text is not None else ""
    else:
        text = render_pretty(f"hopfbound {payload['meta']['command']}",
                             pretty_lines, wall_clock=wall)
    if opts["out"]:
        with open(opts["out"], "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cmd_verify_identities(opts) -> tuple[int, dict, list, str]:
    dims = tuple(int(d) for d in str(opts["dims"]).split(","))
    report = run_identity_sweep(
        dims=dims, samples=opts["samples"], seed=opts["seed"],
        scale=opts["scale"], heavy_tailed=bool(opts["heavy_tailed"]),
        skew_samples=opts["skew_samples"], threads=opts["threads"])
    id_tol, mg_tol, s2_tol = opts["identity_tol"], opts["margin_tol"], opts["s2_tol"]
    violations = []
    rows = []
    for dim_key, entry in report["dims"].items():
        summary = entry["summary"]
        if not summary:
            continue
        row = {"dim": dim_key, **summary}
        if entry["skew"]:
            row["skew_offdiag_margin"] = entry["skew"]["max_offdiag_margin_abs"]
        rows.append(row)
        checks = [
            summary["diag_spread"] <= id_tol,
            summary["tracefree_diag"] <= id_tol,
            summary["tracefree_spread"] <= id_tol,
            summary["cross_square"] <= id_tol,
            summary["cross_scaled"] <= id_tol,
            summary["offdiag_bound"] >= -mg_tol,
            summary["full_bound"] >= -mg_tol,
            summary["s2_agreement"] <= s2_tol,
        ]
        if entry["skew"]:
            checks.append(entry["skew"]["max_offdiag_margin_abs"] < mg_tol)
        if not all(checks):
            violations.append({
                "dim": int(dim_key),
                "summary": summary,
                "sample": worst_sample(entry, int(dim_key), opts["seed"],
                                       opts["scale"],
                                       bool(opts["heavy_tailed"])).tolist(),
            })
    ok = not violations
    payload = {
        "meta": report_meta(seed=opts["seed"], command="verify-identities",
                            samples=opts["samples"], dims=list(dims)),
        "identities": report,
        "thresholds": {"identity": id_tol, "margin": mg_tol, "s2": s2_tol},
        "pass": ok,
    }
    if violations:
        payload["violations"] = violations
    pretty = [f"samples per dim: {opts['samples']}",
              f"{'dim':>3} {'check':<18} {'value':>12}  kind"]
    for row in rows:
        for name in ("diag_spread", "tracefree_diag", "tracefree_spread",
                     "cross_square", "cross_scaled", "s2_agreement"):
            pretty.append(f"{row['dim']:>3} {name:<18} {row[name]:>12.3e}  max residual")
        for name in ("offdiag_bound", "full_bound"):
            pretty.append(f"{row['dim']:>3} {name:<18} {row[name]:>12.3e}  min margin")
        if "skew_offdiag_margin" in row:
            pretty.append(f"{row['dim']:>3} {'skew_equality':<18} "
                          f"{row['skew_offdiag_margin']:>12.3e}  max |margin|")
    pretty.append("PASS" if ok else "FAIL")
    columns = ["dim"] + list(rows[0].keys())[1:] if rows else ["dim"]
    return (EXIT_OK if ok else EXIT_VIOLATION, payload, pretty,
            rows_to_csv(rows, columns))


def _cmd_energy(opts) -> tuple[int, dict, list, str]:
    k = opts["k"]
    domain = _parse_domain(opts["domain"], k)
    res = _parse_resolution(opts["resolution"]) if opts["resolution"] else (None, None)
    rule = build_quadrature(domain, *res)
    spec = _parse_field(opts["field"], k)
    report = compute_energy(spec, rule, mode=opts["mode"], threads=opts["threads"])
    payload = {
        "meta": report_meta(k=k, resolution=rule.resolution_payload(),
                            seed=opts["seed"], command="energy",
                            domain=domain.label()),
        "energy": report.to_payload(),
    }
    pretty = [
        f"field: {spec.kind}   domain: {domain.label()}   k={k}",
        f"vol(K)    = {report.vol:.12g}",
        f"dirichlet = {report.dirichlet:.12g}",
        f"energy    = {report.energy:.12g}",
        f"bound     = {report.bound:.12g}",
        f"gap       = {report.gap:.6e}",
    ]
    return EXIT_OK, payload, pretty, rows_to_csv(
        [report.csv_row()], list(report.csv_row().keys()))


def _cmd_transport(opts) -> tuple[int, dict, list, str]:
    k = opts["k"]
    domain = _parse_domain(opts["domain"], k)
    res = _parse_resolution(opts["resolution"]) if opts["resolution"] else (None, None)
    rule = build_quadrature(domain, *res)
    spec = _parse_field(opts["field"], k)
    t_grid = _parse_floats(opts["t_grid"]) if opts["t_grid"] else default_t_grid(k)
    report = moment_identities(spec, rule, t_grid, mode=opts["mode"],
                               threads=opts["threads"])
    payload = {
        "meta": report_meta(k=k, resolution=rule.resolution_payload(),
                            seed=opts["seed"], command="transport",
                            domain=domain.label()),
        "transport": report.to_payload(),
    }
    rows = []
    for i in range(2 * k):
        rows.append({
            "index": i + 1,
            "moment_direct": report.moments_direct[i],
            "moment_fitted": report.moments_fitted[i],
            "residual_direct": report.residual_direct[i],
            "residual_fitted": report.residual_fitted[i],
        })
    pretty = [f"field: {spec.kind}   domain: {domain.label()}   k={k}",
              f"vol(K) = {report.vol:.12g}   fit condition = {report.fit_condition:.3e}",
              f"{'i':>2} {'direct':>18} {'fitted':>18} {'resid_direct':>14} {'resid_fitted':>14}"]
    for row in rows:
        pretty.append("{index:>2} {moment_direct:>18.12g} {moment_fitted:>18.12g} "
                      "{residual_direct:>14.3e} {residual_fitted:>14.3e}".format(**row))
    return EXIT_OK, payload, pretty, rows_to_csv(rows, list(rows[0].keys()))


def _cmd_jacobian(opts) -> tuple[int, dict, list, str]:
    k = opts["k"]
    spec = _parse_field(opts["field"], k)
    t_values = _parse_floats(opts["t_grid"])
    rng = np.random.default_rng(opts["seed"])
    X = random_points(k, opts["samples"], rng)
    sig = sigma_batch(spec, X, threads=opts["threads"])
    rows = []
    ok = True
    for t in t_values:
        M = _jacobian_matrices(spec, X, t, 1e-5)
        dets = np.linalg.det(M)
        closed = np.array([jacobian_det_closed_form(sig[b], t)
                           for b in range(X.shape[0])])
        d = M.shape[1] - 1
        row = {
            "t": t,
            "min_det": float(dets.min()),
            "max_rel_det_err": float(np.max(np.abs(dets / closed - 1.0))),
            "max_leg_companion": float(np.max(np.abs(M[:, :d, d]))),
            "max_field_companion": float(np.max(np.abs(
                M[:, d, d] - math.sqrt(1.0 + t * t)))),
        }
        row["pass"] = bool(dets.min() > 0.0
                           and row["max_rel_det_err"] <= opts["det_tol"]
                           and row["max_leg_companion"] <= opts["entry_tol"]
                           and row["max_field_companion"] <= opts["entry_tol"])
        ok = ok and row["pass"]
        rows.append(row)
    payload = {
        "meta": report_meta(k=k, seed=opts["seed"], command="jacobian",
                            samples=opts["samples"]),
        "jacobian": {"rows": rows, "det_tol": opts["det_tol"],
                     "entry_tol": opts["entry_tol"], "pass": ok},
    }
    pretty = [f"field: {spec.kind}   k={k}   samples={opts['samples']}"]
    for row in rows:
        pretty.append(
            "t={t:g}: det rel err {max_rel_det_err:.3e}, "
            "leg/companion {max_leg_companion:.3e}, "
            "field/companion {max_field_companion:.3e} -> "
            "{status}".format(status="ok" if row["pass"] else "VIOLATION", **row))
    pretty.append("PASS" if ok else "FAIL")
    return (EXIT_OK if ok else EXIT_VIOLATION, payload, pretty,
            rows_to_csv(rows, list(rows[0].keys())))


def _optimizer_config(opts) -> OptimizerConfig:
    k = opts["k"]
    domain = _parse_domain(opts["domain"], k)
    nr, na = _parse_resolution(opts["resolution"])
    return OptimizerConfig(
        domain=domain, radial_points=nr, angular_points=na,
        n_generators=opts.get("generators"),
        penalty_div=opts.get("lambda_div"),
        penalty_boundary=opts.get("mu_boundary", 1e4),
        max_iters=opts["max_iters"], seed=opts["seed"],
        init_scale=opts.get("init_scale", 0.2),
        threads=opts["threads"],
    )


def _cmd_optimize(opts) -> tuple[int, dict, list, str]:
    cfg = _optimizer_config(opts)
    report = minimize(cfg)
    feasible = (report.final_div_residual < opts["div_tol_factor"] * report.vol
                and report.final_boundary_mismatch < opts["mismatch_tol"])
    violation = report.converged and feasible and not report.meets_bound
    payload = {
        "meta": report_meta(k=cfg.domain.k,
                            resolution={"radial": cfg.radial_points,
                                        "angular": cfg.angular_points},
                            seed=opts["seed"], command="optimize",
                            domain=cfg.domain.label()),
        "optimization": report.to_payload(),
        "feasible": feasible,
        "violation": violation,
    }
    pretty = [
        f"domain: {cfg.domain.label()}   k={cfg.domain.k}   seed={opts['seed']}",
        f"vol(K) = {report.vol:.12g}   bound = {report.bound:.12g}",
        f"final energy = {report.final_energy:.12g}   gap = {report.gap_to_bound:.6e}",
        f"div residual = {report.final_div_residual:.6e}   "
        f"boundary mismatch = {report.final_boundary_mismatch:.6e}",
        f"converged = {report.converged}   iterations = {report.iterations}   "
        f"feasible = {feasible}",
        "BOUND VIOLATION" if violation else "bound respected",
    ]
    row = {"domain": cfg.domain.label(), "vol": report.vol, "bound": report.bound,
           "energy": report.final_energy, "gap": report.gap_to_bound,
           "div_residual": report.final_div_residual,
           "boundary_mismatch": report.final_boundary_mismatch,
           "converged": report.converged, "feasible": feasible}
    return (EXIT_VIOLATION if violation else EXIT_OK, payload, pretty,
            rows_to_csv([row], list(row.keys())))


def _cmd_sweep(opts) -> tuple[int, dict, list, str]:
    k = opts["k"]
    rhos = _parse_floats(opts["rhos"])
    domains = [DomainSpec.cap(canonical_center(k), r) for r in rhos]
    cfg = OptimizerConfig(
        domain=domains[0],
        radial_points=_parse_resolution(opts["resolution"])[0],
        angular_points=_parse_resolution(opts["resolution"])[1],
        max_iters=opts["max_iters"], seed=opts["seed"], threads=opts["threads"])
    rows = run_sweep(domains, cfg, n_starts=opts["starts"])
    violation = False
    for row in rows:
        if row["error"] is None:
            feasible = (row["div_residual"] < opts["div_tol_factor"] * row["vol"]
                        and row["boundary_mismatch"] < opts["mismatch_tol"])
            row["feasible"] = feasible
            if row["converged"] and feasible and not row["meets_bound"]:
                violation = True
        else:
            row["feasible"] = None
    payload = {
        "meta": report_meta(k=k, seed=opts["seed"], command="sweep",
                            resolution={"radial": cfg.radial_points,
                                        "angular": cfg.angular_points}),
        "rows": rows,
        "violation": violation,
    }
    pretty = [f"k={k}   caps: {', '.join(f'{r:g}' for r in rhos)}"]
    for row in rows:
        if row["error"]:
            pretty.append(f"{row['domain']}: ERROR {row['error']}")
        else:
            pretty.append(
                "{domain}: vol {vol:.6g}, bound {bound:.6g}, min energy "
                "{min_energy:.6g}, gap {gap:.3e}".format(**row))
    pretty.append("BOUND VIOLATION" if violation else "bound respected")
    cols = ["domain", "vol", "bound", "min_energy", "div_residual",
            "boundary_mismatch", "gap", "converged", "feasible", "error"]
    return (EXIT_VIOLATION if violation else EXIT_OK, payload, pretty,
            rows_to_csv(rows, cols))


_COMMANDS = {
    "verify-identities": _cmd_verify_identities,
    "energy": _cmd_energy,
    "transport": _cmd_transport,
    "jacobian": _cmd_jacobian,
    "optimize": _cmd_optimize,
    "sweep": _cmd_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        opts = _effective_options(args)
        start = time.perf_counter()
        code, payload, pretty, csv_text = _COMMANDS[args.command](opts)
        wall = time.perf_counter() - start
        payload["meta"]["command"] = args.command
        _emit(opts, payload, pretty, csv_text, wall)
        print(f"hopfbound: {args.command} finished in {wall:.3f} s", file=sys.stderr)
        return code
    except CliError as exc:
        print(f"hopfbound: error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL
    except NonDiffeomorphicError as exc:
        print(f"hopfbound: displacement check failed: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"hopfbound: error: {exc}", file=sys.stderr)
        return EXIT_OPERATIONAL


if __name__ == "__main__":
    sys.exit(main())
