"""Command-line front-end.

Subcommands: ``solve`` (compute a lower bound and emit a certificate),
``verify`` (recheck a certificate), ``oracle`` (sampling-based bound),
and ``selftest`` (built-in regression problems plus quick property
checks).  Exit codes: 0 success/verified, 1 usage or input error,
2 unverified result or failing selftest.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

import numpy as np

from . import __version__
from .blocks import parse_structure, random_unit_perturbation, assemble_dense
from .errors import MuSolverError, StructureError
from .flow import FlowOptions, gradient_complex, gradient_mixed, evaluate_target
from .jsonio import (
    certificate_to_json,
    delta_from_json,
    delta_to_json,
    matrix_from_json,
)
from .oracle import sample_lower_bound, verify_certificate
from .outer import OuterConfig, compute_lower_bound
from .problems import PROBLEMS


class _Parser(argparse.ArgumentParser):
    # usage failures must exit 1, not argparse's default 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mubound",
                     description="Structured singular value lower bounds")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p, matrix=True):
        if matrix:
            p.add_argument("--matrix", required=True,
                           help="path to a matrix JSON file")
            p.add_argument("--structure", required=True,
                           help="block structure, e.g. rs:2,cf:1")
        p.add_argument("--output", choices=("json", "text"), default="json")
        p.add_argument("--seed", type=int, default=0)

    p_solve = sub.add_parser("solve", help="compute a lower bound")
    add_common(p_solve)
    p_solve.add_argument("--tol", type=float, default=1e-9,
                         help="outer convergence tolerance")
    p_solve.add_argument("--eps0", type=float, default=None,
                         help="override the initial perturbation level")
    p_solve.add_argument("--starts", type=int, default=None,
                         help="number of eigenvalue starts")

    p_verify = sub.add_parser("verify", help="recheck a certificate")
    add_common(p_verify)
    p_verify.add_argument("--delta", required=True,
                          help="certificate JSON (solve output or a bare "
                               "eps/delta object)")
    p_verify.add_argument("--residual-tol", type=float, default=1e-6)

    p_oracle = sub.add_parser("oracle", help="sampling-based lower bound")
    add_common(p_oracle)
    p_oracle.add_argument("--trials", type=int, default=10_000)

    p_self = sub.add_parser("selftest", help="run the built-in problems")
    add_common(p_self, matrix=False)
    p_self.add_argument("--fast", action="store_true",
                        help="skip the slowest problems")
    return parser


def _load_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise StructureError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise StructureError(f"{path} is not valid JSON: {exc}") from exc


def _emit(obj, fmt, text_lines):
    if fmt == "json":
        print(json.dumps(obj, indent=2))
    else:
        for line in text_lines:
            print(line)


def cmd_solve(args) -> int:
    M = matrix_from_json(_load_json(args.matrix))
    structure = parse_structure(args.structure)
    cfg = OuterConfig(tol=args.tol, eps0=args.eps0, i_max=args.starts)
    cert = compute_lower_bound(M, structure, cfg)
    payload = certificate_to_json(cert)
    text = [
        f"lower bound : {cert.lower_bound:.12g}",
        f"eps_f       : {cert.eps_f:.12g}",
        f"residual    : {cert.residual:.3e}",
        f"verified    : {cert.verified}",
        f"mode        : {cert.mode}",
        "history     :",
    ] + [
        f"  k={k}  eps={it.eps:.12f}  objective={it.objective:.12e}  ({it.step})"
        for k, it in enumerate(cert.history)
    ]
    _emit(payload, args.output, text)
    return 0 if cert.verified else 2


def cmd_verify(args) -> int:
    M = matrix_from_json(_load_json(args.matrix))
    structure = parse_structure(args.structure)
    payload = _load_json(args.delta)
    delta_obj = payload.get("delta", payload)
    eps = payload.get("eps_f", payload.get("eps"))
    if eps is None:
        raise StructureError('certificate JSON must carry "eps_f" or "eps"')
    delta = delta_from_json(delta_obj, structure)
    report = verify_certificate(M, structure, float(eps), delta,
                                residual_tol=args.residual_tol)
    obj = {
        "eps": float(eps),
        "singularity_residual": report.singularity_residual,
        "admissible": report.admissible,
        "verified": report.verified,
        "notes": list(report.notes),
    }
    text = [
        f"eps                  : {eps:.12g}",
        f"singularity residual : {report.singularity_residual:.3e}",
        f"admissible           : {report.admissible}",
        f"verified             : {report.verified}",
    ] + [f"note: {note}" for note in report.notes]
    _emit(obj, args.output, text)
    return 0 if report.verified else 2


def cmd_oracle(args) -> int:
    M = matrix_from_json(_load_json(args.matrix))
    structure = parse_structure(args.structure)
    best_eps, best_delta = sample_lower_bound(M, structure,
                                              trials=args.trials,
                                              seed=args.seed)
    found = np.isfinite(best_eps)
    obj = {
        "trials": args.trials,
        "seed": args.seed,
        "sampled_best_eps": best_eps if found else None,
        "implied_lower_bound": (1.0 / best_eps) if found else None,
        "delta": delta_to_json(best_delta) if found else None,
    }
    text = [
        f"trials            : {args.trials}",
        f"best eps          : {best_eps if found else 'none'}",
        f"implied bound     : {1.0 / best_eps if found else 'none'}",
    ]
    _emit(obj, args.output, text)
    return 0


def _selftest_properties(seed: int):
    """Quick structural checks on random instances."""
    rng = np.random.default_rng(seed)
    rows = []
    ok = True
    worst_tan, worst_norm = 0.0, 0.0
    for _ in range(20):
        structure = parse_structure("cs:1,rs:2,cf:2")
        n = structure.n
        M = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        delta = random_unit_perturbation(structure, rng)
        trip, z = evaluate_target(M, 0.3, delta, "mixed")
        grad = gradient_mixed(delta, trip.x, z)
        for k, spec in enumerate(structure.blocks):
            d = grad.blocks[k]
            value = delta.blocks[k]
            if spec.kind.value == "cs":
                worst_tan = max(worst_tan,
                                abs((np.conj(value) * d).real))
        norms = [delta.block_norm2(k) for k in range(structure.num_blocks)]
        worst_norm = max(worst_norm, max(abs(1 - x) for x in norms[:1]))
    if worst_tan > 1e-12:
        ok = False
    rows.append(("tangency(random)", worst_tan, 1e-12, worst_tan <= 1e-12))
    rows.append(("unit norms(random)", worst_norm, 1e-12, worst_norm <= 1e-12))
    return ok, rows


def cmd_selftest(args) -> int:
    failures = []
    rows = []
    names = list(PROBLEMS)
    if args.fast:
        names = [n for n in names if PROBLEMS[n].matrix.shape[0] <= 5]
    for name in names:
        problem = PROBLEMS[name]
        structure = parse_structure(problem.structure)
        cfg = OuterConfig(eps0=problem.eps0)
        t0 = time.perf_counter()
        try:
            cert = compute_lower_bound(problem.matrix, structure, cfg,
                                       delta0=problem.init_delta)
            elapsed = time.perf_counter() - t0
            rel = abs(cert.lower_bound - problem.reference_bound)
            rel /= problem.reference_bound
            if problem.check == "at_least":
                passed = (cert.lower_bound
                          >= problem.reference_bound * (1 - problem.bound_rtol))
            else:
                passed = rel <= problem.bound_rtol
            passed = passed and cert.verified
            rows.append((name, cert.lower_bound, problem.reference_bound,
                         rel, cert.verified, elapsed, passed))
        except MuSolverError as exc:
            rows.append((name, float("nan"), problem.reference_bound,
                         float("nan"), False, 0.0, False))
            failures.append(f"{name}: {exc}")
            continue
        if not passed:
            failures.append(name)

    prop_ok, prop_rows = _selftest_properties(args.seed)
    if not prop_ok:
        failures.append("properties")

    if args.output == "json":
        payload = {
            "problems": [
                {"name": r[0], "bound": r[1], "reference": r[2],
                 "rel_error": r[3], "verified": r[4], "seconds": r[5],
                 "passed": r[6]}
                for r in rows
            ],
            "properties": [
                {"name": r[0], "value": r[1], "tolerance": r[2],
                 "passed": r[3]} for r in prop_rows
            ],
            "failures": failures,
        }
        print(json.dumps(payload, indent=2))
    else:
        print(f"{'problem':<14}{'bound':>16}{'reference':>16}"
              f"{'rel.err':>12}{'verified':>10}{'time':>8}  status")
        for r in rows:
            print(f"{r[0]:<14}{r[1]:>16.10f}{r[2]:>16.10f}"
                  f"{r[3]:>12.2e}{str(r[4]):>10}{r[5]:>7.1f}s"
                  f"  {'PASS' if r[6] else 'FAIL'}")
        for r in prop_rows:
            print(f"{r[0]:<30} value={r[1]:.2e} tol={r[2]:.0e}  "
                  f"{'PASS' if r[3] else 'FAIL'}")
    return 0 if not failures else 2


_COMMANDS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "oracle": cmd_oracle,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except (StructureError, MuSolverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entrypoint():
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
