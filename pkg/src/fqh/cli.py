"""Command line interface: ``fqh analyze | sweep | sample``.

Exit codes: 0 success, 2 parse or validation failure, 3 when a checked
invariant fails or the eigensolver does not converge.  The environment
variable FQH_TOLERANCE_SCALE (default 1) multiplies the default validation
tolerances; tolerances given explicitly in a problem file are used as-is.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

from .errors import FqhError, NoConvergence, NoDegenerateBlock, ParseError, ValidationError
from .heat import (
    LEVEL_EIGENSTATE,
    LEVEL_FULL,
    LEVEL_PARTIAL,
    analyze,
    bloch_basis,
    distribution_for,
    moments_enumerated,
    moments_trace_formula_eigenstate,
    partial_cg_distribution,
)
from .problems import BUILTIN_EXAMPLES, build_operators, load_problem
from .sampling import chi_square_gof, sample, sample_sequential

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_INVARIANT = 3

LEVEL_ALIASES = {
    "eigenstate": LEVEL_EIGENSTATE,
    "partial": LEVEL_PARTIAL,
    "full": LEVEL_FULL,
}


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _tolerance_scale() -> float:
    raw = os.environ.get("FQH_TOLERANCE_SCALE", "1")
    try:
        scale = float(raw)
    except ValueError:
        raise ParseError(f"FQH_TOLERANCE_SCALE must be a number, got {raw!r}") from None
    if scale <= 0:
        raise ParseError(f"FQH_TOLERANCE_SCALE must be positive, got {scale}")
    return scale


def _load(args) -> tuple:
    if args.example is not None:
        problem = BUILTIN_EXAMPLES[args.example]()
    elif args.problem is not None:
        problem = load_problem(args.problem)
    else:
        raise ParseError("give a problem file or --example")
    return build_operators(problem, scale=_tolerance_scale())


def _parse_basis_spec(spec: str, rho, file_basis, cluster_tol):
    if spec == "default":
        return None, "default-eigenbasis"
    if spec == "file":
        if file_basis is None:
            raise ValidationError("--basis file requested but the problem has no basis")
        return file_basis, "file-basis"
    if spec.startswith("bloch:"):
        parts = spec[len("bloch:") :].split(",")
        if len(parts) != 2:
            raise ParseError(f"--basis bloch takes 'bloch:theta,phi', got {spec!r}")
        try:
            theta, phi = float(parts[0]), float(parts[1])
        except ValueError:
            raise ParseError(f"bloch angles must be numbers, got {spec!r}") from None
        basis = bloch_basis(rho, theta, phi, reference=file_basis, cluster_tol=cluster_tol)
        return basis, f"bloch(theta={_fmt(theta)},phi={_fmt(phi)})"
    raise ParseError(f"unknown --basis {spec!r}, expected default, file or bloch:theta,phi")


def _emit(text: str, out_path: str | None) -> None:
    if out_path is None:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            if not text.endswith("\n"):
                fh.write("\n")


def _cmd_analyze(args) -> int:
    rho, h, file_basis, cluster_tol = _load(args)
    basis, tag = _parse_basis_spec(args.basis, rho, file_basis, cluster_tol)
    report = analyze(
        rho, h, basis=basis, order=args.order, cluster_tol=cluster_tol, basis_tag=tag
    )
    _emit(json.dumps(report.to_dict(), indent=2), args.out)
    return EXIT_INVARIANT if report.invariant_violations else EXIT_OK


def _cmd_sweep(args) -> int:
    rho, h, file_basis, cluster_tol = _load(args)
    rdec = rho.decomposition(cluster_tol)
    if not any(c.multiplicity == 2 for c in rdec.clusters):
        raise NoDegenerateBlock(
            "sweep needs a state with at least one two-dimensional degenerate "
            "cluster; none of the spectral multiplicities is 2"
        )

    sdist = partial_cg_distribution(rho, h, cluster_tol=cluster_tol)
    s1, s2 = moments_enumerated(sdist, 2)
    var_s = s2 - s1**2

    lines = ["theta,phi,var_q,var_s,var_diff"]
    min_diff = math.inf
    for i in range(args.theta_steps):
        theta = i * math.pi / args.theta_steps
        for j in range(args.phi_steps):
            phi = j * 2.0 * math.pi / args.phi_steps
            basis = bloch_basis(rho, theta, phi, reference=file_basis, cluster_tol=cluster_tol)
            m1, m2 = moments_trace_formula_eigenstate(
                rho, h, basis, 2, cluster_tol=cluster_tol
            )
            var_q = m2 - m1**2
            diff = var_q - var_s
            min_diff = min(min_diff, diff)
            lines.append(
                ",".join([_fmt(theta), _fmt(phi), _fmt(var_q), _fmt(var_s), _fmt(diff)])
            )
    _emit("\n".join(lines) + "\n", args.out)
    if min_diff < -1e-9:
        print(
            f"invariant check failed: min var_diff {min_diff:.3e} is below -1e-9",
            file=sys.stderr,
        )
        return EXIT_INVARIANT
    return EXIT_OK


def _cmd_sample(args) -> int:
    rho, h, file_basis, cluster_tol = _load(args)
    level = LEVEL_ALIASES[args.level]
    basis = file_basis if level == LEVEL_EIGENSTATE else None
    dist = distribution_for(rho, h, level, basis=basis, cluster_tol=cluster_tol)
    if args.method == "joint":
        run = sample(dist, args.n, args.seed, max_order=args.order)
    else:
        run = sample_sequential(
            rho, h, level, args.n, args.seed,
            basis=basis, max_order=args.order, cluster_tol=cluster_tol,
        )

    analytic_moments = moments_enumerated(dist, args.order)
    labels = dist.labels()
    probs = dist.probabilities()
    counts = [run.counts[label] for label in labels]
    gof = chi_square_gof(counts, probs)

    table = []
    max_prob_dev = 0.0
    for label, p, entry in zip(labels, probs, dist.entries):
        freq = run.empirical_probs[label]
        max_prob_dev = max(max_prob_dev, abs(freq - p))
        table.append(
            {
                "label": str(label),
                "heat": entry.heat,
                "analytic_probability": float(p),
                "empirical_frequency": freq,
                "count": run.counts[label],
            }
        )
    mean = run.empirical_moments[0]
    variance = run.empirical_moments[1] - mean**2 if args.order >= 2 else None
    out = {
        "level": level,
        "method": args.method,
        "seed": args.seed,
        "n_samples": args.n,
        "outcomes": table,
        "max_abs_probability_deviation": max_prob_dev,
        "analytic_moments": analytic_moments,
        "empirical_moments": run.empirical_moments,
        "moment_deviations": [
            abs(a - b) for a, b in zip(analytic_moments, run.empirical_moments)
        ],
        "empirical_variance": variance,
        "chi_square": {
            "statistic": gof.statistic,
            "dof": gof.dof,
            "critical_99_9": gof.critical,
            "passed": gof.passed,
        },
    }
    _emit(json.dumps(out, indent=2), args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fqh",
        description="Fluctuating quantum heat of a projective energy measurement: "
        "exact distributions, moments, variance bounds and Monte Carlo sampling.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("problem", nargs="?", help="path to a JSON problem file")
        p.add_argument(
            "--example",
            choices=sorted(BUILTIN_EXAMPLES),
            help="use a built-in example instead of a problem file",
        )
        p.add_argument("--out", help="write output to this file instead of stdout")

    p_analyze = sub.add_parser("analyze", help="full report for one problem")
    add_common(p_analyze)
    p_analyze.add_argument("--K", dest="order", type=int, default=4, help="highest moment order")
    p_analyze.add_argument(
        "--basis",
        default="default",
        help="eigenbasis for the eigenstate level: default | file | bloch:theta,phi",
    )

    p_sweep = sub.add_parser(
        "sweep", help="variance of the eigenstate heat over a (theta, phi) grid"
    )
    add_common(p_sweep)
    p_sweep.add_argument("--theta-steps", type=int, default=64)
    p_sweep.add_argument("--phi-steps", type=int, default=64)

    p_sample = sub.add_parser("sample", help="Monte Carlo sampling of one level")
    add_common(p_sample)
    p_sample.add_argument(
        "--level", choices=sorted(LEVEL_ALIASES), required=True
    )
    p_sample.add_argument("--n", type=int, default=100000)
    p_sample.add_argument("--seed", type=int, default=0)
    p_sample.add_argument("--K", dest="order", type=int, default=4)
    p_sample.add_argument(
        "--method",
        choices=("joint", "sequential"),
        default="joint",
        help="draw from the joint table or simulate the two-step record",
    )

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    commands = {"analyze": _cmd_analyze, "sweep": _cmd_sweep, "sample": _cmd_sample}
    try:
        return commands[args.command](args)
    except (ParseError, ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except FqhError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
