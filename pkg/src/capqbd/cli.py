"""Command-line interface: ``capqbd {validate,solve,oracle,compare,metrics} SPEC``.

Exit codes: 0 success, 1 unsupported case / solver failure / comparison
breach, 2 unreadable or invalid spec.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from .core import DEFAULT_TOL_BASE, StationaryDistribution, solve
from .errors import CapError, SpecError, UnsupportedCase, ValidationError
from .fixtures import fixture_names, fixture_path
from .metrics import compute_metrics
from .model import ChainSpec, load_spec, validate_spec
from .oracles import extract_blocks, iterate_rate_matrix, truncated_stationary

CSV_LEVELS = 50
COMPARE_LEVELS = 60
DEFAULT_TAILS = (10, 20, 40)


def _r15(x: float) -> float:
    return float(f"{x:.15g}")


def _round_tree(obj):
    if isinstance(obj, float):
        return _r15(obj)
    if isinstance(obj, dict):
        return {k: _round_tree(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v) for v in obj]
    return obj


def _dumps(obj) -> str:
    return json.dumps(_round_tree(obj), indent=2)


def resolve_spec_path(arg: str) -> Path:
    """A filesystem path, or the name of a bundled fixture (``power_states[.json]``)."""
    path = Path(arg)
    if path.exists():
        return path
    stem = path.name[:-5] if path.name.endswith(".json") else path.name
    if path.parent == Path(".") and stem in fixture_names():
        return fixture_path(stem)
    raise SpecError(f"no such file, and not a bundled fixture ({', '.join(fixture_names())})", arg)


def _load(arg: str) -> ChainSpec:
    return load_spec(resolve_spec_path(arg))


def solution_document(dist: StationaryDistribution, tails=DEFAULT_TAILS) -> dict:
    metrics = compute_metrics(dist, tails)
    return {
        "case": dist.case.kind.value,
        "boundary": dict(dist.boundary_probs),
        "level_j0": [{"phase": m, "level": dist.j0, "probability": p}
                     for m, p in enumerate(dist.level_j0_probs)],
        "terms": [{"phase": m, "coeff": t.coeff, "base": t.base, "degree": t.degree}
                  for m, terms in enumerate(dist.phase_solutions) for t in terms],
        "metrics": metrics.to_dict(),
    }


def grid_rows(dist: StationaryDistribution, levels: int = CSV_LEVELS):
    for m in range(dist.M + 1):
        for j in range(dist.j0, dist.j0 + levels + 1):
            yield m, j, dist.evaluate(m, j)


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([f"{v:.15g}" if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _parse_tails(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def compare_report(spec: ChainSpec, dist: StationaryDistribution, sup_tol: float,
                   j_max: int | None = None) -> dict:
    oracle = truncated_stationary(spec, j_max)
    top = spec.j0 + COMPARE_LEVELS
    sup = max(abs(dist.probability(s) - p) for s, p in oracle.probs.items()
              if isinstance(s, str) or s[1] <= top)
    R = iterate_rate_matrix(extract_blocks(spec))
    diag_err = float(np.max(np.abs(np.diag(R) - np.array(dist.bases.r))))
    lower = float(np.max(np.abs(np.tril(R, -1)))) if spec.M > 0 else 0.0
    ok = sup <= sup_tol and diag_err <= sup_tol and lower <= 1e-10
    return {
        "case": dist.case.kind.value,
        "truncated_sup_norm": sup,
        "truncated_j_max": oracle.j_max,
        "compared_up_to_level": top,
        "rate_matrix_diag_error": diag_err,
        "rate_matrix_below_diag_max": lower,
        "sup_tol": sup_tol,
        "pass": ok,
    }


# ------------------------------------------------------------------ commands


def cmd_validate(args, out) -> int:
    spec = _load(args.spec)
    report = validate_spec(spec)
    for issue in report.issues:
        print(str(issue), file=out if issue.severity == "warning" else sys.stderr)
    if not report.ok:
        return 2
    print(f"ok: M={spec.M}, j0={spec.j0}, {len(spec.boundary.states)} boundary states", file=out)
    return 0


def cmd_solve(args, out) -> int:
    dist = solve(_load(args.spec), tol_base=args.tol_base)
    if args.out == "csv":
        out.write(_csv(grid_rows(dist), ["phase", "level", "probability"]))
    else:
        print(_dumps(solution_document(dist)), file=out)
    return 0


def cmd_oracle(args, out) -> int:
    spec = _load(args.spec)
    sol = truncated_stationary(spec, args.jmax)
    if args.out == "csv":
        rows = [(s, "", p) if isinstance(s, str) else (s[0], s[1], p) for s, p in sol.probs.items()]
        out.write(_csv(rows, ["phase", "level", "probability"]))
        return 0
    doc = {
        "j_max": sol.j_max,
        "top_two_level_mass": sol.top_mass,
        "boundary": {s: p for s, p in sol.probs.items() if isinstance(s, str)},
        "levels": [{"phase": s[0], "level": s[1], "probability": p}
                   for s, p in sol.probs.items() if not isinstance(s, str)],
    }
    print(_dumps(doc), file=out)
    return 0


def cmd_compare(args, out) -> int:
    spec = _load(args.spec)
    report = compare_report(spec, solve(spec), args.sup_tol, args.jmax)
    print(_dumps(report), file=out)
    return 0 if report["pass"] else 1


def cmd_metrics(args, out) -> int:
    dist = solve(_load(args.spec))
    report = compute_metrics(dist, args.tails)
    doc = report.to_dict()
    doc["boundary"] = dict(report.boundary_probs)
    print(_dumps(doc), file=out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="capqbd", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("validate", help="check a chain spec")
    s.add_argument("spec")
    s.set_defaults(func=cmd_validate)

    s = sub.add_parser("solve", help="exact stationary distribution")
    s.add_argument("spec")
    s.add_argument("--out", choices=("json", "csv"), default="json")
    s.add_argument("--tol-base", type=float, default=DEFAULT_TOL_BASE,
                   help="relative tolerance for treating two bases as equal")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("oracle", help="truncated-generator reference solution")
    s.add_argument("spec")
    s.add_argument("--jmax", type=int, default=None, help="initial truncation level")
    s.add_argument("--out", choices=("json", "csv"), default="json")
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("compare", help="exact solution against both oracles")
    s.add_argument("spec")
    s.add_argument("--sup-tol", type=float, default=1e-8)
    s.add_argument("--jmax", type=int, default=None, help="initial truncation level")
    s.set_defaults(func=cmd_compare)

    s = sub.add_parser("metrics", help="moments, marginals and tails of the level")
    s.add_argument("spec")
    s.add_argument("--tails", type=_parse_tails, default=list(DEFAULT_TAILS))
    s.set_defaults(func=cmd_metrics)
    return p


def main(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except (SpecError, ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except UnsupportedCase as exc:
        print(f"unsupported: {exc}", file=sys.stderr)
        return 1
    except CapError as exc:
        print(f"failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
