"""Command-line entry point.

Examples:
  otelbaev validate --spec spec.json
  otelbaev qstar eval --spec spec.json --x 1
  otelbaev qstar profile --spec cantor.json --window -0.5,1.5 --format csv --out q.csv
  otelbaev bounds count --spec spec.json --lambda-grid 1,5,10
  otelbaev verify sandwich --spec spec.json --lambda-grid 1,5,10,25,50 --R 12 --n 4800

Exit codes: 0 success, 1 invalid spec or arguments, 2 numeric failure,
3 a quantity requested as finite is divergent.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import bounds as B
from . import oracle as O
from . import qstar as Q
from .errors import DivergentQuantity, InvalidSpecError, NumericFailure
from .measure import brinck_bound, cdf, interval_mass, load_spec, validate_spec
from .serialize import csv_text, dumps, provenance

EXIT_OK, EXIT_INVALID, EXIT_NUMERIC, EXIT_DIVERGENT = 0, 1, 2, 3


class UsageError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# argument helpers


def parse_grid(text: str) -> list[float]:
    """'a:b:step' (inclusive), 'v1,v2,...' or a single value."""
    text = text.strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise UsageError("lambda grid must look like a:b:step")
        a, b, step = map(float, parts)
        if not step > 0 or b < a:
            raise UsageError("lambda grid needs step > 0 and a <= b")
        n = int(math.floor((b - a) / step * (1 + 1e-12))) + 1
        return [a + i * step for i in range(n)]
    return [float(v) for v in text.split(",") if v.strip()]


def parse_window(text: str) -> tuple[float, float]:
    vals = [float(v) for v in text.split(",")]
    if len(vals) != 2 or not vals[0] < vals[1]:
        raise UsageError("window must be 'a,b' with a < b")
    return vals[0], vals[1]


def _floats(text):
    return [float(v) for v in str(text).split(",") if v.strip()]


def _ints(text):
    out = []
    for v in str(text).split(","):
        v = v.strip()
        if not v:
            continue
        if ":" in v:
            a, b = v.split(":")
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(v))
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("OTELBAEV_THREADS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    items = list(items)
    workers = min(_threads(), max(1, len(items)))
    if workers == 1:
        return [fn(v) for v in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# ---------------------------------------------------------------------------
# commands; each returns (payload dict, csv (header, rows) or None, exit code)


def _spec(args):
    return load_spec(args.spec)


def cmd_validate(args):
    rep = validate_spec(_spec(args))
    return rep.to_dict(), None, EXIT_OK if rep.ok else EXIT_INVALID


def cmd_measure(args):
    spec = _spec(args)
    comps = list(spec.positive) if args.part == "positive" else list(spec.negative)
    if args.action == "cdf":
        xs = _xs(args)
        vals = np.atleast_1d(cdf(comps, np.asarray(xs)))
        rows = list(zip(xs, vals.tolist()))
        return {"part": args.part, "x": xs, "cdf": vals.tolist()}, (("x", "cdf"), rows), EXIT_OK
    if args.action == "mass":
        a, b = parse_window(args.window) if args.window else (-1.0, 1.0)
        m = interval_mass(comps, a, b)
        return {"part": args.part, "window": [a, b], "mass": m}, None, EXIT_OK
    beta = brinck_bound(comps, 1.0)
    return {"part": args.part, "brinck": beta}, None, EXIT_OK


def _xs(args):
    if args.x is not None:
        return _floats(args.x)
    a, b = parse_window(args.window) if args.window else (-1.0, 1.0)
    n = args.samples or 513
    return np.linspace(a, b, n).tolist()


def cmd_qstar(args):
    spec = _spec(args)
    if args.action == "eval":
        xs = _xs(args) if (args.x is not None or args.window) else [0.0]
        d = np.atleast_1d(Q.d_mu(spec.positive, np.asarray(xs), args.tol))
        q = 1.0 / d**2
        rows = [(x, qq, 2 * args.tol * qq) for x, qq in zip(xs, q.tolist())]
        if len(xs) == 1:
            payload = {"x": xs[0], "q_star": float(q[0]), "d_mu": float(d[0])}
        else:
            payload = {"x": xs, "q_star": q.tolist(), "d_mu": d.tolist()}
        return payload, (("x", "q_star", "tol"), rows), EXIT_OK
    window = parse_window(args.window) if args.window else (-1.0, 1.0)
    prof = Q.profile(spec.positive, window, args.samples, args.tol)
    viol = Q.est_q_violations(prof)
    payload = prof.to_dict()
    payload["est_q_violations"] = len(viol)
    return payload, (("x", "q_star", "tol"), prof.rows()), EXIT_OK


def _lams(args, default="1"):
    return parse_grid(args.lambda_grid or default)


def cmd_sublevel(args):
    spec = _spec(args)
    lams = _lams(args)
    res = _pmap(lambda lam: Q.sublevel_measure(spec.positive, lam, args.tol), lams)
    rows = [(r.level, r.measure, r.error, math.sqrt(r.level) * r.measure) for r in res]
    code = EXIT_DIVERGENT if any(math.isinf(r.measure) for r in res) else EXIT_OK
    payload = {"results": [dict(r.to_dict(), M=math.sqrt(r.level) * r.measure) for r in res]}
    return payload, (("lambda", "measure", "error", "M"), rows), code


def cmd_bounds(args):
    spec = _spec(args)
    act = args.action
    if act == "count":
        k = B.resolve_constants(spec)
        reps = _pmap(lambda lam: B.counting_bounds(spec, lam, args.tol, k), _lams(args))
        rows = [(r.lam, r.lower_count, r.upper_count) for r in reps]
        code = EXIT_DIVERGENT if any(math.isinf(r.upper_count) for r in reps) else EXIT_OK
        return {"reports": [r.to_dict() for r in reps]}, (("lambda", "lower", "upper"), rows), code
    if act == "negative":
        return B.negative_count_bound(spec, args.tol).to_dict(), None, EXIT_OK
    if act == "lambda1":
        return B.lambda1_bounds(spec, args.tol).to_dict(), None, EXIT_OK
    if act == "essential":
        return B.essential_inf_bounds(spec, args.tol).to_dict(), None, EXIT_OK
    if act == "schatten":
        B.resolve_constants(spec)
        reps = [B.schatten(spec, p) for p in _floats(args.p or "1")]
        rows = [(r.p, r.member, r.integral, None if r.bracket is None else r.bracket[0],
                 None if r.bracket is None else r.bracket[1]) for r in reps]
        return {"reports": [r.to_dict() for r in reps]}, (("p", "member", "integral", "lower", "upper"), rows), EXIT_OK
    if act == "eigen-n":
        B.resolve_constants(spec)
        idx = _ints(args.index or "1")
        x = Q.xi(spec.positive).xi
        reps = [B.eigenvalue_bracket(spec, n, x, check_discrete=(i == 0)) for i, n in enumerate(idx)]
        rows = [(r.n, r.lo, r.hi, r.F) for r in reps]
        return {"xi": x, "brackets": [r.to_dict() for r in reps]}, (("index", "lower", "upper", "F"), rows), EXIT_OK
    if act == "mult":
        B.resolve_constants(spec)
        nus = _floats(args.nu or "1")
        reps = [B.multiplicity_bound(spec, nu, args.tol, check_discrete=(i == 0)) for i, nu in enumerate(nus)]
        rows = [(r.nu, r.value, r.integer_bound) for r in reps]
        return {"reports": [r.to_dict() for r in reps]}, (("nu", "value", "integer_bound"), rows), EXIT_OK
    raise UsageError(f"unknown bounds action {act!r}")


def cmd_classify(args):
    spec = _spec(args)
    rep = B.classify_discreteness(spec, args.tol)
    return rep.to_dict(), None, EXIT_OK


def _pencil(args, spec, R=None, n=None):
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", O.OracleWarning)
        p = O.assemble(spec, R or args.R, n or args.n, args.bc)
    return p, [str(w.message) for w in caught]


def cmd_oracle(args):
    spec = _spec(args)
    act = args.action
    if act == "study":
        R_list = _floats(args.R_list or args.R)
        n_list = [int(v) for v in _floats(args.n_list or args.n)]
        res = _pmap(lambda lam: O.convergence_study(spec, lam, R_list, n_list, args.bc), _lams(args))
        rows = [(r.lam, row["R"], row["n"], row["count"], row["flagged"]) for r in res for row in r.rows]
        return {"studies": [r.to_dict() for r in res]}, (("lambda", "R", "n", "count", "flagged"), rows), EXIT_OK
    p, warns = _pencil(args, spec)
    if act == "assemble":
        payload = p.to_dict()
        payload["warnings"] = warns
        return payload, None, EXIT_OK
    if act == "count":
        lams = _lams(args)
        counts = np.atleast_1d(O.count_below(p, np.asarray(lams))).tolist()
        return ({"lambda": lams, "count": counts, "warnings": warns},
                (("lambda", "count"), list(zip(lams, counts))), EXIT_OK)
    table = O.lowest_eigenvalues(p, args.k)
    return ({"values": table.values.tolist(), "bracket_width": table.widths.tolist(), "warnings": warns},
            (("index", "value", "bracket_width"), table.rows()), EXIT_OK)


def cmd_verify(args):
    spec = _spec(args)
    k = B.resolve_constants(spec)
    p, warns = _pencil(args, spec)
    lams = _lams(args, "1,5,10,25,50")
    reps = _pmap(lambda lam: B.counting_bounds(spec, lam, args.tol, k), lams)
    counts = np.atleast_1d(O.count_below(p, np.asarray(lams))).tolist()
    rows, violations = [], []
    for r, c in zip(reps, counts):
        ok = r.lower_count <= c <= r.upper_count
        rows.append((r.lam, r.lower_count, c, r.upper_count, ok))
        if not ok:
            violations.append({"lambda": r.lam, "lower": r.lower_count, "oracle": c, "upper": r.upper_count})
    payload = {"rows": [dict(zip(("lambda", "lower", "oracle", "upper", "ok"), row)) for row in rows],
               "violations": violations, "warnings": warns}
    return payload, (("lambda", "lower", "oracle", "upper", "ok"), rows), EXIT_NUMERIC if violations else EXIT_OK


# ---------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--spec", required=True, help="measure spec JSON file")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--tol", type=float, default=Q.DEFAULT_TOL, help="relative tolerance for d(x)")
    common.add_argument("--window", help="a,b")
    common.add_argument("--samples", type=int, help="number of base samples")
    common.add_argument("--lambda-grid", dest="lambda_grid", help="a:b:step, a list, or one value")
    common.add_argument("--p", help="Schatten exponents, comma separated")
    common.add_argument("--R", type=float, default=12.0, help="truncation radius")
    common.add_argument("--n", type=int, default=2400, help="number of finite elements")
    common.add_argument("--bc", choices=("neumann", "dirichlet"), default="neumann")
    common.add_argument("--x", help="evaluation points, comma separated")
    common.add_argument("--index", help="eigenvalue indices, e.g. 1,2 or 1:10")
    common.add_argument("--nu", help="candidate eigenvalues for the multiplicity bound")
    common.add_argument("--k", type=int, default=10, help="number of oracle eigenvalues")
    common.add_argument("--R-list", dest="R_list", help="radii for oracle study")
    common.add_argument("--n-list", dest="n_list", help="element counts for oracle study")
    common.add_argument("--part", choices=("positive", "negative"), default="positive")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = _Parser(prog="otelbaev", description=__doc__.split("\n")[0])
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("validate", parents=[common]).set_defaults(func=cmd_validate, action="")

    def group(name, actions, func):
        g = sub.add_parser(name)
        gs = g.add_subparsers(dest="action", required=True)
        for a in actions:
            gs.add_parser(a, parents=[common]).set_defaults(func=func, action=a)

    group("measure", ("cdf", "mass", "brinck"), cmd_measure)
    group("qstar", ("eval", "profile"), cmd_qstar)
    sub.add_parser("sublevel", parents=[common]).set_defaults(func=cmd_sublevel, action="")
    group("bounds", ("count", "negative", "lambda1", "essential", "schatten", "eigen-n", "mult"), cmd_bounds)
    sub.add_parser("classify", parents=[common]).set_defaults(func=cmd_classify, action="")
    group("oracle", ("assemble", "count", "eigs", "study"), cmd_oracle)
    group("verify", ("sandwich",), cmd_verify)
    for p in (ap, common):
        p.formatter_class = argparse.RawDescriptionHelpFormatter
    return ap


def _tolerances(args):
    return {"d_mu_rel": args.tol, "schatten_quad_rel": 1e-8, "eigen_rel": 1e-10, "F_rel": 1e-12}


def _emit(text: str, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def run(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(f"otelbaev: error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    command = " ".join(filter(None, (args.command, args.action)))
    try:
        payload, table, code = args.func(args)
    except (InvalidSpecError, UsageError, ValueError, OSError, KeyError) as exc:
        print(f"otelbaev: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except DivergentQuantity as exc:
        print(f"otelbaev: divergent: {exc}", file=sys.stderr)
        return EXIT_DIVERGENT
    except (NumericFailure, ArithmeticError, OverflowError) as exc:
        print(f"otelbaev: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    prov = provenance(command, args.spec, _tolerances(args))
    if args.format == "csv":
        if table is None:
            print(f"otelbaev: '{command}' has no tabular output; use --format json", file=sys.stderr)
            return EXIT_INVALID
        _emit(csv_text(*table), args.out)
        side = dumps({"provenance": prov}) + "\n"
        if args.out:
            with open(args.out + ".provenance.json", "w", encoding="utf-8") as fh:
                fh.write(side)
        else:
            sys.stderr.write(side)
    else:
        body = {"command": command}
        body.update(payload)
        body["provenance"] = prov
        _emit(dumps(body) + "\n", args.out)
    return code


def main(argv=None) -> int:
    return run(argv)


if __name__ == "__main__":
    raise SystemExit(main())
