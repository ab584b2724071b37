"""Command-line interface.

Subcommands
-----------
eval     evaluate one envelope method on a 2-D real slice of C^n; writes CSV and a JSON sidecar
compare  evaluate a method and a closed-form oracle side by side; optional non-psh certificate
report   aggregate JSON sidecars from several runs into a value-versus-degree table

Exit codes
----------
0 success, 1 usage error, 2 parse or I/O error, 3 no feasible point,
4 connectivity refusal, 5 oracle direction violations.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .domains import Ball, DomainError, Union, ball_parts, is_closed_form, parse_domain
from .envelopes import (
    ConnectivityError,
    EBJField,
    OptimizerConfig,
    ball_majorant_envelope,
    boundary_envelope,
    ebj_estimate,
    estimate_many,
    theorem1_envelope,
    theorem2_envelope,
)
from .oracles import non_psh_certificate, oracle_report, summarize, v_union_upper

logger = logging.getLogger("discenv")

METHODS = ("ebj", "lempert", "lempert1pole", "theorem1", "theorem2", "hr")
MAX_POINTS = 10_000

EXIT_USAGE, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_CONNECTIVITY, EXIT_VIOLATION = 1, 2, 3, 4, 5


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _add_run_flags(p):
    p.add_argument("--domain", required=True, help="domain JSON file")
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--grid", required=True, help='slice box and resolution "x0,y0,x1,y1,nx,ny"')
    p.add_argument("--slice", default="0,1",
                   help='two real coordinate indices spanning the slice (2k = Re z_k+1, 2k+1 = Im z_k+1)')
    p.add_argument("--base", default=None, help="JSON list of [re, im] pairs: the point the slice passes through")
    p.add_argument("--degree", type=int, default=16)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--budget", type=int, default=2000)
    p.add_argument("--quad-n", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--hr-center", default=None, help="JSON list of [re, im] pairs: ball centre for method hr")
    p.add_argument("--hr-radius", type=float, default=None)
    p.add_argument("--allow-disconnected", action="store_true",
                   help="run the boundary-in-X methods on a disconnected domain (estimates that envelope, not V)")
    p.add_argument("--out", required=True, help="CSV output path")
    p.add_argument("--report", default=None, help="JSON sidecar path (default: OUT with .json suffix)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discenv", description="Extremal functions of open sets in C^n via disc envelopes.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    _add_run_flags(sub.add_parser("eval", help="evaluate a method on a grid"))
    cp = sub.add_parser("compare", help="compare a method with an oracle")
    _add_run_flags(cp)
    cp.add_argument("--oracle", default="auto", choices=("auto", "ball", "union", "none"))
    cp.add_argument("--tol", type=float, default=0.02)
    cp.add_argument("--certificate", default=None,
                    help='non-psh certificate of the method\'s values on a circle: "c_re,c_im,s" in the slice plane')
    cp.add_argument("--certificate-nodes", type=int, default=64)
    rp = sub.add_parser("report", help="aggregate JSON sidecars")
    rp.add_argument("runs", nargs="*", help="JSON sidecars written by eval")
    rp.add_argument("--out", default=None, help="plot-data CSV path")
    return parser


# ---------------------------------------------------------------------------
# helpers


def _parse_grid(text: str):
    try:
        parts = [s.strip() for s in text.split(",")]
        x0, y0, x1, y1 = (float(v) for v in parts[:4])
        nx, ny = int(parts[4]), int(parts[5])
        if len(parts) != 6:
            raise ValueError
    except (ValueError, IndexError):
        raise UsageError(f'--grid must be "x0,y0,x1,y1,nx,ny", got {text!r}')
    if nx < 1 or ny < 1:
        raise UsageError("grid resolution must be positive")
    if nx * ny > MAX_POINTS:
        raise UsageError(f"grid has {nx * ny} points; the limit is {MAX_POINTS}")
    return x0, y0, x1, y1, nx, ny


def _parse_slice(text: str, n: int):
    try:
        i, j = (int(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f'--slice must be "i,j", got {text!r}')
    if not (0 <= i < 2 * n and 0 <= j < 2 * n) or i == j:
        raise UsageError(f"slice indices must be distinct and in [0, {2 * n - 1}]")
    return i, j


def _parse_cvec(text: str, n: int, what: str) -> np.ndarray:
    try:
        arr = np.asarray(json.loads(text), dtype=float)
    except (json.JSONDecodeError, ValueError, TypeError):
        raise UsageError(f"{what} must be a JSON list of [re, im] pairs")
    if arr.shape != (n, 2):
        raise UsageError(f"{what} must have {n} [re, im] pairs")
    return arr[:, 0] + 1j * arr[:, 1]


def grid_points(grid, sl, base: np.ndarray) -> np.ndarray:
    """Points of the slice grid in row-major order (y outer, x inner)."""
    x0, y0, x1, y1, nx, ny = grid
    xs = np.linspace(x0, x1, nx) if nx > 1 else np.array([x0])
    ys = np.linspace(y0, y1, ny) if ny > 1 else np.array([y0])
    n = base.size
    pts = []
    for y in ys:
        for x in xs:
            v = np.array([base.real, base.imag]).T.ravel().copy()  # interleaved re1, im1, re2, ...
            v[sl[0]] = x
            v[sl[1]] = y
            pts.append(v[0::2] + 1j * v[1::2])
    return np.array(pts).reshape(-1, n)


def _load_domain(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FileNotFoundError(f"cannot read domain file {path}: {exc}") from exc
    return parse_domain(text)


def _config(args) -> OptimizerConfig:
    try:
        return OptimizerConfig(restarts=args.restarts, budget=args.budget, seed=args.seed, quad_n=args.quad_n,
                               degree=args.degree)
    except ValueError as exc:
        raise UsageError(str(exc))


def _runner(args, X, opt):
    m = args.method
    if m in ("lempert", "lempert1pole"):
        cls = "one_pole" if m == "lempert1pole" else "boundary_in_X"
        if not X.connected and not args.allow_disconnected:
            raise ConnectivityError(
                "domain is declared disconnected: the envelope of J over discs with boundary in X can exceed "
                "the extremal function (two disjoint balls give a non-plurisubharmonic minimum of their "
                "extremal functions); pass --allow-disconnected to estimate that envelope anyway")
        return lambda X_, z, opt, point_index: boundary_envelope(X_, z, cls, opt, point_index,
                                                                 allow_disconnected=args.allow_disconnected)
    if m == "ebj":
        return ebj_estimate
    field = EBJField(X, opt)
    if m == "theorem1":
        return lambda X_, z, opt, point_index: theorem1_envelope(X_, z, opt, field, point_index)
    if m == "theorem2":
        return lambda X_, z, opt, point_index: theorem2_envelope(X_, z, opt, field, point_index)
    # hr
    if args.hr_center is not None:
        a = _parse_cvec(args.hr_center, X.dim, "--hr-center")
    else:
        a = X.interior_seeds()[0]
    if not X.contains(a):
        raise UsageError("--hr-center must lie in the domain")
    r = args.hr_radius if args.hr_radius is not None else 0.5 * X.boundary_distance(a)
    return lambda X_, z, opt, point_index: ball_majorant_envelope(X_, z, a, r, opt, point_index)


def _run(args):
    X = _load_domain(args.domain)
    grid = _parse_grid(args.grid)
    sl = _parse_slice(args.slice, X.dim)
    base = _parse_cvec(args.base, X.dim, "--base") if args.base else np.zeros(X.dim, dtype=complex)
    opt = _config(args)
    if args.threads < 1:
        raise UsageError("--threads must be positive")
    fn = _runner(args, X, opt)
    pts = grid_points(grid, sl, base)
    t0 = time.perf_counter()
    ests = estimate_many(fn, X, list(pts), opt, threads=args.threads)
    wall = time.perf_counter() - t0
    return X, pts, ests, opt, wall


def _write_csv(path, pts, ests):
    n = pts.shape[1]
    header = [c for k in range(1, n + 1) for c in (f"re{k}", f"im{k}")]
    header += ["value", "feasible", "iterations", "J_part", "poisson_part"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for z, e in zip(pts, ests):
            row = [repr(float(v)) for c in z for v in (c.real, c.imag)]
            row += [repr(float(e.value)), str(bool(e.feasible)).lower(), str(int(e.iterations)),
                    repr(float(e.j_part)), repr(float(e.poisson_part))]
            w.writerow(row)


def _sidecar(args, X, pts, ests, opt, wall, extra=None) -> dict:
    doc = {
        "command": args.command,
        "method": args.method,
        "domain_file": str(args.domain),
        "domain": X.to_dict(),
        "grid": args.grid,
        "slice": args.slice,
        "base": args.base,
        "threads": args.threads,
        "allow_disconnected": bool(args.allow_disconnected),
        "config": asdict(opt),
        "seed": opt.seed,
        "degree": opt.degree,
        "wall_time": wall,
        "points": [
            {
                "index": i,
                "point": [[float(c.real), float(c.imag)] for c in z],
                "value": float(e.value),
                "feasible": bool(e.feasible),
                "iterations": int(e.iterations),
                "J_part": float(e.j_part),
                "poisson_part": float(e.poisson_part),
                "disc": e.best_disc.to_dict(),
            }
            for i, (z, e) in enumerate(zip(pts, ests))
        ],
    }
    if extra:
        doc.update(extra)
    return doc


def _report_path(args) -> str:
    return args.report or str(Path(args.out).with_suffix(".json"))


def cmd_eval(args) -> int:
    X, pts, ests, opt, wall = _run(args)
    _write_csv(args.out, pts, ests)
    with open(_report_path(args), "w") as fh:
        json.dump(_sidecar(args, X, pts, ests, opt, wall), fh, indent=1)
    nfeas = sum(e.feasible for e in ests)
    print(f"{len(ests)} points, {nfeas} feasible, wall time {wall:.2f} s")
    if nfeas == 0:
        print("error: no point produced a feasible disc", file=sys.stderr)
        return EXIT_INFEASIBLE
    return 0


def _oracle_fn(kind: str, X):
    if kind == "none":
        return None
    if kind == "auto":
        if isinstance(X, Ball):
            kind = "ball"
        elif isinstance(X, Union) and is_closed_form(X):
            kind = "union"
        else:
            return None
    if kind == "ball":
        if not isinstance(X, Ball):
            raise UsageError("the ball oracle needs a ball domain")
        return lambda z: v_union_upper([X], z)
    if not is_closed_form(X):
        raise UsageError("the union oracle needs a union of balls")
    return lambda z: v_union_upper(ball_parts(X), z)


def cmd_compare(args) -> int:
    X0 = _load_domain(args.domain)
    oracle = _oracle_fn(args.oracle, X0)
    X, pts, ests, opt, wall = _run(args)
    reports = []
    if oracle is not None:
        reports = [oracle_report(z, oracle(z), e.value, args.tol) for z, e in zip(pts, ests)]
    n = X.dim
    header = [c for k in range(1, n + 1) for c in (f"re{k}", f"im{k}")]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header + ["estimate", "oracle", "gap", "violation", "passed", "feasible"])
        for i, (z, e) in enumerate(zip(pts, ests)):
            row = [repr(float(v)) for c in z for v in (c.real, c.imag)] + [repr(float(e.value))]
            if reports:
                r = reports[i]
                row += [repr(r.oracle), repr(r.gap), str(r.violation).lower(), str(r.passed).lower()]
            else:
                row += ["", "", "", ""]
            row.append(str(bool(e.feasible)).lower())
            w.writerow(row)
    summary = summarize(reports) if reports else {"count": 0, "violations": 0}
    extra = {"oracle": args.oracle, "tol": args.tol, "summary": summary,
             "reports": [r.to_dict() for r in reports]}
    if args.certificate:
        extra["certificate"] = _certificate(args, X, opt)
    with open(_report_path(args), "w") as fh:
        json.dump(_sidecar(args, X, pts, ests, opt, wall, extra), fh, indent=1)
    if reports:
        print(f"points {summary['count']}  max gap {summary['max_gap']:.3g}  min gap {summary['min_gap']:.3g}  "
              f"violations {summary['violations']}  outside tolerance {summary['failed']}")
    if args.certificate:
        c = extra["certificate"]
        print(f"non-psh certificate at centre {c['centre']} radius {c['radius']}: {c['value']:.6g}")
    if summary.get("violations", 0) > 0:
        return EXIT_VIOLATION
    return 0


def _certificate(args, X, opt) -> dict:
    try:
        cr, ci, s = (float(v) for v in args.certificate.split(","))
    except ValueError:
        raise UsageError('--certificate must be "c_re,c_im,s"')
    sl = _parse_slice(args.slice, X.dim)
    base = _parse_cvec(args.base, X.dim, "--base") if args.base else np.zeros(X.dim, dtype=complex)
    centre = grid_points((cr, ci, cr, ci, 1, 1), sl, base)[0]
    # the circle lies in the complex line of the coordinate carrying the first slice index
    direction = np.zeros(X.dim, dtype=complex)
    direction[sl[0] // 2] = 1.0
    fn = _runner(args, X, opt)

    def field(pts):
        return np.array([fn(X, p, opt, 0).value for p in pts])

    val = non_psh_certificate(field, centre, s, direction, nodes=args.certificate_nodes)
    return {"centre": [[float(c.real), float(c.imag)] for c in centre], "radius": s, "value": float(val)}


def cmd_report(args) -> int:
    if not args.runs:
        print("error: no run artifacts given", file=sys.stderr)
        return EXIT_PARSE
    rows = []
    for path in args.runs:
        try:
            doc = json.loads(Path(path).read_text())
            for p in doc["points"]:
                rows.append((tuple(map(tuple, p["point"])), doc["method"], int(doc["seed"]), int(doc["degree"]),
                             float(p["value"]), bool(p["feasible"]), path))
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            print(f"error: cannot read run artifact {path}: {exc}", file=sys.stderr)
            return EXIT_PARSE
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    out_rows = []
    prev = {}
    nonmono = 0
    for pt, method, seed, deg, val, feas, path in rows:
        key = (pt, method, seed)
        mono = key not in prev or val <= prev[key] + 1e-12
        nonmono += not mono
        prev[key] = val
        out_rows.append((pt, method, seed, deg, val, feas, mono))
    if args.out:
        n = len(rows[0][0])
        header = [c for k in range(1, n + 1) for c in (f"re{k}", f"im{k}")]
        with open(args.out, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header + ["method", "seed", "degree", "value", "feasible", "monotone"])
            for pt, method, seed, deg, val, feas, mono in out_rows:
                w.writerow([repr(v) for c in pt for v in c] + [method, seed, deg, repr(val), str(feas).lower(),
                                                               str(mono).lower()])
    print(f"{len(args.runs)} runs, {len(rows)} rows, {nonmono} increases in value with degree")
    return 0


_VALUE_FLAGS = ("--grid", "--certificate", "--base", "--hr-center")


def _glue_negative_values(argv):
    """Attach values such as ``-3,-3,3,3,5,5`` to their flag so argparse does not read them as options."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok in _VALUE_FLAGS and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    args = parser.parse_args(_glue_negative_values(argv))
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "eval":
            return cmd_eval(args)
        if args.command == "compare":
            return cmd_compare(args)
        return cmd_report(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConnectivityError as exc:
        print(f"refused: {exc}", file=sys.stderr)
        return EXIT_CONNECTIVITY
    except (DomainError, FileNotFoundError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
