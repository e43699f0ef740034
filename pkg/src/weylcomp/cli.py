"""Command-line front end.

JSON goes to stdout (or ``--out``), a short human summary to stderr.

Exit codes:
    0  success / feasible / ok / member
    1  infeasible / not ok / not a member
    2  bad arguments or malformed input
    3  undecided (iteration budget exhausted)
    4  a constructed object failed its own verification (internal error)
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from typing import Any, Sequence

import numpy as np

from . import channel, compat, gaussian, weyl
from .errors import WeylCompError

EXIT_OK, EXIT_NO, EXIT_BAD, EXIT_UNDECIDED, EXIT_INTERNAL = 0, 1, 2, 3, 4
STATUS_EXIT = {compat.FEASIBLE: EXIT_OK, compat.INFEASIBLE: EXIT_NO, compat.UNDECIDED: EXIT_UNDECIDED}


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# deterministic JSON
# ---------------------------------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def dumps(obj: Any, indent: int = 0, _level: int = 0) -> str:
    """JSON with every float printed to 17 significant digits and sorted keys."""
    pad = "\n" + " " * (indent * (_level + 1)) if indent else ""
    end = "\n" + " " * (indent * _level) if indent else ""
    sep = "," if indent else ", "
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in sorted(obj.items())]
        return "{" + sep.join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        # numeric leaves stay on one line
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(dumps(v) for v in obj) + "]"
        return "[" + sep.join(f"{pad}{dumps(v, indent, _level + 1)}" for v in obj) + end + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), indent, _level)
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def _emit(doc: Any, out: str | None) -> None:
    text = dumps(doc, indent=1) + "\n"
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _say(msg: str) -> None:
    print(msg, file=sys.stderr)


# ---------------------------------------------------------------------------
# input helpers
# ---------------------------------------------------------------------------


def _load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read {path}: {exc}") from exc


def _load_channel(path: str, d: int | None) -> np.ndarray:
    doc = _load_json(path)
    if isinstance(doc, dict):
        if "p" not in doc:
            raise InputError(f"{path}: channel document needs a 'p' field")
        if d is not None and "d" in doc and int(doc["d"]) != d:
            raise InputError(f"{path}: d={doc['d']} does not match --d {d}")
        d = int(doc.get("d", d or 0)) or None
        doc = doc["p"]
    return channel.as_probability(doc, d)


def _load_matrix(path: str, key: str) -> np.ndarray:
    doc = _load_json(path)
    if isinstance(doc, dict):
        if key not in doc:
            raise InputError(f"{path}: missing field '{key}'")
        doc = doc[key]
    a = np.asarray(doc, dtype=float)
    if a.ndim != 2:
        raise InputError(f"{path}: expected a 2-d matrix")
    return a


def _load_kernel(path: str, d: int) -> compat.Kernel:
    doc = _load_json(path)
    if isinstance(doc, dict):
        doc = doc.get("beta", doc.get("kernel"))
        if doc is None:
            raise InputError(f"{path}: kernel document needs a 'beta' field")
    return compat.Kernel(d, compat.complex_matrix_from_json(doc)).validate()


def _load_joint(path: str) -> compat.JointFn:
    doc = _load_json(path)
    if not isinstance(doc, dict) or "d" not in doc or "values" not in doc:
        raise InputError(f"{path}: joint document needs 'd' and 'values'")
    return compat.JointFn(int(doc["d"]), compat.complex_matrix_from_json(doc["values"]))


def _positive(name: str, x: float | None) -> None:
    if x is not None and not x > 0:
        raise InputError(f"{name} must be positive")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_ccr(args) -> int:
    sp = weyl.PhaseSpace(args.d)
    rep = weyl.ccr_report(sp)
    rng = np.random.default_rng(args.seed)
    m = rng.normal(size=(args.d, args.d)) + 1j * rng.normal(size=(args.d, args.d))
    rec = weyl.from_weyl_coefficients(sp, weyl.weyl_coefficients(sp, m))
    rep["max_violation_reconstruction"] = float(np.linalg.norm(rec - m))
    worst = max(v for k, v in rep.items() if k.startswith("max_violation"))
    rep["ok"] = worst < 1e-10
    _emit(rep, args.out)
    _say(f"ccr d={args.d}: worst violation {worst:.3e}")
    return EXIT_OK if rep["ok"] else EXIT_NO


def _feas_opts(args) -> compat.FeasibilityOptions:
    kw = {}
    if args.tol is not None:
        kw["feas_tol"] = args.tol
    if args.infeas_tol is not None:
        kw["infeas_tol"] = args.infeas_tol
    if args.max_iter is not None:
        kw["max_iter"] = args.max_iter
    return compat.FeasibilityOptions(**kw)


def cmd_compat(args) -> int:
    _positive("--tol", args.tol)
    _positive("--infeas-tol", args.infeas_tol)
    if args.request:
        req = _load_json(args.request)
        if not isinstance(req, dict) or not {"p1", "p2"} <= req.keys():
            raise InputError("request needs 'p1' and 'p2'")
        d = int(req.get("d", args.d or 0)) or None
        p1 = channel.as_probability(req["p1"], d)
        p2 = channel.as_probability(req["p2"], d)
        for key, attr in (("feas_tol", "tol"), ("infeas_tol", "infeas_tol"), ("max_iter", "max_iter")):
            if key in req and getattr(args, attr) is None:
                setattr(args, attr, req[key])
    else:
        if not (args.p1 and args.p2):
            raise InputError("give --p1 and --p2, or --request")
        p1 = _load_channel(args.p1, args.d)
        p2 = _load_channel(args.p2, args.d)
    verdict = compat.feasibility(p1, p2, _feas_opts(args))
    _emit(verdict.to_json(with_kernel=True), args.out)
    _say(f"compat: {verdict.status} (residual {verdict.residual:.3e}, gap {verdict.gap:.3e}, {verdict.iterations} it)")
    return STATUS_EXIT[verdict.status]


def _boundary_point(job):
    d, s, t, opts = job
    v = compat.feasibility(channel.noise_mix(0, s, d).p, channel.noise_mix(0, t, d).p, opts)
    return v.status, v.residual, v.gap


def boundary_rows(d: int, k: int, opts: compat.FeasibilityOptions, jobs: int = 1) -> list[dict]:
    grid = np.linspace(0.0, 1.0, k)
    pts = [(d, float(s), float(t), opts) for s in grid for t in grid]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_boundary_point, pts, chunksize=max(1, len(pts) // (4 * jobs))))
    else:
        results = [_boundary_point(p) for p in pts]
    rows = []
    for (_, s, t, _), (status, res, gap) in zip(pts, results):
        rows.append(
            {"s": s, "t": t, "status": status, "residual": res, "gap": gap, "margin": compat.noise_margin(d, s, t)}
        )
    return rows


def cmd_boundary(args) -> int:
    if args.grid < 2:
        raise InputError("--grid must be >= 2")
    if args.jobs < 1:
        raise InputError("--jobs must be >= 1")
    weyl.PhaseSpace(args.d)
    rows = boundary_rows(args.d, args.grid, _feas_opts(args), args.jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["s", "t", "status", "residual", "gap", "margin"])
    for r in rows:
        w.writerow([_fmt_float(r["s"]), _fmt_float(r["t"]), r["status"], _fmt_float(r["residual"]),
                    _fmt_float(r["gap"]), _fmt_float(r["margin"])])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(buf.getvalue())
    else:
        sys.stdout.write(buf.getvalue())
    band = 0.02
    bad = sum(
        1 for r in rows
        if abs(r["margin"]) > band and r["status"] != (compat.FEASIBLE if r["margin"] > 0 else compat.INFEASIBLE)
    )
    _say(f"boundary d={args.d} grid={args.grid}: {bad} disagreements outside the {band} band")
    return EXIT_OK


def joint_report(p1: np.ndarray, kernel: compat.Kernel) -> tuple[compat.JointFn, dict]:
    d = kernel.d
    f = compat.joint_fn_from_kernel(p1, kernel)
    mem = compat.csz_membership(f, witness=False)
    m1, m2 = compat.margins_of_joint(f)
    p2 = compat.forward_map(p1, kernel)
    sp = channel.space(d)
    back1 = (np.conj(sp.char).T @ m1.values) / sp.n
    back2 = (np.conj(sp.char).T @ m2.values) / sp.n
    choi_min = float(np.linalg.eigvalsh(compat.joint_choi(f))[0])
    report = {
        "membership_min_eig": mem.min_eig,
        "membership_hermitian_defect": mem.hermitian_defect,
        "margin1_residual": float(np.max(np.abs(back1 - p1))),
        "margin2_residual": float(np.max(np.abs(back2 - p2))),
        "choi_min_eig": choi_min,
        "p2": [float(x) for x in p2],
    }
    report["verified"] = bool(
        mem.is_member and report["margin1_residual"] <= 1e-8 and report["margin2_residual"] <= 1e-8
        and choi_min >= -1e-8
    )
    return f, report


def cmd_joint(args) -> int:
    if not (args.p1 and args.kernel):
        raise InputError("give --p1 and --kernel")
    p1 = _load_channel(args.p1, args.d)
    d = int(round(math.sqrt(p1.size)))
    kernel = _load_kernel(args.kernel, d)
    f, report = joint_report(p1, kernel)
    _emit({"d": d, "values": compat.complex_matrix_to_json(f.values), "report": report}, args.out)
    _say(f"joint: verified={report['verified']} (membership min_eig {report['membership_min_eig']:.3e})")
    return EXIT_OK if report["verified"] else EXIT_INTERNAL


def cmd_membership(args) -> int:
    if not args.f:
        raise InputError("give --f")
    f = _load_joint(args.f)
    rep = compat.csz_membership(f)
    doc = {"is_member": rep.is_member, "min_eig": rep.min_eig, "hermitian_defect": rep.hermitian_defect}
    if rep.witness:
        w = dict(rep.witness)
        w["submatrix"] = compat.complex_matrix_to_json(w["submatrix"])
        doc["witness"] = w
    _emit(doc, args.out)
    _say(f"membership: {rep.is_member} (min_eig {rep.min_eig:.3e})")
    return EXIT_OK if rep.is_member else EXIT_NO


def cmd_gaussian(args) -> int:
    if args.gcmd == "joint-check":
        if not args.B:
            raise InputError("give --B")
        b = _load_matrix(args.B, "B")
        N = b.shape[0] // (2 * args.m)
        chk = gaussian.covariant_joint_check(gaussian.GaussJoint(N, b, m=args.m))
        _emit(chk.to_json(), args.out)
        _say(f"gaussian joint-check: ok={chk.ok} (min_eig {chk.min_eig:.3e})")
        return EXIT_OK if chk.ok else EXIT_NO
    if args.gcmd == "compat":
        if args.request:
            req = _load_json(args.request)
            b11, b22 = np.asarray(req["B11"], dtype=float), np.asarray(req["B22"], dtype=float)
        else:
            if not (args.B11 and args.B22):
                raise InputError("give --B11 and --B22, or --request")
            b11, b22 = _load_matrix(args.B11, "B11"), _load_matrix(args.B22, "B22")
        kw = {}
        if args.infeas_tol is not None:
            kw["infeas_tol"] = args.infeas_tol
        if args.max_iter is not None:
            kw["max_iter"] = args.max_iter
        v = gaussian.sufficient_compat(b11, b22, gaussian.GaussOptions(**kw))
        _emit(v.to_json(), args.out)
        _say(f"gaussian compat: {v.status}")
        return STATUS_EXIT[v.status]
    if args.gcmd == "necessary":
        if not (args.B and args.C):
            raise InputError("give --B and --C")
        chk = gaussian.necessary_compat(_load_matrix(args.B, "B"), _load_matrix(args.C, "C"), factor=args.factor)
        _emit(chk.to_json(), args.out)
        _say(f"gaussian necessary (factor {args.factor}): ok={chk.ok}")
        return EXIT_OK if chk.ok else EXIT_NO
    raise InputError(f"unknown gaussian subcommand {args.gcmd}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="weylcomp", description="Compatibility of Weyl-covariant channels.")
    sub = parser.add_subparsers(dest="cmd", required=True)

    def common(p, d_required=False):
        p.add_argument("--d", type=int, required=d_required)
        p.add_argument("--out")
        p.add_argument("--json", action="store_true", help="accepted for symmetry; output is always JSON")

    def solver(p):
        p.add_argument("--tol", type=float, help="feasibility tolerance on the constraint residual")
        p.add_argument("--infeas-tol", type=float)
        p.add_argument("--max-iter", type=int)

    p = sub.add_parser("ccr", help="check the commutation relations of the Weyl matrices")
    common(p, d_required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_ccr)

    p = sub.add_parser("compat", help="decide compatibility of two covariant channels")
    common(p)
    solver(p)
    p.add_argument("--p1")
    p.add_argument("--p2")
    p.add_argument("--request", help="feasibility request JSON instead of --p1/--p2")
    p.set_defaults(func=cmd_compat)

    p = sub.add_parser("boundary", help="sweep the noise grid and write CSV")
    common(p, d_required=True)
    solver(p)
    p.add_argument("--grid", type=int, default=21)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_boundary)

    p = sub.add_parser("joint", help="build and verify the joint channel of a kernel")
    common(p)
    p.add_argument("--p1")
    p.add_argument("--kernel")
    p.set_defaults(func=cmd_joint)

    p = sub.add_parser("membership", help="twisted positivity test for a joint function")
    common(p)
    p.add_argument("--f")
    p.set_defaults(func=cmd_membership)

    p = sub.add_parser("gaussian", help="Gaussian matrix conditions")
    p.add_argument("gcmd", choices=["joint-check", "compat", "necessary"])
    p.add_argument("--B")
    p.add_argument("--B11")
    p.add_argument("--B22")
    p.add_argument("--C")
    p.add_argument("--m", type=int, default=2)
    p.add_argument("--factor", type=float, default=2.0)
    p.add_argument("--request")
    p.add_argument("--infeas-tol", type=float)
    p.add_argument("--max-iter", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gaussian)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return args.func(args)
    except (InputError, WeylCompError, KeyError, TypeError, ValueError) as exc:
        _say(f"error: {exc}")
        return EXIT_BAD


if __name__ == "__main__":
    sys.exit(main())
