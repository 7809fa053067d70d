"""``qrderiv`` command line: factor, diff, check, counterexample.

Exit codes: 0 success, 1 usage or parse error, 2 numeric precondition
failure, 3 finite-difference check above tolerance.
"""
from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import TextIO

import numpy as np

from . import derivatives as drv
from .errors import (
    BranchChangeError,
    DegeneracyError,
    NonInvertibleT,
    RankDeficientError,
    SingularTriangularError,
)
from .fd import FDConfig, check_all
from .householder import assemble_q, qr_factor
from .matrix import format_matrix, read_matrix

NUMERIC_ERRORS = (
    RankDeficientError,
    NonInvertibleT,
    SingularTriangularError,
    BranchChangeError,
    DegeneracyError,
)
MODES = ("thin", "full", "wy", "factored")


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunRequest:
    command: str
    input_path: str
    direction_path: str | None = None
    mode: str = "full"
    fd_step: float = 1e-6
    output: str = "json"
    tol: float = 1e-5


# -- JSON with 17 significant digits ----------------------------------------

def _json_scalar(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "null"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if not np.isfinite(x):
            return "null"
        return f"{x:.17g}"
    import json

    return json.dumps(str(x))


def dumps_json(obj, indent: int = 0) -> str:
    """Serialise dicts/lists/numbers; floats keep 17 significant digits so they re-parse exactly."""
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{_json_scalar(str(k))}: {dumps_json(v, indent + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if all(not isinstance(v, (list, tuple, dict, np.ndarray)) for v in obj):
            return "[" + ", ".join(_json_scalar(v) for v in obj) + "]"
        items = [pad + dumps_json(v, indent + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    return _json_scalar(obj)


def _row(v) -> np.ndarray:
    return np.asarray(v, dtype=float).reshape(1, -1)


# -- commands ------------------------------------------------------------------

def _load(req: RunRequest):
    try:
        A = read_matrix(req.input_path)
        dA = read_matrix(req.direction_path) if req.direction_path else None
    except (OSError, ValueError) as exc:
        raise UsageError(str(exc)) from exc
    if dA is not None and dA.shape != A.shape:
        raise UsageError(f"input is {A.shape[0]}x{A.shape[1]} but direction is {dA.shape[0]}x{dA.shape[1]}")
    if A.shape[0] < A.shape[1]:
        raise UsageError(f"input must have at least as many rows as columns, got {A.shape}")
    return A, dA


def _factor(A, mode):
    f = qr_factor(A)
    wy = f.compact_wy()
    Q = assemble_q(wy)
    n = f.shape.n
    if mode == "thin":
        return {"Q": Q[:, :n], "R": f.R_nn}
    res = {"Q": Q, "R": f.R}
    if mode in ("wy", "factored"):
        res.update(Y=f.Y, tau=_row(f.tau))
    if mode == "wy":
        res["T"] = wy.T
    return res


def _diff(A, dA, mode):
    f = qr_factor(A)
    wy = f.compact_wy()
    Q = assemble_q(wy)
    thin = drv.thin_derivative(Q, f.R, dA)
    if mode == "thin":
        return {"dQ": thin.dQ_mn, "dR": thin.dR_nn, "B": thin.B_mn, "E": thin.E_nn, "Psi": thin.Psi_nn}
    if mode == "factored":
        dY, dtau = drv.factored_derivative(f, thin)
        return {"dY": dY, "dtau": _row(dtau)}
    if mode == "wy":
        d = drv.wy_derivative(wy, thin)
        return {"dY": d.dY, "dT": d.dT, "dtau": _row(d.dtau), "S": d.S_nn, "C_star": d.C_star_nn}
    full = drv.full_q_derivative(wy, Q, thin)
    return {"dQ": full.dQ_mm, "dR": full.dR_mn, "Omega": full.omega.assemble(), "Z": full.wy.Z_pn}


def run(req: RunRequest, out: TextIO | None = None) -> int:
    """Execute one request, writing the report to ``out`` (stdout); returns the exit code."""
    out = sys.stdout if out is None else out
    if req.command not in ("factor", "diff", "check", "counterexample"):
        raise UsageError(f"unknown command {req.command!r}")
    if req.mode not in MODES:
        raise UsageError(f"unknown mode {req.mode!r}")
    if req.command in ("diff", "check") and req.direction_path is None:
        raise UsageError(f"{req.command} requires --direction")
    A, dA = _load(req)
    m, n = A.shape
    report = {"command": req.command, "shape": {"m": m, "n": n, "p": m - n}, "results": {}, "checks": []}
    code = 0

    if req.command == "factor":
        report["results"] = _factor(A, req.mode)
    elif req.command == "diff":
        report["results"] = _diff(A, dA, req.mode)
    elif req.command == "check":
        try:
            cfg = FDConfig(h=req.fd_step)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc
        rep = check_all(A, dA, cfg)
        report["checks"] = [
            {"name": c.name, "max_abs_err": c.max_abs_err, "rel_err": c.rel_err, "decay_ratio": c.decay_ratio}
            for c in rep.checks
        ]
        if not rep.passed(req.tol):
            code = 3
    else:
        if A.shape != (2, 1):
            raise UsageError(f"counterexample needs a 2x1 input, got {m}x{n}")
        da = dA if dA is not None else np.array([[1.0], [0.0]])
        g = drv.givens_2x1_counterexample(A[:, 0], da[:, 0])
        report["results"] = {
            "dQmp_true_householder": g.true_h,
            "dQmp_formula_householder": g.formula_h,
            "dQmp_true_givens": g.true_g,
            "dQmp_formula_givens": g.formula_g,
        }
        report["checks"] = [
            {"name": "householder", "max_abs_err": float(np.max(np.abs(g.formula_h - g.true_h))), "rel_err": g.rel_err_h},
            {"name": "givens", "max_abs_err": float(np.max(np.abs(g.formula_g - g.true_g))), "rel_err": g.rel_err_g},
        ]
        report["mismatch"] = g.mismatch

    if req.output == "json":
        out.write(dumps_json(report) + "\n")
    else:
        _write_text(report, out, req.tol)
    return code


def _write_text(report, out: TextIO, tol: float) -> None:
    s = report["shape"]
    out.write(f"{report['command']}: m={s['m']} n={s['n']} p={s['p']}\n")
    for name, M in report["results"].items():
        out.write(f"\n{name}\n{format_matrix(M)}")
    if report["checks"]:
        out.write(f"\n{'quantity':<14}{'max_abs_err':>14}{'rel_err':>14}  status\n")
        for c in report["checks"]:
            status = "ok" if c["rel_err"] <= tol else "FAIL"
            if report["command"] == "counterexample":
                status = ""
            out.write(f"{c['name']:<14}{c['max_abs_err']:>14.3e}{c['rel_err']:>14.3e}  {status}\n")
    if "mismatch" in report:
        out.write(f"\nmismatch: {report['mismatch']}\n")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"UsageError: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="qrderiv", description="Householder QR factorisations and their derivatives.")
    p.add_argument("command", choices=("factor", "diff", "check", "counterexample"))
    p.add_argument("--input", "-i", required=True, help="matrix file A")
    p.add_argument("--direction", "-d", help="matrix file dA (same shape as A)")
    p.add_argument("--mode", choices=MODES, default="full")
    p.add_argument("--fd-step", type=float, default=1e-6)
    p.add_argument("--tol", type=float, default=1e-5, help="relative error tolerance for check")
    p.add_argument("--output", choices=("json", "text"), default="json")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    req = RunRequest(
        command=args.command,
        input_path=args.input,
        direction_path=args.direction,
        mode=args.mode,
        fd_step=args.fd_step,
        output=args.output,
        tol=args.tol,
    )
    try:
        return run(req)
    except UsageError as exc:
        print(f"UsageError: {exc}", file=sys.stderr)
        return 1
    except NUMERIC_ERRORS as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        # DimensionError and malformed numeric arguments
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
