"""Central finite differences, used as an independent check of the analytic derivatives.

:func:`directional_fd` knows nothing about QR derivatives; :func:`check_all`
compares its output with the analytic routines.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Hashable

import numpy as np

from .errors import BranchChangeError, DimensionError
from .householder import assemble_q, qr_factor
from .matrix import as_matrix

QUANTITIES = ("R", "Q_mn", "Q_mp", "Y", "T", "tau")


@dataclass(frozen=True)
class FDConfig:
    h: float = 1e-6
    richardson: bool = False
    seed: int = 0
    # evaluate f in np.longdouble; keeps cancellation error below the h^2
    # truncation error down to h ~ 1e-5 (f must accept longdouble input)
    extended_precision: bool = True
    # step pair used for the O(h^2) decay ratio in check_all
    decay_steps: tuple[float, float] = (1e-4, 1e-5)

    def __post_init__(self):
        if not self.h >= 1e-12:
            raise ValueError(f"step size must be >= 1e-12, got {self.h}")


def branch_signature(A: np.ndarray) -> tuple:
    """Pivot sign pattern and tau = 0 pattern of the Householder factorisation of ``A``."""
    f = qr_factor(A)
    return tuple(np.sign(f.pivots).astype(int)) + tuple(bool(t == 0.0) for t in f.tau)


def _central(f, A, dA, h, branch, extended):
    if extended:
        A, dA, h = A.astype(np.longdouble), dA.astype(np.longdouble), np.longdouble(h)
    Ap, Am = A + h * dA, A - h * dA
    if branch is not None:
        bp, bm = branch(Ap), branch(Am)
        if bp != bm:
            raise BranchChangeError(f"branch differs between A+h*dA {bp} and A-h*dA {bm} (h={h:g})")
    fp = np.asarray(f(Ap))
    fm = np.asarray(f(Am))
    return ((fp - fm) / (2 * h)).astype(np.float64)


def directional_fd(
    f: Callable[[np.ndarray], np.ndarray],
    A,
    dA,
    cfg: FDConfig = FDConfig(),
    branch: Callable[[np.ndarray], Hashable] | None = None,
) -> np.ndarray:
    """Central difference ``(f(A + h dA) - f(A - h dA)) / 2h``.

    With ``cfg.richardson`` the ``h`` and ``h/2`` quotients are combined as
    ``(4 D_{h/2} - D_h) / 3``. If ``branch`` is given it is evaluated at each
    perturbed point and a :class:`BranchChangeError` is raised when the two
    values differ.
    """
    A = as_matrix(A)
    dA = as_matrix(dA)
    if A.shape != dA.shape:
        raise DimensionError(f"A is {A.shape} but dA is {dA.shape}")
    D = _central(f, A, dA, cfg.h, branch, cfg.extended_precision)
    if cfg.richardson:
        D2 = _central(f, A, dA, cfg.h / 2, branch, cfg.extended_precision)
        D = (4 * D2 - D) / 3
    return D


def factor_quantities(A: np.ndarray) -> dict[str, np.ndarray]:
    """Everything the checks differentiate, evaluated from scratch at ``A``."""
    f = qr_factor(A)
    wy = f.compact_wy()
    Q = assemble_q(wy)
    n = f.shape.n
    return {"R": f.R, "Q_mn": Q[:, :n], "Q_mp": Q[:, n:], "Y": f.Y, "T": wy.T, "tau": f.tau}


def analytic_quantities(A: np.ndarray, dA: np.ndarray) -> dict[str, np.ndarray]:
    from .derivatives import qr_derivative

    fqr, _, _, _, full = qr_derivative(A, dA)
    n = fqr.shape.n
    return {
        "R": full.dR_mn,
        "Q_mn": full.dQ_mm[:, :n],
        "Q_mp": full.dQ_mm[:, n:],
        "Y": full.wy.dY,
        "T": full.wy.dT,
        "tau": full.wy.dtau,
    }


def _errors(fd: np.ndarray, an: np.ndarray) -> tuple[float, float]:
    diff = fd - an
    if diff.size == 0:
        return 0.0, 0.0
    max_abs = float(np.max(np.abs(diff)))
    scale = float(np.linalg.norm(an))
    err = float(np.linalg.norm(diff))
    return max_abs, (err / scale if scale > 0 else err)


@dataclass(frozen=True)
class QuantityCheck:
    name: str
    max_abs_err: float
    rel_err: float
    # ||FD_h1 - exact|| / ||FD_h2 - exact|| for cfg.decay_steps; nan if undefined
    decay_ratio: float


@dataclass(frozen=True)
class CheckReport:
    checks: tuple[QuantityCheck, ...]
    h: float

    def max_rel_err(self) -> float:
        return max(c.rel_err for c in self.checks)

    def passed(self, tol: float = 1e-5) -> bool:
        return all(c.rel_err <= tol for c in self.checks)

    def __getitem__(self, name: str) -> QuantityCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_all(A, dA, cfg: FDConfig = FDConfig()) -> CheckReport:
    """Compare every analytic derivative with central finite differences."""
    A = as_matrix(A)
    dA = as_matrix(dA)
    analytic = analytic_quantities(A, dA)

    def fd_at(h):
        step_cfg = replace(cfg, h=h)
        return {
            name: directional_fd(lambda X, k=name: factor_quantities(X)[k], A, dA, step_cfg, branch_signature)
            for name in QUANTITIES
        }

    main = fd_at(cfg.h)
    coarse = fd_at(cfg.decay_steps[0])
    fine = fd_at(cfg.decay_steps[1])
    checks = []
    for name in QUANTITIES:
        max_abs, rel = _errors(main[name], analytic[name])
        e1 = float(np.linalg.norm(coarse[name] - analytic[name]))
        e2 = float(np.linalg.norm(fine[name] - analytic[name]))
        ratio = e1 / e2 if e2 > 0 else float("nan")
        checks.append(QuantityCheck(name, max_abs, rel, ratio))
    return CheckReport(tuple(checks), cfg.h)
