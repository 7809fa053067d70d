"""Householder QR in factored form, the compact WY ``T`` factor and explicit Q."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, RankDeficientError
from .matrix import Shape, as_matrix


@dataclass(frozen=True)
class HouseholderStep:
    """One reflection ``H = I - tau v v^T`` with ``H x = r e_i`` on the active rows."""

    v: np.ndarray
    tau: float
    r: float

    def matrix(self) -> np.ndarray:
        return np.eye(self.v.size) - self.tau * np.outer(self.v, self.v)


@dataclass(frozen=True)
class CompactWY:
    """``Q_mm = I - Y T Y^T`` with ``Y`` unit lower triangular and ``T`` upper triangular."""

    shape: Shape
    Y: np.ndarray
    T: np.ndarray

    @property
    def tau(self) -> np.ndarray:
        return np.diag(self.T).copy()


@dataclass(frozen=True)
class FactoredQR:
    """Factored-form result of :func:`qr_factor`.

    ``pivots`` holds the leading entry of each active subcolumn before its
    reflection was applied; the finite-difference oracle uses its sign
    pattern to detect branch changes.
    """

    shape: Shape
    Y: np.ndarray
    tau: np.ndarray
    R: np.ndarray
    pivots: np.ndarray = field(repr=False)

    @property
    def R_nn(self) -> np.ndarray:
        return self.R[: self.shape.n].copy()

    def compact_wy(self) -> CompactWY:
        return CompactWY(self.shape, self.Y.copy(), build_t_forward(self.Y, self.tau))

    def q(self) -> np.ndarray:
        return assemble_q(self.compact_wy())


def householder_vector(x, pivot_index: int = 0) -> HouseholderStep:
    """Reflection mapping ``x[pivot_index:]`` onto ``+||x[pivot_index:]|| e_pivot``.

    ``pivot_index`` is 0-based. Entries of ``x`` above the pivot are ignored
    and the returned ``v`` is zero there. If the active subcolumn already
    points along ``+e_pivot`` the identity step (``tau = 0``) is returned.
    """
    x = np.asarray(x)
    x = x.astype(np.result_type(x.dtype, np.float64), copy=False).ravel()
    i = pivot_index
    if not 0 <= i < x.size:
        raise DimensionError(f"pivot index {i} outside vector of length {x.size}")
    active = x[i:]
    alpha = active[0]
    sigma = active[1:] @ active[1:]
    norm = np.hypot(alpha, np.sqrt(sigma))
    if norm == 0.0:
        raise RankDeficientError(f"active subcolumn at pivot {i + 1} is zero")

    v = np.zeros_like(x)
    v[i] = 1.0
    if sigma == 0.0 and alpha > 0:
        return HouseholderStep(v, x.dtype.type(0), alpha)
    # v1 = alpha - norm, rewritten to avoid cancellation when alpha > 0
    v1 = alpha - norm if alpha <= 0 else -sigma / (alpha + norm)
    v[i + 1 :] = active[1:] / v1
    tau = 2 / (v @ v)
    return HouseholderStep(v, tau, norm)


def qr_factor(A) -> FactoredQR:
    """Column-by-column Householder QR with a positive ``R`` diagonal."""
    A = as_matrix(A)
    m, n = A.shape
    if m < n:
        raise DimensionError(f"need a tall or square matrix, got {m}x{n}")
    shape = Shape(m, n)
    R = A.copy()
    Y = np.zeros((m, n), dtype=A.dtype)
    tau = np.zeros(n, dtype=A.dtype)
    pivots = np.zeros(n, dtype=A.dtype)
    for i in range(n):
        pivots[i] = R[i, i]
        step = householder_vector(R[:, i], i)
        Y[:, i] = step.v
        tau[i] = step.tau
        if step.tau != 0.0:
            va = step.v[i:]
            R[i:, i + 1 :] -= step.tau * np.outer(va, va @ R[i:, i + 1 :])
        R[i, i] = step.r
        R[i + 1 :, i] = 0.0
    return FactoredQR(shape, Y, tau, R, pivots)


def build_t_forward(Y: np.ndarray, tau) -> np.ndarray:
    """Accumulate ``T`` so that ``I - Y T Y^T = H1 H2 ... Hn`` (forward, columnwise)."""
    tau = np.asarray(tau).ravel()
    n = Y.shape[1]
    if tau.size != n:
        raise DimensionError(f"{n} reflectors but {tau.size} tau values")
    T = np.zeros((n, n), dtype=np.result_type(Y.dtype, tau.dtype))
    for i in range(n):
        T[i, i] = tau[i]
        if i:
            T[:i, i] = -tau[i] * (T[:i, :i] @ (Y[:, :i].T @ Y[:, i]))
    return T


def t_inverse_from_y(Y: np.ndarray) -> np.ndarray:
    """``T^{-1}`` from ``T^{-1} + T^{-T} = Y^T Y``; valid when every tau is nonzero."""
    G = Y.T @ Y
    return np.triu(G, 1) + np.diag(np.diag(G) / 2.0)


def assemble_q(wy: CompactWY) -> np.ndarray:
    """Explicit ``Q_mm = I - Y T Y^T``."""
    Y, T = wy.Y, wy.T
    return np.eye(wy.shape.m, dtype=Y.dtype) - Y @ T @ Y.T


def assemble_q_thin(wy: CompactWY) -> np.ndarray:
    """The first n columns of :func:`assemble_q`, without forming ``Q_mp``."""
    m, n = wy.shape.m, wy.shape.n
    Y, T = wy.Y, wy.T
    return np.eye(m, n, dtype=Y.dtype) - Y @ (T @ Y[:n].T)
