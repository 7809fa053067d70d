"""Analytic first derivatives of Householder QR.

All routines take a direction ``dA`` and return the directional derivative
of the corresponding factor; they are linear in ``dA``. Matrix blocks
follow the m/n/p naming: ``X_mn`` is the first n columns of an m x m
matrix, ``X_pn`` its bottom-left p x n block, and so on.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegeneracyError, DimensionError, NonInvertibleT, RankDeficientError
from .householder import CompactWY, FactoredQR, assemble_q, t_inverse_from_y
from .matrix import Shape, as_matrix, mask_strict_lower, mask_upper, solve_unit_lower, solve_upper


@dataclass(frozen=True)
class ThinDerivative:
    dQ_mn: np.ndarray
    dR_nn: np.ndarray
    B_mn: np.ndarray
    E_nn: np.ndarray
    Psi_nn: np.ndarray


@dataclass(frozen=True)
class OmegaBlocks:
    """Blocks of the skew matrix ``Omega_mm = Q_mm^T dQ_mm``; ``Omega_np = -Omega_pn^T``."""

    Omega_nn: np.ndarray
    Omega_pn: np.ndarray
    Omega_pp: np.ndarray

    def assemble(self) -> np.ndarray:
        top = np.hstack([self.Omega_nn, -self.Omega_pn.T])
        bottom = np.hstack([self.Omega_pn, self.Omega_pp])
        return np.vstack([top, bottom])


@dataclass(frozen=True)
class WYDerivative:
    dY: np.ndarray
    dT: np.ndarray
    dtau: np.ndarray
    S_nn: np.ndarray
    C_star_nn: np.ndarray
    Z_pn: np.ndarray


@dataclass(frozen=True)
class FullDerivative:
    dQ_mm: np.ndarray
    dR_mn: np.ndarray
    wy: WYDerivative
    omega: OmegaBlocks
    # alternative dQ_mp evaluations, only filled when verify=True
    dQ_mp_forms: dict = field(default_factory=dict, repr=False)

    @property
    def dQ_mp(self) -> np.ndarray:
        n = self.dR_mn.shape[1]
        return self.dQ_mm[:, n:].copy()


def _require_nonzero_tau(tau) -> None:
    tau = np.asarray(tau)
    zero = np.flatnonzero(tau == 0.0)
    if zero.size:
        raise NonInvertibleT(f"tau is zero for reflection(s) {', '.join(str(i + 1) for i in zero)}")


def _skew_from_lower(X: np.ndarray) -> np.ndarray:
    L = mask_strict_lower(X)
    return L - L.T


def thin_derivative(Q: np.ndarray, R: np.ndarray, dA) -> ThinDerivative:
    """Derivative of the thin factors ``Q_mn``, ``R_nn`` along ``dA``.

    ``Q`` may be the thin m x n or the full m x m factor, ``R`` either
    n x n or m x n; only the leading blocks are used.
    """
    dA = as_matrix(dA)
    m, n = dA.shape
    if Q.shape[0] != m or Q.shape[1] < n or R.shape[1] != n or R.shape[0] < n:
        raise DimensionError(f"dA is {m}x{n} but Q is {Q.shape} and R is {R.shape}")
    Q_mn = Q[:, :n]
    R_nn = R[:n]
    B = solve_upper(R_nn, dA, side="right")
    E = Q_mn.T @ B
    Psi = mask_upper(E) + mask_strict_lower(E).T
    dR = mask_upper(Psi @ R_nn)
    dQ = B - Q_mn @ Psi
    return ThinDerivative(dQ, dR, B, E, Psi)


def omega_thin(E_nn: np.ndarray, Q_mp: np.ndarray, B_mn: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``(Omega_nn, Omega_pn)`` with ``dQ_mn = Q_mm [Omega_nn; Omega_pn]``."""
    n = E_nn.shape[0]
    if E_nn.shape != (n, n) or B_mn.shape[1] != n or Q_mp.shape[0] != B_mn.shape[0]:
        raise DimensionError(f"inconsistent shapes E{E_nn.shape}, Q_mp{Q_mp.shape}, B{B_mn.shape}")
    return _skew_from_lower(E_nn), Q_mp.T @ B_mn


def omega_pp(Omega_nn: np.ndarray, Omega_pn: np.ndarray, Z_pn: np.ndarray) -> np.ndarray:
    """The algorithm-dependent ``Omega_pp`` block for a Householder ``Q``."""
    if Omega_pn.shape != Z_pn.shape or Omega_nn.shape[0] != Z_pn.shape[1]:
        raise DimensionError(f"Omega_pn{Omega_pn.shape} and Z_pn{Z_pn.shape} disagree")
    X = Omega_pn @ Z_pn.T - Z_pn @ Omega_pn.T - Z_pn @ Omega_nn @ Z_pn.T
    return _skew_from_lower(X)


def z_from_y(Y: np.ndarray, n: int) -> np.ndarray:
    """``Z_pn = Y_pn Y_nn^{-1}``."""
    return solve_unit_lower(Y[:n], Y[n:], side="right")


def z_from_q(Q: np.ndarray, n: int) -> np.ndarray:
    """``Z_pn = Q_pn (Q_nn - I)^{-1}``; works for any Q_mm, Householder or not."""
    M = Q[:n, :n] - np.eye(n)
    Q_pn = Q[n:, :n]
    if Q_pn.shape[0] == 0:
        return np.zeros((0, n))
    return np.linalg.solve(M.T, Q_pn.T).T


def z_block(wy: CompactWY, Q: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """``Z_pn`` evaluated from ``Y`` and from ``Q``; the first is the one to use."""
    _require_nonzero_tau(wy.tau)
    n = wy.shape.n
    if Q is None:
        Q = assemble_q(wy)
    return z_from_y(wy.Y, n), z_from_q(Q, n)


def _s_inverse_from_t(T: np.ndarray, Y_nn: np.ndarray):
    S = -T @ Y_nn.T
    return S, lambda X: solve_upper(S, X, side="right")


def _s_inverse_from_y(T_inv: np.ndarray, Y_nn: np.ndarray):
    # S^{-1} = -Y_nn^{-T} T^{-1}
    def apply(X):
        XYt = solve_unit_lower(Y_nn, X.T).T
        return -(XYt @ T_inv)

    return apply


def _c_star_and_dy(Y, thin: ThinDerivative, apply_s_inv):
    n = Y.shape[1]
    Y_nn, Y_pn = Y[:n], Y[n:]
    B_nn, B_pn = thin.B_mn[:n], thin.B_mn[n:]
    C_star = apply_s_inv(solve_unit_lower(Y_nn, B_nn - thin.Psi_nn))
    dY_nn = mask_strict_lower(Y_nn @ mask_strict_lower(C_star))
    dY_pn = apply_s_inv(B_pn) - Y_pn @ mask_upper(C_star)
    return C_star, np.vstack([dY_nn, dY_pn])


def _dtau(C_star, Psi, tau) -> np.ndarray:
    return (np.diag(C_star) - np.diag(Psi)) * tau


def wy_derivative(wy: CompactWY, thin: ThinDerivative) -> WYDerivative:
    """Derivatives of ``Y``, ``T`` and tau in the compact WY representation."""
    _require_nonzero_tau(wy.tau)
    n = wy.shape.n
    Y, T = wy.Y, wy.T
    Y_nn = Y[:n]
    S, apply_s_inv = _s_inverse_from_t(T, Y_nn)
    C_star, dY = _c_star_and_dy(Y, thin, apply_s_inv)
    U_c = mask_upper(C_star)
    L_c = mask_strict_lower(C_star)
    S_psi_yinvt = solve_unit_lower(Y_nn, (S @ thin.Psi_nn).T).T
    dT = mask_upper(U_c @ T - T @ L_c.T + S_psi_yinvt)
    dtau = _dtau(C_star, thin.Psi_nn, wy.tau)
    return WYDerivative(dY, dT, dtau, S, C_star, z_from_y(Y, n))


def factored_derivative(fqr: FactoredQR, thin: ThinDerivative) -> tuple[np.ndarray, np.ndarray]:
    """``(dY, dtau)`` for the factored form, rebuilding ``T^{-1}`` from ``Y^T Y``."""
    _require_nonzero_tau(fqr.tau)
    n = fqr.shape.n
    Y = fqr.Y
    apply_s_inv = _s_inverse_from_y(t_inverse_from_y(Y), Y[:n])
    C_star, dY = _c_star_and_dy(Y, thin, apply_s_inv)
    return dY, _dtau(C_star, thin.Psi_nn, fqr.tau)


# -- three routes to dQ_mp ---------------------------------------------------

def dqmp_product_rule(wy: CompactWY, d: WYDerivative) -> np.ndarray:
    """Direct product rule on ``Q_mp = I_mp - Y T Y_pn^T``."""
    n = wy.shape.n
    Y, T = wy.Y, wy.T
    Y_pn, dY_pn = Y[n:], d.dY[n:]
    return -(d.dY @ T @ Y_pn.T) - Y @ d.dT @ Y_pn.T - Y @ T @ dY_pn.T


def dqmp_ys_form(wy: CompactWY, dQ_mn: np.ndarray, S_nn: np.ndarray, Z_pn: np.ndarray) -> np.ndarray:
    n = wy.shape.n
    YT_S_invT = solve_upper(S_nn, (wy.Y @ wy.T).T).T
    return dQ_mn @ Z_pn.T - YT_S_invT @ (dQ_mn[n:] - Z_pn @ dQ_mn[:n]).T


def dqmp_z_form(Q: np.ndarray, dQ_mn: np.ndarray, Z_pn: np.ndarray) -> np.ndarray:
    """``dQ_mp`` from ``Q_mm``, ``dQ_mn`` and ``Z_pn`` alone."""
    n = dQ_mn.shape[1]
    Q_mn, Q_mp = Q[:, :n], Q[:, n:]
    return dQ_mn @ Z_pn.T - (Q_mn + Q_mp @ Z_pn) @ (dQ_mn[n:] - Z_pn @ dQ_mn[:n]).T


def full_q_derivative(
    wy: CompactWY, Q: np.ndarray, thin: ThinDerivative, verify: bool = False
) -> FullDerivative:
    """Derivative of the full factorisation, including the ``dQ_mp`` block.

    With ``verify=True`` the product-rule and Y/S evaluations of ``dQ_mp``
    and the Q-based ``Z_pn`` are stored in ``dQ_mp_forms`` for comparison.
    """
    _require_nonzero_tau(wy.tau)
    m, n = wy.shape.m, wy.shape.n
    if Q.shape != (m, m) or thin.dQ_mn.shape != (m, n):
        raise DimensionError(f"Q is {Q.shape}, dQ_mn is {thin.dQ_mn.shape}, expected m={m}, n={n}")
    d = wy_derivative(wy, thin)
    dQ_mp = dqmp_z_form(Q, thin.dQ_mn, d.Z_pn)
    dQ_mm = np.hstack([thin.dQ_mn, dQ_mp])
    dR_mn = np.vstack([thin.dR_nn, np.zeros((m - n, n))])

    Om_nn, Om_pn = omega_thin(thin.E_nn, Q[:, n:], thin.B_mn)
    Om_pp = omega_pp(Om_nn, Om_pn, d.Z_pn)
    omega = OmegaBlocks(Om_nn, Om_pn, Om_pp)

    forms = {}
    if verify:
        forms = {
            "z": dQ_mp,
            "ys": dqmp_ys_form(wy, thin.dQ_mn, d.S_nn, d.Z_pn),
            "product": dqmp_product_rule(wy, d),
            "Z_from_q": z_from_q(Q, n),
        }
    return FullDerivative(dQ_mm, dR_mn, d, omega, forms)


def qr_derivative(A, dA, verify: bool = False):
    """Factor ``A`` and differentiate along ``dA`` in one call.

    Returns ``(fqr, wy, Q, thin, full)``.
    """
    from .householder import qr_factor

    fqr = qr_factor(A)
    dA = as_matrix(dA)
    if dA.shape != (fqr.shape.m, fqr.shape.n):
        raise DimensionError(f"direction is {dA.shape}, matrix is {(fqr.shape.m, fqr.shape.n)}")
    wy = fqr.compact_wy()
    Q = assemble_q(wy)
    thin = thin_derivative(Q, fqr.R, dA)
    full = full_q_derivative(wy, Q, thin, verify=verify)
    return fqr, wy, Q, thin, full


# -- 2x1 Givens counterexample --------------------------------------------

@dataclass(frozen=True)
class GivensReport:
    """Outcome of applying the Z-form ``dQ_mp`` formula to both 2x2 completions."""

    true_h: np.ndarray
    formula_h: np.ndarray
    true_g: np.ndarray
    formula_g: np.ndarray
    rel_err_h: float
    rel_err_g: float
    mismatch: bool


def _rel_err(x, ref) -> float:
    err = float(np.linalg.norm(x - ref))
    scale = float(np.linalg.norm(ref))
    return err / scale if scale > 0 else err


def givens_2x1_counterexample(a, da, mismatch_tol: float = 1e-8) -> GivensReport:
    """Show the Z-form ``dQ_mp`` is only valid for the Householder completion.

    For a 2x1 matrix the second column of Q is either the Householder
    choice ``q_h = [a21, -a11] / r`` or the Givens choice ``q_g = -q_h``.
    Both true derivatives are known in closed form; the Z-form formula is
    evaluated on each ``Q_mm`` and compared.
    """
    a = np.asarray(a, dtype=float).reshape(2)
    da = np.asarray(da, dtype=float).reshape(2)
    a11, a21 = a
    r = float(np.hypot(a11, a21))
    if r == 0.0:
        raise RankDeficientError("a is zero")
    if a21 == 0.0 and a11 > 0:
        raise DegeneracyError("Householder step is the identity (tau = 0)")

    Q_h = np.array([[a11, a21], [a21, -a11]]) / r
    Q_g = np.column_stack([Q_h[:, 0], -Q_h[:, 1]])
    coef = (a11 * da[1] - a21 * da[0]) / r**3
    true_h = coef * np.array([[a11], [a21]])
    true_g = -true_h

    R = np.array([[r]])
    thin = thin_derivative(Q_h, R, da.reshape(2, 1))
    formula_h = dqmp_z_form(Q_h, thin.dQ_mn, z_from_q(Q_h, 1))
    formula_g = dqmp_z_form(Q_g, thin.dQ_mn, z_from_q(Q_g, 1))
    # scale by |da| / r too, so rounding noise is not reported when true_g ~ 0
    scale = float(np.linalg.norm(true_g)) + float(np.linalg.norm(da)) / r
    mismatch = float(np.linalg.norm(formula_g - true_g)) > mismatch_tol * scale
    return GivensReport(
        true_h, formula_h, true_g, formula_g,
        _rel_err(formula_h, true_h), _rel_err(formula_g, true_g), mismatch,
    )
