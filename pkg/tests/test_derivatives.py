import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import random_instance, rel
from qrderiv.derivatives import (
    dqmp_product_rule,
    dqmp_ys_form,
    dqmp_z_form,
    factored_derivative,
    full_q_derivative,
    givens_2x1_counterexample,
    omega_pp,
    omega_thin,
    qr_derivative,
    thin_derivative,
    wy_derivative,
    z_block,
)
from qrderiv.errors import DegeneracyError, DimensionError, NonInvertibleT, SingularTriangularError
from qrderiv.fd import FDConfig, directional_fd, factor_quantities
from qrderiv.householder import assemble_q, qr_factor

A21 = np.array([[3.0], [4.0]])
DA21 = np.array([[1.0], [0.0]])


def closed_form_2x1_derivatives(a, da):
    """Differentiate the 2x1 closed forms symbolically along da."""
    a11, a21, e = sp.symbols("a11 a21 e", real=True)
    r = sp.sqrt(a11**2 + a21**2)
    forms = {
        "r11": r,
        "q11": a11 / r,
        "q21": a21 / r,
        "qmp1": a21 / r,
        "qmp2": -a11 / r,
        "y21": a21 / (a11 - r),
        "t11": 1 - a11 / r,
    }
    subs_line = {a11: a[0] + e * da[0], a21: a[1] + e * da[1]}
    return {
        k: float(sp.diff(f.subs(subs_line), e).subs(e, 0)) for k, f in forms.items()
    }


@pytest.fixture(scope="module")
def golden():
    return closed_form_2x1_derivatives((3, 4), (1, 0))


def fd(name, A, dA, h=1e-6):
    return directional_fd(lambda X: factor_quantities(X)[name], A, dA, FDConfig(h=h))


def nonzero_tau_square(rng, n):
    A = rng.standard_normal((n, n))
    if qr_factor(A).tau[-1] == 0.0:
        A[:, -1] *= -1
    assert np.all(qr_factor(A).tau != 0)
    return A


# -- oracle sanity -----------------------------------------------------------

def test_closed_form_oracle_frozen_values(golden):
    assert golden["r11"] == pytest.approx(0.6, abs=1e-15)
    assert golden["q11"] == pytest.approx(0.128, abs=1e-15)
    assert golden["q21"] == pytest.approx(-0.096, abs=1e-15)
    assert golden["qmp1"] == pytest.approx(-0.096, abs=1e-15)
    assert golden["qmp2"] == pytest.approx(-0.128, abs=1e-15)
    assert golden["y21"] == pytest.approx(-0.4, abs=1e-15)
    assert golden["t11"] == pytest.approx(-0.128, abs=1e-15)


# -- thin ------------------------------------------------------------------------

def test_thin_derivative_golden(golden):
    f = qr_factor(A21)
    d = thin_derivative(f.q(), f.R, DA21)
    np.testing.assert_allclose(d.dR_nn, [[golden["r11"]]], atol=1e-15)
    np.testing.assert_allclose(d.dQ_mn, [[golden["q11"]], [golden["q21"]]], atol=1e-15)
    np.testing.assert_allclose(d.B_mn, DA21 / 5, atol=1e-16)


def test_thin_derivative_zero_direction(rng):
    A = rng.standard_normal((5, 3))
    f = qr_factor(A)
    d = thin_derivative(f.q(), f.R, np.zeros_like(A))
    assert not d.dQ_mn.any() and not d.dR_nn.any()


def test_thin_derivative_matches_fd_7x4(rng):
    A, dA = rng.standard_normal((7, 4)), rng.standard_normal((7, 4))
    f = qr_factor(A)
    d = thin_derivative(f.q(), f.R, dA)
    assert rel(fd("Q_mn", A, dA), d.dQ_mn) <= 1e-6
    assert rel(fd("R", A, dA)[:4], d.dR_nn) <= 1e-6


def test_thin_derivative_structure(rng):
    A, dA = rng.standard_normal((9, 5)), rng.standard_normal((9, 5))
    f = qr_factor(A)
    Q_mn = f.q()[:, :5]
    d = thin_derivative(Q_mn, f.R_nn, dA)
    np.testing.assert_array_equal(np.tril(d.dR_nn, -1), 0)
    np.testing.assert_array_equal(np.tril(d.Psi_nn, -1), 0)
    W = Q_mn.T @ d.dQ_mn
    assert np.linalg.norm(W + W.T) <= 1e-12 * np.linalg.norm(d.dQ_mn)


def test_thin_derivative_accepts_tau_zero():
    f = qr_factor(np.eye(3, 2))
    assert np.all(f.tau == 0)
    d = thin_derivative(f.q(), f.R, np.ones((3, 2)))
    assert np.isfinite(d.dQ_mn).all()


def test_thin_derivative_errors():
    Q = np.eye(3)
    with pytest.raises(SingularTriangularError):
        thin_derivative(Q, np.array([[1.0, 1.0], [0.0, 0.0], [0.0, 0.0]]), np.ones((3, 2)))
    with pytest.raises(DimensionError):
        thin_derivative(Q, np.eye(3, 2), np.ones((4, 2)))


# -- omega (thin) ----------------------------------------------------------------

def test_omega_thin_n1_is_zero(rng):
    A, dA = rng.standard_normal((4, 1)), rng.standard_normal((4, 1))
    f = qr_factor(A)
    d = thin_derivative(f.q(), f.R, dA)
    Onn, _ = omega_thin(d.E_nn, f.q()[:, 1:], d.B_mn)
    np.testing.assert_array_equal(Onn, [[0.0]])


def test_omega_thin_golden():
    f = qr_factor(A21)
    Q = f.q()
    d = thin_derivative(Q, f.R, DA21)
    Onn, Opn = omega_thin(d.E_nn, Q[:, 1:], d.B_mn)
    # Q_mp = [0.8, -0.6], B = dA / 5 = [0.2, 0]
    np.testing.assert_allclose(Opn, [[0.16]], atol=1e-15)
    np.testing.assert_allclose(Q @ np.vstack([Onn, Opn]), d.dQ_mn, atol=1e-15)


def test_omega_thin_alternative_form_6x3(rng):
    A, dA = rng.standard_normal((6, 3)), rng.standard_normal((6, 3))
    f = qr_factor(A)
    Q = f.q()
    d = thin_derivative(Q, f.R, dA)
    Onn, Opn = omega_thin(d.E_nn, Q[:, 3:], d.B_mn)
    np.testing.assert_array_equal(Onn, -Onn.T)
    assert np.linalg.norm(Q @ np.vstack([Onn, Opn]) - d.dQ_mn) <= 1e-12 * np.linalg.norm(d.dQ_mn)


def test_omega_thin_square_has_empty_pn(rng):
    A = nonzero_tau_square(rng, 3)
    f = qr_factor(A)
    d = thin_derivative(f.q(), f.R, rng.standard_normal((3, 3)))
    _, Opn = omega_thin(d.E_nn, f.q()[:, 3:], d.B_mn)
    assert Opn.shape == (0, 3)


# -- compact WY and factored form --------------------------------------------

def test_wy_derivative_golden(golden):
    f = qr_factor(A21)
    wy = f.compact_wy()
    d = wy_derivative(wy, thin_derivative(f.q(), f.R, DA21))
    np.testing.assert_allclose(d.dY, [[0.0], [golden["y21"]]], atol=1e-15)
    np.testing.assert_allclose(d.dT, [[golden["t11"]]], atol=1e-15)
    np.testing.assert_allclose(d.dtau, [golden["t11"]], atol=1e-15)


def test_wy_derivative_zero_direction(rng):
    A = rng.standard_normal((5, 3))
    f = qr_factor(A)
    d = wy_derivative(f.compact_wy(), thin_derivative(f.q(), f.R, np.zeros_like(A)))
    assert not d.dY.any() and not d.dT.any() and not d.dtau.any()


def test_wy_derivative_matches_fd_6x4(rng):
    A, dA = rng.standard_normal((6, 4)), rng.standard_normal((6, 4))
    f = qr_factor(A)
    d = wy_derivative(f.compact_wy(), thin_derivative(f.q(), f.R, dA))
    assert rel(fd("Y", A, dA), d.dY) <= 1e-6
    assert rel(fd("T", A, dA), d.dT) <= 1e-6
    assert rel(fd("tau", A, dA), d.dtau) <= 1e-6


def test_wy_derivative_structure(rng):
    A, dA = rng.standard_normal((8, 5)), rng.standard_normal((8, 5))
    f = qr_factor(A)
    d = wy_derivative(f.compact_wy(), thin_derivative(f.q(), f.R, dA))
    np.testing.assert_array_equal(np.triu(d.dY[:5]), 0)
    np.testing.assert_array_equal(np.tril(d.dT, -1), 0)
    np.testing.assert_allclose(np.diag(d.dT), d.dtau, rtol=1e-14, atol=1e-15)
    np.testing.assert_array_equal(np.tril(d.S_nn, -1), 0)


def test_factored_derivative_golden(golden):
    f = qr_factor(A21)
    dY, dtau = factored_derivative(f, thin_derivative(f.q(), f.R, DA21))
    np.testing.assert_allclose(dY, [[0.0], [golden["y21"]]], atol=1e-15)
    np.testing.assert_allclose(dtau, [golden["t11"]], atol=1e-15)


def test_factored_matches_wy_5x3(rng):
    A, dA = rng.standard_normal((5, 3)), rng.standard_normal((5, 3))
    f = qr_factor(A)
    thin = thin_derivative(f.q(), f.R, dA)
    dY, dtau = factored_derivative(f, thin)
    d = wy_derivative(f.compact_wy(), thin)
    assert rel(dY, d.dY) <= 1e-13
    assert rel(dtau, d.dtau) <= 1e-13


def test_derivatives_reject_zero_tau():
    f = qr_factor(np.eye(3, 2))
    thin = thin_derivative(f.q(), f.R, np.ones((3, 2)))
    with pytest.raises(NonInvertibleT):
        factored_derivative(f, thin)
    with pytest.raises(NonInvertibleT):
        wy_derivative(f.compact_wy(), thin)
    with pytest.raises(NonInvertibleT):
        full_q_derivative(f.compact_wy(), f.q(), thin)
    with pytest.raises(NonInvertibleT):
        z_block(f.compact_wy())


# -- Z block -----------------------------------------------------------------------

def test_z_block_golden():
    f = qr_factor(A21)
    zy, zq = z_block(f.compact_wy(), f.q())
    np.testing.assert_allclose(zy, [[-2.0]], atol=1e-15)
    np.testing.assert_allclose(zq, [[-2.0]], atol=1e-14)


def test_z_block_square_is_empty(rng):
    f = qr_factor(nonzero_tau_square(rng, 4))
    zy, zq = z_block(f.compact_wy())
    assert zy.shape == zq.shape == (0, 4)


def test_z_block_two_forms_7x3(rng):
    f = qr_factor(rng.standard_normal((7, 3)))
    zy, zq = z_block(f.compact_wy(), f.q())
    assert rel(zq, zy) <= 1e-11


# -- full Q -------------------------------------------------------------------------

def test_full_q_derivative_golden(golden):
    _, _, _, _, full = qr_derivative(A21, DA21)
    np.testing.assert_allclose(full.dQ_mp, [[golden["qmp1"]], [golden["qmp2"]]], atol=1e-15)
    np.testing.assert_allclose(full.dR_mn, [[0.6], [0.0]], atol=1e-15)


def test_full_q_derivative_square(rng):
    A = nonzero_tau_square(rng, 4)
    dA = rng.standard_normal((4, 4))
    _, _, _, thin, full = qr_derivative(A, dA)
    assert full.dQ_mp.shape == (4, 0)
    np.testing.assert_array_equal(full.dQ_mm, thin.dQ_mn)
    assert full.omega.Omega_pp.shape == (0, 0)
    assert rel(fd("Q_mn", A, dA), full.dQ_mm) <= 1e-6


def test_full_q_derivative_matches_fd_8x5(rng):
    A, dA = rng.standard_normal((8, 5)), rng.standard_normal((8, 5))
    _, _, _, _, full = qr_derivative(A, dA)
    assert rel(fd("Q_mp", A, dA), full.dQ_mp) <= 1e-6
    np.testing.assert_array_equal(full.dR_mn[5:], 0)


def test_full_q_derivative_verify_forms(rng):
    A, dA = rng.standard_normal((9, 4)), rng.standard_normal((9, 4))
    f, wy, Q, thin, full = qr_derivative(A, dA, verify=True)
    forms = full.dQ_mp_forms
    np.testing.assert_array_equal(forms["z"], full.dQ_mp)
    assert rel(forms["ys"], forms["z"]) <= 1e-11
    assert rel(forms["product"], forms["z"]) <= 1e-11
    assert rel(forms["Z_from_q"], full.wy.Z_pn) <= 1e-11
    # the module-level helpers give the same numbers
    np.testing.assert_array_equal(dqmp_z_form(Q, thin.dQ_mn, full.wy.Z_pn), forms["z"])
    np.testing.assert_array_equal(dqmp_ys_form(wy, thin.dQ_mn, full.wy.S_nn, full.wy.Z_pn), forms["ys"])
    np.testing.assert_array_equal(dqmp_product_rule(wy, full.wy), forms["product"])


def test_full_q_derivative_dimension_error(rng):
    f = qr_factor(rng.standard_normal((5, 2)))
    thin = thin_derivative(f.q(), f.R, rng.standard_normal((5, 2)))
    with pytest.raises(DimensionError):
        full_q_derivative(f.compact_wy(), f.q()[:, :2], thin)


def test_product_rule_closure(rng):
    A, dA = rng.standard_normal((7, 3)), rng.standard_normal((7, 3))
    _, wy, _, _, full = qr_derivative(A, dA)
    Y, T, d = wy.Y, wy.T, full.wy
    dQ = -(d.dY @ T @ Y.T) - Y @ d.dT @ Y.T - Y @ T @ d.dY.T
    assert rel(full.dQ_mm, dQ) <= 1e-11


# -- Omega_pp --------------------------------------------------------------------

def test_omega_pp_p1_is_zero(rng):
    A, dA = rng.standard_normal((5, 4)), rng.standard_normal((5, 4))
    _, _, Q, _, full = qr_derivative(A, dA)
    np.testing.assert_array_equal(full.omega.Omega_pp, [[0.0]])
    assert rel(Q @ full.omega.assemble(), full.dQ_mm) <= 1e-11


def test_omega_pp_reconstruction_8x5(rng):
    A, dA = rng.standard_normal((8, 5)), rng.standard_normal((8, 5))
    _, _, Q, _, full = qr_derivative(A, dA)
    Opp = full.omega.Omega_pp
    assert np.linalg.norm(Opp + Opp.T) == 0.0
    Om = full.omega.assemble()
    assert np.linalg.norm(Q @ Om - full.dQ_mm) <= 1e-11 * np.linalg.norm(full.dQ_mm)


def test_omega_pp_generically_nonzero_10x6():
    for seed in range(10):
        rng = np.random.default_rng(seed)
        _, _, _, _, full = qr_derivative(rng.standard_normal((10, 6)), rng.standard_normal((10, 6)))
        assert np.linalg.norm(full.omega.Omega_pp) > 1e-8 * np.linalg.norm(full.omega.assemble())


def test_omega_pp_dimension_error():
    with pytest.raises(DimensionError):
        omega_pp(np.zeros((2, 2)), np.zeros((3, 2)), np.zeros((2, 2)))


# -- Givens counterexample -------------------------------------------------------

def test_givens_golden():
    g = givens_2x1_counterexample([3.0, 4.0], [1.0, 0.0])
    np.testing.assert_allclose(g.true_g, [[0.096], [0.128]], atol=1e-15)
    np.testing.assert_allclose(g.formula_h, g.true_h, atol=1e-15)
    assert g.mismatch
    assert np.linalg.norm(g.formula_g - g.true_g) > 0.1


def test_givens_zero_direction():
    g = givens_2x1_counterexample([3.0, 4.0], [0.0, 0.0])
    assert not g.true_g.any() and not g.formula_g.any()
    assert not g.mismatch


def test_givens_aligned_direction():
    g = givens_2x1_counterexample([3.0, 4.0], [0.6, 0.8])
    np.testing.assert_allclose(g.true_h, 0, atol=1e-15)
    np.testing.assert_allclose(g.formula_g, 0, atol=1e-15)
    assert not g.mismatch


def test_givens_degenerate():
    with pytest.raises(DegeneracyError):
        givens_2x1_counterexample([2.0, 0.0], [1.0, 1.0])


# -- linearity ---------------------------------------------------------------------

@given(st.integers(0, 2**32 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_linearity_in_direction(seed, alpha, beta):
    rng = np.random.default_rng(seed)
    A, d1 = random_instance(rng)
    d2 = rng.standard_normal(A.shape)
    runs = [qr_derivative(A, d, verify=True) for d in (d1, d2, alpha * d1 + beta * d2)]

    def parts(run):
        f, _, _, thin, full = run
        dY_f, dtau_f = factored_derivative(f, thin)
        return [thin.dQ_mn, thin.dR_nn, full.dQ_mm, full.wy.dY, full.wy.dT, full.wy.dtau,
                dY_f, dtau_f, full.omega.assemble(), full.dQ_mp_forms["product"]]

    for x1, x2, x12 in zip(*map(parts, runs)):
        combo = alpha * x1 + beta * x2
        scale = max(np.linalg.norm(alpha * x1) + np.linalg.norm(beta * x2), 1e-300)
        assert np.linalg.norm(x12 - combo) <= 1e-12 * scale


@given(st.integers(0, 2**32 - 1))
def test_orthogonality_differentiated(seed):
    rng = np.random.default_rng(seed)
    A, dA = random_instance(rng, (2, 15))
    # tiny tau amplifies rounding through Y_nn^{-1}; that regime is not guarded
    assume(np.min(qr_factor(A).tau) > 1e-3)
    _, _, Q, _, full = qr_derivative(A, dA)
    W = Q.T @ full.dQ_mm
    assert np.linalg.norm(W + W.T) <= 1e-11 * np.linalg.norm(full.dQ_mm)
