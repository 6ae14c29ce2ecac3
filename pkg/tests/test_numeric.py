import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhberry.errors import DimensionMismatch, EvaluationFailure, NearDefective, NotPositiveDefinite, SingularInput
from nhberry.models import build_pseudo_hermitian
from nhberry.numeric import (
    DEFAULT_TOL,
    MAX_DIM,
    Tolerances,
    as_matrix,
    eig_general,
    finite_diff,
    fix_column_phases,
    polar_decompose,
    sqrt_posdef,
)


def complex_matrices(n):
    return st.integers(0, 2**32 - 1).map(
        lambda s: np.random.default_rng(s).normal(size=(n, n)) + 1j * np.random.default_rng(s + 1).normal(size=(n, n)))


def test_max_dim_documented_and_large_enough():
    assert MAX_DIM >= 16


def test_eig_diagonal():
    es = eig_general(np.diag([2.0, 1.0]))
    np.testing.assert_allclose(es.eigenvalues, [1, 2])
    np.testing.assert_allclose(es.right, [[0, 1], [1, 0]])
    np.testing.assert_allclose(es.left @ es.right, np.eye(2), atol=1e-15)


def test_eig_diag_identity_frames():
    es = eig_general(np.diag([1.0, 2.0]))
    np.testing.assert_allclose(es.right, np.eye(2))
    np.testing.assert_allclose(es.left, np.eye(2))


def test_eig_sigma_x():
    es = eig_general(np.array([[0, 1], [1, 0]]))
    np.testing.assert_allclose(es.eigenvalues, [-1, 1], atol=1e-14)
    for k, sign in enumerate((-1, 1)):
        v = es.right[:, k]
        want = np.array([1, sign]) / np.sqrt(2)
        assert abs(abs(np.vdot(want, v)) - 1) < 1e-12


def test_eig_pseudo_hermitian_point_matches_characteristic_roots():
    H = build_pseudo_hermitian(2, 1, 1, 0)
    es = eig_general(H)
    roots = np.sort_complex(np.roots([1, -np.trace(H), np.linalg.det(H)]))
    np.testing.assert_allclose(es.eigenvalues, roots, atol=1e-12)
    np.testing.assert_allclose(es.eigenvalues, [-np.sqrt(2), np.sqrt(2)], atol=1e-12)


def test_phase_convention_pivot_real_positive():
    es = eig_general(build_pseudo_hermitian(1.3, 0.4, -0.2, 0.1))
    for k in range(2):
        v = es.right[:, k]
        assert abs(np.linalg.norm(v) - 1) < 1e-14
        p = np.argmax(np.abs(v))
        assert abs(v[p].imag) < 1e-15 and v[p].real > 0


def test_fix_column_phases_tie_goes_to_first_entry():
    V = fix_column_phases(np.array([[1j], [1.0]]) / np.sqrt(2))
    assert V[0, 0].real > 0 and abs(V[0, 0].imag) < 1e-16


def test_eig_near_defective_raises():
    J = np.array([[1.0, 1.0], [1e-20, 1.0]])
    with pytest.raises(NearDefective):
        eig_general(J)


def test_eig_rejects_bad_input():
    with pytest.raises(DimensionMismatch):
        eig_general(np.ones((2, 3)))
    with pytest.raises(EvaluationFailure):
        eig_general(np.array([[np.nan, 0], [0, 1]]))


def test_eig_ordering_is_lexicographic():
    es = eig_general(np.diag([1 + 1j, 1 - 1j, -2.0, 1 - 1j + 1e-14]))
    E = es.eigenvalues
    assert E[0] == -2
    assert E[1].imag < 0 and E[2].imag < 0 and E[3].imag > 0


@settings(max_examples=40, deadline=None)
@given(complex_matrices(4))
def test_eig_residual_and_biorthonormality(M):
    es = eig_general(M)
    scale = np.linalg.norm(M)
    slack = max(1.0, es.condition)
    assert np.linalg.norm(M @ es.right - es.right * es.eigenvalues) <= 1e-10 * scale * slack
    assert np.linalg.norm(es.left @ es.right - np.eye(4)) <= 1e-10 * slack


def test_sqrt_posdef_examples():
    np.testing.assert_allclose(sqrt_posdef(np.eye(3)), np.eye(3))
    np.testing.assert_allclose(sqrt_posdef(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))
    c, s = np.cosh(1.0), np.sinh(1.0)
    eta = np.array([[c, s], [s, c]])
    Q = sqrt_posdef(eta)
    assert np.linalg.norm(Q @ Q - eta) < 1e-12


def test_sqrt_posdef_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        sqrt_posdef(np.diag([1.0, -1.0]))
    with pytest.raises(NotPositiveDefinite):
        sqrt_posdef(np.array([[1, 1], [0, 1]]))


@settings(max_examples=40, deadline=None)
@given(complex_matrices(3))
def test_sqrt_posdef_unique_root_properties(A):
    P = A @ A.conj().T + 0.1 * np.eye(3)
    Q = sqrt_posdef(P)
    assert np.linalg.norm(Q @ Q - P) < 1e-10 * np.linalg.norm(P)
    assert np.linalg.norm(Q @ P - P @ Q) < 1e-10 * np.linalg.norm(P)
    assert np.all(np.linalg.eigvalsh(Q) > 0)


def test_polar_examples():
    U0 = np.array([[0, 1j], [1, 0]])
    U, P = polar_decompose(U0)
    np.testing.assert_allclose(U, U0, atol=1e-14)
    np.testing.assert_allclose(P, np.eye(2), atol=1e-14)
    U, P = polar_decompose(np.diag([2.0, 3.0]))
    np.testing.assert_allclose(U, np.eye(2), atol=1e-14)
    np.testing.assert_allclose(P, np.diag([2.0, 3.0]), atol=1e-14)


def test_polar_singular():
    with pytest.raises(SingularInput):
        polar_decompose(np.zeros((2, 2)))


@settings(max_examples=40, deadline=None)
@given(complex_matrices(3))
def test_polar_against_inverse_sqrt_oracle(T):
    U, P = polar_decompose(T)
    assert np.linalg.norm(U @ P - T) < 1e-12 * max(1, np.linalg.norm(T))
    assert np.linalg.norm(U.conj().T @ U - np.eye(3)) < 1e-10
    assert np.all(np.linalg.eigvalsh(P) > 0)
    w, V = np.linalg.eigh(T.conj().T @ T)
    oracle = T @ (V * w ** -0.5) @ V.conj().T
    assert np.linalg.norm(U - oracle) < 1e-8 * np.linalg.cond(T)


def test_finite_diff_examples():
    const = lambda p: np.ones((2, 2))  # noqa: E731
    np.testing.assert_array_equal(finite_diff(const, [0.3], 0), np.zeros((2, 2)))
    lin = lambda p: p[0] * np.eye(2)  # noqa: E731
    np.testing.assert_allclose(finite_diff(lin, [0.7], 0), np.eye(2), atol=1e-10)
    with pytest.raises(ValueError):
        finite_diff(lin, [0.0], 0, step=0)


def test_finite_diff_second_order_richardson_ratio():
    f = lambda p: np.array([[np.sin(3 * p[0])]])  # noqa: E731
    exact = 3 * np.cos(3 * 0.4)
    e1 = abs(finite_diff(f, [0.4], 0, 1e-2)[0, 0] - exact)
    e2 = abs(finite_diff(f, [0.4], 0, 5e-3)[0, 0] - exact)
    assert 3.8 < e1 / e2 < 4.2


def test_finite_diff_of_closed_form_hermitizing_map():
    from nhberry.models import analytic_hermitizing_map
    S = lambda p: analytic_hermitizing_map(p[0], p[1])  # noqa: E731
    d = finite_diff(S, [1.0, 0.0], 0, 1e-5)
    exact = np.diag([-0.5, 0.5]) @ S([1.0, 0.0])
    assert np.max(np.abs(d - exact)) < 1e-9


def test_tolerances_defaults_and_replace():
    t = DEFAULT_TOL
    assert (t.tol_eig, t.posdef_floor, t.det_floor, t.cond_max, t.step) == (1e-10, 1e-12, 1e-300, 1e8, 1e-5)
    assert t.replace(step=1e-4).step == 1e-4
    with pytest.raises(KeyError):
        t.replace(nope=1)
    assert isinstance(t, Tolerances)


def test_as_matrix_scalar_rejected():
    with pytest.raises(DimensionMismatch):
        as_matrix(np.array(1.0))
