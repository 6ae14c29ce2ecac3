import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from nhberry.errors import InvalidRadius, ValidationError
from nhberry.models import (
    MODEL_NAMES,
    ModelSpec,
    SIGMA_Y,
    SIGMA_Z,
    analytic_eigenframe,
    analytic_hermitizing_map,
    build_hermitian_qwz,
    build_pseudo_hermitian,
    classify_phase,
    hyperbolic_point,
    make_model,
    random_pseudo_hermitian,
)
from nhberry.numeric import eig_general

from conftest import pt


def test_pauli_limits():
    np.testing.assert_array_equal(build_pseudo_hermitian(1, 0, 0, 0), SIGMA_Z)
    np.testing.assert_array_equal(build_pseudo_hermitian(0, 1, 0, 0), [[0, 1], [-1, 0]])
    np.testing.assert_array_equal(build_pseudo_hermitian(0, 1, 0, 0), 1j * SIGMA_Y)


def test_exact_phase_example():
    t, x, y = 2, 1, 1
    assert classify_phase(t, x, y) == "exact"
    E = np.sort(np.linalg.eigvals(build_pseudo_hermitian(t, x, y, 0)).real)
    np.testing.assert_allclose(E, [-np.sqrt(2), np.sqrt(2)], atol=1e-12)
    assert classify_phase(0, 1, 0) == "broken"


def test_hyperbolic_point_examples():
    assert hyperbolic_point(1, 0, 2.3) == pytest.approx((1, 0, 0))
    np.testing.assert_allclose(hyperbolic_point(1, 1, 0), (1.543081, 1.175201, 0), atol=1e-6)
    t, x, y = hyperbolic_point(1, 2, 0.7)
    assert abs(t * t - x * x - y * y - 1) < 1e-12
    with pytest.raises(InvalidRadius):
        hyperbolic_point(0, 1, 0)
    with pytest.raises(InvalidRadius):
        make_model("pseudo_hermitian_hyperbolic", l=-1)


@settings(max_examples=50, deadline=None)
@given(st.floats(0.1, 5), st.floats(-3, 3), st.floats(0, 2 * np.pi), st.floats(-2, 2))
def test_spectrum_is_a0_plus_minus_l(l, xi, lam, a0):
    H = build_pseudo_hermitian(*hyperbolic_point(l, xi, lam), a0)
    E = np.sort_complex(np.linalg.eigvals(H))
    scale = max(1.0, np.cosh(xi) * l)
    np.testing.assert_allclose(E, [a0 - l, a0 + l], atol=1e-9 * scale)


def test_analytic_frame_xi_zero():
    f = analytic_eigenframe(0.0, 0.9)
    np.testing.assert_allclose(f.R[:, 0], [0, 1], atol=1e-15)
    np.testing.assert_allclose(f.R[:, 1], [np.exp(-0.9j), 0])


def test_analytic_frame_left_kets():
    f = analytic_eigenframe(1.0, 0.3)
    s, c, e = np.sinh(0.5), np.cosh(0.5), np.exp(-0.3j)
    left_minus_ket = np.array([e * s, c])
    np.testing.assert_allclose(f.L[0], left_minus_ket.conj())
    assert abs(f.L[0] @ f.R[:, 0] - (c * c - s * s)) < 1e-15
    np.testing.assert_allclose(f.L @ f.R, np.eye(2), atol=1e-14)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 3), st.floats(0, 2 * np.pi), st.floats(0.2, 3), st.floats(-1, 1))
def test_analytic_frame_diagonalizes(xi, lam, l, a0):
    f = analytic_eigenframe(xi, lam, l, a0)
    H = build_pseudo_hermitian(*hyperbolic_point(l, xi, lam), a0)
    scale = max(1.0, l * np.cosh(xi) * np.cosh(xi / 2) ** 2)
    assert np.linalg.norm(H @ f.R - f.R * f.energies) < 1e-12 * scale
    assert np.linalg.norm(f.L @ H - f.energies[:, None] * f.L) < 1e-12 * scale
    assert np.linalg.norm(f.L @ f.R - np.eye(2)) < 1e-12 * np.cosh(xi)


def test_analytic_frame_matches_numeric_up_to_column_scaling():
    for xi, lam in [(1.0, 0.0), (0.4, 2.0), (1.9, 5.5)]:
        f = analytic_eigenframe(xi, lam)
        es = eig_general(build_pseudo_hermitian(*hyperbolic_point(1, xi, lam)))
        for k in range(2):
            a, b = f.R[:, k], es.right[:, k]
            cos = abs(np.vdot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b))
            assert abs(cos - 1) < 1e-12


def test_hermitizing_map_closed_form_properties():
    for xi, lam in [(1.0, 0.0), (0.3, 1.2), (2.0, 4.0)]:
        S = analytic_hermitizing_map(xi, lam)
        f = analytic_eigenframe(xi, lam)
        eta = f.L.conj().T @ f.L
        np.testing.assert_allclose(S.conj().T @ S, eta, atol=1e-13)
        c, s = np.cosh(xi), np.sinh(xi)
        np.testing.assert_allclose(eta, [[c, np.exp(-1j * lam) * s], [np.exp(1j * lam) * s, c]], atol=1e-13)


def test_registered_derivatives_match_finite_differences(hyper):
    from nhberry.numeric import finite_diff
    p = pt(0.8, 1.1)
    for k, name in enumerate(hyper.param_names):
        fd = finite_diff(hyper.analytic_S, p, k, 1e-6)
        np.testing.assert_allclose(hyper.analytic_dS[name](p), fd, atol=1e-8)


def test_qwz_examples():
    np.testing.assert_array_equal(build_hermitian_qwz(0, 0, 0), -2 * SIGMA_Z)
    rng = np.random.default_rng(0)
    for m, kx, ky in rng.uniform(-3, 3, size=(10, 3)):
        H = build_hermitian_qwz(m, kx, ky)
        np.testing.assert_array_equal(H, H.conj().T)
    np.testing.assert_allclose(np.linalg.eigvals(build_hermitian_qwz(2, 0, 0)), [0, 0], atol=1e-15)


def test_registry_and_validation():
    assert set(MODEL_NAMES) == {"pseudo_hermitian_cartesian", "pseudo_hermitian_hyperbolic", "qwz"}
    m = make_model("pseudo_hermitian_hyperbolic")
    assert m.param_names == ("lambda", "xi")
    assert m.spec.fixed_params == {"l": 1.0, "a0": 0.0}
    assert make_model("pseudo_hermitian_cartesian").param_names == ("t", "x", "y")
    with pytest.raises(ValidationError):
        make_model("nope")
    with pytest.raises(ValidationError) as err:
        make_model("qwz", l=1)
    assert err.value.field == "model_params"
    with pytest.raises(ValidationError):
        ModelSpec("x", ("a", "a"), 2)


def test_point_helper(hyper):
    np.testing.assert_array_equal(hyper.point(xi=1, **{"lambda": 0.5}), [0.5, 1])
    with pytest.raises(ValidationError):
        hyper.point(xi=1)


def test_hyperbolic_model_evaluates_same_matrix(hyper):
    np.testing.assert_allclose(hyper(pt(0.4, 1.2)), build_pseudo_hermitian(*hyperbolic_point(1, 1.2, 0.4)))


def test_random_family_is_pseudo_hermitian():
    fam = random_pseudo_hermitian(3, seed=4)
    p = np.array([0.2, -0.4])
    H = fam(p)
    E = np.linalg.eigvals(H)
    assert np.max(np.abs(E.imag)) < 1e-10
    es = eig_general(H)
    eta = es.left.conj().T @ es.left
    assert np.linalg.norm(eta @ H - H.conj().T @ eta) < 1e-9 * np.linalg.norm(eta) * np.linalg.norm(H)
    np.testing.assert_array_equal(fam(p), random_pseudo_hermitian(3, seed=4)(p))
