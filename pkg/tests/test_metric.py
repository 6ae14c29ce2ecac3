import numpy as np
import pytest

from nhberry.biortho import BiorthFrame, normalization_rescaling
from nhberry.errors import NotPositiveDefinite, SingularS, StencilCrossesDegeneracy
from nhberry.metric import (
    HermitizingField,
    compatibility_residual,
    flatness_residual,
    hermitize_hamiltonian,
    hermitizing_field,
    hermitizing_map,
    metric_connection,
    metric_from_left,
)
from nhberry.models import build_pseudo_hermitian, hyperbolic_point

from conftest import pt


def test_metric_closed_form_example(hyper_frames):
    eta = metric_from_left(hyper_frames(pt(0, 1)).L)
    np.testing.assert_allclose(eta, [[1.543081, 1.175201], [1.175201, 1.543081]], atol=1e-6)


def test_hermitizing_map_factors_metric():
    rng = np.random.default_rng(2)
    for _ in range(20):
        A = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        eta = A.conj().T @ A + 0.1 * np.eye(4)
        md = hermitizing_map(eta)
        np.testing.assert_allclose(md.S.conj().T @ md.S, eta, atol=1e-10 * np.linalg.norm(eta))
        np.testing.assert_allclose(md.W.conj().T @ md.W, np.eye(4), atol=1e-12)
        assert np.all(np.diff(md.D) >= 0)


def test_scalar_and_identity_metrics():
    md = hermitizing_map(3.0 * np.eye(3))
    assert md.scalar
    np.testing.assert_allclose(md.S, np.sqrt(3) * np.eye(3))
    ident = hermitizing_map(np.eye(2))
    np.testing.assert_array_equal(ident.S, np.eye(2))


def test_metric_must_be_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        hermitizing_map(np.diag([1.0, -1.0]))
    with pytest.raises(NotPositiveDefinite):
        hermitizing_map(np.array([[1, 1j], [0, 1]]))


def test_gamma_values_match_closed_form(hyper_frames):
    # derived by hand from S = diag(e^{xi/2}, e^{-xi/2}) rotated by the fixed W(lambda)
    S_field = hermitizing_field(hyper_frames)
    for lam, xi in [(0.0, 1.0), (1.3, 0.4)]:
        G = metric_connection(S_field, pt(lam, xi))
        Gn = metric_connection(S_field, pt(lam, xi), analytic=False)
        for name in ("lambda", "xi"):
            np.testing.assert_allclose(G[name], Gn[name], atol=1e-7)
        eta = S_field.eta(pt(lam, xi))
        c, s = np.cosh(xi), np.sinh(xi)
        # compatibility: d_xi eta = eta G + G^dagger eta
        d_xi = np.array([[s, np.exp(-1j * lam) * c], [np.exp(1j * lam) * c, s]])
        np.testing.assert_allclose(eta @ G["xi"] + G["xi"].conj().T @ eta, d_xi, atol=1e-12)


def test_compatibility_residual_small(hyper_frames):
    S_field = hermitizing_field(hyper_frames)
    for p in [pt(0.0, 0.5), pt(2.0, 1.7)]:
        G = metric_connection(S_field, p)
        assert compatibility_residual(S_field.eta, G, p) < 1e-8


def test_flatness_of_pure_gauge(hyper_frames):
    S_field = hermitizing_field(hyper_frames)
    assert flatness_residual(S_field, pt(0.7, 1.1), "xi", "lambda") < 1e-6


def test_flatness_detects_curved_fabrication(monkeypatch):
    import nhberry.metric as metric_mod
    sx = np.array([[0, 1], [1, 0]], dtype=complex)

    class Fake:
        param_names = ("lambda", "xi")

    def fake_connection(S_field, q, step, analytic=False):
        return metric_mod.GammaField({"lambda": q[1] * sx, "xi": np.zeros((2, 2), complex)}, q)

    monkeypatch.setattr(metric_mod, "metric_connection", fake_connection)
    r = flatness_residual(Fake(), pt(0.2, 0.5), "xi", "lambda")
    assert r == pytest.approx(np.linalg.norm(sx), rel=1e-6)


def test_rescaled_frame_gamma(hyper_frames):
    frames = hyper_frames.transformed(lambda p: normalization_rescaling(hyper_frames(p)))
    S_field = hermitizing_field(frames)
    lam, xi = 0.6, 1.2
    G = metric_connection(S_field, pt(lam, xi), step=1e-5)
    t = np.tanh(xi)
    expected = 0.5 * np.array([[t, np.exp(-1j * lam)], [np.exp(1j * lam), t]])
    np.testing.assert_allclose(G["xi"], expected, atol=1e-7)


def test_numeric_stencil_across_degenerate_metric():
    class DegFrames:
        param_names = ("lambda", "xi")

        def __call__(self, p):
            L = np.diag([1.0, 1.0, np.sqrt(2.0)]).astype(complex)
            return BiorthFrame(np.linalg.inv(L), L, np.zeros(3))

    S_field = HermitizingField(DegFrames())
    with pytest.raises(StencilCrossesDegeneracy):
        metric_connection(S_field, pt(0, 1))


def test_hermitized_hamiltonian_is_hermitian(hyper_frames):
    S_field = hermitizing_field(hyper_frames)
    for lam, xi in [(0.0, 1.0), (2.2, 0.3), (5.0, 2.0)]:
        p = pt(lam, xi)
        H = build_pseudo_hermitian(*hyperbolic_point(1.0, xi, lam))
        Hh = hermitize_hamiltonian(H, S_field(p))
        np.testing.assert_allclose(Hh, Hh.conj().T, atol=1e-12)
        np.testing.assert_allclose(np.sort(np.linalg.eigvalsh(Hh)), [-1, 1], atol=1e-12)
    with pytest.raises(SingularS):
        hermitize_hamiltonian(np.eye(2), np.array([[1, 1], [1, 1 + 1e-15]]))


def test_hermitian_frame_vectors_are_eigenvectors(hyper_frames):
    # S R_b is an eigenvector of S H S^{-1} with the same energy E_b
    S_field = hermitizing_field(hyper_frames)
    p = pt(1.4, 0.9)
    H = build_pseudo_hermitian(*hyperbolic_point(1.0, 0.9, 1.4))
    Hh = hermitize_hamiltonian(H, S_field(p))
    frame = hyper_frames(p)
    for b in range(2):
        phi = S_field(p) @ frame.R[:, b]
        np.testing.assert_allclose(Hh @ phi, frame.energies[b] * phi, atol=1e-12)
    np.testing.assert_allclose(S_field(p) @ frame.R[:, 0], np.array([1, 1]) / np.sqrt(2), atol=1e-12)
    np.testing.assert_allclose(Hh, -np.array([[0, 1], [1, 0]]), atol=1e-12)
