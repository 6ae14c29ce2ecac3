"""Parametrized Hamiltonian families.

The built-in families are

``pseudo_hermitian_hyperbolic``
    ``t sz + i x sy - i y sx + a0 I`` with ``(t, x, y)`` on the hyperboloid
    ``t^2 - x^2 - y^2 = l^2``; free parameters ``(lambda, xi)``.  Ships the
    closed-form biorthogonal frame and Hermitizing map.
``pseudo_hermitian_cartesian``
    the same matrix with free parameters ``(t, x, y)``; covers the broken phase.
``qwz``
    the Hermitian two-band Qi-Wu-Zhang Chern insulator, free parameters ``(kx, ky)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.linalg import expm

from .biortho import BiorthFrame
from .errors import InvalidRadius, ValidationError

__all__ = [
    "SIGMA_X",
    "SIGMA_Y",
    "SIGMA_Z",
    "ModelSpec",
    "HamiltonianField",
    "build_pseudo_hermitian",
    "hyperbolic_point",
    "analytic_eigenframe",
    "analytic_hermitizing_map",
    "build_hermitian_qwz",
    "classify_phase",
    "make_model",
    "random_pseudo_hermitian",
    "MODEL_NAMES",
]

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY_2 = np.eye(2, dtype=complex)


@dataclass(frozen=True)
class ModelSpec:
    name: str
    param_names: tuple
    dim: int
    fixed_params: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if not self.param_names or len(set(self.param_names)) != len(self.param_names):
            raise ValidationError("param_names", "must be non-empty and distinct")
        if self.dim < 1:
            raise ValidationError("dim", "must be positive")


@dataclass(frozen=True)
class HamiltonianField:
    """A Hamiltonian ``H(p)`` over a parameter space plus optional closed forms.

    ``analytic_dS`` maps a parameter name to ``p -> dS/dp_name``.
    ``preferred_step`` optionally gives a finite-difference step per parameter
    (used by sampled models whose resolution is fixed by a grid).
    """

    spec: ModelSpec
    evaluator: Callable[[np.ndarray], np.ndarray]
    analytic_frame: Callable[[np.ndarray], BiorthFrame] | None = None
    analytic_S: Callable[[np.ndarray], np.ndarray] | None = None
    analytic_dS: Mapping[str, Callable[[np.ndarray], np.ndarray]] | None = None
    preferred_step: Mapping[str, float] | None = None

    @property
    def param_names(self):
        return self.spec.param_names

    def __call__(self, p) -> np.ndarray:
        return self.evaluator(np.asarray(p, dtype=float))

    def point(self, **coords) -> np.ndarray:
        """Parameter vector from keyword coordinates, e.g. ``field.point(xi=1, **{'lambda': 0})``."""
        missing = set(self.param_names) - set(coords)
        if missing:
            raise ValidationError("point", f"missing coordinates {sorted(missing)}")
        return np.array([float(coords[n]) for n in self.param_names])


def build_pseudo_hermitian(t: float, x: float, y: float, a0: float = 0.0) -> np.ndarray:
    return t * SIGMA_Z + 1j * x * SIGMA_Y - 1j * y * SIGMA_X + a0 * IDENTITY_2


def hyperbolic_point(l: float, xi: float, lam: float):
    """Map ``(l, xi, lambda)`` to Cartesian ``(t, x, y)`` on the hyperboloid of radius ``l``."""
    if not l > 0:
        raise InvalidRadius(f"l must be positive, got {l}")
    return l * np.cosh(xi), l * np.sinh(xi) * np.cos(lam), l * np.sinh(xi) * np.sin(lam)


def classify_phase(t: float, x: float, y: float) -> str:
    """``'exact'`` when ``t^2 - x^2 - y^2 > 0`` (real spectrum), otherwise ``'broken'``."""
    return "exact" if t * t - x * x - y * y > 0 else "broken"


def analytic_eigenframe(xi: float, lam: float, l: float = 1.0, a0: float = 0.0) -> BiorthFrame:
    """Closed-form biorthonormal frame of the hyperbolic model, bands ordered ``(-, +)``.

    The left rows are the conjugates of the left kets
    ``(e^{-i lam} sinh(xi/2), cosh(xi/2))`` and ``(e^{-i lam} cosh(xi/2), sinh(xi/2))``.
    """
    s, c = np.sinh(xi / 2), np.cosh(xi / 2)
    e = np.exp(-1j * lam)
    R = np.array([[-e * s, e * c], [c, -s]], dtype=complex)
    L = np.array([[np.conj(e) * s, c], [np.conj(e) * c, s]], dtype=complex)
    return BiorthFrame(R, L, np.array([a0 - l, a0 + l], dtype=complex))


def analytic_hermitizing_map(xi: float, lam: float) -> np.ndarray:
    """Minimal Hermitizing map ``S = sqrt(D) W^dagger`` of the hyperbolic model's metric."""
    a, b = np.exp(-xi / 2), np.exp(xi / 2)
    ph = np.exp(1j * lam)
    return np.array([[-a * ph, a], [b * ph, b]], dtype=complex) / np.sqrt(2.0)


def build_hermitian_qwz(m: float, kx: float, ky: float) -> np.ndarray:
    return (np.sin(kx) * SIGMA_X + np.sin(ky) * SIGMA_Y
            + (m - np.cos(kx) - np.cos(ky)) * SIGMA_Z)


def _hyperbolic_model(l: float = 1.0, a0: float = 0.0) -> HamiltonianField:
    if not l > 0:
        raise InvalidRadius(f"l must be positive, got {l}")
    spec = ModelSpec("pseudo_hermitian_hyperbolic", ("lambda", "xi"), 2, {"l": l, "a0": a0})

    def H(p):
        lam, xi = p
        return build_pseudo_hermitian(*hyperbolic_point(l, xi, lam), a0)

    def frame(p):
        lam, xi = p
        return analytic_eigenframe(xi, lam, l, a0)

    def S(p):
        lam, xi = p
        return analytic_hermitizing_map(xi, lam)

    gamma_lam = np.diag([1j, 0.0])
    gamma_xi_left = np.diag([-0.5, 0.5]).astype(complex)
    dS = {
        "lambda": lambda p: S(p) @ gamma_lam,
        "xi": lambda p: gamma_xi_left @ S(p),
    }
    return HamiltonianField(spec, H, analytic_frame=frame, analytic_S=S, analytic_dS=dS)


def _cartesian_model(a0: float = 0.0) -> HamiltonianField:
    spec = ModelSpec("pseudo_hermitian_cartesian", ("t", "x", "y"), 2, {"a0": a0})
    return HamiltonianField(spec, lambda p: build_pseudo_hermitian(p[0], p[1], p[2], a0))


def _qwz_model(m: float = 1.0) -> HamiltonianField:
    spec = ModelSpec("qwz", ("kx", "ky"), 2, {"m": m})
    return HamiltonianField(spec, lambda p: build_hermitian_qwz(m, p[0], p[1]))


_REGISTRY = {
    "pseudo_hermitian_hyperbolic": (_hyperbolic_model, {"l": 1.0, "a0": 0.0}),
    "pseudo_hermitian_cartesian": (_cartesian_model, {"a0": 0.0}),
    "qwz": (_qwz_model, {"m": 1.0}),
}
MODEL_NAMES = tuple(_REGISTRY)


def model_defaults(name: str) -> dict:
    if name not in _REGISTRY:
        raise ValidationError("model", f"unknown model {name!r}; choose from {list(MODEL_NAMES)}")
    return dict(_REGISTRY[name][1])


def make_model(name: str, **params) -> HamiltonianField:
    """Build a registered model by name; unknown fixed parameters are rejected."""
    defaults = model_defaults(name)
    unknown = set(params) - set(defaults)
    if unknown:
        raise ValidationError("model_params", f"unknown parameter(s) {sorted(unknown)} for {name}")
    defaults.update({k: float(v) for k, v in params.items()})
    return _REGISTRY[name][0](**defaults)


def random_pseudo_hermitian(N: int, seed: int, spacing: float = 1.0) -> HamiltonianField:
    """Smooth two-parameter family ``Q(p) diag(E(p)) Q(p)^{-1}`` with real, separated ``E``.

    Every member is pseudo-Hermitian with respect to ``(Q Q^dagger)^{-1}``.
    """
    rng = np.random.default_rng(seed)
    Q0 = rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N)) + 2.0 * np.eye(N)
    K = [0.3 * (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))) for _ in range(2)]
    E0 = spacing * np.arange(N) + 0.1 * rng.normal(size=N)
    dE = [0.1 * spacing * rng.uniform(-1, 1, size=N) for _ in range(2)]
    spec = ModelSpec(f"random_pseudo_hermitian_{N}_{seed}", ("p1", "p2"), N, {})

    def H(p):
        Q = Q0 @ expm(p[0] * K[0] + p[1] * K[1])
        E = E0 + p[0] * dE[0] + p[1] * dE[1]
        return (Q * E) @ np.linalg.inv(Q)

    return HamiltonianField(spec, H)
