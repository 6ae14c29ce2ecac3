"""Hilbert-space metric, Hermitizing map and the metric-compatible connection.

For a biorthogonal frame the metric is ``eta = L^dagger L``.  It is factored
as ``eta = W D W^dagger`` and the minimal Hermitizing map is
``S = sqrt(D) W^dagger`` so that ``S^dagger S = eta``.  The metric connection
is the pure-gauge form ``Gamma^mu = S^{-1} d_mu S``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateMetric,
    NearDefective,
    NotPositiveDefinite,
    SingularS,
    StencilCrossesDegeneracy,
)
from .numeric import DEFAULT_TOL, Tolerances, as_matrix, finite_diff, fix_column_phases, sqrt_posdef

__all__ = [
    "MetricData",
    "GammaField",
    "metric_from_left",
    "hermitizing_map",
    "unitary_factor",
    "HermitizingField",
    "hermitizing_field",
    "metric_connection",
    "compatibility_residual",
    "flatness_residual",
    "hermitize_hamiltonian",
]


@dataclass(frozen=True)
class MetricData:
    eta: np.ndarray
    W: np.ndarray
    D: np.ndarray
    S: np.ndarray
    degenerate: bool = False
    scalar: bool = False


@dataclass(frozen=True)
class GammaField:
    components: dict
    point: np.ndarray

    def __getitem__(self, name):
        return self.components[name]


def metric_from_left(L, cond_max: float = DEFAULT_TOL.cond_max) -> np.ndarray:
    """``eta = sum_i |psi^L_i><psi^L_i| = L^dagger L`` for a left frame with bras as rows."""
    L = as_matrix(L, "L")
    cond = np.linalg.cond(L)
    if not np.isfinite(cond) or cond > cond_max:
        raise NearDefective(f"left frame condition number {cond:.3g} exceeds {cond_max:.3g}")
    eta = L.conj().T @ L
    return (eta + eta.conj().T) / 2


def unitary_factor(S: np.ndarray) -> np.ndarray:
    """Recover ``W`` from ``S = sqrt(D) W^dagger`` by normalizing the rows of ``S``."""
    S = np.asarray(S)
    return (S / np.linalg.norm(S, axis=1)[:, None]).conj().T


def hermitizing_map(eta, reference=None, tol: Tolerances = DEFAULT_TOL, strict: bool = False) -> MetricData:
    """Minimal Hermitizing map of a positive-definite metric.

    ``W`` has its columns ordered by ascending eigenvalue.  Column phases
    follow ``reference`` when given (``<W_ref_j|W_j>`` real positive), else the
    pivot convention (largest entry real positive).  A metric proportional to
    the identity gets ``W = I`` and ``S = sqrt(eta)``.  Other near-degenerate
    spectra are flagged via ``MetricData.degenerate`` (raised with ``strict``).
    """
    eta = as_matrix(eta, "eta")
    scale = max(np.linalg.norm(eta), 1.0)
    if np.linalg.norm(eta - eta.conj().T) > tol.tol_herm * scale:
        raise NotPositiveDefinite("metric is not Hermitian")
    eta = (eta + eta.conj().T) / 2
    D, W = np.linalg.eigh(eta)
    if D[0] <= tol.posdef_floor:
        raise NotPositiveDefinite(f"metric eigenvalue {D[0]:.3g} <= {tol.posdef_floor:.3g}")
    spread = np.diff(D) / D[-1]
    degenerate = bool(np.any(spread <= tol.deg_floor))
    if D.size == 1 or (D[-1] - D[0]) <= tol.deg_floor * D[-1]:
        ident = np.eye(D.size, dtype=complex)
        if np.linalg.norm(eta - ident) <= tol.tol_herm:
            # Hermitian limit: exact identity keeps Gamma exactly zero
            return MetricData(eta, ident, D, ident, degenerate=D.size > 1, scalar=True)
        S = sqrt_posdef(eta, tol_herm=tol.tol_herm, posdef_floor=tol.posdef_floor)
        return MetricData(eta, np.eye(D.size, dtype=complex), D, S, degenerate=D.size > 1, scalar=True)
    if degenerate and strict:
        raise DegenerateMetric(f"metric eigenvalues closer than {tol.deg_floor:g} (relative)")
    W = fix_column_phases(W, normalize=False)
    if reference is not None:
        ref = np.asarray(reference)
        d = np.einsum("ij,ij->j", ref.conj(), W)
        ok = np.abs(d) > 1e-6
        W[:, ok] *= (np.abs(d[ok]) / d[ok])[None, :]
    S = np.sqrt(D)[:, None] * W.conj().T
    return MetricData(eta, W, D, S, degenerate=degenerate)


class HermitizingField:
    """Parameter -> ``S(p)`` for the metric of a frame field.

    Uses a registered closed form when the frames are the model's own closed
    form; otherwise factors ``eta(p)`` numerically with column phases following
    ``reference`` (a fixed ``W`` or a callable ``p -> W``).
    """

    def __init__(self, frames, *, analytic=None, derivative=None, reference=None,
                 tol: Tolerances = DEFAULT_TOL):
        self.frames = frames
        self.analytic = analytic
        self.derivative = derivative
        self.reference = reference
        self.tol = tol

    @property
    def param_names(self):
        return self.frames.param_names

    def eta(self, p) -> np.ndarray:
        return metric_from_left(self.frames(p).L, cond_max=self.tol.cond_max)

    def data(self, p) -> MetricData:
        p = np.asarray(p, dtype=float)
        eta = self.eta(p)
        if self.analytic is not None:
            S = self.analytic(p)
            D = np.linalg.norm(S, axis=1) ** 2
            return MetricData(eta, unitary_factor(S), D, S)
        ref = self.reference(p) if callable(self.reference) else self.reference
        return hermitizing_map(eta, reference=ref, tol=self.tol)

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.analytic is not None:
            return self.analytic(p)
        return self.data(p).S

    def anchored(self, p0) -> "HermitizingField":
        frames = self.frames.anchored(p0) if hasattr(self.frames, "anchored") else self.frames
        ref = self.reference
        if self.analytic is None and ref is None:
            ref = HermitizingField(frames, tol=self.tol).data(p0).W
        return HermitizingField(frames, analytic=self.analytic, derivative=self.derivative,
                                reference=ref, tol=self.tol)


def hermitizing_field(frames, tol: Tolerances = DEFAULT_TOL) -> HermitizingField:
    """Pick the Hermitizing-map route for a frame field.

    * untransformed closed-form frames -> the registered closed-form ``S``;
    * transformed closed-form frames -> numeric ``S'`` with ``W'`` phases
      following the closed-form ``W`` at the same point;
    * numeric frames -> numeric ``S`` (call :meth:`HermitizingField.anchored`
      before differentiating).
    """
    field = frames.field
    if field.analytic_S is not None and getattr(frames, "is_analytic", False):
        if frames.transform is None:
            return HermitizingField(frames, analytic=field.analytic_S, derivative=field.analytic_dS, tol=tol)
        return HermitizingField(frames, reference=lambda p: unitary_factor(field.analytic_S(p)), tol=tol)
    return HermitizingField(frames, tol=tol)


def _names(S_field, point):
    names = getattr(S_field, "param_names", None)
    return tuple(names) if names is not None else tuple(range(len(point)))


def metric_connection(S_field, point, step: float = DEFAULT_TOL.step, analytic: bool = True) -> GammaField:
    """``Gamma^mu = S^{-1} d_mu S`` at ``point`` for every parameter component.

    Registered closed-form derivatives are used when ``analytic`` is true;
    otherwise the derivative is a central difference with ``step``.  Numeric
    Hermitizing fields raise :class:`StencilCrossesDegeneracy` if a stencil
    point has a degenerate (non-scalar) metric.
    """
    p = np.asarray(point, dtype=float)
    names = _names(S_field, p)
    derivative = getattr(S_field, "derivative", None) if analytic else None
    numeric = hasattr(S_field, "data") and getattr(S_field, "analytic", None) is None

    def S_at(q):
        if not numeric:
            return np.asarray(S_field(q))
        md = S_field.data(q)
        if md.degenerate and not md.scalar:
            raise StencilCrossesDegeneracy(f"degenerate metric within stencil at {q.tolist()}")
        return md.S

    S0_inv = np.linalg.inv(S_at(p))
    comps = {}
    for k, name in enumerate(names):
        if derivative is not None and name in derivative:
            dS = derivative[name](p)
        else:
            dS = finite_diff(S_at, p, k, step)
        comps[name] = S0_inv @ dS
    return GammaField(comps, p)


def compatibility_residual(eta_field, gamma: GammaField, point, step: float = DEFAULT_TOL.step) -> float:
    """``max_mu || d_mu eta - eta Gamma^mu - Gamma^mu^dagger eta ||_F``."""
    p = np.asarray(point, dtype=float)
    eta = np.asarray(eta_field(p))
    worst = 0.0
    for k, (name, G) in enumerate(gamma.components.items()):
        d_eta = finite_diff(eta_field, p, k, step)
        worst = max(worst, float(np.linalg.norm(d_eta - eta @ G - G.conj().T @ eta)))
    return worst


def flatness_residual(S_field, point, mu, nu, step: float = 1e-4, analytic: bool = False) -> float:
    """``|| d_mu Gamma^nu - d_nu Gamma^mu + [Gamma^mu, Gamma^nu] ||_F``.

    ``mu`` and ``nu`` are parameter names or indices.
    """
    p = np.asarray(point, dtype=float)
    names = _names(S_field, p)
    imu = names.index(mu) if mu in names else int(mu)
    inu = names.index(nu) if nu in names else int(nu)
    nmu, nnu = names[imu], names[inu]

    def gamma(q, name):
        return metric_connection(S_field, q, step, analytic=analytic)[name]

    d_mu_nu = finite_diff(lambda q: gamma(q, nnu), p, imu, step)
    d_nu_mu = finite_diff(lambda q: gamma(q, nmu), p, inu, step)
    G = metric_connection(S_field, p, step, analytic=analytic)
    comm = G[nmu] @ G[nnu] - G[nnu] @ G[nmu]
    return float(np.linalg.norm(d_mu_nu - d_nu_mu + comm))


def hermitize_hamiltonian(H, S, dS_dt=None, cond_max: float = DEFAULT_TOL.cond_max) -> np.ndarray:
    """``H^H = S H S^{-1} + i (dS/dt) S^{-1}``."""
    H = as_matrix(H, "H")
    S = as_matrix(S, "S")
    cond = np.linalg.cond(S)
    if not np.isfinite(cond) or cond > cond_max:
        raise SingularS(f"Hermitizing map condition number {cond:.3g}")
    S_inv = np.linalg.inv(S)
    out = S @ H @ S_inv
    if dS_dt is not None:
        out = out + 1j * np.asarray(dS_dt) @ S_inv
    return out
