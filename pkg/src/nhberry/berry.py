"""Berry connections of biorthogonal eigenframes.

Conventions: a connection component is the matrix
``A^mu_{mn} = i <bra_m| d_mu ket_n>`` over the selected bands.  The covariant
Berry connection (CBC) adds the metric connection,
``A^mu = i L (d_mu R + Gamma^mu R) = i R^dagger eta (d_mu + Gamma^mu) R``,
and is Hermitian in every frame.  Derivatives of frames are central
differences of a gauge-smooth :class:`~nhberry.biortho.FrameField`.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .biortho import FrameField, FrameTransform
from .errors import CrossCheckFailure, DimensionMismatch, NotUnitaryFrame, SingularInput
from .metric import GammaField, hermitizing_field, metric_connection, metric_from_left
from .numeric import DEFAULT_TOL, Tolerances, finite_diff, hermitian_part_residual

__all__ = [
    "CONVENTIONAL_KINDS",
    "KINDS",
    "ConnectionField",
    "Distortion",
    "conventional_connections",
    "covariant_connection",
    "hermitian_frame_connection",
    "distortion_tensor",
    "affine_transform",
    "transition_operator",
    "transition_residual",
    "transform_matrix",
    "ConnectionProvider",
    "DistortionProvider",
]

CONVENTIONAL_KINDS = ("LL", "LR", "RL", "RR")
KINDS = CONVENTIONAL_KINDS + ("CBC", "HERMITIAN_FRAME")


@dataclass(frozen=True)
class ConnectionField:
    components: dict
    point: np.ndarray
    kind: str
    bands: tuple = ()
    diagnostics: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.components[name]

    def hermiticity_residual(self) -> float:
        return max(hermitian_part_residual(A) for A in self.components.values())


@dataclass(frozen=True)
class Distortion:
    components: dict
    point: np.ndarray | None = None

    def __getitem__(self, name):
        return self.components[name]


def _bands(frame, bands):
    return tuple(range(frame.R.shape[1])) if bands is None else tuple(int(b) for b in bands)


def _frame_derivatives(frames, p, step):
    """Central differences of R and of the left kets (columns of L^dagger)."""
    dR, dLk = [], []
    for k in range(len(p)):
        e = np.zeros_like(p)
        e[k] = step
        fp, fm = frames(p + e), frames(p - e)
        dR.append((fp.R - fm.R) / (2 * step))
        dLk.append((fp.L.conj().T - fm.L.conj().T) / (2 * step))
    return dR, dLk


def conventional_connections(frames, point, step: float = DEFAULT_TOL.step, bands=None) -> dict:
    """The four pairings ``i <psi^a_m| d psi^b_n>`` for ``a, b`` in ``{L, R}``."""
    p = np.asarray(point, dtype=float)
    f0 = frames(p)
    b = list(_bands(f0, bands))
    dR, dLk = _frame_derivatives(frames, p, step)
    bra = {"L": f0.L[b, :], "R": f0.R[:, b].conj().T}
    out = {k: {} for k in CONVENTIONAL_KINDS}
    for k, name in enumerate(frames.param_names):
        dket = {"R": dR[k][:, b], "L": dLk[k][:, b]}
        for kind in CONVENTIONAL_KINDS:
            out[kind][name] = 1j * bra[kind[0]] @ dket[kind[1]]
    return {kind: ConnectionField(comps, p, kind, tuple(b)) for kind, comps in out.items()}


def covariant_connection(frame, eta, gamma: GammaField, frames, point, step: float = DEFAULT_TOL.step,
                         bands=None, verify: bool = True, xcheck_tol: float = DEFAULT_TOL.xcheck_tol,
                         dR=None) -> ConnectionField:
    """Covariant Berry connection at ``point``.

    Evaluates both ``i L (dR + Gamma R)`` (returned) and
    ``i R^dagger eta (dR + Gamma R)``; with ``verify`` a disagreement beyond
    ``xcheck_tol`` raises :class:`CrossCheckFailure`.  The Hermiticity residual
    is reported in ``diagnostics``.
    """
    p = np.asarray(point, dtype=float)
    b = list(_bands(frame, bands))
    if dR is None:
        dR, _ = _frame_derivatives(frames, p, step)
    Rb = frame.R[:, b]
    Lb = frame.L[b, :]
    bra_eta = Rb.conj().T @ eta
    comps, worst = {}, 0.0
    for k, name in enumerate(frames.param_names):
        cov = dR[k][:, b] + gamma[name] @ Rb
        comps[name] = 1j * Lb @ cov
        alt = 1j * bra_eta @ cov
        worst = max(worst, float(np.linalg.norm(comps[name] - alt)))
    scale = max(1.0, max(np.linalg.norm(A) for A in comps.values()))
    if verify and worst > xcheck_tol * scale:
        raise CrossCheckFailure(f"eta-form and left-form CBC differ by {worst:.3g} at {p.tolist()}")
    out = ConnectionField(comps, p, "CBC", tuple(b), {"eta_vs_left": worst})
    out.diagnostics["hermiticity"] = out.hermiticity_residual()
    return out


def hermitian_frame_connection(S_field, frames, point, step: float = DEFAULT_TOL.step, bands=None,
                               tol_unitary: float = 1e-8) -> ConnectionField:
    """``i Phi^dagger d Phi`` with ``Phi = S R`` the eigenframe of the Hermitized Hamiltonian."""
    p = np.asarray(point, dtype=float)
    f0 = frames(p)
    b = list(_bands(f0, bands))

    def phi(q):
        return np.asarray(S_field(q)) @ frames(q).R[:, b]

    P0 = phi(p)
    dev = float(np.linalg.norm(P0.conj().T @ P0 - np.eye(len(b))))
    if dev > tol_unitary:
        raise NotUnitaryFrame(f"Hermitian-frame vectors deviate from orthonormal by {dev:.3g}")
    comps = {name: 1j * P0.conj().T @ finite_diff(phi, p, k, step)
             for k, name in enumerate(frames.param_names)}
    out = ConnectionField(comps, p, "HERMITIAN_FRAME", tuple(b), {"unitarity": dev})
    out.diagnostics["hermiticity"] = out.hermiticity_residual()
    return out


def distortion_tensor(frame, eta, gamma: GammaField, gamma_prime: GammaField, bands=None) -> Distortion:
    """``Xi^mu = i <R| eta (Gamma'^mu - Gamma^mu) |R>`` over the selected bands of the base frame."""
    b = list(_bands(frame, bands))
    if set(gamma.components) != set(gamma_prime.components):
        raise DimensionMismatch("metric connections have different components")
    Rb = frame.R[:, b]
    bra = Rb.conj().T @ eta
    comps = {}
    for name, G in gamma.components.items():
        Gp = gamma_prime[name]
        if Gp.shape != G.shape or G.shape[0] != eta.shape[0]:
            raise DimensionMismatch(f"component {name!r}: {G.shape} vs {Gp.shape}")
        comps[name] = 1j * bra @ (Gp - G) @ Rb
    return Distortion(comps, gamma.point)


def transform_matrix(T):
    return T.T if isinstance(T, FrameTransform) else np.asarray(T, dtype=complex)


def affine_transform(connection: ConnectionField, distortion: Distortion, T_field, point,
                     step: float = DEFAULT_TOL.step, verify_against: ConnectionField | None = None,
                     xcheck_tol: float = DEFAULT_TOL.xcheck_tol) -> ConnectionField:
    """``A' = T^{-1} (A + Xi) T + i T^{-1} d T`` componentwise.

    With ``verify_against`` (the connection recomputed in the primed frame)
    a mismatch beyond ``xcheck_tol`` raises :class:`CrossCheckFailure`.
    """
    p = np.asarray(point, dtype=float)
    T0 = transform_matrix(T_field(p))
    k = next(iter(connection.components.values())).shape[0]
    if T0.shape != (k, k):
        raise DimensionMismatch(f"transform {T0.shape} does not act on {k} bands")
    Ti = np.linalg.inv(T0)
    comps = {}
    for i, (name, A) in enumerate(connection.components.items()):
        dT = finite_diff(lambda q: transform_matrix(T_field(q)), p, i, step)
        comps[name] = Ti @ (A + distortion[name]) @ T0 + 1j * Ti @ dT
    out = ConnectionField(comps, p, connection.kind, connection.bands)
    out.diagnostics["hermiticity"] = out.hermiticity_residual()
    if verify_against is not None:
        diff = max(float(np.linalg.norm(comps[n] - verify_against[n])) for n in comps)
        out.diagnostics["law_vs_direct"] = diff
        if diff > xcheck_tol:
            raise CrossCheckFailure(f"affine law and direct CBC differ by {diff:.3g}")
    return out


def transition_operator(phi_prime, T, phi) -> np.ndarray:
    """``M = Phi' T^{-1} Phi^dagger``, the map with ``S' = M S``."""
    T = transform_matrix(T)
    if abs(np.linalg.det(T)) <= DEFAULT_TOL.det_floor:
        raise SingularInput("frame transform is singular")
    return np.asarray(phi_prime) @ np.linalg.inv(T) @ np.asarray(phi).conj().T


def transition_residual(S_field, S_prime_field, frames, frames_prime, T_field, point,
                        step: float = DEFAULT_TOL.step):
    """Check ``S' = M S`` and ``Gamma' - Gamma = S^{-1} (M^{-1} dM) S`` at ``point``.

    Returns ``(M, recon_residual, gamma_residual)``.
    """
    p = np.asarray(point, dtype=float)

    def M_at(q):
        phi = np.asarray(S_field(q)) @ frames(q).R
        phi_p = np.asarray(S_prime_field(q)) @ frames_prime(q).R
        return transition_operator(phi_p, T_field(q), phi)

    M = M_at(p)
    S = np.asarray(S_field(p))
    recon = float(np.linalg.norm(np.asarray(S_prime_field(p)) - M @ S))
    G = metric_connection(S_field, p, step, analytic=False)
    Gp = metric_connection(S_prime_field, p, step, analytic=False)
    Mi, Si = np.linalg.inv(M), np.linalg.inv(S)
    worst = 0.0
    for k, name in enumerate(G.components):
        dM = finite_diff(M_at, p, k, step)
        worst = max(worst, float(np.linalg.norm((Gp[name] - G[name]) - Si @ Mi @ dM @ S)))
    return M, recon, worst


class ConnectionProvider:
    """Evaluate one connection kind at arbitrary points with a locally smooth gauge.

    Calling the provider at ``p`` anchors numeric gauges at ``p``.  For
    derivatives of the connection itself (curvature) use :meth:`anchored` so
    all stencil points share one gauge.
    """

    def __init__(self, kind: str, frames: FrameField, S_field=None, bands=None,
                 step: float = DEFAULT_TOL.step, tol: Tolerances = DEFAULT_TOL, verify: bool = True,
                 analytic_gamma: bool = True, _anchored: bool = False):
        if kind not in KINDS:
            raise ValueError(f"unknown connection kind {kind!r}")
        self.kind = kind
        self.frames = frames
        self.S_field = S_field
        self.bands = bands
        self.step = step
        self.tol = tol
        self.verify = verify
        self.analytic_gamma = analytic_gamma
        self._anchored = _anchored

    @property
    def param_names(self):
        return self.frames.param_names

    def _S(self):
        return self.S_field if self.S_field is not None else hermitizing_field(self.frames, self.tol)

    def anchored(self, p0) -> "ConnectionProvider":
        frames = self.frames.anchored(p0)
        S = None
        if self.kind in ("CBC", "HERMITIAN_FRAME"):
            S = self._S()
            S = S.anchored(p0) if hasattr(S, "anchored") else S
        return ConnectionProvider(self.kind, frames, S, self.bands, self.step, self.tol,
                                  self.verify, self.analytic_gamma, _anchored=True)

    def __call__(self, p) -> ConnectionField:
        p = np.asarray(p, dtype=float)
        if not self._anchored:
            return self.anchored(p)(p)
        if self.kind in CONVENTIONAL_KINDS:
            return conventional_connections(self.frames, p, self.step, self.bands)[self.kind]
        if self.kind == "HERMITIAN_FRAME":
            return hermitian_frame_connection(self.S_field, self.frames, p, self.step, self.bands)
        frame = self.frames(p)
        eta = metric_from_left(frame.L, cond_max=self.tol.cond_max)
        gamma = metric_connection(self.S_field, p, self.step, analytic=self.analytic_gamma)
        return covariant_connection(frame, eta, gamma, self.frames, p, self.step, self.bands,
                                    verify=self.verify, xcheck_tol=self.tol.xcheck_tol)


class DistortionProvider:
    """``p -> Xi(p)`` for the frame change ``T_field`` applied to ``frames``."""

    def __init__(self, frames: FrameField, T_field, bands=None, step: float = DEFAULT_TOL.step,
                 tol: Tolerances = DEFAULT_TOL, _anchored: bool = False, _S=None, _Sp=None):
        self.frames = frames
        self.T_field = T_field
        self.bands = bands
        self.step = step
        self.tol = tol
        self._anchored = _anchored
        self._S = _S
        self._Sp = _Sp

    @property
    def param_names(self):
        return self.frames.param_names

    def anchored(self, p0) -> "DistortionProvider":
        frames = self.frames.anchored(p0)
        S = hermitizing_field(frames, self.tol).anchored(p0)
        Sp = hermitizing_field(frames.transformed(self.T_field), self.tol).anchored(p0)
        return DistortionProvider(frames, self.T_field, self.bands, self.step, self.tol, True, S, Sp)

    def __call__(self, p) -> Distortion:
        p = np.asarray(p, dtype=float)
        if not self._anchored:
            return self.anchored(p)(p)
        frame = self.frames(p)
        eta = metric_from_left(frame.L, cond_max=self.tol.cond_max)
        G = metric_connection(self._S, p, self.step)
        Gp = metric_connection(self._Sp, p, self.step)
        return distortion_tensor(frame, eta, G, Gp, self.bands)
