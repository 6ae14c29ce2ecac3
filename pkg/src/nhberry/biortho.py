"""Biorthogonal eigenframes and GL(N, C) frame changes.

A frame stores right eigenvectors as the columns of ``R`` and left
eigenvectors as the rows of ``L`` (bras), with ``L @ R = I``.  A frame change
``T`` acts as ``R -> R T`` and ``L -> T^{-1} L``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DimensionMismatch, GapClosure, LostContinuity, NearDefective, SingularInput
from .numeric import DEFAULT_TOL, Tolerances, as_matrix, eig_general

__all__ = [
    "BiorthFrame",
    "FrameTransform",
    "biorthonormalize",
    "apply_transform",
    "align_frame",
    "FrameField",
    "smooth_gauge_path",
    "random_gl",
    "random_unitary",
    "normalization_rescaling",
]


@dataclass(frozen=True)
class BiorthFrame:
    R: np.ndarray
    L: np.ndarray
    energies: np.ndarray

    @property
    def dim(self) -> int:
        return self.R.shape[0]

    def biorth_residual(self) -> float:
        return float(np.linalg.norm(self.L @ self.R - np.eye(self.R.shape[1])))

    def right(self, bands=None) -> np.ndarray:
        return self.R if bands is None else self.R[:, list(bands)]

    def left(self, bands=None) -> np.ndarray:
        return self.L if bands is None else self.L[list(bands), :]


@dataclass(frozen=True)
class FrameTransform:
    T: np.ndarray
    inverse: np.ndarray

    @classmethod
    def of(cls, T, det_floor: float = DEFAULT_TOL.det_floor, tol_recon: float = 1e-8) -> "FrameTransform":
        T = as_matrix(T, "T")
        if abs(np.linalg.det(T)) <= det_floor:
            raise SingularInput("frame transform is singular")
        Ti = np.linalg.inv(T)
        if np.linalg.norm(T @ Ti - np.eye(T.shape[0])) > tol_recon * max(1.0, np.linalg.cond(T)):
            raise SingularInput("frame transform inverse is inaccurate")
        return cls(T, Ti)


def biorthonormalize(R_raw, energies, cond_max: float = DEFAULT_TOL.cond_max) -> BiorthFrame:
    """Pair right vectors with the rows of ``R^{-1}``."""
    R = as_matrix(R_raw, "R")
    cond = np.linalg.cond(R)
    if not np.isfinite(cond) or cond > cond_max:
        raise NearDefective(f"right frame condition number {cond:.3g} exceeds {cond_max:.3g}")
    return BiorthFrame(R, np.linalg.inv(R), np.asarray(energies, dtype=complex))


def apply_transform(frame: BiorthFrame, T: FrameTransform | np.ndarray) -> BiorthFrame:
    if not isinstance(T, FrameTransform):
        T = FrameTransform.of(T)
    if T.T.shape[0] != frame.R.shape[1]:
        raise DimensionMismatch(f"transform is {T.T.shape}, frame has {frame.R.shape[1]} vectors")
    return BiorthFrame(frame.R @ T.T, T.inverse @ frame.L, frame.energies)


def align_frame(frame: BiorthFrame, reference: BiorthFrame) -> BiorthFrame:
    """Permute and re-phase ``frame`` to sit as close as possible to ``reference``.

    Columns are paired by a Hungarian assignment on ``|<L_ref_i|R_j>|^2``; each
    right vector then keeps its 2-norm but is rotated so that ``<L_ref_k|R_k>``
    is real positive.  The left frame follows as ``R^{-1}``.
    """
    ov = reference.L @ frame.R
    rows, cols = linear_sum_assignment(-np.abs(ov) ** 2)
    perm = cols[np.argsort(rows)]
    R = frame.R[:, perm].copy()
    E = frame.energies[perm]
    d = np.einsum("ij,ji->i", reference.L, R)
    mags = np.abs(d)
    ok = mags > 1e-14
    R[:, ok] *= (mags[ok] / d[ok])[None, :]
    return BiorthFrame(R, np.linalg.inv(R), E)


def _numeric_frame(H, tol: Tolerances) -> BiorthFrame:
    es = eig_general(H, tol_eig=tol.tol_eig, cond_max=tol.cond_max, tol_biorth=tol.tol_biorth)
    return BiorthFrame(es.right, es.left, es.eigenvalues)


class FrameField:
    """Parameter -> biorthogonal frame, in a gauge that is smooth near the points it is used at.

    Frames come from the model's closed form when one is registered.  Otherwise
    they are computed numerically and, when ``reference`` is set (see
    :meth:`anchored`), aligned to that reference frame.  An optional
    ``transform`` callable ``p -> T(p)`` is applied last.
    """

    def __init__(self, field, *, reference: BiorthFrame | None = None, transform=None,
                 use_analytic: bool = True, tol: Tolerances = DEFAULT_TOL):
        self.field = field
        self.reference = reference
        self.transform = transform
        self.use_analytic = use_analytic and field.analytic_frame is not None
        self.tol = tol

    @property
    def param_names(self):
        return self.field.param_names

    @property
    def is_analytic(self) -> bool:
        return self.use_analytic

    def base(self, p) -> BiorthFrame:
        p = np.asarray(p, dtype=float)
        if self.use_analytic:
            return self.field.analytic_frame(p)
        frame = _numeric_frame(self.field(p), self.tol)
        if self.reference is not None:
            frame = align_frame(frame, self.reference)
        return frame

    def __call__(self, p) -> BiorthFrame:
        frame = self.base(p)
        if self.transform is not None:
            frame = apply_transform(frame, self.transform(np.asarray(p, dtype=float)))
        return frame

    def anchored(self, p0) -> "FrameField":
        """Same field, with numeric gauges aligned to the base frame at ``p0``."""
        if self.use_analytic:
            return self
        ref = _numeric_frame(self.field(np.asarray(p0, dtype=float)), self.tol)
        return FrameField(self.field, reference=ref, transform=self.transform,
                          use_analytic=False, tol=self.tol)

    def transformed(self, T_field) -> "FrameField":
        """Compose an extra frame change ``p -> T(p)`` after any existing one."""
        if self.transform is None:
            new = T_field
        else:
            old = self.transform

            def new(p):
                return _as_T(old(p)) @ _as_T(T_field(p))
        return FrameField(self.field, reference=self.reference, transform=new,
                          use_analytic=self.use_analytic, tol=self.tol)


def _as_T(T):
    return T.T if isinstance(T, FrameTransform) else np.asarray(T)


def _min_gap(E: np.ndarray) -> float:
    if E.size < 2:
        return np.inf
    d = np.abs(E[:, None] - E[None, :])
    d[np.diag_indices_from(d)] = np.inf
    return float(d.min())


def smooth_gauge_path(field, path, tol: Tolerances = DEFAULT_TOL) -> list:
    """Frames along a path, each matched to its predecessor.

    The first frame is the model's closed form if available, otherwise the
    numeric-core convention.  Each later frame is permuted (Hungarian) and
    rescaled by a complex factor per band so that its norms continue the
    previous frame's and ``<R_prev_k|R_k>`` is real positive.
    """
    points = getattr(path, "points", path)
    frames = []
    prev = None
    for p in np.asarray(points, dtype=float):
        H = field(p)
        gap = _min_gap(np.linalg.eigvals(H))
        if gap < tol.gap_floor:
            raise GapClosure(f"eigenvalue gap {gap:.3g} below {tol.gap_floor:.3g} at {p.tolist()}")
        if prev is None:
            frame = field.analytic_frame(p) if field.analytic_frame is not None else _numeric_frame(H, tol)
        else:
            frame = _numeric_frame(H, tol)
            ov = prev.R.conj().T @ frame.R
            norms_prev = np.linalg.norm(prev.R, axis=0)
            norms = np.linalg.norm(frame.R, axis=0)
            cos = np.abs(ov) / np.outer(norms_prev, norms)
            rows, cols = linear_sum_assignment(-cos)
            perm = cols[np.argsort(rows)]
            best = cos[np.arange(len(perm)), perm]
            if best.min() < tol.overlap_floor:
                raise LostContinuity(f"frame overlap {best.min():.3g} below {tol.overlap_floor} at {p.tolist()}")
            R = frame.R[:, perm]
            d = np.einsum("ij,ij->j", prev.R.conj(), R)
            R = R * (np.abs(d) / d)[None, :] * (norms_prev / norms[perm])[None, :]
            frame = BiorthFrame(R, np.linalg.inv(R), frame.energies[perm])
        frames.append(frame)
        prev = frame
    return frames


def random_unitary(N: int, rng: np.random.Generator) -> np.ndarray:
    Z = (rng.normal(size=(N, N)) + 1j * rng.normal(size=(N, N))) / np.sqrt(2)
    Q, Rq = np.linalg.qr(Z)
    d = np.diag(Rq)
    return Q * (d / np.abs(d))[None, :]


def random_gl(N: int, seed: int, log_scale: float) -> FrameTransform:
    """Seeded ``T = U P`` with Haar-random ``U`` and ``log eig(P)`` uniform in ``[-log_scale, log_scale]``."""
    if N < 1 or log_scale < 0:
        raise ValueError("need N >= 1 and log_scale >= 0")
    rng = np.random.default_rng(seed)
    U = random_unitary(N, rng)
    V = random_unitary(N, rng)
    logs = rng.uniform(-log_scale, log_scale, size=N)
    P = (V * np.exp(logs)) @ V.conj().T
    T = U @ ((P + P.conj().T) / 2)
    Ti = (V * np.exp(-logs)) @ V.conj().T @ U.conj().T
    return FrameTransform(T, Ti)


def normalization_rescaling(frame: BiorthFrame) -> FrameTransform:
    """Diagonal ``T`` that rescales every right vector to unit 2-norm (left vectors get the inverse)."""
    n = np.linalg.norm(frame.R, axis=0)
    return FrameTransform(np.diag(1.0 / n).astype(complex), np.diag(n).astype(complex))
