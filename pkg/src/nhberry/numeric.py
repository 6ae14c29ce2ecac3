"""Dense complex linear-algebra primitives.

Everything here is a pure function of its arguments.  Matrices are plain
``numpy.ndarray`` objects of complex dtype; nothing is mutated in place.

Dense eigensolves are supported up to ``MAX_DIM`` (512) rows.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatch,
    EvaluationFailure,
    NearDefective,
    NonConvergence,
    NotPositiveDefinite,
    SingularInput,
)

__all__ = [
    "MAX_DIM",
    "Tolerances",
    "DEFAULT_TOL",
    "EigenSystem",
    "as_matrix",
    "eig_general",
    "sqrt_posdef",
    "polar_decompose",
    "finite_diff",
    "hermitian_part_residual",
    "fix_column_phases",
]

MAX_DIM = 512


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by the library; every field can be overridden."""

    tol_eig: float = 1e-10
    tol_biorth: float = 1e-10
    tol_herm: float = 1e-10
    tol_unitary: float = 1e-10
    tol_recon: float = 1e-10
    posdef_floor: float = 1e-12
    det_floor: float = 1e-300
    cond_max: float = 1e8
    step: float = 1e-5
    gap_floor: float = 1e-6
    overlap_floor: float = 0.9
    deg_floor: float = 1e-8
    xcheck_tol: float = 1e-6
    quantize_tol: float = 0.05

    def replace(self, **changes) -> "Tolerances":
        unknown = set(changes) - set(self.__dataclass_fields__)
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        values = {k: getattr(self, k) for k in self.__dataclass_fields__}
        values.update({k: float(v) for k, v in changes.items()})
        return Tolerances(**values)


DEFAULT_TOL = Tolerances()


@dataclass(frozen=True)
class EigenSystem:
    eigenvalues: np.ndarray
    right: np.ndarray  # columns |psi^R_k>
    left: np.ndarray  # rows <psi^L_k|
    condition: float


def as_matrix(M, name="matrix") -> np.ndarray:
    """Return ``M`` as a finite square complex array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] < 1:
        raise DimensionMismatch(f"{name} must be a non-empty square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise EvaluationFailure(f"{name} has non-finite entries")
    return A


def _pivot_index(v: np.ndarray, rel: float = 1e-8) -> int:
    # first entry whose magnitude is within `rel` of the maximum; stable under
    # rounding-level ties between equal-magnitude entries
    mags = np.abs(v)
    return int(np.flatnonzero(mags >= mags.max() * (1.0 - rel))[0])


def fix_column_phases(V: np.ndarray, normalize: bool = True) -> np.ndarray:
    """Scale each column to unit norm and rotate its pivot entry onto the positive real axis."""
    V = np.array(V, dtype=complex)
    for k in range(V.shape[1]):
        col = V[:, k]
        if normalize:
            col = col / np.linalg.norm(col)
        p = _pivot_index(col)
        col = col * (abs(col[p]) / col[p])
        V[:, k] = col
    return V


def _sort_order(E: np.ndarray) -> np.ndarray:
    # lexicographic (Re, Im, index); rounding keeps conjugate pairs and
    # rounding-level splits from reordering at random
    re = np.round(E.real, 10)
    im = np.round(E.imag, 10)
    return np.lexsort((np.arange(E.size), im, re))


def eig_general(M, tol_eig: float = DEFAULT_TOL.tol_eig, cond_max: float = DEFAULT_TOL.cond_max,
                tol_biorth: float = DEFAULT_TOL.tol_biorth) -> EigenSystem:
    """Eigendecomposition of a general complex matrix with a biorthonormal left frame.

    Eigenvalues are ordered by ``(Re, Im, index)``.  Each right eigenvector is
    normalized to unit 2-norm and its largest entry made real positive; the
    left eigenvectors are the rows of ``R^{-1}`` so that ``L @ R = I``.

    Raises
    ------
    NonConvergence
        LAPACK failed, or the eigen-residual is above ``tol_eig * ||M||``.
    NearDefective
        ``cond(R) > cond_max``; the matrix is close to an exceptional point.
    """
    A = as_matrix(M)
    if A.shape[0] > MAX_DIM:
        raise DimensionMismatch(f"dimension {A.shape[0]} exceeds dense limit {MAX_DIM}")
    try:
        E, R = np.linalg.eig(A)
    except np.linalg.LinAlgError as exc:
        raise NonConvergence(str(exc)) from exc
    order = _sort_order(E)
    E = E[order]
    R = fix_column_phases(R[:, order])
    cond = float(np.linalg.cond(R))
    if not np.isfinite(cond) or cond > cond_max:
        raise NearDefective(f"eigenvector condition number {cond:.3g} exceeds {cond_max:.3g}")
    L = np.linalg.inv(R)

    scale = max(np.linalg.norm(A), 1.0)
    # residuals degrade with conditioning; cond(R) is the honest amplification
    slack = max(1.0, cond)
    res_r = np.linalg.norm(A @ R - R * E)
    res_l = np.linalg.norm(L @ A - E[:, None] * L)
    if res_r > tol_eig * scale * slack or res_l > tol_eig * scale * slack:
        raise NonConvergence(f"eigen-residuals too large: right {res_r:.3g}, left {res_l:.3g}")
    bi = np.linalg.norm(L @ R - np.eye(A.shape[0]))
    if bi > tol_biorth * slack:
        raise NonConvergence(f"biorthonormality residual {bi:.3g}")
    return EigenSystem(E, R, L, cond)


def hermitian_part_residual(A: np.ndarray) -> float:
    """Frobenius norm of ``A - A^dagger``."""
    return float(np.linalg.norm(A - A.conj().T))


def sqrt_posdef(P, tol_herm: float = DEFAULT_TOL.tol_herm,
                posdef_floor: float = DEFAULT_TOL.posdef_floor) -> np.ndarray:
    """Unique Hermitian positive-definite square root of ``P``."""
    P = as_matrix(P)
    if hermitian_part_residual(P) > tol_herm * max(1.0, np.linalg.norm(P)):
        raise NotPositiveDefinite("input is not Hermitian")
    w, V = np.linalg.eigh((P + P.conj().T) / 2)
    if w[0] <= posdef_floor:
        raise NotPositiveDefinite(f"minimum eigenvalue {w[0]:.3g} <= {posdef_floor:.3g}")
    Q = (V * np.sqrt(w)) @ V.conj().T
    return (Q + Q.conj().T) / 2


def polar_decompose(T, det_floor: float = DEFAULT_TOL.det_floor):
    """Right polar decomposition ``T = U P`` with ``U`` unitary and ``P`` positive-definite."""
    T = as_matrix(T)
    if abs(np.linalg.det(T)) <= det_floor:
        raise SingularInput("matrix is singular")
    W, s, Vh = np.linalg.svd(T)
    U = W @ Vh
    P = (Vh.conj().T * s) @ Vh
    return U, (P + P.conj().T) / 2


def finite_diff(field, point, component: int, step: float = DEFAULT_TOL.step) -> np.ndarray:
    """Central difference of a matrix-valued field along one parameter axis.

    ``field`` maps a parameter vector to an array; the result approximates
    ``d field / d point[component]`` to second order in ``step``.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    p = np.array(point, dtype=float)
    e = np.zeros_like(p)
    e[component] = step
    return (np.asarray(field(p + e)) - np.asarray(field(p - e))) / (2.0 * step)
