"""Berry curvature, holonomies and Chern numbers.

Orientation: for a grid with axes ``(a1, a2)`` the curvature component used
in Chern sums is ``F_{a1 a2} = d_a1 A^a2 - d_a2 A^a1 - i [A^a1, A^a2]`` and the
Chern number is ``(1/2 pi) sum Tr F_{a1 a2} dA``.  The lattice route uses
link variables ``U_mu(k) = det <bra(k)|ket(k + mu)> / |.|`` and the plaquette
field strength ``-arg(U_1(k) U_2(k+1) U_1(k+2)^{-1} U_2(k)^{-1})``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .berry import CONVENTIONAL_KINDS, ConnectionField, ConnectionProvider, DistortionProvider, transform_matrix
from .errors import CrossCheckFailure, GapClosure, NonQuantized, ValidationError
from .metric import hermitizing_field
from .numeric import DEFAULT_TOL, Tolerances

__all__ = [
    "ParamGrid",
    "ParamPath",
    "CurvatureField",
    "ChernResult",
    "curvature_at",
    "berry_curvature",
    "transformed_curvature",
    "berry_phase",
    "wilson_loop",
    "link_variables",
    "chern_number",
]


@dataclass(frozen=True)
class ParamGrid:
    """Rectangular grid over two or more named axes.

    Periodic axes exclude the upper endpoint, so ``n`` points tile
    ``[min, max)``.
    """

    axes: tuple
    mins: tuple
    maxs: tuple
    sizes: tuple
    periodic: tuple = ()

    def __post_init__(self):
        n = len(self.axes)
        per = tuple(self.periodic) if self.periodic else (False,) * n
        object.__setattr__(self, "periodic", tuple(bool(x) for x in per))
        if not (len(self.mins) == len(self.maxs) == len(self.sizes) == len(self.periodic) == n):
            raise ValidationError("grid", "axes, ranges, sizes and periodic flags must have equal length")
        if any(int(s) < 2 for s in self.sizes):
            raise ValidationError("grid.sizes", "every axis needs at least 2 points")

    def values(self, axis: int) -> np.ndarray:
        return np.linspace(self.mins[axis], self.maxs[axis], int(self.sizes[axis]),
                           endpoint=not self.periodic[axis])

    def spacing(self, axis: int) -> float:
        v = self.values(axis)
        return float(v[1] - v[0])

    @property
    def shape(self) -> tuple:
        return tuple(int(s) for s in self.sizes)

    def points(self) -> np.ndarray:
        """Array of shape ``sizes + (len(axes),)``, first axis slowest."""
        mesh = np.meshgrid(*[self.values(i) for i in range(len(self.axes))], indexing="ij")
        return np.stack(mesh, axis=-1)

    def ordered_points(self, param_names) -> np.ndarray:
        """Grid points as full parameter vectors in ``param_names`` order."""
        if set(self.axes) != set(param_names):
            raise ValidationError("grid.axes", f"grid axes {list(self.axes)} do not match parameters {list(param_names)}")
        idx = [list(self.axes).index(n) for n in param_names]
        return self.points()[..., idx]


@dataclass(frozen=True)
class ParamPath:
    """Ordered parameter vectors.

    ``periods`` gives the period of each coordinate (``None`` for
    non-periodic ones); a closed path may end on a periodic image of its
    start, as a full loop in an angle does.
    """

    points: np.ndarray
    closed: bool = False
    periods: tuple = ()

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        if len(pts) < 2:
            raise ValidationError("path", "needs at least two points")
        if self.closed:
            gap = pts[-1] - pts[0]
            for i, period in enumerate(self.periods):
                if period:
                    gap[i] = (gap[i] + period / 2) % period - period / 2
            if not np.allclose(gap, 0.0, atol=1e-12):
                raise ValidationError("path", "closed path endpoints differ")

    @classmethod
    def segment(cls, start, stop, n: int, closed: bool = False, periods: tuple = ()) -> "ParamPath":
        t = np.linspace(0.0, 1.0, n)[:, None]
        a, b = np.asarray(start, float), np.asarray(stop, float)
        return cls(a + t * (b - a), closed, periods)


@dataclass(frozen=True)
class CurvatureField:
    """``F_{nu mu}`` sampled on a grid; ``values`` has shape ``grid.shape + (k, k)``."""

    component_pair: tuple
    values: np.ndarray
    grid: ParamGrid | None = None

    def swapped(self) -> "CurvatureField":
        return CurvatureField(self.component_pair[::-1], -self.values, self.grid)

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class ChernResult:
    integer: int
    raw: float
    quality: float
    method: str


def _index(names, mu):
    names = list(names)
    return names.index(mu) if mu in names else int(mu)


def curvature_at(provider: ConnectionProvider, point, nu, mu, step: float = 1e-4) -> np.ndarray:
    """``F_{nu mu} = d_nu A^mu - d_mu A^nu - i [A^nu, A^mu]`` at one point, in the gauge anchored there."""
    p = np.asarray(point, dtype=float)
    names = list(provider.param_names)
    inu, imu = _index(names, nu), _index(names, mu)
    n_nu, n_mu = names[inu], names[imu]
    local = provider.anchored(p)

    def shifted(i, s):
        q = p.copy()
        q[i] += s
        return local(q)

    d_nu_mu = (shifted(inu, step)[n_mu] - shifted(inu, -step)[n_mu]) / (2 * step)
    d_mu_nu = (shifted(imu, step)[n_nu] - shifted(imu, -step)[n_nu]) / (2 * step)
    A = local(p)
    comm = A[n_nu] @ A[n_mu] - A[n_mu] @ A[n_nu]
    return d_nu_mu - d_mu_nu - 1j * comm


def berry_curvature(provider: ConnectionProvider, grid: ParamGrid, nu, mu, step: float = 1e-4) -> CurvatureField:
    """Curvature component ``F_{nu mu}`` at every grid point."""
    pts = grid.ordered_points(provider.param_names)
    flat = pts.reshape(-1, pts.shape[-1])
    vals = np.stack([curvature_at(provider, p, nu, mu, step) for p in flat])
    return CurvatureField((nu, mu), vals.reshape(grid.shape + vals.shape[1:]), grid)


class _ShiftedProvider:
    # A + Xi in the base frame, evaluated in one anchored gauge
    def __init__(self, conn, dist, param_names):
        self.conn, self.dist, self.param_names = conn, dist, param_names

    def anchored(self, p0):
        return _ShiftedProvider(self.conn.anchored(p0), self.dist.anchored(p0), self.param_names)

    def __call__(self, p):
        A, X = self.conn(p), self.dist(p)
        return ConnectionField({n: A[n] + X[n] for n in A.components}, A.point, A.kind, A.bands)


def transformed_curvature(provider: ConnectionProvider, T_field, grid: ParamGrid, nu, mu,
                          step: float = 1e-4, distortion: DistortionProvider | None = None,
                          verify: bool = True, xcheck_tol: float = DEFAULT_TOL.xcheck_tol) -> CurvatureField:
    """Curvature in the frame changed by ``T_field``, via ``F' = T^{-1} F[A + Xi] T``.

    With ``verify`` the result is compared against the curvature recomputed
    directly in the primed frame; disagreement raises :class:`CrossCheckFailure`.
    """
    if distortion is None:
        distortion = DistortionProvider(provider.frames, T_field, provider.bands, provider.step, provider.tol)
    shifted = _ShiftedProvider(provider, distortion, provider.param_names)
    pts = grid.ordered_points(provider.param_names)
    flat = pts.reshape(-1, pts.shape[-1])
    out = []
    for p in flat:
        T = transform_matrix(T_field(p))
        F = curvature_at(shifted, p, nu, mu, step)
        out.append(np.linalg.inv(T) @ F @ T)
    vals = np.stack(out).reshape(grid.shape + out[0].shape)
    if verify:
        primed = ConnectionProvider(provider.kind, provider.frames.transformed(T_field), None,
                                    provider.bands, provider.step, provider.tol)
        direct = berry_curvature(primed, grid, nu, mu, step)
        diff = float(np.max(np.abs(direct.values - vals)))
        if diff > xcheck_tol:
            raise CrossCheckFailure(f"transformed curvature differs from direct recomputation by {diff:.3g}")
    return CurvatureField((nu, mu), vals, grid)


def _line_integrand(provider, p, dp):
    A = provider(p)
    return sum(A[n] * dp[i] for i, n in enumerate(provider.param_names))


def wilson_loop(provider: ConnectionProvider, path: ParamPath, tol: float = 1e-9,
                max_subdiv: int = 256) -> np.ndarray:
    """Path-ordered ``P exp(i int A . dlambda)``, later segments multiplied on the left.

    Each segment uses the connection at its midpoint; segments are subdivided
    (doubling) until the product changes by less than ``tol``.
    """
    pts = path.points

    def product(m):
        k = provider(pts[0]).components[provider.param_names[0]].shape[0]
        W = np.eye(k, dtype=complex)
        for a, b in zip(pts[:-1], pts[1:]):
            d = (b - a) / m
            for j in range(m):
                mid = a + (j + 0.5) * d
                W = expm(1j * _line_integrand(provider, mid, d)) @ W
        return W

    m = 1
    W = product(m)
    while m < max_subdiv:
        m *= 2
        W2 = product(m)
        if np.linalg.norm(W2 - W) < tol:
            return W2
        W = W2
    return W


def _overlap_phase(provider, path) -> complex:
    # gauge-invariant discrete holonomy -arg prod det <bra_i|ket_{i+1}>
    kets = [_kets_bras(provider, p) for p in path.points]
    total = 0.0
    for (_, bra), (ket, _) in zip(kets[:-1], kets[1:]):
        total += -np.angle(np.linalg.det(bra @ ket))
    return complex(total)


def berry_phase(provider: ConnectionProvider, path: ParamPath, method: str = "quadrature"):
    """Berry phase along ``path``.

    ``quadrature`` integrates ``sum_mu A_mu dlambda^mu`` with the trapezoidal
    rule (scalar result for one band, Wilson loop for several);
    ``overlap`` uses the discrete product of frame overlaps, which is
    gauge-invariant on closed paths and defined modulo ``2 pi``.
    """
    _check_gap_path(provider, path)
    if method == "overlap":
        return _overlap_phase(provider, path)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    first = provider(path.points[0])
    k = next(iter(first.components.values())).shape[0]
    if k > 1:
        return wilson_loop(provider, path)
    return _trapezoid(provider, path.points)


def _trapezoid(provider, pts) -> complex:
    names = provider.param_names
    total = 0j
    prev = None
    for a, b in zip(pts[:-1], pts[1:]):
        d = b - a
        fa = prev if prev is not None else provider(a)
        fb = provider(b)
        total += 0.5 * sum((fa[n][0, 0] + fb[n][0, 0]) * d[i] for i, n in enumerate(names))
        prev = fb
    return complex(total)


def _check_gap_path(provider, path, floor: float = DEFAULT_TOL.gap_floor):
    field = provider.frames.field
    for p in path.points:
        E = np.linalg.eigvals(field(p))
        if E.size > 1:
            d = np.abs(E[:, None] - E[None, :])
            d[np.diag_indices_from(d)] = np.inf
            if d.min() < floor:
                raise GapClosure(f"eigenvalue gap {d.min():.3g} at {p.tolist()}")


def _kets_bras(provider, p, S=None):
    frame = provider.frames(p)
    b = list(range(frame.R.shape[1])) if provider.bands is None else list(provider.bands)
    if provider.kind in CONVENTIONAL_KINDS:
        ket = frame.R[:, b] if provider.kind[1] == "R" else frame.L.conj().T[:, b]
        bra = frame.L[b, :] if provider.kind[0] == "L" else frame.R[:, b].conj().T
        return ket, bra
    if S is None:
        S = provider.S_field if provider.S_field is not None else hermitizing_field(provider.frames, provider.tol)
    phi = np.asarray(S(p)) @ frame.R[:, b]
    return phi, phi.conj().T


def link_variables(provider: ConnectionProvider, grid: ParamGrid, gap_floor: float = DEFAULT_TOL.gap_floor):
    """Normalized link variables ``U_1, U_2`` on a periodic 2D grid."""
    if len(grid.axes) != 2 or not all(grid.periodic):
        raise ValidationError("grid", "link variables need a 2D grid periodic in both axes")
    pts = grid.ordered_points(provider.param_names)
    n1, n2 = grid.shape
    S = None
    if provider.kind not in CONVENTIONAL_KINDS:
        S = provider.S_field if provider.S_field is not None else hermitizing_field(provider.frames, provider.tol)
    kets = np.empty((n1, n2), dtype=object)
    bras = np.empty((n1, n2), dtype=object)
    field = provider.frames.field
    for i in range(n1):
        for j in range(n2):
            p = pts[i, j]
            E = np.linalg.eigvals(field(p))
            if E.size > 1:
                d = np.abs(E[:, None] - E[None, :])
                d[np.diag_indices_from(d)] = np.inf
                if d.min() < gap_floor:
                    raise GapClosure(f"eigenvalue gap {d.min():.3g} at {p.tolist()}")
            kets[i, j], bras[i, j] = _kets_bras(provider, p, S)
    U1 = np.empty((n1, n2), dtype=complex)
    U2 = np.empty((n1, n2), dtype=complex)
    for i in range(n1):
        for j in range(n2):
            u1 = np.linalg.det(bras[i, j] @ kets[(i + 1) % n1, j])
            u2 = np.linalg.det(bras[i, j] @ kets[i, (j + 1) % n2])
            U1[i, j] = u1 / abs(u1)
            U2[i, j] = u2 / abs(u2)
    return U1, U2


def chern_number(provider: ConnectionProvider, grid: ParamGrid, method: str = "link_plaquette",
                 step: float = 1e-4, tol: Tolerances = DEFAULT_TOL, strict: bool = True) -> ChernResult:
    """First Chern number of the selected bands over a periodic 2D grid.

    ``link_plaquette`` is gauge-invariant and quantized on any lattice;
    ``curvature_sum`` integrates the finite-difference curvature.  With
    ``strict`` a raw value farther than ``tol.quantize_tol`` from an integer
    raises :class:`NonQuantized`.
    """
    if len(grid.axes) != 2 or not all(grid.periodic):
        raise ValidationError("grid", "Chern numbers need a 2D grid periodic in both axes")
    a1, a2 = grid.axes
    if method == "link_plaquette":
        U1, U2 = link_variables(provider, grid, tol.gap_floor)
        plaq = U1 * np.roll(U2, -1, axis=0) / np.roll(U1, -1, axis=1) / U2
        raw = float(-np.angle(plaq).sum() / (2 * np.pi))
    elif method == "curvature_sum":
        F = berry_curvature(provider, grid, a1, a2, step)
        area = grid.spacing(0) * grid.spacing(1)
        raw = float(np.real(np.trace(F.values, axis1=-2, axis2=-1)).sum() * area / (2 * np.pi))
    else:
        raise ValueError(f"unknown method {method!r}")
    integer = int(np.rint(raw))
    quality = abs(raw - integer)
    if strict and quality > tol.quantize_tol:
        raise NonQuantized(f"Chern sum {raw:.6f} is {quality:.3g} from the nearest integer")
    return ChernResult(integer, raw, quality, method)
