"""Reproduction checks for the built-in models.

Every ``check_*`` function runs one numbered check end to end and returns a
:class:`CheckResult`.  The same functions back the ``verify`` command and the
acceptance tests, so both report identical numbers.
"""
from __future__ import annotations

import math
import time
import zlib
from dataclasses import dataclass, field

import numpy as np

from .adiabatic import eta_norm, evolve, geometric_phase, linear_schedule
from .berry import ConnectionProvider, DistortionProvider, conventional_connections, covariant_connection, \
    hermitian_frame_connection
from .biortho import FrameField, FrameTransform, normalization_rescaling, random_gl
from .metric import flatness_residual, hermitize_hamiltonian, hermitizing_field, metric_connection, \
    metric_from_left
from .models import SIGMA_X, make_model, random_pseudo_hermitian
from .topology import ParamGrid, ParamPath, berry_curvature, berry_phase, chern_number

__all__ = ["CheckResult", "CHECKS", "run_checks", "format_table"]

XI_LO, XI_HI = 0.1, 2.0
LOWER = 0


@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check.

    ``value`` is the worst observed deviation (or the observed quantity),
    ``tol`` the acceptance threshold and ``parts`` the per-sub-check outcomes
    as ``(label, passed, value)`` triples.
    """

    number: int
    name: str
    passed: bool
    value: float
    expected: str
    tol: float
    runtime: float
    parts: tuple = ()
    budget: float | None = None
    detail: str = ""
    extra: dict = field(default_factory=dict)


def _model():
    return make_model("pseudo_hermitian_hyperbolic")


def _pt(lam, xi):
    return np.array([lam, xi], dtype=float)


def _rescaled(frames):
    # unit-norm rescaling of every right vector; a scalar N^{-1/2} for this model
    return frames.transformed(lambda p: normalization_rescaling(frames.base(p)))


def _line_points(n=20):
    xi = np.linspace(XI_LO, XI_HI, n)
    lam = (0.37 * np.arange(n)) % (2 * np.pi)
    return [_pt(a, b) for a, b in zip(lam, xi)]


def _model_grid(n=51):
    return ParamGrid(("lambda", "xi"), (0.0, XI_LO), (2 * np.pi, XI_HI), (n, n), (True, False))


def _result(number, name, parts, expected, tol, t0, budget=None, detail="", extra=None):
    runtime = time.perf_counter() - t0
    ok = all(p[1] for p in parts) and (budget is None or runtime < budget)
    worst = max(float(p[2]) for p in parts)
    return CheckResult(number, name, ok, worst, expected, tol, runtime, tuple(parts), budget, detail,
                       extra or {})


def check_lr_connection() -> CheckResult:
    t0 = time.perf_counter()
    frames = FrameField(_model())
    d_lam = d_xi = 0.0
    for p in _line_points():
        A = conventional_connections(frames, p, 1e-5, bands=[LOWER])["LR"]
        d_lam = max(d_lam, abs(A["lambda"][0, 0] + np.sinh(p[1] / 2) ** 2))
        d_xi = max(d_xi, abs(A["xi"][0, 0]))
    parts = [("A_lambda = -sinh^2(xi/2)", d_lam < 1e-7, d_lam), ("A_xi = 0", d_xi < 1e-7, d_xi)]
    return _result(1, "conventional LR connection", parts, "-sinh^2(xi/2), 0", 1e-7, t0, budget=1.0)


def check_rescaling_law() -> CheckResult:
    t0 = time.perf_counter()
    frames = _rescaled(FrameField(_model()))
    worst, observed = 0.0, []
    for p in _line_points():
        A = conventional_connections(frames, p, 1e-5, bands=[LOWER])["LR"]
        im = A["xi"][0, 0].imag
        observed.append(im)
        worst = max(worst, abs(im - 0.5 * np.tanh(p[1])))
    sign = float(np.mean(np.sign(observed)))
    parts = [("Im A'_xi = +tanh(xi)/2", worst < 1e-7, worst)]
    return _result(2, "rescaled LR connection", parts, "+tanh(xi)/2", 1e-7, t0,
                   detail=f"mean sign of observed Im A'_xi: {sign:+.0f}")


def check_metric_connection() -> CheckResult:
    t0 = time.perf_counter()
    frames = FrameField(_model())
    S = hermitizing_field(frames)
    rng = np.random.default_rng(3)
    worst_l = worst_x = 0.0
    for _ in range(20):
        p = _pt(rng.uniform(0, 2 * np.pi), rng.uniform(XI_LO, XI_HI))
        G = metric_connection(S, p, 1e-5, analytic=False)
        e = np.exp(1j * p[0])
        want_l = np.diag([1j, 0])
        want_x = 0.5 * np.array([[0, 1 / e], [e, 0]])
        worst_l = max(worst_l, np.max(np.abs(G["lambda"] - want_l)))
        worst_x = max(worst_x, np.max(np.abs(G["xi"] - want_x)))
    parts = [("Gamma^lambda", worst_l < 1e-7, worst_l), ("Gamma^xi", worst_x < 1e-7, worst_x)]
    return _result(3, "metric connection", parts, "diag(i,0); [[0,e^-il],[e^il,0]]/2", 1e-7, t0)


def _grid_points(grid, names):
    pts = grid.ordered_points(names)
    return pts.reshape(-1, pts.shape[-1])


def check_cbc_vanishes() -> CheckResult:
    t0 = time.perf_counter()
    prov = ConnectionProvider("CBC", FrameField(_model()), bands=[LOWER])
    worst = 0.0
    for p in _grid_points(_model_grid(), prov.param_names):
        A = prov(p)
        worst = max(worst, abs(A["lambda"][0, 0]), abs(A["xi"][0, 0]))
    return _result(4, "CBC vanishes on 51x51 grid", [("|CBC|", worst < 1e-7, worst)], "0", 1e-7, t0,
                   budget=5.0)


def check_rescaling_invariance() -> CheckResult:
    t0 = time.perf_counter()
    frames = FrameField(_model())
    T_field = lambda p: normalization_rescaling(frames.base(p))  # noqa: E731
    prov = ConnectionProvider("CBC", frames.transformed(T_field), bands=[LOWER])
    worst = 0.0
    for p in _grid_points(_model_grid(), prov.param_names):
        A = prov(p)
        worst = max(worst, abs(A["lambda"][0, 0]), abs(A["xi"][0, 0]))
    dist = DistortionProvider(frames, T_field, bands=[LOWER])
    worst_xi, observed = 0.0, []
    for p in _line_points():
        X = dist(p)["xi"][0, 0]
        observed.append(X.imag)
        worst_xi = max(worst_xi, abs(X - (-0.5j * np.tanh(p[1]))))
    parts = [("|CBC'| on grid", worst < 1e-7, worst), ("Xi_xi = -(i/2) tanh xi", worst_xi < 1e-7, worst_xi)]
    sign = float(np.mean(np.sign(observed)))
    return _result(5, "CBC invariant under rescaling", parts, "0; -(i/2)tanh(xi)", 1e-7, t0,
                   detail=f"mean sign of observed Im Xi_xi: {sign:+.0f}")


def check_hermitization() -> CheckResult:
    t0 = time.perf_counter()
    model = _model()
    frames = FrameField(model)
    S = hermitizing_field(frames)
    S_resc = hermitizing_field(_rescaled(frames))
    l = model.spec.fixed_params["l"]
    worst_h = worst_hp = worst_phi = 0.0
    for p in _line_points():
        H = model(p)
        HH = hermitize_hamiltonian(H, S(p))
        worst_h = max(worst_h, np.max(np.abs(HH - l * SIGMA_X)))
        HHp = hermitize_hamiltonian(H, S_resc(p))
        worst_hp = max(worst_hp, np.max(np.abs(HHp - l * np.cosh(p[1]) * SIGMA_X)))
        phi = S(p) @ frames(p).R[:, LOWER]
        want = np.array([1, 1]) / np.sqrt(2)
        ov = np.vdot(want, phi)
        worst_phi = max(worst_phi, np.linalg.norm(phi - want * ov / abs(ov)))
    parts = [("H^H = l sigma_x", worst_h < 1e-9, worst_h),
             ("H'^H = l cosh(xi) sigma_x", worst_hp < 1e-9, worst_hp),
             ("Phi_- = (1,1)/sqrt2", worst_phi < 1e-9, worst_phi)]
    return _result(6, "Hermitized Hamiltonian and frame", parts, "l sigma_x; l cosh(xi) sigma_x; (1,1)/sqrt2",
                   1e-9, t0)


def check_random_gl_reality(trials: int = 1000) -> CheckResult:
    t0 = time.perf_counter()
    frames = FrameField(_model())
    rng = np.random.default_rng(7)
    scales = (0.5, 1.0, 2.0)
    worst = 0.0
    for k in range(trials):
        T = random_gl(2, seed=k, log_scale=scales[k % 3])
        p = _pt(rng.uniform(0, 2 * np.pi), rng.uniform(XI_LO, XI_HI))
        prov = ConnectionProvider("CBC", frames.transformed(lambda q, T=T: T))
        worst = max(worst, prov(p).hermiticity_residual())
    return _result(7, f"CBC Hermitian under {trials} random GL(2,C)",
                   [("max ||A' - A'^dagger||_F", worst < 1e-6, worst)], "0", 1e-6, t0, budget=30.0)


def check_flatness() -> CheckResult:
    t0 = time.perf_counter()
    S = hermitizing_field(FrameField(_model()))
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        p = _pt(rng.uniform(0, 2 * np.pi), rng.uniform(XI_LO, XI_HI))
        worst = max(worst, flatness_residual(S, p, "lambda", "xi", step=1e-4))
    return _result(8, "metric connection is flat", [("flatness residual", worst < 1e-5, worst)], "0", 1e-5, t0)


def check_curvature(n: int = 51) -> CheckResult:
    t0 = time.perf_counter()
    frames = FrameField(_model())
    grid = _model_grid(n)
    F_cbc = berry_curvature(ConnectionProvider("CBC", frames, bands=[LOWER]), grid, "xi", "lambda")
    worst_cbc = F_cbc.max_abs()
    F_lr = berry_curvature(ConnectionProvider("LR", frames, bands=[LOWER]), grid, "xi", "lambda")
    xi = grid.ordered_points(("lambda", "xi"))[..., 1]
    # antisymmetric tensor over (xi, lambda) against -i sinh(xi) sigma_y / 2
    F = F_lr.values[..., 0, 0]
    tensor = np.zeros(F.shape + (2, 2), dtype=complex)
    tensor[..., 0, 1] = F
    tensor[..., 1, 0] = -F
    sigma_y = np.array([[0, -1j], [1j, 0]])
    want = -0.5j * np.sinh(xi)[..., None, None] * sigma_y
    worst_lr = float(np.max(np.abs(tensor - want)))
    parts = [("|F_CBC|", worst_cbc < 1e-5, worst_cbc), ("F_LR tensor", worst_lr < 1e-5, worst_lr)]
    return _result(9, "Berry curvature", parts, "0; -i sinh(xi) sigma_y/2", 1e-5, t0)


def check_holonomy(n: int = 401) -> CheckResult:
    t0 = time.perf_counter()
    frames = FrameField(_model())
    path = ParamPath.segment(_pt(0, 1), _pt(2 * np.pi, 1), n, closed=True, periods=(2 * np.pi, None))
    g_cbc = berry_phase(ConnectionProvider("CBC", frames, bands=[LOWER]), path)
    g_lr = berry_phase(ConnectionProvider("LR", frames, bands=[LOWER]), path)
    want = -2 * np.pi * np.sinh(0.5) ** 2
    parts = [("CBC loop phase", abs(g_cbc) < 1e-6, abs(g_cbc)), ("LR loop phase", abs(g_lr - want) < 1e-6,
                                                                  abs(g_lr - want))]
    return _result(10, "lambda-loop holonomy at xi=1", parts, f"0; {want:.6f}", 1e-6, t0,
                   extra={"cbc": g_cbc, "lr": g_lr})


class _PhaseScramble:
    """Deterministic pseudo-random diagonal phase per parameter point."""

    def __init__(self, seed: int, dim: int):
        self.seed, self.dim = seed, dim

    def __call__(self, p):
        key = zlib.crc32(np.round(np.asarray(p, float), 9).tobytes()) ^ (self.seed * 2654435761 % 2 ** 32)
        theta = np.random.default_rng(key).uniform(0, 2 * np.pi, self.dim)
        return FrameTransform(np.diag(np.exp(1j * theta)), np.diag(np.exp(-1j * theta)))


def _qwz_rescaling(p):
    N = np.cosh(1.0 + 0.5 * np.sin(p[0]) * np.cos(p[1]))
    return FrameTransform(np.eye(2, dtype=complex) / np.sqrt(N), np.eye(2, dtype=complex) * np.sqrt(N))


def check_chern(n: int = 64) -> CheckResult:
    t0 = time.perf_counter()
    frames = FrameField(make_model("qwz", m=1.0))
    grid = ParamGrid(("kx", "ky"), (0, 0), (2 * np.pi, 2 * np.pi), (n, n), (True, True))
    base = chern_number(ConnectionProvider("LR", frames, bands=[LOWER]), grid)
    scr = chern_number(ConnectionProvider("LR", frames.transformed(_PhaseScramble(1, 2)), bands=[LOWER]), grid)
    resc = chern_number(ConnectionProvider("CBC", frames.transformed(_qwz_rescaling), bands=[LOWER]), grid)
    parts = [("integer -1", base.integer == -1, abs(base.integer + 1)),
             ("|raw + 1|", abs(base.raw + 1) < 1e-3, abs(base.raw + 1)),
             ("gauge scramble", scr.integer == base.integer, abs(scr.integer - base.integer)),
             ("rescaled frame", resc.integer == base.integer, abs(resc.integer - base.integer))]
    return _result(11, "QWZ Chern number (m=1, lower band, 64x64)", parts, "-1", 1e-3, t0, budget=10.0,
                   extra={"raw": base.raw, "scrambled": scr.raw, "rescaled": resc.raw})


def check_adiabatic(T_total: float = 500.0) -> CheckResult:
    t0 = time.perf_counter()
    model = _model()
    frames = FrameField(model)
    start = _pt(0.0, 1.0)
    schedule = linear_schedule(start, _pt(2 * np.pi, 1.0), T_total)
    psi0 = frames(start).R[:, LOWER]
    traj = evolve(model, schedule, psi0, T_total)
    norms = np.array([eta_norm(psi, metric_from_left(frames(schedule(t)).L))
                      for t, psi in zip(traj.times, traj.states)])
    drift = float(np.max(np.abs(norms - norms[0])))
    res = geometric_phase(traj, model, LOWER, frames)
    parts = [("eta-norm drift", drift < 1e-4, drift), ("|geometric phase|", abs(res.phase) < 0.02, abs(res.phase))]
    return _result(12, "adiabatic lambda-loop (T=500, xi=1)", parts, "0", 0.02, t0, budget=60.0,
                   detail=f"fidelity {res.fidelity:.6f}; plain-energy subtraction {res.plain:+.6f}",
                   extra={"phase": res.phase, "plain": res.plain, "fidelity": res.fidelity})


def _route_gap(frames, S_field, p):
    local = frames.anchored(p)
    S = S_field(local).anchored(p)
    f = local(p)
    cbc = covariant_connection(f, metric_from_left(f.L), metric_connection(S, p, 1e-5), local, p, 1e-5)
    her = hermitian_frame_connection(S, local, p, 1e-5)
    return max(float(np.max(np.abs(cbc[n] - her[n]))) for n in cbc.components)


def check_two_routes() -> CheckResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(13)
    frames = FrameField(_model())
    worst_model = 0.0
    for _ in range(50):
        p = _pt(rng.uniform(0, 2 * np.pi), rng.uniform(XI_LO, XI_HI))
        worst_model = max(worst_model, _route_gap(frames, hermitizing_field, p))
    worst_rand = 0.0
    for seed in range(20):
        frames3 = FrameField(random_pseudo_hermitian(3, seed))
        p = rng.uniform(-1, 1, 2)
        worst_rand = max(worst_rand, _route_gap(frames3, hermitizing_field, p))
    parts = [("built-in model", worst_model < 1e-6, worst_model), ("random 3x3", worst_rand < 1e-6, worst_rand)]
    return _result(13, "CBC vs Hermitian-frame connection", parts, "equal", 1e-6, t0)


CHECKS = {
    1: check_lr_connection,
    2: check_rescaling_law,
    3: check_metric_connection,
    4: check_cbc_vanishes,
    5: check_rescaling_invariance,
    6: check_hermitization,
    7: check_random_gl_reality,
    8: check_flatness,
    9: check_curvature,
    10: check_holonomy,
    11: check_chern,
    12: check_adiabatic,
    13: check_two_routes,
}


def run_checks(numbers=None) -> list:
    numbers = sorted(CHECKS) if numbers is None else list(numbers)
    return [CHECKS[k]() for k in numbers]


def format_table(results) -> str:
    lines = []
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        budget = f" (budget {r.budget:g}s)" if r.budget else ""
        lines.append(f"[{status}] {r.number:>2}. {r.name}: worst {r.value:.3e} (tol {r.tol:g}), "
                     f"{r.runtime:.2f}s{budget}")
        for label, ok, val in r.parts:
            lines.append(f"        {'ok ' if ok else 'BAD'} {label}: {float(val):.3e}")
        if r.detail:
            lines.append(f"        note: {r.detail}")
    return "\n".join(lines)
