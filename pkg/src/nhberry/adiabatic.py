"""Time evolution under a slowly driven non-Hermitian Hamiltonian.

States obey ``i d_t psi = H(lambda(t)) psi`` (hbar = 1) and are advanced with
classical fourth-order Runge-Kutta.  The geometric phase of a band is the
total phase of ``<L_b|psi>`` minus the dynamical phase generated by the
Hermitized Hamiltonian ``S H S^{-1} + i (dS/dt) S^{-1}`` along the band.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .biortho import FrameField
from .errors import EvolutionOverflow, NonAdiabatic, NotPositiveDefinite, StepTooLarge
from .metric import hermitizing_field, metric_connection
from .numeric import DEFAULT_TOL

__all__ = [
    "Trajectory",
    "PhaseResult",
    "smooth_schedule",
    "linear_schedule",
    "default_dt",
    "evolve",
    "eta_norm",
    "metric_flow_residual",
    "geometric_phase",
]

WARN_STEP = 0.1
MAX_STEP = 0.5
OVERFLOW = 1e12


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # one state per row
    schedule: Callable[[float], np.ndarray]
    dt: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def final(self) -> np.ndarray:
        return self.states[-1]


@dataclass(frozen=True)
class PhaseResult:
    phase: float
    total: float
    dynamical: float
    fidelity: float
    plain: float
    euclidean: float


def linear_schedule(start, stop, T_total: float):
    """``t -> start + (t / T) (stop - start)``."""
    a, b = np.asarray(start, float), np.asarray(stop, float)
    return lambda t: a + (t / T_total) * (b - a)


def smooth_schedule(start, stop, T_total: float):
    """Move from ``start`` to ``stop`` with zero velocity at both ends.

    ``u = t / T`` is mapped to ``u - sin(2 pi u) / (2 pi)``, which switches the
    drive on and off smoothly and suppresses real transitions at the cost of a
    higher peak speed.
    """
    a, b = np.asarray(start, float), np.asarray(stop, float)

    def schedule(t):
        u = t / T_total
        return a + (u - math.sin(2 * math.pi * u) / (2 * math.pi)) * (b - a)
    return schedule


def default_dt(H_norm: float, T_total: float) -> float:
    return min(0.01 / H_norm, T_total / 1e5)


def evolve(field, schedule, psi0, T_total: float, dt: float | None = None,
           record_every: int | None = None) -> Trajectory:
    """Integrate ``i psi' = H(schedule(t)) psi`` from ``0`` to ``T_total``.

    The step is shrunk so that an integer number of steps lands on
    ``T_total``.  States are recorded every ``record_every`` steps (default:
    about 20000 samples) plus the final one.

    Raises
    ------
    StepTooLarge
        ``dt * ||H|| > 0.5`` at a recorded time (a warning is issued above 0.1).
    EvolutionOverflow
        ``||psi||`` exceeds ``1e12``.
    """
    psi = np.asarray(psi0, dtype=complex).copy()
    if not np.any(psi):
        raise ValueError("initial state is zero")
    if T_total <= 0:
        raise ValueError("T_total must be positive")
    H0 = np.asarray(field(schedule(0.0)))
    if dt is None:
        dt = default_dt(max(np.linalg.norm(H0, 2), 1e-12), T_total)
    nsteps = max(1, math.ceil(T_total / dt - 1e-9))
    dt = T_total / nsteps
    if record_every is None:
        record_every = max(1, nsteps // 20000)

    def check_step(H, t):
        r = dt * np.linalg.norm(H, 2)
        if r > MAX_STEP:
            raise StepTooLarge(f"dt*||H|| = {r:.3g} at t = {t:.6g}")
        if r > WARN_STEP:
            warnings.warn(f"dt*||H|| = {r:.3g} exceeds {WARN_STEP}", RuntimeWarning, stacklevel=3)

    check_step(H0, 0.0)
    times, states = [0.0], [psi.copy()]
    H_now = H0
    for n in range(nsteps):
        t = n * dt
        H_mid = np.asarray(field(schedule(t + dt / 2)))
        H_end = np.asarray(field(schedule(t + dt)))
        k1 = -1j * (H_now @ psi)
        k2 = -1j * (H_mid @ (psi + 0.5 * dt * k1))
        k3 = -1j * (H_mid @ (psi + 0.5 * dt * k2))
        k4 = -1j * (H_end @ (psi + dt * k3))
        psi = psi + (dt / 6) * (k1 + 2 * k2 + 2 * k3 + k4)
        H_now = H_end
        if (n + 1) % record_every == 0 or n + 1 == nsteps:
            nrm = np.linalg.norm(psi)
            if not np.isfinite(nrm) or nrm > OVERFLOW:
                raise EvolutionOverflow(f"|psi| = {nrm:.3g} at t = {t + dt:.6g}")
            check_step(H_end, t + dt)
            times.append((n + 1) * dt)
            states.append(psi.copy())
    return Trajectory(np.array(times), np.array(states), schedule, dt, {"steps": nsteps})


def eta_norm(psi, eta) -> float:
    """``<psi| eta |psi>`` for a positive-definite metric."""
    eta = np.asarray(eta, dtype=complex)
    try:
        np.linalg.cholesky((eta + eta.conj().T) / 2)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("metric is not positive definite") from exc
    psi = np.asarray(psi, dtype=complex)
    val = np.vdot(psi, eta @ psi)
    if abs(val.imag) > 1e-12 * max(1.0, abs(val.real)):
        raise NotPositiveDefinite(f"eta-norm has imaginary part {val.imag:.3g}; metric not Hermitian")
    return float(val.real)


def metric_flow_residual(eta_field, H_field, schedule, t: float, dt: float = 1e-5) -> float:
    """``|| d eta/dt - i eta H + i H^dagger eta ||_F`` with ``d eta/dt`` by central difference in time."""
    d_eta = (np.asarray(eta_field(schedule(t + dt))) - np.asarray(eta_field(schedule(t - dt)))) / (2 * dt)
    eta = np.asarray(eta_field(schedule(t)))
    H = np.asarray(H_field(schedule(t)))
    return float(np.linalg.norm(d_eta - 1j * eta @ H + 1j * H.conj().T @ eta))


def _wrap(x: float) -> float:
    return float((x + np.pi) % (2 * np.pi) - np.pi)


def geometric_phase(trajectory: Trajectory, field, band: int, frames: FrameField | None = None,
                    S_field=None, fid_floor: float = 0.99, step: float = DEFAULT_TOL.step) -> PhaseResult:
    """Geometric phase of ``band`` accumulated along ``trajectory``.

    The total phase is ``arg <L_b(T)|psi(T)> - arg <L_b(0)|psi(0)>``.  The
    dynamical phase is ``-int Re <phi_b| H^H |phi_b> dt`` with ``phi_b = S R_b``,
    whose integrand equals ``E_b + sum_mu (dlambda^mu/dt) i <L_b|Gamma^mu|R_b>``.
    ``S_field`` must be single-valued along the schedule; the default is the
    model's own Hermitizing map.

    ``plain`` subtracts only ``-int E_b dt``; ``euclidean`` does the same with
    the Euclidean projection onto ``R_b``.  Both are diagnostics.
    """
    frames = frames if frames is not None else FrameField(field)
    S_field = S_field if S_field is not None else hermitizing_field(frames)
    sched = trajectory.schedule
    t = trajectory.times
    f0, f1 = frames(sched(t[0])), frames(sched(t[-1]))
    psi0, psiT = trajectory.states[0], trajectory.final

    c0 = f0.L[band] @ psi0
    c1 = f1.L[band] @ psiT
    eta1 = f1.L.conj().T @ f1.L
    fidelity = abs(c1) / math.sqrt(eta_norm(psiT, eta1))
    if fidelity < fid_floor:
        raise NonAdiabatic(f"final band fidelity {fidelity:.4f} below {fid_floor}")
    total = float(np.angle(c1) - np.angle(c0))

    names = frames.param_names
    energy = np.empty(len(t))
    gauge = np.empty(len(t))
    h = min(step, (t[-1] - t[0]) * 1e-6)
    for i, ti in enumerate(t):
        p = sched(ti)
        fr = frames(p)
        energy[i] = fr.energies[band].real
        lo, hi = max(ti - h, t[0]), min(ti + h, t[-1])
        vel = (sched(hi) - sched(lo)) / (hi - lo)
        if np.any(vel):
            G = metric_connection(S_field, p, step)
            Rb, Lb = fr.R[:, band], fr.L[band]
            gauge[i] = sum(vel[k] * (1j * Lb @ G[n] @ Rb).real for k, n in enumerate(names))
        else:
            gauge[i] = 0.0
    e_int = float(np.trapezoid(energy, t))
    dynamical = -(e_int + float(np.trapezoid(gauge, t)))

    r0 = np.vdot(f0.R[:, band], psi0)
    r1 = np.vdot(f1.R[:, band], psiT)
    return PhaseResult(
        phase=_wrap(total - dynamical),
        total=total,
        dynamical=dynamical,
        fidelity=float(fidelity),
        plain=_wrap(total + e_int),
        euclidean=_wrap(float(np.angle(r1) - np.angle(r0)) + e_int),
    )
