"""Symplectic time stepping for the constrained dynamics.

One step solves, by Newton-Raphson, for the free coordinates at the end of
the step and a scaled multiplier located at the segment midpoint:

    Res(x) = [ M' (q_{k+1} - q_k) - h p_k - h^2/2 F_mid - A(q_k)^T lam_s ]
             [ Phi(q_{k+1})                                             ]

with x = (qf_{k+1}, lam_s); midpoint quantities use the averaged position
(q_k + q_{k+1})/2, the difference quotient velocity and the midpoint time.
The multiplier scaling, lam_s = (h^2/2) lam, keeps the Jacobian

    Jac = [ Mff - h^2/2 (dF/dqf / 2 + dF/dvf / h)   -A(q_k)^T ]
          [ A(q_{k+1})                                 0       ]

well conditioned.  After convergence the new momentum follows explicitly
from the mirrored momentum equation at q_{k+1}, and free velocities are
recovered through the constant free-free mass matrix.

Boundary coordinates are filled from their motion functions at the grid
times before the corrector runs; they are never unknowns.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from tensekit.assembly import SystemTopology
from tensekit.forces import ForceModel

__all__ = [
    "SolverSettings",
    "SystemState",
    "StepFailure",
    "Stepper",
    "Trajectory",
    "simulate",
    "residual_and_jacobian",
    "mechanical_energy",
]


@dataclass(frozen=True)
class SolverSettings:
    """Timestep, Newton iteration cap and residual tolerance."""

    dt: float = 1e-3
    tol: float = 1e-10
    max_iter: int = 20
    halve_on_failure: bool = True  # one internal h/2 retry (slack chatter)

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("timestep must be positive")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")

    @property
    def multiplier_scale(self) -> float:
        """s1 = 2 / h^2; the solved multiplier is (h^2/2) times the physical one."""
        return 2.0 / self.dt ** 2


@dataclass
class SystemState:
    """Trajectory point: time, full coordinates, free momenta and velocities."""

    t: float
    q: np.ndarray
    p_free: np.ndarray
    v_free: np.ndarray


class StepFailure(RuntimeError):
    def __init__(self, message, t, residual_norm=np.nan, iterations=0):
        super().__init__(message)
        self.t = t
        self.residual_norm = residual_norm
        self.iterations = iterations


def residual_and_jacobian(topo: SystemTopology, forces: ForceModel,
                          q_k, p_free_k, x, settings: SolverSettings,
                          t_k: float = 0.0, jacobian: bool = True):
    """Stacked residual and (optionally) its Jacobian at iterate x.

    ``x`` concatenates the free coordinates at the end of the step and the
    scaled midpoint multiplier.  Exposed for verification; the stepper uses
    the same arithmetic.
    """
    h = settings.dt
    nf = topo.n_free
    qf1 = x[:nf]
    lam_s = x[nf:]
    qp1, _, _ = topo.boundary_state(t_k + h)
    q1 = topo.compose(qf1, qp1)
    A0 = topo.constraint_jacobian(q_k)
    q_mid = 0.5 * (q_k + q1)
    qd_mid = (q1 - q_k) / h
    t_mid = t_k + 0.5 * h
    F_mid = forces.force(q_mid, qd_mid, t_mid)
    res1 = topo.mass_free_full @ (q1 - q_k) - h * p_free_k \
        - 0.5 * h * h * F_mid - A0.T @ lam_s
    res2 = topo.constraint_residual(q1)
    res = np.concatenate([res1, res2])
    if not jacobian:
        return res, None
    dFdq, dFdv = forces.force_derivatives(q_mid, qd_mid, t_mid)
    J11 = topo.mass_free - 0.5 * h * h * (0.5 * dFdq + dFdv / h)
    A1 = topo.constraint_jacobian(q1)
    nc = topo.n_constraints
    jac = np.zeros((nf + nc, nf + nc))
    jac[:nf, :nf] = J11
    jac[:nf, nf:] = -A0.T
    jac[nf:, :nf] = A1
    return res, jac


class Stepper:
    """Repeated stepping of one system; factors the constant mass once."""

    def __init__(self, topo: SystemTopology, forces: ForceModel,
                 settings: SolverSettings):
        self.topo = topo
        self.forces = forces
        self.settings = settings
        self._mass_lu = lu_factor(topo.mass_free)
        self._eye_nf = np.eye(topo.n_free)

    def initial_state(self, q0=None, v_free0=None, t0: float = 0.0,
                      check: bool = True) -> SystemState:
        """State from initial coordinates and free velocities.

        The initial configuration must satisfy the constraints; velocity
        consistency is checked and only warned about, because moving
        boundaries routinely start with an impulsive mismatch.
        """
        topo = self.topo
        qp0, vp0, _ = topo.boundary_state(t0)
        if q0 is None:
            q0 = topo.q0
        q0 = topo.compose(topo.free(q0), qp0)
        vf0 = np.zeros(topo.n_free) if v_free0 is None else np.asarray(v_free0, float)
        qd0 = topo.compose(vf0, vp0)
        if check:
            phi = topo.constraint_residual(q0)
            if phi.size and np.abs(phi).max() > 100 * self.settings.tol:
                raise StepFailure(
                    f"initial configuration violates constraints "
                    f"(|Phi|_inf = {np.abs(phi).max():.3e})", t0)
            drift = topo.constraint_jacobian_full(q0) @ qd0
            if drift.size and np.abs(drift).max() > 1e-8:
                warnings.warn(
                    f"initial velocities are inconsistent with the constraints "
                    f"(|A qdot|_inf = {np.abs(drift).max():.3e}); proceeding",
                    stacklevel=2)
        p0 = topo.mass_free_full @ qd0
        return SystemState(t0, q0, p0, vf0)

    def step(self, state: SystemState, dt: float | None = None,
             _allow_retry: bool = True) -> SystemState:
        topo, forces, settings = self.topo, self.forces, self.settings
        h = settings.dt if dt is None else dt
        nf, nc = topo.n_free, topo.n_constraints
        t0, t1 = state.t, state.t + h
        t_mid = t0 + 0.5 * h
        q0 = state.q
        p0 = state.p_free

        qp1, vp1, _ = topo.boundary_state(t1)
        A0 = topo.constraint_jacobian(q0)
        qf1 = q0[topo.free_idx].copy()
        lam_s = np.zeros(nc)

        Mff = topo.mass_free_full
        converged = False
        res_norm = np.inf
        A1 = None
        F_mid = None
        q1 = None
        failure = None
        for iteration in range(1, settings.max_iter + 1):
            q1 = topo.compose(qf1, qp1)
            q_mid = 0.5 * (q0 + q1)
            qd_mid = (q1 - q0) / h
            try:
                F_mid = forces.force(q_mid, qd_mid, t_mid)
            except ValueError as exc:
                failure = StepFailure(f"force evaluation failed: {exc}", t0)
                break
            res1 = Mff @ (q1 - q0) - h * p0 - 0.5 * h * h * F_mid - A0.T @ lam_s
            res2 = topo.constraint_residual(q1)
            res_norm = max(np.abs(res1).max(),
                           np.abs(res2).max() if nc else 0.0)
            if res_norm <= settings.tol:
                converged = True
                break
            dFdq, dFdv = forces.force_derivatives(q_mid, qd_mid, t_mid)
            A1 = topo.constraint_jacobian(q1)
            jac = np.zeros((nf + nc, nf + nc))
            jac[:nf, :nf] = topo.mass_free - 0.5 * h * h * (0.5 * dFdq + dFdv / h)
            jac[:nf, nf:] = -A0.T
            jac[nf:, :nf] = A1
            rhs = np.concatenate([res1, res2])
            try:
                delta = np.linalg.solve(jac, -rhs)
            except np.linalg.LinAlgError:
                cond = np.linalg.cond(jac)
                failure = StepFailure(
                    f"singular corrector Jacobian at t = {t0:.6g} "
                    f"(cond ~ {cond:.3e})", t0, res_norm, iteration)
                break
            qf1 += delta[:nf]
            lam_s += delta[nf:]

        if not converged and failure is None:
            failure = StepFailure(
                f"Newton did not converge within {settings.max_iter} "
                f"iterations at t = {t0:.6g} (|Res|_inf = {res_norm:.3e})",
                t0, res_norm, settings.max_iter)
        if failure is not None:
            if _allow_retry and settings.halve_on_failure:
                mid = self.step(state, 0.5 * h, _allow_retry=False)
                return self.step(mid, 0.5 * h, _allow_retry=False)
            raise failure

        lam_phys = (2.0 / h ** 2) * lam_s
        A1 = topo.constraint_jacobian(q1)
        # combined endpoint momentum equations: p1 = p0 + h F + h/2 (A0+A1)^T lam,
        # algebraically equal to the explicit update M'(q1-q0)/h + ... at the
        # converged solution but without its cancellation roundoff, so momentum
        # components the forces cannot touch stay exactly constant
        p1 = p0 + h * F_mid + 0.5 * h * ((A0.T + A1.T) @ lam_phys)
        v1 = lu_solve(self._mass_lu, p1 - topo.mass_coupling @ vp1)
        return SystemState(t1, q1, p1, v1)


@dataclass
class Trajectory:
    """Dense recording of a simulation run on the step grid."""

    ts: np.ndarray
    qs: np.ndarray            # (N+1, n)
    vs: np.ndarray            # (N+1, n_free)
    kinetic: np.ndarray
    potential: np.ndarray
    cable_lengths: np.ndarray   # (N+1, n_cables)
    cable_tensions: np.ndarray
    cable_slack: np.ndarray     # bool
    slack_events: list = field(default_factory=list)  # (t, cable name, kind)
    completed: bool = True
    failure: StepFailure | None = None

    @property
    def energy(self) -> np.ndarray:
        return self.kinetic + self.potential

    @property
    def n_steps(self) -> int:
        return len(self.ts) - 1


def mechanical_energy(topo: SystemTopology, forces: ForceModel,
                      state: SystemState) -> tuple:
    """Kinetic and potential energy at a state, using recovered velocities."""
    _, vp, _ = topo.boundary_state(state.t)
    qd = topo.compose(state.v_free, vp)
    T = 0.5 * qd @ topo.mass_matrix @ qd
    V = forces.potential(state.q, state.t)
    return T, V


def simulate(topo: SystemTopology, forces: ForceModel, duration: float,
             settings: SolverSettings, q0=None, v_free0=None, t0: float = 0.0,
             progress: Callable[[float, float], None] | None = None,
             record_every: int = 1) -> Trajectory:
    """Integrate for the given duration, recording every ``record_every`` steps.

    On a step failure the partial trajectory is returned with
    ``completed = False`` and the failure attached.
    """
    stepper = Stepper(topo, forces, settings)
    state = stepper.initial_state(q0, v_free0, t0)
    n_steps = int(round(duration / settings.dt))
    n_rec = n_steps // record_every + 1
    nc = forces.n_cables

    ts = np.empty(n_rec)
    qs = np.empty((n_rec, topo.n))
    vs = np.empty((n_rec, topo.n_free))
    kin = np.empty(n_rec)
    pot = np.empty(n_rec)
    lengths = np.empty((n_rec, nc))
    tensions = np.empty((n_rec, nc))
    slack = np.zeros((n_rec, nc), dtype=bool)
    events = []

    def record(i, state):
        ts[i] = state.t
        qs[i] = state.q
        vs[i] = state.v_free
        kin[i], pot[i] = mechanical_energy(topo, forces, state)
        if nc:
            _, vp, _ = topo.boundary_state(state.t)
            qd = topo.compose(state.v_free, vp)
            for j, st in enumerate(forces.cable_states(state.q, qd, state.t)):
                lengths[i, j] = st.length
                tensions[i, j] = st.tension
                slack[i, j] = st.slack

    record(0, state)
    prev_slack = slack[0].copy()
    next_progress = 1.0
    failure = None
    rec_i = 0
    for k in range(1, n_steps + 1):
        try:
            state = stepper.step(state)
        except StepFailure as exc:
            failure = exc
            break
        if k % record_every == 0:
            rec_i += 1
            record(rec_i, state)
            if nc:
                now = slack[rec_i]
                for j in np.flatnonzero(now != prev_slack):
                    kind = "slack" if now[j] else "taut"
                    events.append((state.t, forces.cables[j].name, kind))
                prev_slack = now.copy()
        if progress is not None and state.t >= next_progress - 1e-12:
            progress(state.t, duration)
            next_progress += 1.0

    used = rec_i + 1
    return Trajectory(ts[:used], qs[:used], vs[:used], kin[:used], pot[:used],
                      lengths[:used], tensions[:used], slack[:used],
                      events, failure is None, failure)
