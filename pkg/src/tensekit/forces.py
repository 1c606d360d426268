"""Generalized forces on the free coordinates: gravity, loads and cables.

Cables are massless with linear stiffness, linear damping and an optional
slack branch that clamps the tension at zero.  Because cable endpoints are
affine in the system coordinates, each cable owns a constant matrix J with
l_vec = J q, and the generalized tension force restricted to the free
coordinates is linear in the force densities gamma_j = f_j / l_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from tensekit.assembly import SystemTopology
from tensekit.members import LocalPoint

__all__ = [
    "MemberPoint",
    "AnchorPoint",
    "CableSpec",
    "CableState",
    "ConcentratedLoad",
    "LoadSet",
    "ForceModel",
    "DegenerateCableError",
    "tension_magnitude",
]

_MIN_LENGTH = 1e-12


class DegenerateCableError(ValueError):
    """Cable endpoints (nearly) coincide, its direction is undefined."""


@dataclass(frozen=True)
class MemberPoint:
    """Cable or load attachment on a member, at a LocalPoint or local position."""
    member: str
    point: object


@dataclass(frozen=True)
class AnchorPoint:
    """Cable attachment on a prescribed ground anchor."""
    anchor: int


@dataclass
class CableSpec:
    """One massless cable.

    ``rest_length`` is a constant or a callable of time (actuation).  With
    ``allow_slack`` false the element behaves as a plain spring-damper that
    can also push, which is the no-slacking constitutive variant.
    """

    name: str
    end_a: object
    end_b: object
    stiffness: float
    damping: float = 0.0
    rest_length: float | Callable[[float], float] = 1.0
    allow_slack: bool = True

    def __post_init__(self):
        if self.stiffness < 0:
            raise ValueError(f"cable {self.name!r}: stiffness must be >= 0")
        if self.damping < 0:
            raise ValueError(f"cable {self.name!r}: damping must be >= 0")
        if not callable(self.rest_length) and self.rest_length <= 0:
            raise ValueError(f"cable {self.name!r}: rest length must be > 0")

    def rest_length_at(self, t: float) -> float:
        mu = self.rest_length(t) if callable(self.rest_length) else self.rest_length
        return float(mu)


@dataclass
class CableState:
    """Runtime kinematics and force of one cable."""

    length: float
    rate: float
    direction: np.ndarray
    rest_length: float
    tension: float
    force_density: float
    slack: bool


@dataclass
class ConcentratedLoad:
    """Point force on a member; magnitude may be a callable of time."""

    member: str
    point: object
    force: object  # (m,) vector or callable t -> vector


@dataclass
class LoadSet:
    """Gravity plus concentrated loads."""

    gravity: object = None  # (m,) acceleration vector or None
    concentrated: Sequence[ConcentratedLoad] = field(default_factory=tuple)


def tension_magnitude(stiffness, damping, rest_length, length, rate,
                      allow_slack=True):
    """Tension from the linear stiffness / linear damping / slack law.

    Returns ``(f, slack)``; the tension is clamped to zero whenever the
    spring-damper value goes negative or the cable is shorter than its rest
    length, unless slack is disabled.
    """
    f_plus = stiffness * (length - rest_length) + damping * rate
    if not allow_slack:
        return f_plus, False
    if f_plus >= 0.0 and length >= rest_length:
        return f_plus, False
    return 0.0, True


class _CompiledCable:
    """Cable bound to the global layout; J restricted to its support columns."""

    def __init__(self, spec: CableSpec, topo: SystemTopology):
        self.spec = spec
        Pa = _attachment_matrix(spec.end_a, topo, spec.name)
        Pb = _attachment_matrix(spec.end_b, topo, spec.name)
        J = Pb - Pa
        self.support = np.flatnonzero(np.any(J != 0.0, axis=0))
        self.J = J[:, self.support].copy()
        free_pos = topo._free_pos[self.support]
        self.free_cols = np.flatnonzero(free_pos >= 0)       # within support
        self.free_global = free_pos[self.free_cols]          # within free space

    def lvec(self, q):
        return self.J @ q[self.support]

    def lvec_rate(self, qd):
        return self.J @ qd[self.support]


def _attachment_matrix(end, topo: SystemTopology, cable_name: str):
    if isinstance(end, MemberPoint):
        return topo.point_matrix(end.member, end.point)
    if isinstance(end, AnchorPoint):
        return topo.anchor_matrix(end.anchor)
    raise TypeError(
        f"cable {cable_name!r}: endpoints must be MemberPoint or AnchorPoint")


class ForceModel:
    """Bundles cables and loads; evaluates F and its tangents on free coords."""

    def __init__(self, topo: SystemTopology, cables: Sequence[CableSpec] = (),
                 loads: LoadSet | None = None):
        self.topo = topo
        self.cables = list(cables)
        self.loads = loads or LoadSet()
        self._compiled = [_CompiledCable(c, topo) for c in self.cables]

        n = topo.n
        grav_full = np.zeros(n)
        if self.loads.gravity is not None:
            g = np.asarray(self.loads.gravity, dtype=float)
            if g.shape != (topo.dim,):
                raise ValueError(f"gravity must be a {topo.dim}-vector")
            for member in topo.members:
                P = topo.point_matrix(member.name,
                                      LocalPoint(member.template.center_coeffs))
                grav_full += P.T @ (member.template.mass * g)
        self._gravity_full = grav_full
        self._gravity_free = grav_full[topo.free_idx]

        self._load_entries = []
        for load in self.loads.concentrated:
            P = topo.point_matrix(load.member, load.point)
            self._load_entries.append((P[:, topo.free_idx].T, load.force))

    # -- cables ---------------------------------------------------------------

    @property
    def n_cables(self) -> int:
        return len(self.cables)

    def rest_lengths(self, t: float = 0.0) -> np.ndarray:
        return np.array([c.rest_length_at(t) for c in self.cables])

    def cable_state(self, j: int, q, qd=None, t: float = 0.0) -> CableState:
        cc = self._compiled[j]
        spec = cc.spec
        lvec = cc.lvec(q)
        length = float(np.linalg.norm(lvec))
        if length < _MIN_LENGTH:
            raise DegenerateCableError(
                f"cable {spec.name!r} has length {length:.3e}")
        direction = lvec / length
        rate = float(direction @ cc.lvec_rate(qd)) if qd is not None else 0.0
        mu = spec.rest_length_at(t)
        f, slack = tension_magnitude(spec.stiffness, spec.damping, mu,
                                     length, rate, spec.allow_slack)
        return CableState(length, rate, direction, mu, f, f / length, slack)

    def cable_states(self, q, qd=None, t: float = 0.0):
        return [self.cable_state(j, q, qd, t) for j in range(self.n_cables)]

    def tension_force(self, q, qd=None, t: float = 0.0) -> np.ndarray:
        """Generalized cable force on the free coordinates."""
        Q = np.zeros(self.topo.n_free)
        for j, cc in enumerate(self._compiled):
            st = self.cable_state(j, q, qd, t)
            if st.tension == 0.0:
                continue
            contrib = -cc.J.T @ (st.tension * st.direction)
            Q[cc.free_global] += contrib[cc.free_cols]
        return Q

    def tension_force_matrix(self, q) -> np.ndarray:
        """Columns E_free^T J_j^T l_vec_j, so that Q = -(matrix) @ gamma."""
        W = np.zeros((self.topo.n_free, self.n_cables))
        for j, cc in enumerate(self._compiled):
            col = cc.J.T @ cc.lvec(q)
            W[cc.free_global, j] = col[cc.free_cols]
        return W

    def stiffness_weighted_matrix(self, q) -> np.ndarray:
        """Columns E_free^T J_j^T kappa_j lhat_j (rest-length inverse statics)."""
        B = np.zeros((self.topo.n_free, self.n_cables))
        for j, cc in enumerate(self._compiled):
            lvec = cc.lvec(q)
            length = np.linalg.norm(lvec)
            if length < _MIN_LENGTH:
                raise DegenerateCableError(
                    f"cable {cc.spec.name!r} has length {length:.3e}")
            col = cc.J.T @ (cc.spec.stiffness / length * lvec)
            B[cc.free_global, j] = col[cc.free_cols]
        return B

    def cable_lengths(self, q) -> np.ndarray:
        return np.array([np.linalg.norm(cc.lvec(q)) for cc in self._compiled])

    def tension_derivatives(self, q, qd=None, t: float = 0.0):
        """Analytic dQ/dq_free and dQ/dqd_free; slack cables contribute zero."""
        nf = self.topo.n_free
        dQdq = np.zeros((nf, nf))
        dQdv = np.zeros((nf, nf))
        for j, cc in enumerate(self._compiled):
            st = self.cable_state(j, q, qd, t)
            if st.slack:
                continue
            spec = cc.spec
            lhat = st.direction
            m = lhat.size
            eye = np.eye(m)
            S = st.force_density * (eye - np.outer(lhat, lhat)) \
                + spec.stiffness * np.outer(lhat, lhat)
            if spec.damping and qd is not None:
                lvec_rate = cc.lvec_rate(qd)
                S += (spec.damping / st.length) * np.outer(
                    lhat, lvec_rate - st.rate * lhat)
            block_q = -cc.J.T @ S @ cc.J
            ix = np.ix_(cc.free_global, cc.free_global)
            loc = np.ix_(cc.free_cols, cc.free_cols)
            dQdq[ix] += block_q[loc]
            if spec.damping:
                block_v = -spec.damping * cc.J.T @ np.outer(lhat, lhat) @ cc.J
                dQdv[ix] += block_v[loc]
        return dQdq, dQdv

    # -- loads ------------------------------------------------------------------

    def load_force(self, t: float = 0.0) -> np.ndarray:
        """Generalized gravity and concentrated forces (constant in q)."""
        F = self._gravity_free.copy()
        for W, force in self._load_entries:
            f = np.asarray(force(t) if callable(force) else force, dtype=float)
            F += W @ f
        return F

    # -- totals -------------------------------------------------------------------

    def force(self, q, qd=None, t: float = 0.0) -> np.ndarray:
        F = self.load_force(t)
        if self._compiled:
            F = F + self.tension_force(q, qd, t)
        return F

    def force_derivatives(self, q, qd=None, t: float = 0.0):
        if self._compiled:
            return self.tension_derivatives(q, qd, t)
        nf = self.topo.n_free
        return np.zeros((nf, nf)), np.zeros((nf, nf))

    # -- energy ---------------------------------------------------------------------

    def gravity_potential(self, q) -> float:
        return -float(self._gravity_full @ q)

    def cable_potential(self, q, t: float = 0.0) -> float:
        """Elastic energy of the cables (meaningful for undamped cables)."""
        V = 0.0
        for j, cc in enumerate(self._compiled):
            spec = cc.spec
            length = np.linalg.norm(cc.lvec(q))
            mu = spec.rest_length_at(t)
            stretch = length - mu
            if spec.allow_slack:
                stretch = max(stretch, 0.0)
            V += 0.5 * spec.stiffness * stretch ** 2
        return V

    def potential(self, q, t: float = 0.0) -> float:
        return self.gravity_potential(q) + self.cable_potential(q, t)
