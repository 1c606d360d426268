"""Static equilibrium: residuals, inverse statics and multiplier recovery.

The equilibrium conditions are -F - A^T lam = 0 together with Phi = 0,
where F collects gravity, external loads and cable tensions at rest.
Projecting the force balance onto a nullspace basis N of the constraint
Jacobian eliminates the multipliers and yields linear equation systems for
either the cable force densities or, through the linear constitutive law,
the cable rest lengths.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from tensekit.assembly import SystemTopology
from tensekit.forces import ForceModel

__all__ = [
    "StaticState",
    "InverseStaticsError",
    "TautnessError",
    "UnderdeterminedError",
    "static_residual",
    "recover_multipliers",
    "inverse_force_densities",
    "inverse_rest_lengths",
    "refine_equilibrium",
]


class InverseStaticsError(RuntimeError):
    pass


class TautnessError(InverseStaticsError):
    """Solved rest lengths leave some cables slack, violating the assumption."""

    def __init__(self, message, cables):
        super().__init__(message)
        self.cables = cables


class UnderdeterminedError(InverseStaticsError):
    def __init__(self, message, nullity):
        super().__init__(message)
        self.nullity = nullity


@dataclass
class StaticState:
    """An equilibrium configuration with its multipliers and cable values."""

    q: np.ndarray
    lam: np.ndarray
    gamma: np.ndarray = field(default_factory=lambda: np.zeros(0))
    mu: np.ndarray = field(default_factory=lambda: np.zeros(0))
    tensions: np.ndarray = field(default_factory=lambda: np.zeros(0))
    lengths: np.ndarray = field(default_factory=lambda: np.zeros(0))
    residual_norm: float = np.nan
    rank: int = -1
    nullity: int = 0


def static_residual(topo: SystemTopology, forces: ForceModel, q, lam,
                    t: float = 0.0):
    """Force-balance and constraint residuals at rest (velocities zero)."""
    F = forces.force(q, None, t)
    A = topo.constraint_jacobian(q)
    return -F - A.T @ np.asarray(lam), topo.constraint_residual(q)


def recover_multipliers(topo: SystemTopology, forces: ForceModel, q,
                        t: float = 0.0) -> np.ndarray:
    """Least-squares multipliers from the full static force balance.

    For a full-row-rank constraint Jacobian this reproduces
    -(A A^T)^{-1} A F; with redundant constraints the minimum-norm
    multipliers are returned (the joint forces are then non-unique).
    """
    F = forces.force(q, None, t)
    A = topo.constraint_jacobian(q)
    lam, *_ = np.linalg.lstsq(A.T, -F, rcond=None)
    return lam


def inverse_force_densities(topo: SystemTopology, forces: ForceModel, q,
                            t: float = 0.0) -> StaticState:
    """Force densities equilibrating the configuration under the dead loads.

    Solves N^T W gamma = N^T (G + F_ext) in the least-squares sense, where
    the columns of W are J_j^T l_vec_j.  Reports the rank of the projected
    coefficient matrix and the dimension of its solution set; negative
    entries (cables that would need to push) are left in place for the
    caller to inspect.
    """
    N = topo.nullspace(q)
    W = forces.tension_force_matrix(q)
    lhs = N.T @ W
    rhs = N.T @ forces.load_force(t)
    gamma, _, rank, _ = np.linalg.lstsq(lhs, rhs, rcond=None)
    residual = np.linalg.norm(lhs @ gamma - rhs)
    lengths = forces.cable_lengths(q)
    tensions = gamma * lengths
    # rest lengths consistent with the linear law, where stiffness permits
    kappa = np.array([c.stiffness for c in forces.cables])
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = np.where(kappa > 0, lengths * (1.0 - gamma / kappa), np.nan)
    lam = _multipliers_for(topo, forces, q, gamma, t)
    eq_res, _ = static_residual_with_gamma(topo, forces, q, gamma, lam, t)
    return StaticState(q=np.asarray(q, float).copy(), lam=lam, gamma=gamma,
                       mu=mu, tensions=tensions, lengths=lengths,
                       residual_norm=max(residual, np.linalg.norm(eq_res)),
                       rank=int(rank), nullity=lhs.shape[1] - int(rank))


def static_residual_with_gamma(topo, forces, q, gamma, lam, t=0.0):
    """Force balance when cable forces are imposed through force densities."""
    W = forces.tension_force_matrix(q)
    F = forces.load_force(t) - W @ np.asarray(gamma)
    A = topo.constraint_jacobian(q)
    return -F - A.T @ np.asarray(lam), topo.constraint_residual(q)


def _multipliers_for(topo, forces, q, gamma, t):
    W = forces.tension_force_matrix(q)
    F = forces.load_force(t) - W @ gamma
    A = topo.constraint_jacobian(q)
    lam, *_ = np.linalg.lstsq(A.T, -F, rcond=None)
    return lam


def inverse_rest_lengths(topo: SystemTopology, forces: ForceModel, q,
                         fixed: dict | None = None, t: float = 0.0,
                         consistency_tol: float = 1e-8) -> StaticState:
    """Rest lengths equilibrating the configuration, all cables taut.

    Substituting the linear constitutive law into the projected force
    balance yields B mu = b.  ``fixed`` maps cable names to imposed rest
    lengths; those columns are moved to the right-hand side and the
    remaining system must be uniquely solvable.  The taut assumption is
    verified after the solve.
    """
    fixed = dict(fixed or {})
    names = [c.name for c in forces.cables]
    unknown_names = [n for n in names if n not in fixed]
    for name in fixed:
        if name not in names:
            raise InverseStaticsError(f"fixed rest length for unknown cable {name!r}")

    N = topo.nullspace(q)
    Bfull = N.T @ forces.stiffness_weighted_matrix(q)
    lengths = forces.cable_lengths(q)
    b = Bfull @ lengths - N.T @ forces.load_force(t)

    idx = {n: j for j, n in enumerate(names)}
    fixed_cols = [idx[n] for n in fixed]
    free_cols = [idx[n] for n in unknown_names]
    mu = np.empty(len(names))
    for n, value in fixed.items():
        mu[idx[n]] = value
    rhs = b - (Bfull[:, fixed_cols] @ np.array([fixed[n] for n in fixed])
               if fixed_cols else 0.0)
    B = Bfull[:, free_cols]
    sol, _, rank, _ = np.linalg.lstsq(B, rhs, rcond=None)
    if rank < len(free_cols):
        raise UnderdeterminedError(
            f"rest-length system is underdetermined: rank {rank} for "
            f"{len(free_cols)} unknowns; fix at least "
            f"{len(free_cols) - rank} more rest lengths",
            nullity=len(free_cols) - rank)
    residual = np.linalg.norm(B @ sol - rhs)
    scale = max(np.linalg.norm(rhs), 1.0)
    if residual > consistency_tol * scale:
        raise InverseStaticsError(
            f"rest-length system is inconsistent "
            f"(residual {residual:.3e} vs scale {scale:.3e}): no taut "
            f"equilibrium with the given fixed values")
    mu[free_cols] = sol

    slack_names = [names[j] for j in range(len(names)) if mu[j] >= lengths[j]]
    if slack_names:
        raise TautnessError(
            f"solved rest lengths leave cables slack: {slack_names}",
            slack_names)

    kappa = np.array([c.stiffness for c in forces.cables])
    gamma = kappa * (lengths - mu) / lengths
    lam = _multipliers_for(topo, forces, q, gamma, t)
    eq_res, _ = static_residual_with_gamma(topo, forces, q, gamma, lam, t)
    return StaticState(q=np.asarray(q, float).copy(), lam=lam, gamma=gamma,
                       mu=mu, tensions=gamma * lengths, lengths=lengths,
                       residual_norm=np.linalg.norm(eq_res),
                       rank=int(np.linalg.matrix_rank(Bfull)),
                       nullity=Bfull.shape[1] - int(np.linalg.matrix_rank(Bfull)))


def refine_equilibrium(topo: SystemTopology, forces: ForceModel, q_guess,
                       t: float = 0.0, tol: float = 1e-10, max_iter: int = 50,
                       damping: float = 1.0) -> StaticState:
    """Damped Newton refinement of a static configuration.

    This is a local forward-statics solve from a user-supplied guess; it
    iterates on the free coordinates and multipliers simultaneously.
    """
    q = np.asarray(q_guess, float).copy()
    qp, _, _ = topo.boundary_state(t)
    qf = topo.free(q)
    lam = recover_multipliers(topo, forces, topo.compose(qf, qp), t)
    nf, nc = topo.n_free, topo.n_constraints
    for _ in range(max_iter):
        q = topo.compose(qf, qp)
        eq, cst = static_residual(topo, forces, q, lam, t)
        norm = max(np.abs(eq).max() if eq.size else 0.0,
                   np.abs(cst).max() if cst.size else 0.0)
        if norm <= tol:
            lengths = forces.cable_lengths(q) if forces.n_cables else np.zeros(0)
            states = forces.cable_states(q, None, t) if forces.n_cables else []
            gamma = np.array([s.force_density for s in states])
            tensions = np.array([s.tension for s in states])
            mu = forces.rest_lengths(t)
            return StaticState(q=q, lam=lam, gamma=gamma, mu=mu,
                               tensions=tensions, lengths=lengths,
                               residual_norm=norm)
        dFdq, _ = forces.force_derivatives(q, None, t)
        A = topo.constraint_jacobian(q)
        jac = np.zeros((nf + nc, nf + nc))
        jac[:nf, :nf] = -dFdq - topo.geometric_stiffness(lam)
        jac[:nf, nf:] = -A.T
        jac[nf:, :nf] = A
        rhs = np.concatenate([eq, cst])
        delta, *_ = np.linalg.lstsq(jac, -rhs, rcond=None)
        qf = qf + damping * delta[:nf]
        lam = lam + damping * delta[nf:]
    raise InverseStaticsError(
        f"equilibrium refinement did not converge (residual {norm:.3e})")
