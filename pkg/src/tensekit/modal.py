"""Linearized dynamics about a static equilibrium and modal analysis.

Perturbing the constrained equations about an equilibrium (q_e, lam_e) and
restricting the perturbation to the tangent space of the constraints,
delta qf = N xi, gives a standard linear system

    M_red xi'' + C_red xi' + K_red xi = 0

whose undamped eigenpairs are the natural frequencies and mode shapes.
K_red carries both the force tangents and the geometric stiffness from the
pre-stressed constraints, assembled from their constant Hessians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from tensekit.assembly import SystemTopology
from tensekit.forces import ForceModel
from tensekit.statics import StaticState

__all__ = [
    "LinearizedModel",
    "ModeSet",
    "linearize",
    "solve_modes",
    "dominant_frequency",
]


@dataclass
class LinearizedModel:
    """Reduced-basis mass, damping and stiffness at an equilibrium."""

    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray
    basis: np.ndarray       # nullspace basis N (n_free x r)
    q_e: np.ndarray
    lam_e: np.ndarray

    @property
    def order(self) -> int:
        return self.mass.shape[0]


@dataclass
class ModeSet:
    """Eigen solution: squared angular frequencies ascending plus shapes."""

    omega2: np.ndarray
    shapes_reduced: np.ndarray    # columns xi_(r), mass-normalized
    shapes_natural: np.ndarray    # columns q_e + E N xi_(r)
    q_e: np.ndarray

    @property
    def frequencies_hz(self) -> np.ndarray:
        """sqrt(omega^2)/2pi with unstable (negative) entries mapped to zero."""
        return np.sqrt(np.clip(self.omega2, 0.0, None)) / (2.0 * np.pi)

    @property
    def stable(self) -> np.ndarray:
        return self.omega2 >= 0.0

    @property
    def imaginary_frequencies_hz(self) -> np.ndarray:
        """Growth rates (as frequencies) of the unstable modes, zero elsewhere."""
        return np.sqrt(np.clip(-self.omega2, 0.0, None)) / (2.0 * np.pi)

    def distinct_frequencies(self, rel_tol: float = 1e-6) -> np.ndarray:
        """Frequencies with duplicate multiplets collapsed to one entry."""
        freqs = self.frequencies_hz
        out = []
        for f in freqs:
            if not out or abs(f - out[-1]) > rel_tol * max(abs(out[-1]), 1e-12):
                out.append(f)
        return np.array(out)


def linearize(topo: SystemTopology, forces: ForceModel,
              equilibrium: StaticState, tol: float = 1e-8) -> LinearizedModel:
    """Build the reduced-basis matrices at a verified equilibrium point."""
    q_e = equilibrium.q
    lam_e = equilibrium.lam
    F = forces.force(q_e, None, 0.0)
    A = topo.constraint_jacobian(q_e)
    eq_res = -F - A.T @ lam_e
    cst_res = topo.constraint_residual(q_e)
    res = max(np.abs(eq_res).max() if eq_res.size else 0.0,
              np.abs(cst_res).max() if cst_res.size else 0.0)
    scale = max(np.abs(F).max() if F.size else 0.0, 1.0)
    if res > tol * scale:
        raise ValueError(
            f"linearization point is not an equilibrium "
            f"(residual {res:.3e}, tolerance {tol * scale:.3e})")

    N = topo.nullspace(q_e, jacobian=A)
    dFdq, dFdv = forces.force_derivatives(q_e, np.zeros(topo.n), 0.0)
    K_geo = topo.geometric_stiffness(lam_e)
    M_red = N.T @ topo.mass_free @ N
    C_red = N.T @ (-dFdv) @ N
    K_red = N.T @ (-dFdq - K_geo) @ N
    return LinearizedModel(M_red, C_red, K_red, N, q_e.copy(), lam_e.copy())


def solve_modes(model: LinearizedModel, topo: SystemTopology) -> ModeSet:
    """Undamped generalized symmetric eigenproblem of the reduced model.

    The reduced mass must be positive definite (it is, by construction,
    whenever the basis has full column rank); scipy's symmetric solver then
    returns a real spectrum.  Negative eigenvalues flag instability of the
    equilibrium.  Shapes are mass-normalized and also lifted to natural
    coordinates.
    """
    M, K = model.mass, model.stiffness
    try:
        scipy.linalg.cholesky(M)
    except scipy.linalg.LinAlgError as exc:
        raise np.linalg.LinAlgError(
            "reduced mass matrix is not positive definite; the nullspace "
            "basis or mass assembly is broken") from exc
    K_sym = 0.5 * (K + K.T)
    omega2, xi = scipy.linalg.eigh(K_sym, M)
    # eigh returns M-orthonormal columns: xi^T M xi = I (mass-normalized)
    lifted = np.tile(model.q_e[:, None], (1, model.order))
    lifted[topo.free_idx, :] += model.basis @ xi
    return ModeSet(omega2, xi, lifted, model.q_e.copy())


def dominant_frequency(signal, dt: float) -> float:
    """Frequency (Hz) of the strongest spectral peak of a detrended signal.

    Uses a Hann window and parabolic interpolation of the magnitude peak,
    which resolves well below the bin width for clean oscillations.
    """
    x = np.asarray(signal, dtype=float)
    x = x - x.mean()
    w = np.hanning(x.size)
    spec = np.abs(np.fft.rfft(x * w))
    freqs = np.fft.rfftfreq(x.size, dt)
    k = int(np.argmax(spec[1:])) + 1
    if 1 <= k < spec.size - 1:
        a, b, c = spec[k - 1], spec[k], spec[k + 1]
        denom = a - 2 * b + c
        shift = 0.5 * (a - c) / denom if denom != 0 else 0.0
        return float((k + shift) * (freqs[1] - freqs[0]))
    return float(freqs[k])
