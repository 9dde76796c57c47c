"""Linearized fluctuation analysis at a mean-field branch.

Quadrature ordering is (dQ_o, dP_o, dQ, dP, dQ_w, dP_w) throughout,
with the uniform normalization dQ = (da + da^dag)/sqrt(2), so every
quadrature has vacuum variance 1/2 and the diffusion matrix reads
diag[kappa, kappa, 0, gamma_m(2n_m+1), kappa_w(2n_w+1), kappa_w(2n_w+1)].
Drive phases are chosen so the steady field amplitudes are real, which
makes the coupling entries sqrt(2*I) times the respective rates.

Stability is decided two independent ways: the spectral abscissa of
the drift matrix, and the classical polynomial-inequality criterion
evaluated from closed-form characteristic-polynomial coefficients
(never from eigenvalues).  The steady covariance follows from the
36-unknown dense linear system equivalent to A V + V A^T = -D.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .meanfield import SteadyBranch
from .params import DerivedRates

__all__ = [
    "FluctError",
    "DriftMatrix",
    "DiffusionMatrix",
    "CovarianceMatrix",
    "build_drift",
    "build_diffusion",
    "is_stable_eigen",
    "routh_hurwitz",
    "solve_lyapunov",
    "symplectic_form",
    "physicality_defect",
]

# relative spectral-abscissa size below which the branch is treated as
# marginally stable and the Lyapunov solve is refused
MARGINAL_ABSCISSA = 1e-9

_LYAP_RESIDUAL_BOUND = 1e-9


class FluctError(RuntimeError):
    """Fluctuation-analysis failure (marginal/singular Lyapunov system)."""


@dataclass(frozen=True)
class DriftMatrix:
    """6x6 drift matrix of the linearized dynamics, plus its origin."""

    matrix: np.ndarray
    branch: SteadyBranch | None = None
    frequency_scale: float | None = None  # for the marginal-stability test


@dataclass(frozen=True)
class DiffusionMatrix:
    """6x6 diagonal noise-correlation matrix."""

    matrix: np.ndarray

    @property
    def diagonal(self) -> np.ndarray:
        return np.diag(self.matrix)


@dataclass(frozen=True)
class CovarianceMatrix:
    """Symmetric steady-state quadrature correlation matrix (vacuum 1/2)."""

    matrix: np.ndarray
    residual: float  # inf-norm of A V + V A^T + D


def build_drift(rates: DerivedRates, branch: SteadyBranch) -> DriftMatrix:
    """Assemble the drift matrix at a steady branch.

    The optical coupling entry is (g1 + 2 g2 <Q>) * sqrt(2 I); the
    microwave one g_w * sqrt(2 I_w).  Both appear symmetrically in the
    momentum row and the respective field-phase row.
    """
    kap, kw = rates.kappa, rates.kappa_w
    gm, om = rates.gamma_m, rates.omega_m
    dc, dw = branch.delta_c, branch.delta_w
    g_opt = branch.coupling_effective * math.sqrt(2.0 * branch.intensity_optical)
    g_mw = rates.coupling_microwave * math.sqrt(2.0 * branch.intensity_microwave)
    a = np.zeros((6, 6))
    a[0, 0] = -kap
    a[0, 1] = dc
    a[1, 0] = -dc
    a[1, 1] = -kap
    a[1, 2] = g_opt
    a[2, 3] = om
    a[3, 0] = g_opt
    a[3, 2] = -branch.omega_m_tilde
    a[3, 3] = -gm
    a[3, 4] = g_mw
    a[4, 4] = -kw
    a[4, 5] = dw
    a[5, 2] = g_mw
    a[5, 4] = -dw
    a[5, 5] = -kw
    return DriftMatrix(matrix=a, branch=branch, frequency_scale=om)


def build_diffusion(rates: DerivedRates) -> DiffusionMatrix:
    """Diagonal diffusion matrix from the input-noise correlators."""
    diag = np.array([
        rates.kappa,
        rates.kappa,
        0.0,
        rates.gamma_m * (2.0 * rates.n_mechanical + 1.0),
        rates.kappa_w * (2.0 * rates.n_microwave + 1.0),
        rates.kappa_w * (2.0 * rates.n_microwave + 1.0),
    ])
    return DiffusionMatrix(matrix=np.diag(diag))


def is_stable_eigen(drift: DriftMatrix):
    """Eigenvalue stability test.

    Returns (stable, abscissa) where abscissa = max Re(lambda) over the
    six drift eigenvalues; stable iff abscissa < 0.
    """
    try:
        eigvals = np.linalg.eigvals(drift.matrix)
    except np.linalg.LinAlgError as exc:
        raise FluctError(
            f"eigenvalue solver failed on drift matrix:\n{drift.matrix!r}"
        ) from exc
    abscissa = float(np.max(eigvals.real))
    return abscissa < 0.0, abscissa


def _charpoly_coefficients(kap, kw, gm, dc, dw, om, omt, g_opt, g_mw):
    """Closed-form coefficients a1..a6 of det(lambda*I - A)."""
    ksum = kap + kw
    kmix = kap * kap + 4.0 * kap * kw + kw * kw
    dc2, dw2 = dc * dc, dw * dw
    kap2, kw2 = kap * kap, kw * kw
    oo = om * omt
    a1 = gm + 2.0 * ksum
    a2 = dc2 + dw2 + oo + 2.0 * gm * ksum + kmix
    a3 = (gm * (dc2 + dw2 + kmix)
          + 2.0 * (dc2 * kw + dw2 * kap + oo * ksum + kap * kw * ksum))
    a4 = (dc2 * dw2 + oo * (dc2 + dw2 + kmix)
          + 2.0 * gm * (dc2 * kw + dw2 * kap + kap * kw * ksum)
          + dc2 * kw2 + dw2 * kap2 + kap2 * kw2
          - om * (g_opt * g_opt * dc + g_mw * g_mw * dw))
    a5 = (gm * (dc2 + kap2) * (dw2 + kw2)
          + 2.0 * oo * (dc2 * kw + dw2 * kap + kap * kw * ksum)
          - 2.0 * om * (g_opt * g_opt * dc * kw + g_mw * g_mw * dw * kap))
    a6 = om * (omt * (dc2 + kap2) * (dw2 + kw2)
               - g_opt * g_opt * dc * (dw2 + kw2)
               - g_mw * g_mw * dw * (dc2 + kap2))
    return a1, a2, a3, a4, a5, a6


def routh_hurwitz(rates: DerivedRates, branch: SteadyBranch):
    """Polynomial stability inequalities at a steady branch.

    Evaluates the six classical conditions as the leading principal
    minors of the Hurwitz matrix of the drift characteristic polynomial
    (the last condition reduces to the constant coefficient).  All
    rates are rescaled by the largest one first; the minors are
    weighted-homogeneous, so the rescaling multiplies each by a
    positive factor and cannot flip a verdict.

    Returns (stable, [s1..s6]) with stable iff all s_i > 0.
    """
    g_opt = branch.coupling_effective * math.sqrt(2.0 * branch.intensity_optical)
    g_mw = rates.coupling_microwave * math.sqrt(2.0 * branch.intensity_microwave)
    raw = (rates.kappa, rates.kappa_w, rates.gamma_m, branch.delta_c,
           branch.delta_w, rates.omega_m, branch.omega_m_tilde, g_opt, g_mw)
    scale = max(abs(x) for x in raw)
    if scale == 0.0:
        scale = 1.0
    kap, kw, gm, dc, dw, om, omt, g_opt, g_mw = (x / scale for x in raw)
    a1, a2, a3, a4, a5, a6 = _charpoly_coefficients(
        kap, kw, gm, dc, dw, om, omt, g_opt, g_mw)
    hurwitz = np.array([
        [a1, a3, a5, 0.0, 0.0],
        [1.0, a2, a4, a6, 0.0],
        [0.0, a1, a3, a5, 0.0],
        [0.0, 1.0, a2, a4, a6],
        [0.0, 0.0, a1, a3, a5],
    ])
    s1 = a1
    s2 = a1 * a2 - a3
    s3 = float(np.linalg.det(hurwitz[:3, :3]))
    s4 = float(np.linalg.det(hurwitz[:4, :4]))
    s5 = float(np.linalg.det(hurwitz))
    s6 = a6
    values = [s1, s2, s3, s4, s5, s6]
    return all(s > 0.0 for s in values), values


def solve_lyapunov(drift: DriftMatrix, diffusion: DiffusionMatrix) -> CovarianceMatrix:
    """Solve A V + V A^T = -D for the steady covariance matrix.

    Dense direct solve of the vectorized 36x36 system with partial
    pivoting, followed by symmetrization.  Marginally stable drift
    (|abscissa| below MARGINAL_ABSCISSA relative to the frequency
    scale) and singular systems are refused.
    """
    a = drift.matrix
    d = diffusion.matrix
    _, abscissa = is_stable_eigen(drift)
    scale = drift.frequency_scale or float(np.max(np.abs(a)))
    if abs(abscissa) < MARGINAL_ABSCISSA * scale:
        raise FluctError(
            f"marginally stable drift matrix (abscissa {abscissa:.3e}); "
            "Lyapunov solve refused")
    eye = np.eye(a.shape[0])
    system = np.kron(eye, a) + np.kron(a, eye)
    try:
        vec = np.linalg.solve(system, -d.reshape(-1, order="F"))
    except np.linalg.LinAlgError as exc:
        raise FluctError(
            "singular Lyapunov system (drift eigenvalue pair sums to zero)"
        ) from exc
    v = vec.reshape(a.shape, order="F")
    v = 0.5 * (v + v.T)
    residual = float(np.abs(a @ v + v @ a.T + d).sum(axis=1).max())
    bound = _LYAP_RESIDUAL_BOUND * float(np.abs(d).sum(axis=1).max())
    if residual > bound:
        raise FluctError(
            f"Lyapunov residual {residual:.3e} exceeds bound {bound:.3e}")
    return CovarianceMatrix(matrix=v, residual=residual)


def symplectic_form(n_modes) -> np.ndarray:
    """Block-diagonal symplectic form for (Q, P) ordering per mode."""
    block = np.array([[0.0, 1.0], [-1.0, 0.0]])
    out = np.zeros((2 * n_modes, 2 * n_modes))
    for i in range(n_modes):
        out[2 * i:2 * i + 2, 2 * i:2 * i + 2] = block
    return out


def physicality_defect(cov: CovarianceMatrix) -> float:
    """Minimum eigenvalue of V + (i/2)*Omega (>= 0 for a physical state).

    Small negative values can occur because the Brownian noise model
    carries momentum noise only; callers log rather than clamp.
    """
    omega = symplectic_form(cov.matrix.shape[0] // 2)
    herm = cov.matrix + 0.5j * omega
    return float(np.linalg.eigvalsh(herm).min())
