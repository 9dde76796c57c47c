"""Quantum observables of the steady Gaussian state.

Everything here consumes the 6x6 covariance matrix in the quadrature
order (dQ_o, dP_o, dQ, dP, dQ_w, dP_w) with vacuum variance 1/2: mode
letters are 'o' (optical), 'm' (mechanical), 'w' (microwave).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .fluct import CovarianceMatrix

__all__ = [
    "MODE_SLICES",
    "BipartiteCM",
    "ObservableRecord",
    "reduce_bipartition",
    "log_negativity",
    "effective_phonon",
    "squeezing_db",
    "equipartition_gap",
]

MODE_SLICES = {"o": (0, 1), "m": (2, 3), "w": (4, 5)}

# discriminants this far below zero are rounding noise, anything worse
# signals an invalid covariance matrix upstream
_DISC_CLAMP = -1e-12


@dataclass(frozen=True)
class BipartiteCM:
    """4x4 two-mode covariance matrix with its mode-pair label."""

    matrix: np.ndarray
    pair: str

    @property
    def block_first(self) -> np.ndarray:
        return self.matrix[:2, :2]

    @property
    def block_second(self) -> np.ndarray:
        return self.matrix[2:, 2:]

    @property
    def block_cross(self) -> np.ndarray:
        return self.matrix[:2, 2:]


@dataclass(frozen=True)
class ObservableRecord:
    """One sweep-point result row.

    Observables are NaN when the point carries no stable branch (then
    ``stable`` is False).  n_eff equals (var_q + var_p - 1)/2 by
    construction.
    """

    coords: tuple
    branch_index: int
    stable: bool
    en_ow: float = math.nan
    en_om: float = math.nan
    en_mw: float = math.nan
    n_eff: float = math.nan
    var_q: float = math.nan
    var_p: float = math.nan
    s_q_db: float = math.nan
    s_p_db: float = math.nan
    intensity_optical: float = math.nan
    intensity_microwave: float = math.nan
    q_ss: float = math.nan
    abscissa: float = math.nan
    rh_ok: bool | None = None
    error: str = ""


def _as_matrix(cov) -> np.ndarray:
    m = cov.matrix if isinstance(cov, CovarianceMatrix) else np.asarray(cov, dtype=float)
    if m.shape != (6, 6):
        raise ValueError("covariance matrix must be 6x6")
    return m


def reduce_bipartition(cov, pair: str) -> BipartiteCM:
    """Extract the two-mode covariance matrix of the named pair.

    ``pair`` is two distinct letters from {'o', 'm', 'w'}; the first
    letter becomes the upper-left 2x2 block.  Rows and columns of the
    remaining mode are dropped.
    """
    m = _as_matrix(cov)
    if len(pair) != 2 or pair[0] == pair[1] or any(c not in MODE_SLICES for c in pair):
        raise ValueError(f"invalid mode pair {pair!r}")
    idx = [i for c in pair for i in MODE_SLICES[c]]
    return BipartiteCM(matrix=m[np.ix_(idx, idx)], pair=pair)


def log_negativity(vbp: BipartiteCM) -> float:
    """Logarithmic negativity of a two-mode Gaussian state.

    Uses the closed form through the partially transposed symplectic
    invariant: with S = det B + det B' - 2 det C, the smallest
    symplectic eigenvalue of the partial transpose is
    sqrt((S - sqrt(S^2 - 4 det V))/2), and the negativity is
    max(0, -ln(2 eta)).  Slightly negative discriminants (rounding)
    are clamped; an unphysical eta <= 0 is clamped to 0+ with a
    warning, which reports infinite negativity rather than hiding the
    invalid input.
    """
    m = vbp.matrix
    if not np.all(np.isfinite(m)):
        raise ValueError("covariance matrix contains NaN/Inf")
    sigma = (float(np.linalg.det(vbp.block_first))
             + float(np.linalg.det(vbp.block_second))
             - 2.0 * float(np.linalg.det(vbp.block_cross)))
    disc = sigma * sigma - 4.0 * float(np.linalg.det(m))
    if disc < 0.0:
        if disc < _DISC_CLAMP * max(1.0, sigma * sigma):
            raise ValueError(
                f"discriminant {disc:.3e} < 0: invalid two-mode covariance matrix")
        disc = 0.0
    eta_sq = 0.5 * (sigma - math.sqrt(disc))
    if eta_sq <= 0.0:
        warnings.warn(
            f"non-positive symplectic eigenvalue (eta^2 = {eta_sq:.3e}); "
            "covariance matrix is unphysical, clamping to 0+", stacklevel=2)
        return math.inf
    return max(0.0, -math.log(2.0 * math.sqrt(eta_sq)))


def effective_phonon(cov) -> float:
    """Mean mechanical excitation from the mechanical diagonal entries."""
    m = _as_matrix(cov)
    return 0.5 * (m[2, 2] + m[3, 3] - 1.0)


def squeezing_db(cov, quad: str) -> float:
    """Squeezing of a mechanical quadrature in dB relative to zero point.

    quad is 'q' or 'p'; positive values mean the variance is below the
    zero-point value 1/2, and 3.0103 dB marks variance 1/4.
    """
    m = _as_matrix(cov)
    quad = quad.lower()
    if quad == "q":
        var = m[2, 2]
    elif quad == "p":
        var = m[3, 3]
    else:
        raise ValueError("quad must be 'q' or 'p'")
    if var <= 0.0:
        raise ValueError(f"non-positive variance {var!r}")
    return -10.0 * math.log10(2.0 * var)


def equipartition_gap(cov):
    """Mechanical (var Q, var P); both near 1/2 in a true ground state."""
    m = _as_matrix(cov)
    return float(m[2, 2]), float(m[3, 3])
