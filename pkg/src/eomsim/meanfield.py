"""Classical mean-field dynamics and self-consistent steady states.

The first and second mechanical moments evolve together with the two
field amplitudes (nine real ODEs).  Steady states are enumerated by
parameterizing the self-consistency system with the scalar membrane
displacement: for each candidate displacement the microwave intensity
is closed-form, the (optical intensity, mechanical variance) pair is a
damped fixed point, and the remaining force-balance residual is
bracketed on a uniform grid and refined by bisection.  Multistable
branches show up as multiple roots of that residual.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .ode import solve_dp54
from .params import DerivedRates

__all__ = [
    "MeanFieldError",
    "MeanFieldState",
    "MeanFieldTrajectory",
    "AdiabaticTrajectory",
    "SteadyBranch",
    "default_initial_state",
    "integrate_full",
    "integrate_adiabatic",
    "steady_states",
    "multistability_scan",
]

_FIXED_POINT_DAMPING = 0.5
_FIXED_POINT_TOL = 1e-12
_FIXED_POINT_MAX_ITER = 1000
_BISECT_RTOL = 1e-12
_MERGE_RTOL = 1e-9


class MeanFieldError(RuntimeError):
    """Steady-state enumeration failed for every bracket."""


@dataclass(frozen=True)
class MeanFieldState:
    """First and second moments of the mean field at one instant."""

    amp_optical: complex      # <a>
    q: float                  # <Q>
    p: float                  # <P>
    q2: float                 # <Q^2>
    p2: float                 # <P^2>
    pq_qp: float              # <PQ + QP>
    amp_microwave: complex    # <a_w>


def default_initial_state() -> MeanFieldState:
    """All-zero first moments and vacuum second moments (q2 = p2 = 1)."""
    return MeanFieldState(0j, 0.0, 0.0, 1.0, 1.0, 0.0, 0j)


@dataclass(frozen=True)
class MeanFieldTrajectory:
    """Sampled mean-field evolution from integrate_full."""

    t: np.ndarray
    amp_optical: np.ndarray
    q: np.ndarray
    p: np.ndarray
    q2: np.ndarray
    p2: np.ndarray
    pq_qp: np.ndarray
    amp_microwave: np.ndarray

    def state(self, i) -> MeanFieldState:
        return MeanFieldState(
            complex(self.amp_optical[i]), float(self.q[i]), float(self.p[i]),
            float(self.q2[i]), float(self.p2[i]), float(self.pq_qp[i]),
            complex(self.amp_microwave[i]))


@dataclass(frozen=True)
class AdiabaticTrajectory:
    """Sampled membrane motion with adiabatically eliminated fields."""

    t: np.ndarray
    q: np.ndarray
    p: np.ndarray
    intensity_optical: np.ndarray
    intensity_microwave: np.ndarray


@dataclass(frozen=True)
class SteadyBranch:
    """One self-consistent mean-field fixed point.

    ``omega_m_tilde`` is the intensity-softened spring Omega_m - 2*g2*I
    and ``omega_m_eff`` = sqrt(Omega_m * omega_m_tilde) (stored as 0
    when the softened spring inverts; such branches carry
    ``degenerate`` = True and ``stable`` = False).
    """

    q: float
    q2: float
    p2: float
    amp_optical: complex
    amp_microwave: complex
    intensity_optical: float
    intensity_microwave: float
    delta_c: float
    delta_w: float
    omega_m_tilde: float
    omega_m_eff: float
    coupling_effective: float   # g1 + 2*g2*<Q>
    residual: float
    degenerate: bool
    stable: bool = False
    abscissa: float = math.nan  # spectral abscissa of the drift matrix


def _check_tol(tol):
    if not 0.0 < tol <= 1e-3:
        raise ValueError("tol must lie in (0, 1e-3]")


def _sample_grid(t_end, t_eval, n_samples):
    if t_eval is not None:
        t_eval = np.asarray(t_eval, dtype=float)
        if t_eval.ndim != 1 or np.any(np.diff(t_eval) <= 0.0):
            raise ValueError("t_eval must be strictly increasing")
        return t_eval
    return np.linspace(0.0, t_end, n_samples)


def integrate_full(rates: DerivedRates, init: MeanFieldState, t_end, tol,
                   t_eval=None, n_samples=1000) -> MeanFieldTrajectory:
    """Integrate the nine coupled moment equations up to t_end.

    Parameters
    ----------
    rates : DerivedRates
    init : MeanFieldState
        Initial moments; see default_initial_state().
    t_end : float
        Final time in seconds, > 0.
    tol : float
        Local error tolerance per step, in (0, 1e-3].
    t_eval : array_like, optional
        Sample grid; defaults to n_samples points uniform on [0, t_end].
    """
    _check_tol(tol)
    if not t_end > 0.0:
        raise ValueError("t_end must be > 0")
    g1 = rates.coupling_linear
    g2 = rates.coupling_quadratic
    gw = rates.coupling_microwave
    ed = rates.drive_optical
    edw = rates.drive_microwave
    om = rates.omega_m
    kap = rates.kappa
    kw = rates.kappa_w
    gm = rates.gamma_m
    d0c = rates.delta0c
    d0w = rates.delta0w
    heat = 2.0 * gm * (1.0 + 2.0 * rates.n_mechanical)

    def rhs(t, y):
        ar, ai, q, p, q2, p2, pq, wr, wi = y
        ia = ar * ar + ai * ai
        iw = wr * wr + wi * wi
        dc = d0c - g1 * q - g2 * q2
        dw = d0w - gw * q
        spring = om - 2.0 * g2 * ia
        force = g1 * ia + gw * iw
        return np.array([
            -kap * ar + dc * ai + ed,
            -kap * ai - dc * ar,
            om * p,
            -spring * q + force - gm * p,
            om * pq,
            -spring * pq + 2.0 * force * p - 2.0 * gm * p2 + heat,
            -2.0 * spring * q2 + 2.0 * om * p2 + 2.0 * force * q - gm * pq,
            -kw * wr + dw * wi + edw,
            -kw * wi - dw * wr,
        ])

    y0 = np.array([
        init.amp_optical.real, init.amp_optical.imag, init.q, init.p,
        init.q2, init.p2, init.pq_qp,
        init.amp_microwave.real, init.amp_microwave.imag,
    ])
    # characteristic scale per component for the absolute tolerance
    a_free = ed / math.hypot(d0c, kap)
    aw_free = edw / math.hypot(d0w, kw)
    q_scale = max(1.0, (g1 * a_free**2 + gw * aw_free**2) / om)
    m2_scale = max(1.0, q_scale**2, 1.0 + 2.0 * rates.n_mechanical)
    scales = np.array([
        max(1.0, a_free), max(1.0, a_free), q_scale, q_scale,
        m2_scale, m2_scale, m2_scale, max(1.0, aw_free), max(1.0, aw_free),
    ])
    grid = _sample_grid(t_end, t_eval, n_samples)
    ys, _ = solve_dp54(rhs, (0.0, t_end), y0, grid, rtol=tol, atol=tol * scales)
    return MeanFieldTrajectory(
        t=grid,
        amp_optical=ys[:, 0] + 1j * ys[:, 1],
        q=ys[:, 2], p=ys[:, 3], q2=ys[:, 4], p2=ys[:, 5], pq_qp=ys[:, 6],
        amp_microwave=ys[:, 7] + 1j * ys[:, 8],
    )


def integrate_adiabatic(rates: DerivedRates, q0, p0, t_end, tol,
                        t_eval=None, n_samples=1000,
                        frozen_detunings=None) -> AdiabaticTrajectory:
    """Integrate the membrane with the field modes slaved to it.

    The fields follow the instantaneous displacement: the intensities
    are evaluated from the Lorentzian steady responses at detunings
    built from q(t) and the quasi-static variance estimate
    q^2 + Omega_m*(1+2n_m)/Omega_m_tilde.

    Passing frozen_detunings=(delta_c, delta_w) pins both detunings,
    turning the model into an exactly solvable damped driven oscillator
    (useful as a cross-check).
    """
    _check_tol(tol)
    if not t_end > 0.0:
        raise ValueError("t_end must be > 0")
    if rates.kappa / rates.gamma_m < 100.0 or rates.kappa_w / rates.gamma_m < 100.0:
        warnings.warn(
            "adiabatic elimination assumes kappa, kappa_w >> gamma_m "
            f"(kappa/gamma_m = {rates.kappa / rates.gamma_m:.3g}, "
            f"kappa_w/gamma_m = {rates.kappa_w / rates.gamma_m:.3g})",
            stacklevel=2)
    g1 = rates.coupling_linear
    g2 = rates.coupling_quadratic
    gw = rates.coupling_microwave
    ed2 = rates.drive_optical**2
    edw2 = rates.drive_microwave**2
    om = rates.omega_m
    kap2 = rates.kappa**2
    kw2 = rates.kappa_w**2
    gm = rates.gamma_m
    d0c = rates.delta0c
    d0w = rates.delta0w
    var_heat = om * (1.0 + 2.0 * rates.n_mechanical)

    def intensities(q):
        if frozen_detunings is not None:
            dc, dw = frozen_detunings
            return ed2 / (dc * dc + kap2), edw2 / (dw * dw + kw2)
        iw = edw2 / ((d0w - gw * q)**2 + kw2)
        # quasi-static variance feeds back on the optical detuning only
        # weakly; a few undamped passes settle it away from the
        # softened-spring pole
        spring = om
        ia = 0.0
        for _ in range(3):
            q2 = q * q + var_heat / spring
            dc = d0c - g1 * q - g2 * q2
            ia = ed2 / (dc * dc + kap2)
            spring_new = om - 2.0 * g2 * ia
            if spring_new <= 0.0 or not math.isfinite(spring_new):
                spring = om  # pole crossed; fall back to the bare spring
                break
            spring = spring_new
        q2 = q * q + var_heat / spring
        dc = d0c - g1 * q - g2 * q2
        return ed2 / (dc * dc + kap2), iw

    def rhs(t, y):
        q, p = y
        ia, iw = intensities(q)
        spring = om - 2.0 * g2 * ia
        return np.array([om * p, -spring * q + g1 * ia + gw * iw - gm * p])

    ia0, iw0 = intensities(q0)
    q_scale = max(1.0, abs(q0), (g1 * ia0 + gw * iw0) / om)
    grid = _sample_grid(t_end, t_eval, n_samples)
    ys, _ = solve_dp54(rhs, (0.0, t_end), np.array([q0, p0], dtype=float),
                       grid, rtol=tol, atol=tol * np.array([q_scale, q_scale]))
    ia = np.empty(grid.size)
    iw = np.empty(grid.size)
    for i in range(grid.size):
        ia[i], iw[i] = intensities(ys[i, 0])
    return AdiabaticTrajectory(t=grid, q=ys[:, 0], p=ys[:, 1],
                               intensity_optical=ia, intensity_microwave=iw)


# ---------------------------------------------------------------------------
# steady-state enumeration


def _q_search_range(rates: DerivedRates) -> float:
    """Upper bound on |<Q>| for any self-consistent fixed point.

    Starts from the displacement produced by the uncoupled intensities
    and grows it while stronger intensities stay reachable inside the
    current range (detuning pulled toward resonance by the candidate
    displacement itself).
    """
    g1, g2 = rates.coupling_linear, abs(rates.coupling_quadratic)
    gw = rates.coupling_microwave
    ed2, edw2 = rates.drive_optical**2, rates.drive_microwave**2
    om, kap2, kw2 = rates.omega_m, rates.kappa**2, rates.kappa_w**2

    def displacement_cap(q_hi):
        # strongest intensities whose detunings are reachable within |q| <= q_hi
        dc_reach = max(abs(rates.delta0c) - g1 * q_hi - g2 * q_hi**2, 0.0)
        dw_reach = max(abs(rates.delta0w) - gw * q_hi, 0.0)
        i_cap = ed2 / (dc_reach**2 + kap2)
        iw_cap = edw2 / (dw_reach**2 + kw2)
        return 4.0 * (g1 * i_cap + gw * iw_cap) / om + 10.0

    q_hi = 4.0 * (g1 * ed2 / (rates.delta0c**2 + kap2)
                  + gw * edw2 / (rates.delta0w**2 + kw2)) / om + 10.0
    # grow geometrically until the cap closes; the cap is bounded by the
    # fully resonant intensities, so this terminates
    for _ in range(80):
        cap = displacement_cap(q_hi)
        if cap <= q_hi:
            break
        q_hi = max(cap, 1.6 * q_hi)

    # Softened-spring branches (positive quadratic coupling driving the
    # intensity toward Omega_m/(2 g2)) sit at displacements the factor-4
    # cap does not cover: their detuning must stay within the pole
    # Lorentzian, which bounds |q| through g2*q^2 ~ |delta0c| + span.
    if g2 > 0.0:
        i_pole = om / (2.0 * g2)
        if ed2 / kap2 > 0.125 * i_pole:
            dc_span = math.sqrt(max(8.0 * ed2 * g2 / om - kap2, 0.0))
            target = abs(rates.delta0c) + dc_span
            q_pole = (g1 + math.sqrt(g1 * g1 + 4.0 * g2 * target)) / (2.0 * g2)
            q_hi = max(q_hi, 2.0 * q_pole)
    return q_hi


def _inner_pair_grid(rates: DerivedRates, q, max_iter=_FIXED_POINT_MAX_ITER):
    """Vectorized damped fixed point for (intensity, variance) at each q.

    Returns (intensity, variance, spring, converged mask).
    """
    g1, g2 = rates.coupling_linear, rates.coupling_quadratic
    ed2 = rates.drive_optical**2
    om, kap2 = rates.omega_m, rates.kappa**2
    heat = om * (1.0 + 2.0 * rates.n_mechanical)
    d = _FIXED_POINT_DAMPING

    q2 = q * q + (1.0 + 2.0 * rates.n_mechanical)
    dc = rates.delta0c - g1 * q - g2 * q2
    ia = ed2 / (dc * dc + kap2)
    alive = np.ones(q.shape, dtype=bool)
    converged = np.zeros(q.shape, dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for _ in range(max_iter):
            spring = om - 2.0 * g2 * ia
            q2_cand = heat / spring + q * q
            dc = rates.delta0c - g1 * q - g2 * q2
            ia_cand = ed2 / (dc * dc + kap2)
            ia_next = (1.0 - d) * ia + d * ia_cand
            q2_next = (1.0 - d) * q2 + d * q2_cand
            bad = ~np.isfinite(ia_next) | ~np.isfinite(q2_next)
            ok = (np.abs(ia_next - ia) <= _FIXED_POINT_TOL * np.maximum(np.abs(ia_next), 1e-300)) \
                & (np.abs(q2_next - q2) <= _FIXED_POINT_TOL * np.maximum(np.abs(q2_next), 1e-300))
            ia = np.where(bad, ia, ia_next)
            q2 = np.where(bad, q2, q2_next)
            alive &= ~bad
            converged = alive & ok
            if bool(np.all(converged | ~alive)):
                break
    spring = om - 2.0 * g2 * ia
    return ia, q2, spring, converged


def _inner_pair_scalar(rates: DerivedRates, q):
    """Scalar counterpart of _inner_pair_grid; same map and start."""
    g1, g2 = rates.coupling_linear, rates.coupling_quadratic
    ed2 = rates.drive_optical**2
    om, kap2 = rates.omega_m, rates.kappa**2
    heat = om * (1.0 + 2.0 * rates.n_mechanical)
    d = _FIXED_POINT_DAMPING

    q2 = q * q + (1.0 + 2.0 * rates.n_mechanical)
    dc = rates.delta0c - g1 * q - g2 * q2
    ia = ed2 / (dc * dc + kap2)
    for _ in range(_FIXED_POINT_MAX_ITER):
        spring = om - 2.0 * g2 * ia
        if spring == 0.0:
            return ia, q2, spring, False
        q2_cand = heat / spring + q * q
        dc = rates.delta0c - g1 * q - g2 * q2
        ia_cand = ed2 / (dc * dc + kap2)
        ia_next = (1.0 - d) * ia + d * ia_cand
        q2_next = (1.0 - d) * q2 + d * q2_cand
        if not (math.isfinite(ia_next) and math.isfinite(q2_next)):
            return ia, q2, om - 2.0 * g2 * ia, False
        done = (abs(ia_next - ia) <= _FIXED_POINT_TOL * max(abs(ia_next), 1e-300)
                and abs(q2_next - q2) <= _FIXED_POINT_TOL * max(abs(q2_next), 1e-300))
        ia, q2 = ia_next, q2_next
        if done:
            return ia, q2, om - 2.0 * g2 * ia, True
    return ia, q2, om - 2.0 * g2 * ia, False


def _force_residual_scalar(rates: DerivedRates, q):
    """f(q) = q*spring - g1*I - gw*Iw, or None if the inner pair fails."""
    ia, _, spring, ok = _inner_pair_scalar(rates, q)
    if not ok:
        return None
    iw = rates.drive_microwave**2 / (
        (rates.delta0w - rates.coupling_microwave * q)**2 + rates.kappa_w**2)
    return q * spring - rates.coupling_linear * ia - rates.coupling_microwave * iw


def _build_branch(rates: DerivedRates, q) -> SteadyBranch:
    g1, g2 = rates.coupling_linear, rates.coupling_quadratic
    gw = rates.coupling_microwave
    ia, q2, spring, _ = _inner_pair_scalar(rates, q)
    dc = rates.delta0c - g1 * q - g2 * q2
    dw = rates.delta0w - gw * q
    iw = rates.drive_microwave**2 / (dw * dw + rates.kappa_w**2)
    a_ss = rates.drive_optical / complex(rates.kappa, dc)
    aw_ss = rates.drive_microwave / complex(rates.kappa_w, dw)
    heat = rates.omega_m * (1.0 + 2.0 * rates.n_mechanical)
    # normalized residuals of the four self-consistency relations
    r_force = abs(q * spring - g1 * ia - gw * iw) / (rates.omega_m * max(1.0, abs(q)))
    r_var = abs(q2 - q * q - heat / spring) / max(1.0, abs(q2)) if spring != 0.0 else math.inf
    r_opt = abs(abs(a_ss)**2 - ia) / max(ia, 1e-300)
    degenerate = not spring > 0.0
    return SteadyBranch(
        q=q, q2=q2, p2=1.0 + 2.0 * rates.n_mechanical,
        amp_optical=a_ss, amp_microwave=aw_ss,
        intensity_optical=ia, intensity_microwave=iw,
        delta_c=dc, delta_w=dw,
        omega_m_tilde=spring,
        omega_m_eff=math.sqrt(rates.omega_m * spring) if spring > 0.0 else 0.0,
        coupling_effective=g1 + 2.0 * g2 * q,
        residual=max(r_force, r_var, r_opt),
        degenerate=degenerate,
    )


def steady_states(rates: DerivedRates, grid_points=2000,
                  include_stability=True) -> list[SteadyBranch]:
    """Enumerate every self-consistent mean-field fixed point.

    Brackets of the scalar force-balance residual are located on a
    uniform displacement grid and refined by bisection; duplicate roots
    are merged.  Brackets touching grid points where the inner damped
    fixed point fails to converge are skipped with a warning.  When
    include_stability is set, the drift-matrix spectral abscissa
    classifies each branch (degenerate softened-spring branches are
    always flagged unstable).

    Returns branches sorted by ascending displacement.
    """
    q_hi = _q_search_range(rates)
    grid = np.linspace(-q_hi, q_hi, grid_points)
    for _ in range(6):
        ia, q2, spring, conv = _inner_pair_grid(rates, grid)
        iw = rates.drive_microwave**2 / (
            (rates.delta0w - rates.coupling_microwave * grid)**2 + rates.kappa_w**2)
        f = grid * spring - rates.coupling_linear * ia - rates.coupling_microwave * iw
        valid = conv & np.isfinite(f)
        # grow the window until the residual has settled signs at both ends
        need_grow = (valid[0] and f[0] >= 0.0) or (valid[-1] and f[-1] <= 0.0)
        if not need_grow:
            break
        q_hi *= 2.0
        grid = np.linspace(-q_hi, q_hi, grid_points)

    n_skipped = int(np.count_nonzero(~valid))
    if n_skipped:
        warnings.warn(
            f"inner fixed point failed to converge at {n_skipped} of "
            f"{grid_points} grid displacements; affected brackets skipped",
            stacklevel=2)

    roots: list[float] = []
    both = valid[:-1] & valid[1:]
    sign_change = both & (f[:-1] * f[1:] <= 0.0) & ~((f[:-1] == 0.0) & (f[1:] == 0.0))
    for i in np.flatnonzero(sign_change):
        qa, qb = float(grid[i]), float(grid[i + 1])
        fa = float(f[i])
        if fa == 0.0:
            roots.append(qa)
            continue
        fb = float(f[i + 1])
        if fb == 0.0:
            roots.append(qb)
            continue
        failed = False
        while abs(qb - qa) > _BISECT_RTOL * max(1.0, abs(qa), abs(qb)):
            qm = 0.5 * (qa + qb)
            fm = _force_residual_scalar(rates, qm)
            if fm is None:
                failed = True
                break
            if fm == 0.0:
                qa = qb = qm
                break
            if (fm > 0.0) == (fa > 0.0):
                qa, fa = qm, fm
            else:
                qb = qm
        if failed:
            warnings.warn(
                "bisection hit a non-convergent inner fixed point; "
                f"bracket around q = {0.5 * (qa + qb):.6g} skipped",
                stacklevel=2)
            continue
        roots.append(0.5 * (qa + qb))

    merged: list[float] = []
    for q in sorted(roots):
        if merged and abs(q - merged[-1]) < _MERGE_RTOL * max(1.0, abs(q)):
            continue
        merged.append(q)
    if not merged:
        raise MeanFieldError(
            "no steady-state branch found: all brackets failed or the "
            "residual never changes sign on the search grid")

    branches = [_build_branch(rates, q) for q in merged]
    if include_stability:
        from . import fluct  # deferred: fluct builds on SteadyBranch

        classified = []
        for branch in branches:
            drift = fluct.build_drift(rates, branch)
            stable, abscissa = fluct.is_stable_eigen(drift)
            classified.append(replace(
                branch, stable=stable and not branch.degenerate,
                abscissa=abscissa))
        branches = classified
    return branches


def multistability_scan(rates: DerivedRates, delta0c_grid,
                        grid_points=2000, include_stability=True):
    """steady_states at each bare optical detuning of a strictly increasing grid.

    Per-point failures are recorded as empty branch lists (with a
    warning) instead of aborting the scan.  Within each point, branches
    are renumbered by ascending optical intensity.
    """
    delta0c_grid = np.asarray(delta0c_grid, dtype=float)
    if delta0c_grid.ndim != 1 or np.any(np.diff(delta0c_grid) <= 0.0):
        raise ValueError("delta0c_grid must be strictly increasing")
    result = []
    for d0c in delta0c_grid:
        point_rates = replace(rates, delta0c=float(d0c))
        try:
            branches = steady_states(point_rates, grid_points=grid_points,
                                     include_stability=include_stability)
        except MeanFieldError as exc:
            warnings.warn(f"delta0c = {d0c:.6g}: {exc}", stacklevel=2)
            branches = []
        branches = sorted(branches, key=lambda b: b.intensity_optical)
        result.append(branches)
    return result
