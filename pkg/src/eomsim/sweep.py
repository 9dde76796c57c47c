"""Parameter sweeps over the steady-state observable pipeline.

A sweep walks a 1- or 2-axis grid of physical-parameter overrides,
re-derives every rate at each point (so drive amplitudes track power,
decay and detuning changes), enumerates steady branches, classifies
stability twice, solves the Lyapunov equation on the selected stable
branches and evaluates the Gaussian observables.  Grid points are
independent; execution may fan out over processes without changing a
single output bit (rows are merged in grid order).
"""

from __future__ import annotations

import itertools
import math
import multiprocessing
import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import fluct, gaussian
from .gaussian import ObservableRecord
from .meanfield import MeanFieldError, steady_states
from .params import PhysicalConfig, derive_couplings

__all__ = [
    "AXIS_PARAMETERS",
    "SweepSpec",
    "run_sweep",
    "evaluate_point",
    "critical_temperature",
]

# sweepable PhysicalConfig fields
AXIS_PARAMETERS = (
    "delta0c", "delta0w", "kappa", "g2_over_g1", "temperature",
    "power_optical", "power_microwave",
)

# below this the bisection declares the entanglement gone (double
# precision noise floor of the eta pipeline)
EN_ZERO_THRESHOLD = 1e-6


@dataclass(frozen=True)
class SweepSpec:
    """A sweep: base configuration, 1 or 2 axes, and a branch policy.

    branch_policy is 'lowest-stable' (smallest optical intensity among
    stable branches), 'all-stable', or 'index:<k>' (k-th branch by
    ascending optical intensity, stable or not).
    """

    base: PhysicalConfig
    axes: tuple
    branch_policy: str = "lowest-stable"
    with_entanglement: bool = True
    with_mechanics: bool = True

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError("a sweep needs 1 or 2 axes")
        for name, grid in self.axes:
            if name not in AXIS_PARAMETERS:
                raise ValueError(
                    f"unknown sweep parameter {name!r}; "
                    f"choose from {AXIS_PARAMETERS}")
            grid = np.asarray(grid, dtype=float)
            if grid.ndim != 1 or grid.size < 1 or np.any(np.diff(grid) <= 0.0):
                raise ValueError(f"axis {name!r} grid must be strictly increasing")
        if self.branch_policy not in ("lowest-stable", "all-stable"):
            if not self.branch_policy.startswith("index:"):
                raise ValueError(f"unknown branch policy {self.branch_policy!r}")
            int(self.branch_policy.split(":", 1)[1])


def apply_overrides(base: PhysicalConfig, overrides) -> PhysicalConfig:
    """Return base with the named sweep parameters replaced."""
    changes = dict(overrides)
    for name in changes:
        if name not in AXIS_PARAMETERS:
            raise ValueError(f"unknown sweep parameter {name!r}")
    if "g2_over_g1" in changes and base.g2_over_g1 is None:
        # switch a reflectivity-mode config over to the ratio form
        changes["reflectivity"] = None
        changes["g2_sign"] = None
    return replace(base, **changes)


def evaluate_point(config: PhysicalConfig, coords=(), branch_policy="lowest-stable",
                   with_entanglement=True, with_mechanics=True):
    """Run the full pipeline at one configuration.

    Returns a list of ObservableRecord: one per selected stable branch,
    or a single stable=False row when nothing qualifies.  Never raises
    for physics failures; those are reported in the row's error field.
    """
    coords = tuple(coords)
    try:
        rates = derive_couplings(config)
        branches = sorted(steady_states(rates),
                          key=lambda b: b.intensity_optical)
    except (MeanFieldError, ValueError) as exc:
        return [ObservableRecord(coords=coords, branch_index=-1, stable=False,
                                 error=str(exc))]

    if branch_policy == "all-stable":
        chosen = [(i, b) for i, b in enumerate(branches) if b.stable]
    elif branch_policy.startswith("index:"):
        k = int(branch_policy.split(":", 1)[1])
        chosen = [(k, branches[k])] if 0 <= k < len(branches) else []
    else:  # lowest-stable
        chosen = next(([(i, b)] for i, b in enumerate(branches) if b.stable), [])

    if not chosen:
        return [ObservableRecord(coords=coords, branch_index=-1, stable=False)]

    rows = []
    for index, branch in chosen:
        if not branch.stable:
            rows.append(ObservableRecord(
                coords=coords, branch_index=index, stable=False,
                intensity_optical=branch.intensity_optical,
                intensity_microwave=branch.intensity_microwave,
                q_ss=branch.q, abscissa=branch.abscissa))
            continue
        try:
            drift = fluct.build_drift(rates, branch)
            rh_ok, _ = fluct.routh_hurwitz(rates, branch)
            cov = fluct.solve_lyapunov(drift, fluct.build_diffusion(rates))
            defect = fluct.physicality_defect(cov)
            if defect < -1e-6:
                warnings.warn(
                    f"covariance matrix unphysical by {defect:.3e} at "
                    f"coords {coords}", stacklevel=2)
            kwargs = {}
            if with_entanglement:
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    kwargs.update(
                        en_ow=gaussian.log_negativity(
                            gaussian.reduce_bipartition(cov, "ow")),
                        en_om=gaussian.log_negativity(
                            gaussian.reduce_bipartition(cov, "om")),
                        en_mw=gaussian.log_negativity(
                            gaussian.reduce_bipartition(cov, "mw")),
                    )
            if with_mechanics:
                var_q, var_p = gaussian.equipartition_gap(cov)
                kwargs.update(
                    n_eff=gaussian.effective_phonon(cov),
                    var_q=var_q, var_p=var_p,
                    s_q_db=gaussian.squeezing_db(cov, "q"),
                    s_p_db=gaussian.squeezing_db(cov, "p"),
                )
            rows.append(ObservableRecord(
                coords=coords, branch_index=index, stable=True,
                intensity_optical=branch.intensity_optical,
                intensity_microwave=branch.intensity_microwave,
                q_ss=branch.q, abscissa=branch.abscissa, rh_ok=rh_ok,
                **kwargs))
        except (fluct.FluctError, ValueError) as exc:
            rows.append(ObservableRecord(
                coords=coords, branch_index=index, stable=branch.stable,
                intensity_optical=branch.intensity_optical,
                intensity_microwave=branch.intensity_microwave,
                q_ss=branch.q, abscissa=branch.abscissa, error=str(exc)))
    return rows


def _grid_points(spec: SweepSpec):
    """Row-major cartesian product of the axes as (coords, overrides)."""
    names = [name for name, _ in spec.axes]
    grids = [np.asarray(grid, dtype=float) for _, grid in spec.axes]
    for combo in itertools.product(*grids):
        coords = tuple(zip(names, (float(v) for v in combo)))
        yield coords


def _point_task(args):
    spec, coords = args
    config = apply_overrides(spec.base, coords)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return evaluate_point(
            config, coords=coords, branch_policy=spec.branch_policy,
            with_entanglement=spec.with_entanglement,
            with_mechanics=spec.with_mechanics)


def run_sweep(spec: SweepSpec, jobs=1):
    """Evaluate the whole grid; returns rows in deterministic order.

    Row order is row-major over the axes, then ascending branch index.
    With jobs > 1 the points are distributed over worker processes;
    the per-point arithmetic is identical, so output bytes match the
    serial run.
    """
    tasks = [(spec, coords) for coords in _grid_points(spec)]
    if jobs <= 1 or len(tasks) < 2:
        results = [_point_task(task) for task in tasks]
    else:
        with multiprocessing.Pool(processes=jobs) as pool:
            results = pool.map(_point_task, tasks, chunksize=max(1, len(tasks) // (4 * jobs)))
    return [row for point_rows in results for row in point_rows]


def _entanglement_at(base: PhysicalConfig, pair: str, temperature: float,
                     branch_policy: str) -> float:
    config = apply_overrides(base, [("temperature", temperature)])
    rows = evaluate_point(config, branch_policy=branch_policy,
                          with_mechanics=False)
    stable_rows = [r for r in rows if r.stable and not r.error]
    if not stable_rows:
        return 0.0
    value = getattr(stable_rows[0], f"en_{pair}")
    return 0.0 if math.isnan(value) else value


def critical_temperature(base: PhysicalConfig, pair: str, t_hi: float,
                         t_lo: float = 1e-3,
                         branch_policy: str = "lowest-stable") -> float:
    """Smallest temperature at which the pair's entanglement vanishes.

    Bisection between t_lo (entangled) and t_hi (separable) down to a
    1e-4 K window; 'vanishes' means the logarithmic negativity drops
    below EN_ZERO_THRESHOLD.  Returns 0.0 when there is no entanglement
    already at t_lo.
    """
    if pair not in ("ow", "om", "mw"):
        raise ValueError("pair must be one of 'ow', 'om', 'mw'")
    if not 0.0 < t_lo < t_hi:
        raise ValueError("need 0 < t_lo < t_hi")
    en_lo = _entanglement_at(base, pair, t_lo, branch_policy)
    if en_lo <= EN_ZERO_THRESHOLD:
        return 0.0
    en_hi = _entanglement_at(base, pair, t_hi, branch_policy)
    if en_hi > EN_ZERO_THRESHOLD:
        raise ValueError(
            f"not a bracket: EN({t_lo} K) = {en_lo:.3e}, "
            f"EN({t_hi} K) = {en_hi:.3e} (both above threshold)")
    previous = en_lo
    while t_hi - t_lo > 1e-4:
        mid = 0.5 * (t_lo + t_hi)
        en_mid = _entanglement_at(base, pair, mid, branch_policy)
        if en_mid > EN_ZERO_THRESHOLD:
            if en_mid > previous:
                warnings.warn(
                    f"entanglement not monotone in temperature near {mid:.4f} K "
                    f"({en_mid:.3e} > {previous:.3e})", stacklevel=2)
            previous = en_mid
            t_lo = mid
        else:
            t_hi = mid
    return 0.5 * (t_lo + t_hi)
