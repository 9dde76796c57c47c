"""Adaptive explicit Runge-Kutta integration, Dormand-Prince 5(4).

Seven-stage embedded pair with the FSAL property, PI step-size control
(Hairer's dopri5 controller) and the standard quartic dense-output
interpolant used to report the solution on a caller-supplied grid.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["IntegratorError", "solve_dp54"]

# Butcher tableau
_C = (0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0)
_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = (
    19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0)
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0,
    -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = (
    35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0)
# fifth-order minus embedded fourth-order weights
_E1, _E3, _E4, _E5, _E6, _E7 = (
    71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0, -17253.0 / 339200.0,
    22.0 / 525.0, -1.0 / 40.0)
# dense-output coefficients
_D1, _D3, _D4, _D5, _D6, _D7 = (
    -12715105075.0 / 11282082432.0, 87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0, 701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0, 69997945.0 / 29380423.0)

# PI controller constants (Hairer, Norsett & Wanner, dopri5)
_SAFETY = 0.9
_BETA = 0.04
_EXPO1 = 0.2 - _BETA * 0.75
_FAC_MIN = 0.2    # strongest step decrease per attempt
_FAC_MAX = 5.0    # strongest step increase per step


class IntegratorError(RuntimeError):
    """Integration failure; carries the time reached and the last state."""

    def __init__(self, message, t, y):
        super().__init__(f"{message} (at t = {t:.6e})")
        self.t = t
        self.y = np.asarray(y)


def _initial_step(rhs, t0, y0, f0, scale, direction):
    d0 = math.sqrt(float(np.mean((y0 / scale) ** 2)))
    d1 = math.sqrt(float(np.mean((f0 / scale) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    y1 = y0 + h0 * direction * f0
    f1 = rhs(t0 + h0 * direction, y1)
    d2 = math.sqrt(float(np.mean(((f1 - f0) / scale) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** 0.2
    return min(100.0 * h0, h1)


def solve_dp54(rhs, t_span, y0, t_eval, rtol, atol, max_steps=10_000_000):
    """Integrate y' = rhs(t, y) and sample the solution on t_eval.

    Parameters
    ----------
    rhs : callable
        Right-hand side, rhs(t, y) -> array_like of the same length.
    t_span : (float, float)
        Integration window (t0, t_end) with t_end > t0.
    y0 : array_like
        Initial state.
    t_eval : array_like
        Strictly increasing sample times inside [t0, t_end].
    rtol : float
        Relative tolerance of the local error test.
    atol : float or array_like
        Absolute tolerance, scalar or per-component.
    max_steps : int
        Hard cap on accepted + rejected steps.

    Returns
    -------
    ys : ndarray, shape (len(t_eval), len(y0))
        Dense-output samples at t_eval.
    info : dict
        Step statistics ('steps', 'rejected').

    Raises
    ------
    IntegratorError
        On step-size underflow (stiffness), NaN/overflow in the state,
        or exceeding max_steps; the exception carries the time reached.
    """
    t0, t_end = float(t_span[0]), float(t_span[1])
    if not t_end > t0:
        raise ValueError("t_span must satisfy t_end > t0")
    y = np.array(y0, dtype=float)
    t_eval = np.asarray(t_eval, dtype=float)
    out = np.empty((t_eval.size, y.size))
    i_out = 0
    # samples exactly at t0
    while i_out < t_eval.size and t_eval[i_out] <= t0:
        out[i_out] = y
        i_out += 1

    t = t0
    k1 = np.asarray(rhs(t, y), dtype=float)
    atol_vec = np.broadcast_to(np.asarray(atol, dtype=float), y.shape)
    scale = atol_vec + rtol * np.abs(y)
    h = min(_initial_step(rhs, t, y, k1, scale, 1.0), t_end - t0)
    fac_old = 1e-4
    n_steps = 0
    n_rejected = 0

    while t < t_end:
        if n_steps >= max_steps:
            raise IntegratorError("step budget exhausted", t, y)
        h = min(h, t_end - t)
        if h <= abs(t) * 1e-14 or h <= 1e-290:
            raise IntegratorError("step size underflow (stiffness failure)", t, y)

        k2 = rhs(t + _C[0] * h, y + h * (_A21 * k1))
        k3 = rhs(t + _C[1] * h, y + h * (_A31 * k1 + _A32 * k2))
        k4 = rhs(t + _C[2] * h, y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3))
        k5 = rhs(t + _C[3] * h,
                 y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4))
        k6 = rhs(t + h,
                 y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4
                          + _A65 * k5))
        dy = h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        y_new = y + dy
        k7 = np.asarray(rhs(t + h, y_new), dtype=float)

        err_vec = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6
                       + _E7 * k7)
        scale = atol_vec + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
        if not math.isfinite(err):
            raise IntegratorError("non-finite state (overflow/NaN)", t, y)

        n_steps += 1
        if err <= 1.0:
            # dense output over (t, t+h]
            if i_out < t_eval.size and t_eval[i_out] <= t + h:
                bspl = h * k1 - dy
                r5 = h * (_D1 * k1 + _D3 * k3 + _D4 * k4 + _D5 * k5
                          + _D6 * k6 + _D7 * k7)
                r4 = dy - h * k7 - bspl
                while i_out < t_eval.size and t_eval[i_out] <= t + h:
                    theta = (t_eval[i_out] - t) / h
                    out[i_out] = y + theta * (
                        dy + (1.0 - theta) * (bspl + theta * (r4 + (1.0 - theta) * r5)))
                    i_out += 1
            t += h
            y = y_new
            k1 = k7
            fac11 = err ** _EXPO1 if err > 0.0 else 1e-10
            fac = fac11 / (fac_old ** _BETA)
            fac = max(1.0 / _FAC_MAX, min(1.0 / _FAC_MIN, fac / _SAFETY))
            h = h / fac
            fac_old = max(err, 1e-4)
        else:
            n_rejected += 1
            fac11 = err ** _EXPO1
            h = h / min(1.0 / _FAC_MIN, fac11 / _SAFETY)

    while i_out < t_eval.size:
        out[i_out] = y
        i_out += 1
    return out, {"steps": n_steps, "rejected": n_rejected}
