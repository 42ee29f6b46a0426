"""Batched explicit Runge-Kutta integration with embedded error control.

All trajectories of a batch share one step size; the step is accepted only
when the worst scaled local error across the whole batch is below one, so the
per-step tolerance holds for every member individually.
"""

from __future__ import annotations

import numpy as np

from .errors import FlowError

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_E = _B - np.array(
    [5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40]
)


def _rk_step(fun, t, y, h, k0):
    # the last stage is evaluated at the new state, so it is reused as the
    # first stage of the next step
    k = [k0]
    for i in range(1, 7):
        dy = sum(a * kj for a, kj in zip(_A[i], k) if a != 0.0)
        k.append(fun(t + _C[i] * h, y + h * dy))
    y_new = y + h * sum(b * kj for b, kj in zip(_B, k) if b != 0.0)
    err = h * sum(e * kj for e, kj in zip(_E, k) if e != 0.0)
    return y_new, err, k[6]


def integrate(fun, y0, t0, t1, *, tol=1e-10, t_eval=None, h0=None, max_steps=100_000, error_index=None):
    """Integrate ``y' = fun(t, y)`` from ``t0`` to ``t1`` for a batch of states.

    Parameters
    ----------
    fun : callable
        ``fun(t, y)`` with scalar ``t`` and ``y`` of shape ``(B, n)``.
    y0 : array_like, shape (B, n)
    t0, t1 : float
        Integration interval; ``t1 < t0`` integrates backwards.
    tol : float
        Per-step bound on the local error, used as both absolute and
        relative tolerance.
    t_eval : array_like, optional
        Monotone output times inside the interval. Steps are clipped so that
        every output time is hit exactly.
    error_index : array_like, optional
        Columns of the state that enter the error norm.  Columns left out
        (typically finite-difference variational equations, whose rounding
        noise would otherwise force tiny steps) follow the step sizes chosen
        for the others.

    Returns
    -------
    y1 : ndarray, shape (B, n)
        State at ``t1``.
    ys : ndarray, shape (K, B, n) or None
        States at ``t_eval`` when requested.
    """
    y = np.array(y0, dtype=float)
    if tol <= 0:
        raise ValueError("tol must be positive")
    span = t1 - t0
    direction = 1.0 if span >= 0 else -1.0
    stops = [] if t_eval is None else [float(s) for s in t_eval]
    out = []
    while stops and (stops[0] - t0) * direction <= 0:
        out.append(y.copy())
        stops.pop(0)
    if span == 0:
        out.extend(y.copy() for _ in stops)
        return y, (np.array(out) if t_eval is not None else None)

    t = float(t0)
    h = abs(span) if h0 is None else min(abs(h0), abs(span))
    h_min = 1e-14 * max(1.0, abs(t0), abs(t1))
    steps = 0
    k0 = fun(t, y)
    while (t1 - t) * direction > 0:
        target = stops[0] if stops else t1
        h_try = min(h, abs(target - t))
        with np.errstate(over="ignore", invalid="ignore"):
            y_new, err, k_last = _rk_step(fun, t, y, direction * h_try, k0)
        if error_index is None:
            ya, yb, e = y, y_new, err
        else:
            ya, yb, e = y[:, error_index], y_new[:, error_index], err[:, error_index]
        scale = tol * (1.0 + np.maximum(np.abs(ya), np.abs(yb)))
        with np.errstate(invalid="ignore"):
            ratio = np.abs(e) / scale
        if error_index is not None and not np.all(np.isfinite(err)):
            ratio = np.full(1, np.inf)
        err_norm = float(np.max(ratio)) if ratio.size else 0.0
        if not np.isfinite(err_norm):
            err_norm = np.inf
        steps += 1
        if steps > max_steps:
            raise FlowError(
                "step budget exhausted",
                {"t": t, "h": h_try, "steps": steps, "error_norm": err_norm},
            )
        if err_norm <= 1.0:
            t = target if h_try == abs(target - t) else t + direction * h_try
            y = y_new
            k0 = k_last
            if stops and t == stops[0]:
                out.append(y.copy())
                stops.pop(0)
            grow = 5.0 if err_norm == 0 else min(5.0, 0.9 * err_norm ** -0.2)
            h = max(h_try, h) if h_try < h else h_try * grow
        else:
            h = h_try * max(0.1, 0.9 * err_norm ** -0.2) if np.isfinite(err_norm) else h_try * 0.1
            if h < h_min:
                raise FlowError(
                    "step size underflow",
                    {"t": t, "h": h, "steps": steps, "error_norm": err_norm},
                )
    return y, (np.array(out) if t_eval is not None else None)
