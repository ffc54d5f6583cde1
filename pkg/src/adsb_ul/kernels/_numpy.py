"""Vectorized numpy implementations of the evaluation kernels.

Piecewise cubics are stored as ``knots`` (n,) plus ``coefs`` (4, n-1) in
ascending-power order: piece i evaluates as
``c0 + dt*(c1 + dt*(c2 + dt*c3))`` with ``dt = t - knots[i]``.

Callers guarantee query times lie inside ``[knots[0], knots[-1]]``; the
piece index is clamped, never extrapolation-checked, at this level.
"""

from __future__ import annotations

import numpy as np


def ppoly_eval(
    knots: np.ndarray, coefs: np.ndarray, ts: np.ndarray, order: int = 0
) -> np.ndarray:
    """Evaluate the piecewise cubic (or its 1st/2nd derivative) at ``ts``."""
    if order not in (0, 1, 2):
        raise ValueError(f"order must be 0, 1, or 2, got {order}")
    ts = np.asarray(ts, dtype=np.float64)
    idx = np.searchsorted(knots, ts, side="right") - 1
    idx = np.clip(idx, 0, knots.shape[0] - 2)
    dt = ts - knots[idx]
    c0 = coefs[0, idx]
    c1 = coefs[1, idx]
    c2 = coefs[2, idx]
    c3 = coefs[3, idx]
    if order == 0:
        return c0 + dt * (c1 + dt * (c2 + dt * c3))
    if order == 1:
        return c1 + dt * (2.0 * c2 + dt * (3.0 * c3))
    return 2.0 * c2 + 6.0 * c3 * dt


def shift_scan(
    xknots: np.ndarray,
    xcoefs: np.ndarray,
    yknots: np.ndarray,
    ycoefs: np.ndarray,
    toas: np.ndarray,
    px: np.ndarray,
    py: np.ndarray,
    epu: np.ndarray,
    shifts: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """For each candidate shift, total squared position error and the count
    of reports whose residual distance is within their per-report EPU.

    Returns ``(sse, within)`` with shapes ``(len(shifts),)``.
    """
    ts = toas[None, :] - shifts[:, None]
    flat = ts.ravel()
    ex = ppoly_eval(xknots, xcoefs, flat, 0).reshape(ts.shape) - px[None, :]
    ey = ppoly_eval(yknots, ycoefs, flat, 0).reshape(ts.shape) - py[None, :]
    d2 = ex * ex + ey * ey
    sse = d2.sum(axis=1)
    within = (d2 <= (epu * epu)[None, :]).sum(axis=1).astype(np.int64)
    return sse, within
