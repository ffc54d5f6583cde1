"""Jitted implementations of the evaluation kernels.

Same contracts as ``_numpy``; see that module for the coefficient layout.
Compiled lazily on first call, cached on disk afterwards.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def _eval_one(knots: np.ndarray, coefs: np.ndarray, t: float, order: int) -> float:
    n = knots.shape[0]
    # np.searchsorted(knots, t, side="right") - 1, clamped to a valid piece
    lo = 0
    hi = n
    while lo < hi:
        mid = (lo + hi) // 2
        if t < knots[mid]:
            hi = mid
        else:
            lo = mid + 1
    i = lo - 1
    if i < 0:
        i = 0
    elif i > n - 2:
        i = n - 2
    dt = t - knots[i]
    if order == 0:
        return coefs[0, i] + dt * (coefs[1, i] + dt * (coefs[2, i] + dt * coefs[3, i]))
    if order == 1:
        return coefs[1, i] + dt * (2.0 * coefs[2, i] + dt * (3.0 * coefs[3, i]))
    return 2.0 * coefs[2, i] + 6.0 * coefs[3, i] * dt


@njit(cache=True)
def ppoly_eval(
    knots: np.ndarray, coefs: np.ndarray, ts: np.ndarray, order: int = 0
) -> np.ndarray:
    out = np.empty(ts.shape[0], dtype=np.float64)
    for k in range(ts.shape[0]):
        out[k] = _eval_one(knots, coefs, ts[k], order)
    return out


@njit(cache=True)
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
):
    n_shifts = shifts.shape[0]
    n = toas.shape[0]
    sse = np.empty(n_shifts, dtype=np.float64)
    within = np.empty(n_shifts, dtype=np.int64)
    for s in range(n_shifts):
        acc = 0.0
        cnt = 0
        shift = shifts[s]
        for k in range(n):
            t = toas[k] - shift
            ex = _eval_one(xknots, xcoefs, t, 0) - px[k]
            ey = _eval_one(yknots, ycoefs, t, 0) - py[k]
            d2 = ex * ex + ey * ey
            acc += d2
            if d2 <= epu[k] * epu[k]:
                cnt += 1
        sse[s] = acc
        within[s] = cnt
    return sse, within
