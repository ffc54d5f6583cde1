"""Pseudo-truth construction: constrained natural cubic smoothing splines.

Each position axis is fit with the natural cubic spline g that minimizes
the roughness integral of g'' squared subject to a residual budget

    sum_i (y_i - g(t_i))^2 <= s.

The solution is characterized by a penalty weight lam >= 0: with Q the
second-divided-difference operator and R the Gram matrix of the natural
spline basis second derivatives,

    (R + lam * Q^T Q) gamma = Q^T y,      a = y - lam * Q gamma,

where gamma holds the interior knot second derivatives (zero at both ends)
and a the fitted knot values.  The residual sum S(lam) = ||lam * Q gamma||^2
grows monotonically from 0 (interpolation) toward the least-squares-line
residual as lam -> inf, so the budget is met by a 1-D root search in lam.
Both matrices are banded; solves go through scipy's banded Cholesky.

Smoothing amount for a whole track is chosen iteratively: start from the
interpolant (s = 0) and double the shared budget until the spline's
acceleration stays inside bounds derived from the reported velocities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.linalg import solveh_banded

from . import kernels
from .errors import (
    InsufficientDataError,
    InvalidAbscissaError,
    InvalidInputError,
    OutOfDomainError,
    SmoothingFailedError,
)
from .model import EPU_TO_SIGMA, AdsbReport, EpuTable, Track, modal_nacp

MIN_SPLINE_POINTS = 4

_REL_TOL = 1e-9  # relative convergence of the residual-budget root search


@dataclass(frozen=True, eq=False)
class Spline1D:
    """Natural cubic spline in piecewise-polynomial form.

    ``coefs`` has shape (4, n-1), ascending powers of ``t - knots[i]``.
    The domain is ``[knots[0], knots[-1]]``; evaluation outside it is an
    error, never extrapolation.
    """

    knots: np.ndarray
    coefs: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "knots", np.ascontiguousarray(self.knots, np.float64))
        object.__setattr__(self, "coefs", np.ascontiguousarray(self.coefs, np.float64))
        if self.knots.ndim != 1 or self.knots.shape[0] < 2:
            raise InvalidInputError("need at least 2 knots")
        if self.coefs.shape != (4, self.knots.shape[0] - 1):
            raise InvalidInputError("coefs must have shape (4, n_knots - 1)")

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def evaluate(self, ts, order: int = 0):
        """Value (order 0) or derivative (1, 2) at scalar or array times."""
        arr = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        lo, hi = self.domain
        if arr.size and (arr.min() < lo or arr.max() > hi):
            bad = arr[(arr < lo) | (arr > hi)][0]
            raise OutOfDomainError(f"t={bad} outside spline domain [{lo}, {hi}]")
        out = kernels.ppoly_eval(self.knots, self.coefs, arr, order)
        if np.isscalar(ts) or np.ndim(ts) == 0:
            return float(out[0])
        return out

    def __call__(self, ts, order: int = 0):
        return self.evaluate(ts, order)


def second_derivative_jumps(spline: Spline1D) -> np.ndarray:
    """Discontinuity of g'' at each interior knot (diagnostic; ~0 for a
    correctly assembled natural spline)."""
    h = np.diff(spline.knots)
    left = 2.0 * spline.coefs[2, :-1] + 6.0 * spline.coefs[3, :-1] * h[:-1]
    right = 2.0 * spline.coefs[2, 1:]
    return right - left


def _banded_system(t: np.ndarray):
    """Bands of R, Q^T Q and the column factors of Q for knot vector t."""
    h = np.diff(t)
    p = 1.0 / h[:-1]  # Q column j: weight at knot j-1
    r = 1.0 / h[1:]  # weight at knot j+1
    q = -(p + r)  # weight at knot j
    r_diag = (h[:-1] + h[1:]) / 3.0
    r_off1 = h[1:-1] / 6.0
    a_diag = p * p + q * q + r * r
    a_off1 = q[:-1] * p[1:] + r[:-1] * q[1:]
    a_off2 = r[:-2] * p[2:]
    return h, p, q, r, (r_diag, r_off1), (a_diag, a_off1, a_off2)


def _qt_y(p: np.ndarray, q: np.ndarray, r: np.ndarray, y: np.ndarray) -> np.ndarray:
    return p * y[:-2] + q * y[1:-1] + r * y[2:]


def _q_gamma(
    p: np.ndarray, q: np.ndarray, r: np.ndarray, gamma: np.ndarray, n: int
) -> np.ndarray:
    out = np.zeros(n)
    out[:-2] += p * gamma
    out[1:-1] += q * gamma
    out[2:] += r * gamma
    return out


def _solve_gamma(r_bands, a_bands, b: np.ndarray, lam: float) -> np.ndarray:
    r_diag, r_off1 = r_bands
    a_diag, a_off1, a_off2 = a_bands
    m = r_diag.shape[0]
    ab = np.zeros((3, m))
    ab[2] = r_diag + lam * a_diag
    if m > 1:
        ab[1, 1:] = r_off1 + lam * a_off1
    if m > 2:
        ab[0, 2:] = lam * a_off2
    return solveh_banded(ab, b, lower=False)


def _coefs_from_values(t: np.ndarray, a: np.ndarray, gamma_full: np.ndarray):
    h = np.diff(t)
    g0 = gamma_full[:-1]
    g1 = gamma_full[1:]
    c0 = a[:-1]
    c1 = np.diff(a) / h - h * (2.0 * g0 + g1) / 6.0
    c2 = g0 / 2.0
    c3 = (g1 - g0) / (6.0 * h)
    return np.vstack([c0, c1, c2, c3])


def _ls_line(t: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least-squares straight-line values at t (centered for conditioning)."""
    tc = t - t.mean()
    design = np.column_stack([np.ones_like(tc), tc])
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return design @ coef


def fit_smoothing_spline(t, y, s: float) -> Spline1D:
    """Fit the minimum-roughness natural cubic spline with residual sum <= s.

    ``s = 0`` returns the interpolating natural cubic spline.  Large ``s``
    degrades gracefully to the least-squares straight line (zero roughness).
    Requires >= 4 strictly increasing sample times.
    """
    t = np.ascontiguousarray(t, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    if t.ndim != 1 or y.shape != t.shape:
        raise InvalidInputError("t and y must be 1-D arrays of equal length")
    n = t.shape[0]
    if n < MIN_SPLINE_POINTS:
        raise InsufficientDataError(f"need >= {MIN_SPLINE_POINTS} points, got {n}")
    if not (np.isfinite(t).all() and np.isfinite(y).all()):
        raise InvalidInputError("samples must be finite")
    if np.any(np.diff(t) <= 0.0):
        raise InvalidAbscissaError("sample times must be strictly increasing")
    if not math.isfinite(s) or s < 0.0:
        raise InvalidInputError(f"s must be finite and >= 0, got {s!r}")

    _, p, q, r, r_bands, a_bands = _banded_system(t)
    b = _qt_y(p, q, r, y)
    m = n - 2

    if s == 0.0:
        gamma = _solve_gamma(r_bands, a_bands, b, 0.0)
        a = y
    else:
        line = _ls_line(t, y)
        resid_line = y - line
        s_max = float(resid_line @ resid_line)
        if s_max <= s:
            a = line
            gamma = np.zeros(m)
        else:
            a, gamma = _fit_at_budget(y, p, q, r, r_bands, a_bands, b, s)

    gamma_full = np.zeros(n)
    gamma_full[1:-1] = gamma
    return Spline1D(t, _coefs_from_values(t, a, gamma_full))


def _fit_at_budget(y, p, q, r, r_bands, a_bands, b, s):
    """Root-search lam so the residual sum meets the budget from below."""
    n = y.shape[0]

    def attempt(lam: float):
        gamma = _solve_gamma(r_bands, a_bands, b, lam)
        resid = lam * _q_gamma(p, q, r, gamma, n)
        return y - resid, gamma, float(resid @ resid)

    lam = 1.0
    a, gamma, big_s = attempt(lam)
    if big_s <= s:
        lo = (lam, a, gamma)
        hi_lam = lam
        while True:
            hi_lam *= 16.0
            a, gamma, big_s = attempt(hi_lam)
            if big_s > s or hi_lam > 1e300:
                break
            lo = (hi_lam, a, gamma)
        hi = hi_lam
    else:
        hi = lam
        lo_lam = lam
        lo = None
        while lo_lam > 1e-300:
            lo_lam /= 16.0
            a, gamma, big_s = attempt(lo_lam)
            if big_s <= s:
                lo = (lo_lam, a, gamma)
                break
            hi = lo_lam
        if lo is None:
            # residuals of the near-interpolant already exceed s only via
            # roundoff; fall back to the plain interpolant
            gamma = _solve_gamma(r_bands, a_bands, b, 0.0)
            return y, gamma

    for _ in range(120):
        lo_lam = lo[0]
        mid = math.sqrt(lo_lam * hi)
        a, gamma, big_s = attempt(mid)
        if big_s <= s:
            lo = (mid, a, gamma)
            if big_s >= s * (1.0 - _REL_TOL):
                break
        else:
            hi = mid
        if hi / lo[0] < 1.0 + 1e-14:
            break
    return lo[1], lo[2]


def reported_accel_bounds(
    reports: Sequence[AdsbReport], margin: float = 0.5
) -> tuple[tuple[float, float], tuple[float, float]]:
    """Per-axis acceleration intervals implied by the reported velocities.

    Finite differences of velocity over time, widened by ``margin`` m/s^2
    on each side.  Needs at least two reports with distinct TOAs; pairs
    with equal TOAs are skipped.
    """
    rs = sorted(reports, key=lambda r: r.toa)
    if len(rs) < 2:
        raise InsufficientDataError("need >= 2 reports for acceleration bounds")
    t = np.array([r.toa for r in rs])
    vx = np.array([r.vx for r in rs])
    vy = np.array([r.vy for r in rs])
    dt = np.diff(t)
    ok = dt > 0.0
    if not ok.any():
        raise InsufficientDataError("need >= 2 distinct TOAs for acceleration bounds")
    ax = np.diff(vx)[ok] / dt[ok]
    ay = np.diff(vy)[ok] / dt[ok]
    return (
        (float(ax.min() - margin), float(ax.max() + margin)),
        (float(ay.min() - margin), float(ay.max() + margin)),
    )


@dataclass(frozen=True)
class SmoothingSchedule:
    """Residual-budget ladder for iterative smoothing.

    The first non-zero budget defaults to n * sigma0^2 with sigma0 the
    per-axis noise scale implied by the reports' modal NACp; each further
    step multiplies by ``growth`` up to ``growth ** max_steps`` times the
    first budget.
    """

    initial_s: float | None = None
    growth: float = 2.0
    max_steps: int = 16

    def __post_init__(self) -> None:
        if self.growth <= 1.0:
            raise InvalidInputError("growth must exceed 1")
        if self.max_steps < 0:
            raise InvalidInputError("max_steps must be >= 0")
        if self.initial_s is not None and self.initial_s <= 0:
            raise InvalidInputError("initial_s must be positive")

    def budgets(self, n_points: int, sigma0: float) -> list[float]:
        s1 = self.initial_s if self.initial_s is not None else n_points * sigma0**2
        return [0.0] + [s1 * self.growth**k for k in range(self.max_steps + 1)]


@dataclass(frozen=True, eq=False)
class PseudoTruthTrack:
    """Smoothed reference trajectory for one track: a spline per axis plus
    the diagnostics of the fit that produced it."""

    x_spline: Spline1D
    y_spline: Spline1D
    s_final: float
    residual_sum_x: float
    residual_sum_y: float
    accel_bounds: tuple[tuple[float, float], tuple[float, float]]
    iterations: int

    @property
    def domain(self) -> tuple[float, float]:
        return self.x_spline.domain

    def position(self, ts) -> np.ndarray:
        """(n, 2) positions at the given times."""
        ts = np.atleast_1d(np.asarray(ts, dtype=np.float64))
        return np.column_stack(
            [self.x_spline.evaluate(ts, 0), self.y_spline.evaluate(ts, 0)]
        )

    def diagnostics(self) -> dict:
        return {
            "s_final": self.s_final,
            "residual_sum_x": self.residual_sum_x,
            "residual_sum_y": self.residual_sum_y,
            "iterations": self.iterations,
            "accel_bounds": {
                "x": list(self.accel_bounds[0]),
                "y": list(self.accel_bounds[1]),
            },
        }


def _accel_grid(t: np.ndarray, grid_hz: float) -> np.ndarray:
    step = 1.0 / grid_hz
    grid = np.arange(t[0], t[-1], step)
    return np.union1d(grid, t)


def fit_pseudo_truth(
    track: Track,
    reports: Sequence[AdsbReport],
    *,
    table: EpuTable | None = None,
    schedule: SmoothingSchedule | None = None,
    margin: float = 0.5,
    grid_hz: float = 10.0,
) -> PseudoTruthTrack:
    """Fit both axes with a shared residual budget grown until the spline
    acceleration respects the bounds implied by the reported velocities.

    Raises ``SmoothingFailedError`` (with the last fit's diagnostics) when
    the schedule is exhausted, e.g. when the track maneuvers harder than
    the reports admit.
    """
    table = table if table is not None else EpuTable.default()
    schedule = schedule if schedule is not None else SmoothingSchedule()
    if len(track.points) < MIN_SPLINE_POINTS:
        raise InsufficientDataError(
            f"track needs >= {MIN_SPLINE_POINTS} points, got {len(track.points)}"
        )
    if not reports:
        raise InsufficientDataError("reports are required for acceleration bounds")

    t = np.array([pt.t for pt in track.points])
    x = np.array([pt.x for pt in track.points])
    y = np.array([pt.y for pt in track.points])
    (ax_lo, ax_hi), (ay_lo, ay_hi) = bounds = reported_accel_bounds(reports, margin)

    sigma0 = table.lookup(modal_nacp(reports)) / EPU_TO_SIGMA
    if not math.isfinite(sigma0):
        # no accuracy claim from the modal NACp: seed the ladder from the
        # coarsest bounded entry instead
        sigma0 = max(v for v in table.bounds if math.isfinite(v)) / EPU_TO_SIGMA

    grid = _accel_grid(t, grid_hz)
    last: dict = {}
    for step, s in enumerate(schedule.budgets(t.shape[0], sigma0)):
        sx = fit_smoothing_spline(t, x, s)
        sy = fit_smoothing_spline(t, y, s)
        gx = kernels.ppoly_eval(sx.knots, sx.coefs, grid, 2)
        gy = kernels.ppoly_eval(sy.knots, sy.coefs, grid, 2)
        ok_x = bool((gx >= ax_lo).all() and (gx <= ax_hi).all())
        ok_y = bool((gy >= ay_lo).all() and (gy <= ay_hi).all())
        if ok_x and ok_y:
            rx = float(np.sum((x - sx.evaluate(t)) ** 2))
            ry = float(np.sum((y - sy.evaluate(t)) ** 2))
            return PseudoTruthTrack(
                x_spline=sx,
                y_spline=sy,
                s_final=s,
                residual_sum_x=rx,
                residual_sum_y=ry,
                accel_bounds=bounds,
                iterations=step + 1,
            )
        last = {
            "s_final": s,
            "iterations": step + 1,
            "accel_bounds": {"x": [ax_lo, ax_hi], "y": [ay_lo, ay_hi]},
            "worst_accel_x": float(np.abs(gx).max()),
            "worst_accel_y": float(np.abs(gy).max()),
            "residual_sum_x": float(np.sum((x - sx.evaluate(t)) ** 2)),
            "residual_sum_y": float(np.sum((y - sy.evaluate(t)) ** 2)),
        }
    raise SmoothingFailedError(
        f"acceleration bounds not met after {last['iterations']} budgets "
        f"(last s = {last['s_final']:.6g})",
        diagnostics=last,
    )
