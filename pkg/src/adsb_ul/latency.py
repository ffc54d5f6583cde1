"""Uncompensated-latency estimators.

Two complementary estimators against a pseudo-truth trajectory:

* Per-report along-track decomposition.  The error vector from the
  pseudo-truth position at the report's TOA to the reported position is
  projected onto the unit velocity; dividing the signed along-track
  component by the reported speed converts meters to seconds.  Positive
  latency means the report lags truth.  Cross-track error (mostly noise)
  cancels out of the projection by construction.

* Track-level time shift.  The latency of a whole track is the time shift
  that minimizes the summed squared distance between shifted pseudo-truth
  positions and the reported positions -- a 1-D minimization over a
  bracket, solved by a coarse scan plus golden-section refinement.

The shift estimator also has an accuracy-constrained variant: only shifts
for which at least 95% of the per-report residual distances fit inside
their NACp-implied EPU radii are admissible; when no shift qualifies, the
track is declared infeasible rather than given a number.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from . import kernels
from .errors import EmptyTrackError, InvalidInputError
from .model import AdsbReport, EpuTable, UlBudget, UlClass, classify_ul
from .spline import PseudoTruthTrack

SPEED_FLOOR_MPS = 30.0

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0
_INV_PHI2 = (3.0 - math.sqrt(5.0)) / 2.0


@dataclass(frozen=True)
class LatencyEstimate:
    """Along-track latency for one report; excluded rows carry a reason
    instead of a value."""

    icao: str
    track_index: int
    toa: float
    ul: float | None
    e_at: float | None
    speed: float | None
    excluded: bool
    reason: str | None = None


@dataclass(frozen=True)
class MtpesResult:
    """Track-level shift estimate: latency and the objective at the optimum."""

    ul: float
    residual: float


@dataclass(frozen=True)
class EpuResult:
    """Accuracy-constrained shift estimate; ``feasible`` is False when no
    shift satisfies the containment requirement."""

    feasible: bool
    ul: float | None = None
    residual: float | None = None


@dataclass(frozen=True)
class TrackLatencySummary:
    icao: str
    track_index: int
    n_used: int
    mean_ul: float
    std_ul: float
    hist_edges: tuple[float, ...]
    hist_counts: tuple[int, ...]
    mtpes_ul: float | None = None
    mtpes_residual: float | None = None
    epu: EpuResult | None = None

    def to_dict(self) -> dict:
        epu: dict | str | None
        if self.epu is None:
            epu = None
        elif self.epu.feasible:
            epu = {"ul_s": self.epu.ul, "residual_m2": self.epu.residual}
        else:
            epu = "infeasible"
        return {
            "icao": self.icao,
            "track_index": self.track_index,
            "n_used": self.n_used,
            "mean_ul_s": self.mean_ul,
            "std_ul_s": self.std_ul,
            "hist_edges_s": list(self.hist_edges),
            "hist_counts": list(self.hist_counts),
            "mtpes_ul_s": self.mtpes_ul,
            "mtpes_residual_m2": self.mtpes_residual,
            "epu_variant": epu,
        }


def atpe_single(
    report: AdsbReport,
    ptt: PseudoTruthTrack,
    *,
    track_index: int = 0,
    speed_floor: float = SPEED_FLOOR_MPS,
) -> LatencyEstimate:
    """Along-track latency of one report against the pseudo-truth."""
    lo, hi = ptt.domain
    if not lo <= report.toa <= hi:
        return LatencyEstimate(
            report.icao, track_index, report.toa, None, None, None,
            excluded=True, reason="outside_pseudo_truth",
        )
    speed = report.speed
    if speed < speed_floor:
        return LatencyEstimate(
            report.icao, track_index, report.toa, None, None, None,
            excluded=True, reason="speed_too_low",
        )
    ref_x = ptt.x_spline.evaluate(report.toa)
    ref_y = ptt.y_spline.evaluate(report.toa)
    # error from reported position to where the aircraft actually was at
    # the TOA; its projection on the velocity direction is signed so a
    # lagging report comes out positive
    ex = ref_x - report.x
    ey = ref_y - report.y
    e_at = (ex * report.vx + ey * report.vy) / speed
    return LatencyEstimate(
        report.icao, track_index, report.toa,
        ul=e_at / speed, e_at=e_at, speed=speed, excluded=False,
    )


def signed_histogram(
    values: Sequence[float], bin_width: float
) -> tuple[np.ndarray, np.ndarray]:
    """Histogram with bin edges aligned so zero is always an edge."""
    if bin_width <= 0:
        raise InvalidInputError("bin_width must be positive")
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        return np.array([0.0, bin_width]), np.array([0], dtype=np.int64)[:0]
    lo = math.floor(arr.min() / bin_width)
    hi = math.ceil(arr.max() / bin_width)
    if hi <= lo:
        hi = lo + 1
    edges = np.arange(lo, hi + 1) * bin_width
    counts, _ = np.histogram(arr, bins=edges)
    return edges, counts


def atpe_track(
    reports: Sequence[AdsbReport],
    ptt: PseudoTruthTrack,
    *,
    track_index: int = 0,
    bin_width: float = 0.010,
    speed_floor: float = SPEED_FLOOR_MPS,
) -> tuple[list[LatencyEstimate], TrackLatencySummary]:
    """Per-report estimates plus the track's distribution summary.

    The summary's shift-estimator fields stay unset here; callers merge
    them in afterwards.  Zero usable reports is an error.
    """
    estimates = [
        atpe_single(r, ptt, track_index=track_index, speed_floor=speed_floor)
        for r in reports
    ]
    used = [e.ul for e in estimates if not e.excluded]
    if not used:
        raise EmptyTrackError("no usable reports for along-track estimation")
    arr = np.array(used)
    edges, counts = signed_histogram(arr, bin_width)
    icao = reports[0].icao if reports else ""
    summary = TrackLatencySummary(
        icao=icao,
        track_index=track_index,
        n_used=arr.size,
        mean_ul=float(arr.mean()),
        std_ul=float(arr.std()),
        hist_edges=tuple(float(e) for e in edges),
        hist_counts=tuple(int(c) for c in counts),
    )
    return estimates, summary


def _usable_for_shift(
    reports: Sequence[AdsbReport], ptt: PseudoTruthTrack,
    bracket: tuple[float, float],
) -> list[AdsbReport]:
    """Reports whose shifted lookup time stays in-domain for every shift in
    the bracket (no extrapolation, ever)."""
    lo, hi = bracket
    t0, t1 = ptt.domain
    return [r for r in reports if r.toa - hi >= t0 and r.toa - lo <= t1]


def _shift_arrays(usable: Sequence[AdsbReport], table: EpuTable | None):
    toas = np.array([r.toa for r in usable])
    px = np.array([r.x for r in usable])
    py = np.array([r.y for r in usable])
    if table is None:
        epu = np.full(len(usable), np.inf)
    else:
        epu = np.array([table.lookup(r.nacp) for r in usable])
    return toas, px, py, epu


def golden_section(f: Callable[[float], float], a: float, b: float,
                   xtol: float) -> float:
    """Golden-section minimizer over [a, b]; deterministic iteration count."""
    if not a < b:
        raise InvalidInputError("need a < b")
    h = b - a
    if h <= xtol:
        return (a + b) / 2.0
    n = int(math.ceil(math.log(xtol / h) / math.log(_INV_PHI)))
    c = a + _INV_PHI2 * h
    d = a + _INV_PHI * h
    yc = f(c)
    yd = f(d)
    for _ in range(n - 1):
        if yc < yd:
            b, d, yd = d, c, yc
            h *= _INV_PHI
            c = a + _INV_PHI2 * h
            yc = f(c)
        else:
            a, c, yc = c, d, yd
            h *= _INV_PHI
            d = a + _INV_PHI * h
            yd = f(d)
    return (a + d) / 2.0 if yc < yd else (c + b) / 2.0


def _validate_bracket(bracket: tuple[float, float], tol: float) -> None:
    lo, hi = bracket
    if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
        raise InvalidInputError(f"bad bracket {bracket!r}")
    if tol <= 0:
        raise InvalidInputError("tol must be positive")


def mtpes(
    reports: Sequence[AdsbReport],
    ptt: PseudoTruthTrack,
    *,
    bracket: tuple[float, float] = (-1.0, 1.0),
    tol: float = 1e-3,
    coarse_step: float = 0.010,
) -> MtpesResult:
    """Minimum total position-error-squared time shift for one track.

    Coarse scan at ``coarse_step`` locates the basin; golden section
    refines the shift to within ``tol``.  Needs >= 4 reports that survive
    edge exclusion.
    """
    _validate_bracket(bracket, tol)
    usable = _usable_for_shift(reports, ptt, bracket)
    if len(usable) < 4:
        raise EmptyTrackError(
            f"only {len(usable)} usable reports after edge exclusion"
        )
    toas, px, py, epu = _shift_arrays(usable, None)
    xs, ys = ptt.x_spline, ptt.y_spline

    lo, hi = bracket
    n_steps = max(1, int(math.ceil((hi - lo) / coarse_step)))
    grid = np.linspace(lo, hi, n_steps + 1)
    sse, _ = kernels.shift_scan(
        xs.knots, xs.coefs, ys.knots, ys.coefs, toas, px, py, epu, grid
    )
    k = int(np.argmin(sse))
    a = grid[max(k - 1, 0)]
    b = grid[min(k + 1, grid.shape[0] - 1)]

    def objective(shift: float) -> float:
        one = np.array([shift])
        val, _ = kernels.shift_scan(
            xs.knots, xs.coefs, ys.knots, ys.coefs, toas, px, py, epu, one
        )
        return float(val[0])

    best = golden_section(objective, float(a), float(b), xtol=tol / 4.0)
    return MtpesResult(ul=best, residual=objective(best))


def epu_constrained_latency(
    reports: Sequence[AdsbReport],
    ptt: PseudoTruthTrack,
    table: EpuTable | None = None,
    *,
    bracket: tuple[float, float] = (-1.0, 1.0),
    tol: float = 1e-3,
    min_fraction: float = 0.95,
) -> EpuResult:
    """Shift estimate restricted to accuracy-consistent shifts.

    Scans the bracket at ``tol`` resolution; a shift qualifies when at
    least ``min_fraction`` of reports sit within their EPU radius of the
    shifted pseudo-truth.  Returns the qualifying shift with the smallest
    total squared error, or an infeasible result when none qualifies
    (typical when report noise dwarfs a tight EPU bound).
    """
    _validate_bracket(bracket, tol)
    table = table if table is not None else EpuTable.default()
    usable = _usable_for_shift(reports, ptt, bracket)
    if len(usable) < 4:
        raise EmptyTrackError(
            f"only {len(usable)} usable reports after edge exclusion"
        )
    toas, px, py, epu = _shift_arrays(usable, table)
    xs, ys = ptt.x_spline, ptt.y_spline

    lo, hi = bracket
    n_steps = max(1, int(math.ceil((hi - lo) / tol)))
    grid = np.linspace(lo, hi, n_steps + 1)
    sse, within = kernels.shift_scan(
        xs.knots, xs.coefs, ys.knots, ys.coefs, toas, px, py, epu, grid
    )
    feasible = within >= min_fraction * len(usable)
    if not feasible.any():
        return EpuResult(feasible=False)
    idx = np.flatnonzero(feasible)
    best = idx[int(np.argmin(sse[idx]))]
    return EpuResult(feasible=True, ul=float(grid[best]), residual=float(sse[best]))


@dataclass(frozen=True)
class FleetEntry:
    plot_index: int
    icao: str
    track_index: int
    n_used: int
    mean_ul: float
    std_ul: float
    classification: UlClass

    def to_dict(self) -> dict:
        return {
            "plot_index": self.plot_index,
            "icao": self.icao,
            "track_index": self.track_index,
            "n_used": self.n_used,
            "mean_ul_s": self.mean_ul,
            "std_ul_s": self.std_ul,
            "classification": self.classification.value,
        }


@dataclass(frozen=True)
class FleetReport:
    """Fleet-level rollup of per-track summaries, grouped by aircraft."""

    entries: tuple[FleetEntry, ...]
    budget_counts: tuple[tuple[str, int], ...]
    n_tracks: int
    n_aircraft: int
    mean_of_means: float | None
    std_of_means: float | None

    def groups(self) -> list[tuple[str, list[FleetEntry]]]:
        out: dict[str, list[FleetEntry]] = {}
        for e in self.entries:
            out.setdefault(e.icao, []).append(e)
        return list(out.items())

    def to_dict(self) -> dict:
        return {
            "n_tracks": self.n_tracks,
            "n_aircraft": self.n_aircraft,
            "mean_of_means_s": self.mean_of_means,
            "std_of_means_s": self.std_of_means,
            "budget_counts": dict(self.budget_counts),
            "tracks": [e.to_dict() for e in self.entries],
        }


def aggregate_fleet(
    summaries: Iterable[TrackLatencySummary],
    budget: UlBudget | None = None,
) -> FleetReport:
    """Group per-track summaries by aircraft and classify each track mean
    against the budget.  Track means are never pooled across tracks."""
    budget = budget if budget is not None else UlBudget()
    by_icao: dict[str, list[TrackLatencySummary]] = {}
    for s in summaries:
        by_icao.setdefault(s.icao, []).append(s)

    entries: list[FleetEntry] = []
    counts = {c.value: 0 for c in UlClass}
    idx = 0
    for icao, group in by_icao.items():
        for s in sorted(group, key=lambda g: g.track_index):
            cls = classify_ul(s.mean_ul, budget)
            counts[cls.value] += 1
            entries.append(
                FleetEntry(
                    plot_index=idx,
                    icao=icao,
                    track_index=s.track_index,
                    n_used=s.n_used,
                    mean_ul=s.mean_ul,
                    std_ul=s.std_ul,
                    classification=cls,
                )
            )
            idx += 1

    means = np.array([e.mean_ul for e in entries])
    return FleetReport(
        entries=tuple(entries),
        budget_counts=tuple(sorted(counts.items())),
        n_tracks=len(entries),
        n_aircraft=len(by_icao),
        mean_of_means=float(means.mean()) if entries else None,
        std_of_means=float(means.std()) if entries else None,
    )


def complete_summary(
    summary: TrackLatencySummary,
    mtpes_result: MtpesResult | None,
    epu_result: EpuResult | None,
) -> TrackLatencySummary:
    """Attach shift-estimator results to an along-track summary."""
    return replace(
        summary,
        mtpes_ul=mtpes_result.ul if mtpes_result else None,
        mtpes_residual=mtpes_result.residual if mtpes_result else None,
        epu=epu_result,
    )
