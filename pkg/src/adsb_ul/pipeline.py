"""Per-track analysis orchestration shared by the CLI and the validation
suite: pseudo-truth fit, both latency estimators, fleet rollup."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

from .errors import (
    EmptyTrackError,
    InsufficientDataError,
    SmoothingFailedError,
)
from .ingest import (
    FilterCriteria,
    IngestSummary,
    filter_aircraft,
    group_reports,
    group_track_points,
    segment_tracks,
)
from .latency import (
    EpuResult,
    LatencyEstimate,
    MtpesResult,
    TrackLatencySummary,
    aggregate_fleet,
    atpe_track,
    complete_summary,
    epu_constrained_latency,
    mtpes,
)
from .model import AdsbReport, EpuTable, Track, TrackPoint, UlBudget
from .spline import PseudoTruthTrack, fit_pseudo_truth


@dataclass(frozen=True)
class AnalysisConfig:
    gap_threshold: float = 60.0
    accel_margin: float = 0.5
    accel_grid_hz: float = 10.0
    bracket: tuple[float, float] = (-1.0, 1.0)
    tol: float = 1e-3
    coarse_step: float = 0.010
    bin_width: float = 0.010
    speed_floor: float = 30.0
    epu_min_fraction: float = 0.95


@dataclass
class TrackAnalysis:
    icao: str
    track_index: int
    estimates: list[LatencyEstimate] = field(default_factory=list)
    summary: TrackLatencySummary | None = None
    ptt: PseudoTruthTrack | None = None
    skipped_reason: str | None = None

    @property
    def ok(self) -> bool:
        return self.summary is not None


def analyze_track(
    track: Track,
    reports: Sequence[AdsbReport],
    *,
    table: EpuTable | None = None,
    config: AnalysisConfig | None = None,
) -> TrackAnalysis:
    """Run the full estimator stack on one track.

    ``reports`` is the aircraft's report list; only those inside the track
    span participate.  Fit or data failures mark the track skipped with a
    reason instead of raising.
    """
    cfg = config if config is not None else AnalysisConfig()
    table = table if table is not None else EpuTable.default()
    out = TrackAnalysis(icao=track.icao, track_index=track.track_index)
    in_span = [r for r in reports if track.t_min <= r.toa <= track.t_max]
    if not in_span:
        out.skipped_reason = "no_reports_in_span"
        return out
    try:
        ptt = fit_pseudo_truth(
            track, in_span, table=table,
            margin=cfg.accel_margin, grid_hz=cfg.accel_grid_hz,
        )
    except SmoothingFailedError:
        out.skipped_reason = "smoothing_failed"
        return out
    except InsufficientDataError:
        out.skipped_reason = "insufficient_data"
        return out
    out.ptt = ptt

    try:
        estimates, summary = atpe_track(
            in_span, ptt,
            track_index=track.track_index,
            bin_width=cfg.bin_width,
            speed_floor=cfg.speed_floor,
        )
    except EmptyTrackError:
        out.skipped_reason = "no_usable_reports"
        return out
    out.estimates = estimates

    mt: MtpesResult | None
    ep: EpuResult | None
    try:
        mt = mtpes(
            in_span, ptt,
            bracket=cfg.bracket, tol=cfg.tol, coarse_step=cfg.coarse_step,
        )
        ep = epu_constrained_latency(
            in_span, ptt, table,
            bracket=cfg.bracket, tol=cfg.tol,
            min_fraction=cfg.epu_min_fraction,
        )
    except EmptyTrackError:
        # track too short for the shift estimators; keep the per-report part
        mt = None
        ep = None
    out.summary = complete_summary(summary, mt, ep)
    return out


@dataclass
class DatasetAnalysis:
    ingest_summary: IngestSummary
    accepted: set[str]
    tracks: list[TrackAnalysis] = field(default_factory=list)
    fleet: dict | None = None

    @property
    def summaries(self) -> list[TrackLatencySummary]:
        return [t.summary for t in self.tracks if t.summary is not None]


def analyze_dataset(
    reports: Sequence[AdsbReport],
    points: Sequence[tuple[str, TrackPoint]],
    *,
    criteria: FilterCriteria | None = None,
    config: AnalysisConfig | None = None,
    table: EpuTable | None = None,
    budget: UlBudget | None = None,
    jobs: int = 1,
) -> DatasetAnalysis:
    """Segment, filter, and analyze a whole dataset deterministically."""
    cfg = config if config is not None else AnalysisConfig()
    table = table if table is not None else EpuTable.default()
    reports_by_icao = group_reports(reports)
    points_by_icao = group_track_points(points)
    tracks_by_icao = {
        icao: segment_tracks(icao, pts, gap_threshold=cfg.gap_threshold)
        for icao, pts in points_by_icao.items()
    }
    accepted, summary = filter_aircraft(reports_by_icao, tracks_by_icao, criteria)

    work = [
        (tr, reports_by_icao.get(icao, []))
        for icao in sorted(accepted)
        for tr in tracks_by_icao.get(icao, [])
    ]

    def run(item) -> TrackAnalysis:
        track, rs = item
        return analyze_track(track, rs, table=table, config=cfg)

    if jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, work))
    else:
        results = [run(item) for item in work]

    out = DatasetAnalysis(ingest_summary=summary, accepted=accepted, tracks=results)
    out.fleet = aggregate_fleet(out.summaries, budget).to_dict()
    return out
