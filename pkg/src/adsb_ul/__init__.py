"""Uncompensated-latency estimation for ADS-B position reports.

The package turns raw report and surveillance-track streams into per-report
and per-track latency estimates: tracks become smoothed pseudo-truth
references, reports are compared against them along-track and by juggling a
common time shift, and the results roll up to fleet statistics, budget
classifications, and timing-anomaly findings.  A synthetic-data generator
with exact ground truth closes the loop for testing.
"""

from .errors import (
    AdsbUlError,
    CorruptInputError,
    EmptyTrackError,
    InsufficientDataError,
    InvalidAbscissaError,
    InvalidInputError,
    InvalidNacpError,
    OutOfDomainError,
    SmoothingFailedError,
)
from .model import (
    AdsbReport,
    EpuTable,
    Track,
    TrackPoint,
    UlBudget,
    UlClass,
    classify_ul,
    epu_lookup,
    modal_nacp,
)
from .ingest import (
    FilterCriteria,
    IngestSummary,
    filter_aircraft,
    group_reports,
    group_track_points,
    parse_reports,
    parse_track_points,
    segment_tracks,
)
from .spline import (
    PseudoTruthTrack,
    SmoothingSchedule,
    Spline1D,
    fit_pseudo_truth,
    fit_smoothing_spline,
)
from .latency import (
    EpuResult,
    FleetReport,
    LatencyEstimate,
    MtpesResult,
    TrackLatencySummary,
    aggregate_fleet,
    atpe_single,
    atpe_track,
    epu_constrained_latency,
    mtpes,
)
from .anomaly import (
    AnomalyConfig,
    AnomalyFinding,
    check_epoch_quantization,
    check_link_version,
    check_speed_consistency,
    run_anomaly_suite,
)
from .simgen import (
    SyntheticScenario,
    TrajectoryProfile,
    UlModel,
    generate_reports,
    generate_track_points,
    scenario_from_dict,
    scenario_to_dict,
)
from .pipeline import AnalysisConfig, analyze_dataset, analyze_track

__version__ = "0.1.0"

__all__ = [
    "AdsbUlError",
    "CorruptInputError",
    "EmptyTrackError",
    "InsufficientDataError",
    "InvalidAbscissaError",
    "InvalidInputError",
    "InvalidNacpError",
    "OutOfDomainError",
    "SmoothingFailedError",
    "AdsbReport",
    "EpuTable",
    "Track",
    "TrackPoint",
    "UlBudget",
    "UlClass",
    "classify_ul",
    "epu_lookup",
    "modal_nacp",
    "FilterCriteria",
    "IngestSummary",
    "filter_aircraft",
    "group_reports",
    "group_track_points",
    "parse_reports",
    "parse_track_points",
    "segment_tracks",
    "PseudoTruthTrack",
    "SmoothingSchedule",
    "Spline1D",
    "fit_pseudo_truth",
    "fit_smoothing_spline",
    "EpuResult",
    "FleetReport",
    "LatencyEstimate",
    "MtpesResult",
    "TrackLatencySummary",
    "aggregate_fleet",
    "atpe_single",
    "atpe_track",
    "epu_constrained_latency",
    "mtpes",
    "AnomalyConfig",
    "AnomalyFinding",
    "check_epoch_quantization",
    "check_link_version",
    "check_speed_consistency",
    "run_anomaly_suite",
    "SyntheticScenario",
    "TrajectoryProfile",
    "UlModel",
    "generate_reports",
    "generate_track_points",
    "scenario_from_dict",
    "scenario_to_dict",
    "AnalysisConfig",
    "analyze_dataset",
    "analyze_track",
    "__version__",
]
