"""Timing and compliance anomaly detectors for report streams.

Three checks, normally run per UTC-coupled aircraft:

* ``epoch_quantization``: every TOA fractional part sits on a 200 ms UTC
  epoch.  Free-running receivers stamp on a 1/128 s grid instead, and no
  k/128 with 0 < k < 128 coincides with a multiple of 1/5, so a compliant
  free-running stream can only look epoch-quantized through all-integer
  TOAs.  The residual of one TOA is computed as ``toa - round(5*toa)/5``,
  which is exactly zero for values stamped on the epoch grid.

* ``speed_mismatch``: the median gap between inter-report calculated speed
  (position delta over TOA delta) and the reported ground speed.  Large
  values mean position and timestamp disagree, e.g. a desynchronized
  receiver clock.

* ``link_noncompliance``: any report carrying a link version outside the
  accepted set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import InvalidInputError
from .model import AdsbReport

KIND_EPOCH = "epoch_quantization"
KIND_SPEED = "speed_mismatch"
KIND_LINK = "link_noncompliance"

UTC_EPOCH_S = 0.200


@dataclass(frozen=True)
class AnomalyFinding:
    icao: str
    kind: str
    triggered: bool
    n_reports: int
    evidence: dict

    def to_dict(self) -> dict:
        return {
            "icao": self.icao,
            "kind": self.kind,
            "triggered": self.triggered,
            "n_reports": self.n_reports,
            "evidence": self.evidence,
        }


@dataclass(frozen=True)
class AnomalyConfig:
    epoch_tolerance: float = 1e-3
    epoch_min_reports: int = 10
    speed_threshold: float = 50.0
    compliant_versions: tuple[int, ...] = (2,)
    include_non_utc: bool = False


def epoch_residuals(toas: Sequence[float]) -> np.ndarray:
    """Signed distance from each TOA to the nearest 200 ms epoch."""
    arr = np.asarray(toas, dtype=np.float64)
    return arr - np.round(arr / UTC_EPOCH_S) * UTC_EPOCH_S


def check_epoch_quantization(
    reports: Sequence[AdsbReport],
    *,
    tolerance: float = 1e-3,
    min_reports: int = 10,
) -> AnomalyFinding:
    """Triggered when every TOA is within ``tolerance`` of an epoch.

    Adding whole seconds to all TOAs cannot change the outcome.  Fewer
    than ``min_reports`` reports yields an untriggered insufficient-data
    finding rather than a verdict.
    """
    if tolerance < 0:
        raise InvalidInputError("tolerance must be >= 0")
    icao = reports[0].icao if reports else ""
    n = len(reports)
    if n < min_reports:
        return AnomalyFinding(
            icao, KIND_EPOCH, triggered=False, n_reports=n,
            evidence={"insufficient_data": True, "min_reports": min_reports},
        )
    res = epoch_residuals([r.toa for r in reports])
    on_epoch = np.abs(res) <= tolerance
    return AnomalyFinding(
        icao, KIND_EPOCH,
        triggered=bool(on_epoch.all()),
        n_reports=n,
        evidence={
            "on_epoch_fraction": float(on_epoch.mean()),
            "tolerance_s": tolerance,
            "residuals_s": [float(r) for r in res],
        },
    )


def check_speed_consistency(
    reports: Sequence[AdsbReport],
    *,
    threshold: float = 50.0,
) -> AnomalyFinding:
    """Triggered when the median |calculated - reported| speed over
    consecutive report pairs exceeds ``threshold`` m/s.

    Pairs with identical TOAs are skipped; the reported speed of a pair is
    the mean of its endpoints.  Fewer than two distinct TOAs yields an
    untriggered insufficient-data finding.
    """
    if threshold < 0:
        raise InvalidInputError("threshold must be >= 0")
    icao = reports[0].icao if reports else ""
    n = len(reports)
    rs = sorted(reports, key=lambda r: r.toa)
    calc = []
    rep = []
    for a, b in zip(rs, rs[1:]):
        dt = b.toa - a.toa
        if dt <= 0.0:
            continue
        calc.append(math.hypot(b.x - a.x, b.y - a.y) / dt)
        rep.append((a.speed + b.speed) / 2.0)
    if not calc:
        return AnomalyFinding(
            icao, KIND_SPEED, triggered=False, n_reports=n,
            evidence={"insufficient_data": True},
        )
    offsets = np.abs(np.array(calc) - np.array(rep))
    median = float(np.median(offsets))
    return AnomalyFinding(
        icao, KIND_SPEED,
        triggered=median > threshold,
        n_reports=n,
        evidence={
            "median_offset_mps": median,
            "max_offset_mps": float(offsets.max()),
            "n_pairs": int(offsets.size),
            "threshold_mps": threshold,
        },
    )


def check_link_version(
    reports: Sequence[AdsbReport],
    *,
    compliant: Iterable[int] = (2,),
) -> AnomalyFinding:
    """Triggered when any report carries a link version outside the
    compliant set."""
    icao = reports[0].icao if reports else ""
    allowed = set(compliant)
    versions: dict[int, int] = {}
    for r in reports:
        versions[r.link_version] = versions.get(r.link_version, 0) + 1
    bad = sorted(v for v in versions if v not in allowed)
    return AnomalyFinding(
        icao, KIND_LINK,
        triggered=bool(bad),
        n_reports=len(reports),
        evidence={
            "versions": {str(k): versions[k] for k in sorted(versions)},
            "noncompliant_versions": bad,
            "compliant_versions": sorted(allowed),
        },
    )


def run_anomaly_suite(
    reports_by_icao: Mapping[str, Sequence[AdsbReport]],
    config: AnomalyConfig | None = None,
) -> list[AnomalyFinding]:
    """All three checks for every UTC-coupled aircraft (or every aircraft
    with ``include_non_utc``), three findings per aircraft checked."""
    cfg = config if config is not None else AnomalyConfig()
    findings: list[AnomalyFinding] = []
    for icao in sorted(reports_by_icao):
        reports = list(reports_by_icao[icao])
        if not reports:
            continue
        utc = any(r.utc_coupled for r in reports)
        if not utc and not cfg.include_non_utc:
            continue
        findings.append(
            check_epoch_quantization(
                reports,
                tolerance=cfg.epoch_tolerance,
                min_reports=cfg.epoch_min_reports,
            )
        )
        findings.append(
            check_speed_consistency(reports, threshold=cfg.speed_threshold)
        )
        findings.append(
            check_link_version(reports, compliant=cfg.compliant_versions)
        )
    return findings
