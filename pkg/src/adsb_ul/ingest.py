"""JSONL ingestion: reports, track points, segmentation, fleet filtering.

Input timestamps are UTC seconds of day.  A drop of more than half a day
between consecutive records is treated as midnight rollover and unwrapped
by adding 86400 s, per stream, so downstream code sees a monotone time
axis.  Malformed lines are collected with their line numbers rather than
silently dropped; a stream with too many of them is rejected outright.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import CorruptInputError, InvalidInputError
from .model import AdsbReport, Track, TrackPoint

SECONDS_PER_DAY = 86400.0
_HALF_DAY = SECONDS_PER_DAY / 2.0

#: A cubic spline needs this many samples, so shorter segments are useless.
MIN_TRACK_POINTS = 4

_ICAO_RE = re.compile(r"^[0-9A-Fa-f]{6}$")


@dataclass(frozen=True)
class MalformedLine:
    line_no: int
    reason: str


@dataclass
class ParsedReports:
    reports: list[AdsbReport]
    malformed: list[MalformedLine]


@dataclass
class ParsedTrackPoints:
    points: list[tuple[str, TrackPoint]]
    malformed: list[MalformedLine]


class _Unwrapper:
    """Stateful midnight-rollover unwrapping for one stream."""

    def __init__(self) -> None:
        self._offset = 0.0
        self._prev_raw: float | None = None

    def convert(self, raw: float) -> float:
        if self._prev_raw is not None and raw < self._prev_raw - _HALF_DAY:
            self._offset += SECONDS_PER_DAY
        self._prev_raw = raw
        return raw + self._offset


def _iter_lines(source) -> Iterator[tuple[int, str]]:
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            yield from enumerate(fh, start=1)
        return
    if hasattr(source, "read"):
        yield from enumerate(source, start=1)
        return
    yield from enumerate(source, start=1)


def _number(obj: dict, key: str) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise InvalidInputError(f"{key} must be a number")
    v = float(v)
    if not math.isfinite(v):
        raise InvalidInputError(f"{key} must be finite")
    return v


def _icao(obj: dict) -> str:
    v = obj["icao"]
    if not isinstance(v, str) or not _ICAO_RE.match(v):
        raise InvalidInputError("icao must be a 6-digit hex string")
    return v.upper()


def _check_fraction(n_ok: int, malformed: list[MalformedLine], max_fraction: float):
    total = n_ok + len(malformed)
    if total > 0 and len(malformed) / total > max_fraction:
        preview = "; ".join(f"line {m.line_no}: {m.reason}" for m in malformed[:3])
        raise CorruptInputError(
            f"{len(malformed)}/{total} lines malformed "
            f"(limit {max_fraction:.0%}): {preview}"
        )


def parse_reports(source, *, max_malformed_fraction: float = 0.1,
                  source_name: str = "") -> ParsedReports:
    """Parse a report JSONL stream.

    Each line needs ``icao``, ``toa_s``, ``x_m``, ``y_m``, ``vx_mps``,
    ``vy_mps``, ``nacp``, ``utc_coupled``, ``link_version``; ``link`` is
    optional.  Unknown keys are ignored.  Lines that fail validation land
    in ``malformed``; parsing never reorders records.
    """
    reports: list[AdsbReport] = []
    malformed: list[MalformedLine] = []
    unwrap = _Unwrapper()
    for line_no, raw in _iter_lines(source):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise InvalidInputError("line is not a JSON object")
            nacp = obj["nacp"]
            if isinstance(nacp, bool) or not isinstance(nacp, int):
                raise InvalidInputError("nacp must be an integer")
            utc = obj["utc_coupled"]
            if not isinstance(utc, bool):
                raise InvalidInputError("utc_coupled must be a boolean")
            ver = obj["link_version"]
            if isinstance(ver, bool) or not isinstance(ver, int):
                raise InvalidInputError("link_version must be an integer")
            link = obj.get("link")
            if link is not None and not isinstance(link, str):
                raise InvalidInputError("link must be a string when present")
            report = AdsbReport(
                icao=_icao(obj),
                toa=unwrap.convert(_number(obj, "toa_s")),
                x=_number(obj, "x_m"),
                y=_number(obj, "y_m"),
                vx=_number(obj, "vx_mps"),
                vy=_number(obj, "vy_mps"),
                nacp=nacp,
                utc_coupled=utc,
                link_version=ver,
                source_tag=f"{source_name}:{line_no}" if source_name else str(line_no),
                link=link,
            )
        except KeyError as exc:
            malformed.append(MalformedLine(line_no, f"missing field {exc.args[0]}"))
            continue
        except (json.JSONDecodeError, InvalidInputError, TypeError) as exc:
            malformed.append(MalformedLine(line_no, str(exc)))
            continue
        reports.append(report)
    _check_fraction(len(reports), malformed, max_malformed_fraction)
    return ParsedReports(reports, malformed)


def parse_track_points(source, *, max_malformed_fraction: float = 0.1) -> ParsedTrackPoints:
    """Parse a track-point JSONL stream: ``icao``, ``t_s``, ``x_m``,
    ``y_m``, ``vx_mps``, ``vy_mps`` per line."""
    points: list[tuple[str, TrackPoint]] = []
    malformed: list[MalformedLine] = []
    unwrap = _Unwrapper()
    for line_no, raw in _iter_lines(source):
        line = raw.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise InvalidInputError("line is not a JSON object")
            icao = _icao(obj)
            point = TrackPoint(
                t=unwrap.convert(_number(obj, "t_s")),
                x=_number(obj, "x_m"),
                y=_number(obj, "y_m"),
                vx=_number(obj, "vx_mps"),
                vy=_number(obj, "vy_mps"),
            )
        except KeyError as exc:
            malformed.append(MalformedLine(line_no, f"missing field {exc.args[0]}"))
            continue
        except (json.JSONDecodeError, InvalidInputError, TypeError) as exc:
            malformed.append(MalformedLine(line_no, str(exc)))
            continue
        points.append((icao, point))
    _check_fraction(len(points), malformed, max_malformed_fraction)
    return ParsedTrackPoints(points, malformed)


def group_reports(reports: Iterable[AdsbReport]) -> dict[str, list[AdsbReport]]:
    out: dict[str, list[AdsbReport]] = {}
    for r in reports:
        out.setdefault(r.icao, []).append(r)
    return out


def group_track_points(
    points: Iterable[tuple[str, TrackPoint]]
) -> dict[str, list[TrackPoint]]:
    out: dict[str, list[TrackPoint]] = {}
    for icao, p in points:
        out.setdefault(icao, []).append(p)
    return out


def segment_tracks(
    icao: str,
    points: Sequence[TrackPoint],
    *,
    gap_threshold: float = 60.0,
    min_points: int = MIN_TRACK_POINTS,
) -> list[Track]:
    """Split one aircraft's points into contiguous tracks.

    Points are sorted by time first (exact-duplicate timestamps keep the
    first occurrence).  A gap strictly larger than ``gap_threshold``
    starts a new track; segments shorter than ``min_points`` are dropped.
    ``track_index`` numbers the surviving tracks in time order.
    """
    if gap_threshold <= 0:
        raise InvalidInputError("gap_threshold must be positive")
    ordered = sorted(points, key=lambda p: p.t)
    segments: list[list[TrackPoint]] = []
    current: list[TrackPoint] = []
    for p in ordered:
        if current and p.t == current[-1].t:
            continue
        if current and p.t - current[-1].t > gap_threshold:
            segments.append(current)
            current = []
        current.append(p)
    if current:
        segments.append(current)
    kept = [seg for seg in segments if len(seg) >= min_points]
    return [
        Track(icao=icao, points=tuple(seg), track_index=i)
        for i, seg in enumerate(kept)
    ]


@dataclass(frozen=True)
class FilterCriteria:
    """Per-aircraft acceptance rules for latency analysis."""

    require_1090es: bool = True
    nacp_min: int = 8
    nacp_max: int = 11
    require_non_utc_coupled: bool = True
    min_tracks_per_icao: int = 2


@dataclass
class IngestSummary:
    total_reports: int = 0
    total_track_points: int = 0
    unique_icaos: int = 0
    utc_coupled_icaos: int = 0
    accepted_icaos: int = 0
    rejection_reasons: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "total_reports": self.total_reports,
            "total_track_points": self.total_track_points,
            "unique_icaos": self.unique_icaos,
            "utc_coupled_icaos": self.utc_coupled_icaos,
            "accepted_icaos": self.accepted_icaos,
            "rejection_reasons": dict(sorted(self.rejection_reasons.items())),
        }


def _reports_in_tracks(
    reports: Sequence[AdsbReport], tracks: Sequence[Track]
) -> list[AdsbReport]:
    spans = [(tr.t_min, tr.t_max) for tr in tracks]
    return [r for r in reports if any(lo <= r.toa <= hi for lo, hi in spans)]


def filter_aircraft(
    reports_by_icao: dict[str, list[AdsbReport]],
    tracks_by_icao: dict[str, list[Track]],
    criteria: FilterCriteria | None = None,
) -> tuple[set[str], IngestSummary]:
    """Decide which aircraft qualify for latency analysis.

    An ICAO is accepted when every report inside its tracks' time spans
    passes the link / NACp / coupling criteria and it has enough tracks.
    Each rejected ICAO increments exactly one reason counter (first failed
    criterion, checked in the order: link, NACp, coupling, track count,
    report presence).
    """
    criteria = criteria if criteria is not None else FilterCriteria()
    reasons: Counter[str] = Counter()
    accepted: set[str] = set()
    icaos = sorted(set(reports_by_icao) | set(tracks_by_icao))
    utc_icaos = 0
    for icao in icaos:
        reports = reports_by_icao.get(icao, [])
        tracks = tracks_by_icao.get(icao, [])
        if any(r.utc_coupled for r in reports):
            utc_icaos += 1
        analyzed = _reports_in_tracks(reports, tracks)
        if criteria.require_1090es and any(
            r.link is not None and r.link != "1090ES" for r in analyzed
        ):
            reasons["non_1090es"] += 1
            continue
        if any(
            not criteria.nacp_min <= r.nacp <= criteria.nacp_max for r in analyzed
        ):
            reasons["nacp_out_of_range"] += 1
            continue
        if criteria.require_non_utc_coupled and any(r.utc_coupled for r in analyzed):
            reasons["utc_coupled"] += 1
            continue
        if len(tracks) < criteria.min_tracks_per_icao:
            reasons["too_few_tracks"] += 1
            continue
        if not analyzed:
            reasons["no_reports"] += 1
            continue
        accepted.add(icao)

    summary = IngestSummary(
        total_reports=sum(len(v) for v in reports_by_icao.values()),
        total_track_points=sum(
            len(tr.points) for trs in tracks_by_icao.values() for tr in trs
        ),
        unique_icaos=len(icaos),
        utc_coupled_icaos=utc_icaos,
        accepted_icaos=len(accepted),
        rejection_reasons=dict(reasons),
    )
    return accepted, summary
