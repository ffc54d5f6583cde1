"""Domain records, unit conventions, and the NACp accuracy table.

Internal units are meters and seconds everywhere; nautical miles and
milliseconds appear only at I/O boundaries.  Positions live in a local
planar frame (x east, y north).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Iterable

from .errors import InvalidInputError, InvalidNacpError

METERS_PER_NMI = 1852.0

# 95% containment radius of an isotropic 2-D Gaussian in units of the
# per-axis sigma (Rayleigh 0.95 quantile).  Converts an EPU radius into a
# per-axis noise scale and back.
EPU_TO_SIGMA = math.sqrt(-2.0 * math.log(0.05))

#: Sentinel for NACp values that carry no accuracy claim.
UNBOUNDED = math.inf

_NACP_COUNT = 12


@dataclass(frozen=True)
class AdsbReport:
    """One received position/velocity report.

    ``toa`` is the UTC time of applicability in seconds (fractional part
    meaningful).  ``source_tag`` is free-form provenance set by whoever
    built the record (parser line reference, generator name, ...).
    ``link`` optionally names the datalink the report arrived on; ``None``
    means the default 1090 MHz extended squitter.
    """

    icao: str
    toa: float
    x: float
    y: float
    vx: float
    vy: float
    nacp: int
    utc_coupled: bool
    link_version: int
    source_tag: str = ""
    link: str | None = None

    def __post_init__(self) -> None:
        if not isinstance(self.nacp, int) or isinstance(self.nacp, bool):
            raise InvalidNacpError(f"nacp must be an integer, got {self.nacp!r}")
        if not 0 <= self.nacp < _NACP_COUNT:
            raise InvalidNacpError(f"nacp {self.nacp} outside 0..11")
        if not math.isfinite(self.toa) or self.toa < 0.0:
            raise InvalidInputError(f"toa must be finite and >= 0, got {self.toa!r}")
        for name in ("x", "y", "vx", "vy"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")

    @property
    def speed(self) -> float:
        """Reported ground speed, m/s."""
        return math.hypot(self.vx, self.vy)


@dataclass(frozen=True)
class TrackPoint:
    """One smoothed surveillance track sample: time, position, velocity."""

    t: float
    x: float
    y: float
    vx: float
    vy: float

    def __post_init__(self) -> None:
        for name in ("t", "x", "y", "vx", "vy"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidInputError(f"{name} must be finite")


@dataclass(frozen=True)
class Track:
    """A contiguous run of track points for one airframe.

    ``track_index`` is the per-ICAO segment number assigned in time order.
    """

    icao: str
    points: tuple[TrackPoint, ...]
    track_index: int = 0

    def __post_init__(self) -> None:
        if len(self.points) < 2:
            raise InvalidInputError("a track needs at least 2 points")
        ts = [p.t for p in self.points]
        if any(b <= a for a, b in zip(ts, ts[1:])):
            raise InvalidInputError("track point times must be strictly increasing")

    @property
    def t_min(self) -> float:
        return self.points[0].t

    @property
    def t_max(self) -> float:
        return self.points[-1].t

    @property
    def duration(self) -> float:
        return self.t_max - self.t_min


class UlClass(Enum):
    """Three-way partition of a latency value against the budget."""

    WITHIN = "within"
    UNDER_COMPENSATED_EXCESS = "under_compensated_excess"
    OVER_COMPENSATED_EXCESS = "over_compensated_excess"


@dataclass(frozen=True)
class UlBudget:
    """Acceptable uncompensated-latency interval, inclusive at both ends.

    Positive latency means the reported position lags truth
    (under-compensation); negative means it leads (over-compensation).
    """

    min_ul: float = -0.200
    max_ul: float = 0.400

    def __post_init__(self) -> None:
        if not (math.isfinite(self.min_ul) and math.isfinite(self.max_ul)):
            raise InvalidInputError("budget bounds must be finite")
        if self.min_ul >= self.max_ul:
            raise InvalidInputError("budget min must be below max")


def classify_ul(ul: float, budget: UlBudget | None = None) -> UlClass:
    """Place a latency value in the budget partition.

    Boundary values are inside the budget.  Non-finite input is an error.
    """
    if not math.isfinite(ul):
        raise InvalidInputError(f"ul must be finite, got {ul!r}")
    b = budget if budget is not None else UlBudget()
    if ul > b.max_ul:
        return UlClass.UNDER_COMPENSATED_EXCESS
    if ul < b.min_ul:
        return UlClass.OVER_COMPENSATED_EXCESS
    return UlClass.WITHIN


@dataclass(frozen=True)
class EpuTable:
    """95% horizontal containment radius per NACp value, meters.

    Index is the NACp value; ``math.inf`` marks entries with no accuracy
    claim.  Values must be non-increasing from NACp 1 upward.
    """

    bounds: tuple[float, ...]

    def __post_init__(self) -> None:
        if len(self.bounds) != _NACP_COUNT:
            raise InvalidInputError(
                f"EPU table needs {_NACP_COUNT} entries, got {len(self.bounds)}"
            )
        for i, v in enumerate(self.bounds):
            if math.isnan(v) or v <= 0.0:
                raise InvalidInputError(f"EPU for nacp {i} must be positive")
        for i in range(2, _NACP_COUNT):
            if self.bounds[i] > self.bounds[i - 1]:
                raise InvalidInputError(
                    "EPU values must be non-increasing from nacp 1 upward"
                )

    def lookup(self, nacp: int) -> float:
        """EPU radius in meters for one NACp value; inf when unbounded."""
        if not isinstance(nacp, int) or isinstance(nacp, bool):
            raise InvalidNacpError(f"nacp must be an integer, got {nacp!r}")
        if not 0 <= nacp < _NACP_COUNT:
            raise InvalidNacpError(f"nacp {nacp} outside 0..11")
        return self.bounds[nacp]

    @classmethod
    def from_file(cls, path: str | Path) -> "EpuTable":
        """Load a table from a flat key-value config file.

        Lines look like ``nacp_9 = 30.0``; the literal ``unbounded`` maps
        to inf.  ``#`` starts a comment.  All 12 keys must be present.
        """
        text = Path(path).read_text(encoding="utf-8")
        return cls._from_text(text, str(path))

    @classmethod
    def _from_text(cls, text: str, origin: str) -> "EpuTable":
        values: dict[int, float] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidInputError(f"{origin}:{lineno}: expected 'key = value'")
            key, _, val = (s.strip() for s in line.partition("="))
            if not key.startswith("nacp_"):
                raise InvalidInputError(f"{origin}:{lineno}: unknown key {key!r}")
            try:
                idx = int(key[len("nacp_"):])
            except ValueError:
                raise InvalidInputError(f"{origin}:{lineno}: unknown key {key!r}")
            if idx in values:
                raise InvalidInputError(f"{origin}:{lineno}: duplicate key {key!r}")
            if val.lower() == "unbounded":
                values[idx] = UNBOUNDED
            else:
                try:
                    values[idx] = float(val)
                except ValueError:
                    raise InvalidInputError(f"{origin}:{lineno}: bad value {val!r}")
        missing = [i for i in range(_NACP_COUNT) if i not in values]
        if missing:
            raise InvalidInputError(f"{origin}: missing keys for nacp {missing}")
        extra = [i for i in values if not 0 <= i < _NACP_COUNT]
        if extra:
            raise InvalidInputError(f"{origin}: keys outside nacp 0..11: {extra}")
        return cls(tuple(values[i] for i in range(_NACP_COUNT)))

    @classmethod
    def default(cls) -> "EpuTable":
        """The table shipped with the package (data/epu_table.cfg)."""
        text = (
            resources.files("adsb_ul").joinpath("data/epu_table.cfg").read_text("utf-8")
        )
        return cls._from_text(text, "data/epu_table.cfg")


def epu_lookup(table: EpuTable, nacp: int) -> float:
    """Functional form of :meth:`EpuTable.lookup`."""
    return table.lookup(nacp)


def modal_nacp(reports: Iterable[AdsbReport]) -> int:
    """Most common NACp among reports; smallest value wins ties."""
    counts = [0] * _NACP_COUNT
    n = 0
    for r in reports:
        counts[r.nacp] += 1
        n += 1
    if n == 0:
        raise InvalidInputError("modal_nacp of an empty report set")
    return max(range(_NACP_COUNT), key=lambda i: (counts[i], -i))
