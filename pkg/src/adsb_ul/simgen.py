"""Synthetic trajectory and report generation with known injected latency.

The aircraft follows a constant-speed trajectory built from straight legs
and coordinated (constant-rate) turns, integrated in closed form.  A report
emitted at time t_R carries the position the aircraft occupied at

    t* = t_R - ul,

so positive injected latency makes the report lag truth.  Position noise is
drawn per axis with sigma = EPU(NACp) / 2.4477 (the 95% Rayleigh quantile),
matching what the accuracy category claims.  TOA stamping follows the
ground-station coupling mode:

* UTC-coupled receivers stamp the nearest 200 ms UTC epoch;
* free-running receivers stamp the measured time rounded to 1/128 s.

Clock desynchronization is modeled as alternating +/-d jitter between the
position sampling time and the stamped TOA.  A constant offset would be
invisible to inter-report speed checks on constant-velocity tracks; the
alternating form shifts consecutive calculated speeds by 2*d*speed/dt on
average, which is what the speed-consistency detector keys on.

All randomness flows from one seeded generator (numpy PCG64), so a scenario
reproduces bit-identically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, OutOfDomainError
from .model import EPU_TO_SIGMA, AdsbReport, EpuTable, TrackPoint

RNG_ALGORITHM = "numpy PCG64 (default_rng)"

#: TOA grid of a free-running (non-UTC-coupled) receiver, seconds.
MESSAGE_TICK = 1.0 / 128.0
#: TOA grid of a UTC-coupled receiver, seconds.
UTC_EPOCH = 0.200


@dataclass(frozen=True)
class TrajectorySegment:
    """One constant-turn-rate leg; rate 0 means straight."""

    duration: float
    turn_rate: float = 0.0

    def __post_init__(self) -> None:
        if not math.isfinite(self.duration) or self.duration <= 0.0:
            raise InvalidInputError("segment duration must be positive")
        if not math.isfinite(self.turn_rate):
            raise InvalidInputError("turn rate must be finite")


@dataclass(frozen=True)
class TrajectoryProfile:
    """Constant-speed planar trajectory on [t_start, t_start + duration].

    ``kind`` is one of ``straight``, ``coordinated_turn``, ``piecewise``.
    The first two take ``duration`` (and ``turn_rate`` for the turn);
    ``piecewise`` chains explicit segments.
    """

    kind: str
    x0: float = 0.0
    y0: float = 0.0
    speed: float = 100.0
    heading: float = 0.0
    duration: float = 0.0
    turn_rate: float = 0.0
    segments: tuple[TrajectorySegment, ...] = ()
    report_rate_hz: float = 2.0
    t_start: float = 0.0

    def __post_init__(self) -> None:
        if self.kind not in ("straight", "coordinated_turn", "piecewise"):
            raise InvalidInputError(f"unknown trajectory kind {self.kind!r}")
        if not math.isfinite(self.speed) or self.speed <= 0.0:
            raise InvalidInputError("speed must be positive")
        if self.report_rate_hz <= 0.0:
            raise InvalidInputError("report rate must be positive")
        if self.t_start < 0.0:
            raise InvalidInputError("t_start must be >= 0")
        if self.kind == "piecewise":
            if not self.segments:
                raise InvalidInputError("piecewise profile needs segments")
        else:
            if self.duration <= 0.0:
                raise InvalidInputError("duration must be positive")
        if self.kind == "coordinated_turn" and self.turn_rate == 0.0:
            raise InvalidInputError("coordinated_turn needs a nonzero turn rate")

    @property
    def legs(self) -> tuple[TrajectorySegment, ...]:
        if self.kind == "piecewise":
            return self.segments
        rate = self.turn_rate if self.kind == "coordinated_turn" else 0.0
        return (TrajectorySegment(self.duration, rate),)

    @property
    def total_duration(self) -> float:
        return sum(seg.duration for seg in self.legs)

    @property
    def t_end(self) -> float:
        return self.t_start + self.total_duration


def _segment_states(profile: TrajectoryProfile):
    """Absolute start time and pose at the start of each leg."""
    states = []
    t0 = profile.t_start
    x, y, theta = profile.x0, profile.y0, profile.heading
    v = profile.speed
    for seg in profile.legs:
        states.append((t0, x, y, theta, seg.turn_rate, seg.duration))
        if seg.turn_rate == 0.0:
            x += v * seg.duration * math.cos(theta)
            y += v * seg.duration * math.sin(theta)
        else:
            th1 = theta + seg.turn_rate * seg.duration
            rad = v / seg.turn_rate
            x += rad * (math.sin(th1) - math.sin(theta))
            y -= rad * (math.cos(th1) - math.cos(theta))
            theta = th1
        t0 += seg.duration
    return states


def _locate(profile: TrajectoryProfile, t: float):
    if not (profile.t_start <= t <= profile.t_end):
        raise OutOfDomainError(
            f"t={t} outside trajectory domain [{profile.t_start}, {profile.t_end}]"
        )
    states = _segment_states(profile)
    for state in reversed(states):
        if t >= state[0]:
            return state
    return states[0]


def truth_position(profile: TrajectoryProfile, t: float) -> tuple[float, float]:
    """Exact position at absolute time t; out-of-domain is an error."""
    t0, x, y, theta, omega, _ = _locate(profile, t)
    tau = t - t0
    v = profile.speed
    if omega == 0.0:
        return (x + v * tau * math.cos(theta), y + v * tau * math.sin(theta))
    th = theta + omega * tau
    rad = v / omega
    return (x + rad * (math.sin(th) - math.sin(theta)),
            y - rad * (math.cos(th) - math.cos(theta)))


def truth_velocity(profile: TrajectoryProfile, t: float) -> tuple[float, float]:
    t0, _, _, theta, omega, _ = _locate(profile, t)
    th = theta + omega * (t - t0)
    return (profile.speed * math.cos(th), profile.speed * math.sin(th))


def truth_acceleration(profile: TrajectoryProfile, t: float) -> tuple[float, float]:
    t0, _, _, theta, omega, _ = _locate(profile, t)
    th = theta + omega * (t - t0)
    mag = profile.speed * omega
    return (-mag * math.sin(th), mag * math.cos(th))


@dataclass(frozen=True)
class UlModel:
    """How injected latency varies across reports.

    Kinds: ``constant`` (``value``), ``uniform`` (``lo``..``hi``, drawn per
    report), ``per_report_list`` (explicit ``values``, one per report).
    """

    kind: str
    value: float = 0.0
    lo: float = 0.0
    hi: float = 0.0
    values: tuple[float, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in ("constant", "uniform", "per_report_list"):
            raise InvalidInputError(f"unknown ul model kind {self.kind!r}")
        if self.kind == "uniform" and self.lo > self.hi:
            raise InvalidInputError("uniform ul model needs lo <= hi")

    def support(self) -> tuple[float, float]:
        if self.kind == "constant":
            return (self.value, self.value)
        if self.kind == "uniform":
            return (self.lo, self.hi)
        if not self.values:
            return (0.0, 0.0)
        return (min(self.values), max(self.values))

    def draw(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.kind == "constant":
            return np.full(n, self.value)
        if self.kind == "uniform":
            return rng.uniform(self.lo, self.hi, n)
        if len(self.values) < n:
            raise InvalidInputError(
                f"per_report_list has {len(self.values)} values, need {n}"
            )
        return np.array(self.values[:n])


@dataclass(frozen=True)
class SyntheticScenario:
    """Everything needed to reproduce one synthetic aircraft.

    ``position_noise_m`` overrides the NACp-implied per-axis sigma; 0
    disables position noise entirely.  ``desync_offset`` is the alternating
    TOA jitter amplitude in seconds.
    """

    profile: TrajectoryProfile
    ul_model: UlModel
    name: str = "scenario"
    icao: str = "A00001"
    nacp: int = 9
    utc_coupled: bool = False
    desync_offset: float = 0.0
    link_version: int = 2
    seed: int = 0
    position_noise_m: float | None = None
    velocity_noise_mps: float = 0.0

    def __post_init__(self) -> None:
        if not 0 <= self.nacp <= 11:
            raise InvalidInputError(f"nacp {self.nacp} outside 0..11")
        if self.position_noise_m is not None and self.position_noise_m < 0:
            raise InvalidInputError("position_noise_m must be >= 0")
        if self.velocity_noise_mps < 0:
            raise InvalidInputError("velocity_noise_mps must be >= 0")

    def position_sigma(self, table: EpuTable | None = None) -> float:
        """Per-axis position noise sigma in meters."""
        if self.position_noise_m is not None:
            return self.position_noise_m
        table = table if table is not None else EpuTable.default()
        epu = table.lookup(self.nacp)
        if not math.isfinite(epu):
            raise InvalidInputError(
                f"nacp {self.nacp} has no EPU bound; set position_noise_m explicitly"
            )
        return epu / EPU_TO_SIGMA


@dataclass(frozen=True)
class GroundTruthRecord:
    """Injected latency and exact kinematics behind one report.

    ``toa`` is the stamped TOA (matches the report), ``t_emit`` the exact
    emission time before stamping, and (``true_x``, ``true_y``) the truth
    position at ``t_emit`` -- where a zero-latency report would have been.
    """

    toa: float
    t_emit: float
    t_star: float
    ul: float
    true_x: float
    true_y: float


def _stamp_toa(t_emit: np.ndarray, utc_coupled: bool) -> np.ndarray:
    if utc_coupled:
        return np.round(t_emit / UTC_EPOCH) * UTC_EPOCH
    return np.round(t_emit / MESSAGE_TICK) * MESSAGE_TICK


def _emission_grid(profile: TrajectoryProfile, ul_lo: float, ul_hi: float,
                   desync: float) -> np.ndarray:
    """Report emission times such that every position sampling time stays
    inside the trajectory domain.  The leading margin is snapped up to the
    1/128 s grid so integer-fraction report rates keep exact TOAs."""
    lead = max(ul_hi, 0.0) + abs(desync)
    tail = max(-ul_lo, 0.0) + abs(desync)
    lead = math.ceil(lead / MESSAGE_TICK) * MESSAGE_TICK
    span = profile.total_duration - lead - tail
    if span < 0.0:
        return np.array([])
    n = int(math.floor(span * profile.report_rate_hz)) + 1
    return profile.t_start + lead + np.arange(n) / profile.report_rate_hz


def generate_reports(
    scenario: SyntheticScenario, *, table: EpuTable | None = None
) -> tuple[list[AdsbReport], list[GroundTruthRecord]]:
    """Reports plus the ground truth behind each, in emission order."""
    profile = scenario.profile
    ul_lo, ul_hi = scenario.ul_model.support()
    t_emit = _emission_grid(profile, ul_lo, ul_hi, scenario.desync_offset)
    n = t_emit.shape[0]
    if n == 0:
        return [], []

    rng = np.random.default_rng(scenario.seed)
    uls = scenario.ul_model.draw(rng, n)
    sigma = scenario.position_sigma(table)
    pos_noise = rng.normal(0.0, 1.0, (n, 2)) * sigma
    vel_noise = (
        rng.normal(0.0, scenario.velocity_noise_mps, (n, 2))
        if scenario.velocity_noise_mps > 0.0
        else np.zeros((n, 2))
    )

    t_star = t_emit - uls
    jitter = np.where(np.arange(n) % 2 == 0, scenario.desync_offset,
                      -scenario.desync_offset)
    t_sample = t_star + jitter
    toas = _stamp_toa(t_emit, scenario.utc_coupled)

    reports: list[AdsbReport] = []
    truth: list[GroundTruthRecord] = []
    for k in range(n):
        px, py = truth_position(profile, t_sample[k])
        vx, vy = truth_velocity(profile, t_sample[k])
        reports.append(
            AdsbReport(
                icao=scenario.icao,
                toa=float(toas[k]),
                x=float(px + pos_noise[k, 0]),
                y=float(py + pos_noise[k, 1]),
                vx=float(vx + vel_noise[k, 0]),
                vy=float(vy + vel_noise[k, 1]),
                nacp=scenario.nacp,
                utc_coupled=scenario.utc_coupled,
                link_version=scenario.link_version,
                source_tag=f"simgen:{scenario.name}",
            )
        )
        tx, ty = truth_position(profile, t_emit[k])
        truth.append(
            GroundTruthRecord(
                toa=float(toas[k]),
                t_emit=float(t_emit[k]),
                t_star=float(t_star[k]),
                ul=float(uls[k]),
                true_x=float(tx),
                true_y=float(ty),
            )
        )
    return reports, truth


def generate_track_points(
    scenario: SyntheticScenario,
    *,
    noise_sigma_m: float = 20.0,
    rate_hz: float = 1.0,
) -> list[TrackPoint]:
    """Surveillance-tracker samples of the same truth: noisy positions on a
    uniform grid over the whole trajectory, exact velocities."""
    if noise_sigma_m < 0 or rate_hz <= 0:
        raise InvalidInputError("tracker noise must be >= 0 and rate positive")
    profile = scenario.profile
    n = int(math.floor(profile.total_duration * rate_hz)) + 1
    ts = profile.t_start + np.arange(n) / rate_hz
    # independent stream so report and tracker noise never interleave
    rng = np.random.default_rng([scenario.seed, 1])
    noise = rng.normal(0.0, 1.0, (n, 2)) * noise_sigma_m
    points = []
    for k in range(n):
        px, py = truth_position(profile, ts[k])
        vx, vy = truth_velocity(profile, ts[k])
        points.append(
            TrackPoint(
                t=float(ts[k]),
                x=float(px + noise[k, 0]),
                y=float(py + noise[k, 1]),
                vx=float(vx),
                vy=float(vy),
            )
        )
    return points


def scenario_to_dict(scenario: SyntheticScenario) -> dict:
    p = scenario.profile
    profile: dict = {
        "kind": p.kind,
        "x0_m": p.x0,
        "y0_m": p.y0,
        "speed_mps": p.speed,
        "heading_rad": p.heading,
        "report_rate_hz": p.report_rate_hz,
        "t_start_s": p.t_start,
    }
    if p.kind == "piecewise":
        profile["segments"] = [
            {"duration_s": s.duration, "turn_rate_radps": s.turn_rate}
            for s in p.segments
        ]
    else:
        profile["duration_s"] = p.duration
        if p.kind == "coordinated_turn":
            profile["turn_rate_radps"] = p.turn_rate

    u = scenario.ul_model
    ul: dict = {"kind": u.kind}
    if u.kind == "constant":
        ul["value_s"] = u.value
    elif u.kind == "uniform":
        ul["lo_s"] = u.lo
        ul["hi_s"] = u.hi
    else:
        ul["values_s"] = list(u.values)

    return {
        "name": scenario.name,
        "icao": scenario.icao,
        "seed": scenario.seed,
        "nacp": scenario.nacp,
        "utc_coupled": scenario.utc_coupled,
        "desync_offset_s": scenario.desync_offset,
        "link_version": scenario.link_version,
        "position_noise_m": scenario.position_noise_m,
        "velocity_noise_mps": scenario.velocity_noise_mps,
        "profile": profile,
        "ul_model": ul,
    }


def scenario_from_dict(doc: dict) -> SyntheticScenario:
    try:
        pd = dict(doc["profile"])
        ud = dict(doc["ul_model"])
    except (KeyError, TypeError) as exc:
        raise InvalidInputError(f"scenario document missing section: {exc}")

    kind = pd.get("kind", "straight")
    segments = tuple(
        TrajectorySegment(seg["duration_s"], seg.get("turn_rate_radps", 0.0))
        for seg in pd.get("segments", [])
    )
    profile = TrajectoryProfile(
        kind=kind,
        x0=float(pd.get("x0_m", 0.0)),
        y0=float(pd.get("y0_m", 0.0)),
        speed=float(pd.get("speed_mps", 100.0)),
        heading=float(pd.get("heading_rad", 0.0)),
        duration=float(pd.get("duration_s", 0.0)),
        turn_rate=float(pd.get("turn_rate_radps", 0.0)),
        segments=segments,
        report_rate_hz=float(pd.get("report_rate_hz", 2.0)),
        t_start=float(pd.get("t_start_s", 0.0)),
    )
    ul_model = UlModel(
        kind=ud.get("kind", "constant"),
        value=float(ud.get("value_s", 0.0)),
        lo=float(ud.get("lo_s", 0.0)),
        hi=float(ud.get("hi_s", 0.0)),
        values=tuple(float(v) for v in ud.get("values_s", [])),
    )
    noise = doc.get("position_noise_m")
    return SyntheticScenario(
        profile=profile,
        ul_model=ul_model,
        name=str(doc.get("name", "scenario")),
        icao=str(doc.get("icao", "A00001")),
        nacp=int(doc.get("nacp", 9)),
        utc_coupled=bool(doc.get("utc_coupled", False)),
        desync_offset=float(doc.get("desync_offset_s", 0.0)),
        link_version=int(doc.get("link_version", 2)),
        seed=int(doc.get("seed", 0)),
        position_noise_m=None if noise is None else float(noise),
        velocity_noise_mps=float(doc.get("velocity_noise_mps", 0.0)),
    )
