"""End-to-end validation battery.

Each criterion function builds its own synthetic evidence (fixed seeds, so
the battery is deterministic), runs the production code path, and reports
one pass/fail row.  The shift-estimator rows are checked against an
independent evaluation route (scipy PPoly) rather than the package's own
kernels, so a kernel bug cannot vouch for itself.
"""

from __future__ import annotations

import filecmp
import math
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from scipy.interpolate import PPoly

from . import kernels
from .anomaly import (
    AnomalyConfig,
    KIND_EPOCH,
    KIND_LINK,
    KIND_SPEED,
    run_anomaly_suite,
)
from .ingest import group_reports, segment_tracks
from .latency import atpe_single, atpe_track, epu_constrained_latency, mtpes
from .model import AdsbReport, UlClass, classify_ul
from .simgen import (
    SyntheticScenario,
    TrajectoryProfile,
    UlModel,
    generate_reports,
    generate_track_points,
)
from .spline import fit_pseudo_truth, fit_smoothing_spline, second_derivative_jumps

RECOVERY_SEED = 33
RECOVERY_ULS = (-0.200, -0.050, 0.0, 0.100, 0.400)

MEAN_TOL_S = 0.020
MTPES_TOL_S = 0.010
AGREE_TOL_S = 0.010
SCENARIO_TIME_LIMIT_S = 5.0
TOTAL_TIME_LIMIT_S = 120.0


@dataclass(frozen=True)
class CriterionResult:
    cid: int
    name: str
    passed: bool
    expected: str
    measured: str
    seconds: float

    def to_dict(self) -> dict:
        return {
            "criterion": self.cid,
            "name": self.name,
            "passed": self.passed,
            "expected": self.expected,
            "measured": self.measured,
            "seconds": round(self.seconds, 3),
        }


def _warmup_kernels() -> None:
    """Trigger any lazy compilation so scenario timings measure the math."""
    knots = np.array([0.0, 1.0, 2.0, 3.0])
    coefs = np.zeros((4, 3))
    ts = np.array([0.5, 1.5])
    kernels.ppoly_eval(knots, coefs, ts, 0)
    kernels.shift_scan(
        knots, coefs, knots, coefs,
        ts, np.zeros(2), np.zeros(2), np.full(2, np.inf), np.array([0.0]),
    )


def _recovery_scenario(ul: float, *, seed: int = RECOVERY_SEED) -> SyntheticScenario:
    profile = TrajectoryProfile(
        kind="straight",
        x0=0.0, y0=0.0, speed=100.0, heading=0.35,
        duration=240.0, report_rate_hz=2.0, t_start=1000.0,
    )
    return SyntheticScenario(
        profile=profile,
        ul_model=UlModel("constant", value=ul),
        name=f"recovery_{int(round(ul * 1000))}ms",
        icao="AC0001",
        nacp=9,
        seed=seed,
    )


@dataclass
class RecoveryRun:
    ul: float
    reports: list
    track: object
    ptt: object
    mean_ul: float
    mtpes_ul: float
    runtime: float


def _run_recovery(ul: float) -> RecoveryRun:
    scn = _recovery_scenario(ul)
    start = time.perf_counter()
    reports, _ = generate_reports(scn)
    points = generate_track_points(scn, noise_sigma_m=20.0, rate_hz=1.0)
    tracks = segment_tracks(scn.icao, points)
    track = tracks[0]
    ptt = fit_pseudo_truth(track, reports)
    _, summary = atpe_track(reports, ptt)
    mt = mtpes(reports, ptt)
    runtime = time.perf_counter() - start
    return RecoveryRun(
        ul=ul, reports=reports, track=track, ptt=ptt,
        mean_ul=summary.mean_ul, mtpes_ul=mt.ul, runtime=runtime,
    )


class Battery:
    """The five fixed-latency recovery scenarios, run once and shared."""

    def __init__(self) -> None:
        self.runs = [_run_recovery(ul) for ul in RECOVERY_ULS]


def criterion_1(battery: Battery) -> CriterionResult:
    t0 = time.perf_counter()
    mean_errs = [abs(r.mean_ul - r.ul) for r in battery.runs]
    mtpes_errs = [abs(r.mtpes_ul - r.ul) for r in battery.runs]
    runtimes = [r.runtime for r in battery.runs]
    passed = (
        max(mean_errs) <= MEAN_TOL_S
        and max(mtpes_errs) <= MTPES_TOL_S
        and max(runtimes) < SCENARIO_TIME_LIMIT_S
    )
    return CriterionResult(
        1, "latency recovery on straight tracks", passed,
        expected=(
            f"|mean err| <= {MEAN_TOL_S * 1e3:.0f} ms, "
            f"|shift err| <= {MTPES_TOL_S * 1e3:.0f} ms, "
            f"runtime < {SCENARIO_TIME_LIMIT_S:.0f} s per scenario"
        ),
        measured=(
            f"max |mean err| {max(mean_errs) * 1e3:.2f} ms, "
            f"max |shift err| {max(mtpes_errs) * 1e3:.2f} ms, "
            f"max runtime {max(runtimes):.2f} s"
        ),
        seconds=time.perf_counter() - t0 + sum(runtimes),
    )


def criterion_2(battery: Battery) -> CriterionResult:
    t0 = time.perf_counter()
    gaps = [abs(r.mtpes_ul - r.mean_ul) for r in battery.runs]
    passed = max(gaps) <= AGREE_TOL_S
    return CriterionResult(
        2, "estimator agreement", passed,
        expected=f"|shift - mean| <= {AGREE_TOL_S * 1e3:.0f} ms on every scenario",
        measured=f"max gap {max(gaps) * 1e3:.2f} ms",
        seconds=time.perf_counter() - t0,
    )


def criterion_3() -> CriterionResult:
    t0 = time.perf_counter()
    cases = [
        (-0.200, UlClass.WITHIN),
        (0.400, UlClass.WITHIN),
        (-0.201, UlClass.OVER_COMPENSATED_EXCESS),
        (0.401, UlClass.UNDER_COMPENSATED_EXCESS),
    ]
    outcomes = []
    ok = True
    for ul, expected in cases:
        scn = replace(
            _recovery_scenario(ul), name=f"budget_{int(round(ul * 1e3))}ms"
        )
        _, truth = generate_reports(scn)
        classes = {classify_ul(rec.ul) for rec in truth}
        outcomes.append(f"{ul * 1e3:+.0f}ms->{'/'.join(c.value for c in classes)}")
        ok = ok and classes == {expected}
    return CriterionResult(
        3, "budget boundary classification", ok,
        expected="-200/+400 ms within; -201/+401 ms outside",
        measured="; ".join(outcomes),
        seconds=time.perf_counter() - t0,
    )


def criterion_4(battery: Battery) -> CriterionResult:
    t0 = time.perf_counter()
    run = next(r for r in battery.runs if r.ul == 0.100)
    rng = np.random.default_rng(404)
    worst = 0.0
    for report in run.reports:
        base = atpe_single(report, run.ptt)
        if base.excluded:
            continue
        speed = report.speed
        c = rng.uniform(-100.0, 100.0)
        px = -report.vy / speed
        py = report.vx / speed
        moved = replace(report, x=report.x + c * px, y=report.y + c * py)
        shifted = atpe_single(moved, run.ptt)
        worst = max(worst, abs(shifted.ul - base.ul))
    passed = worst < 1e-9
    return CriterionResult(
        4, "cross-track invariance", passed,
        expected="|delta ul| < 1e-9 s under cross-track shifts up to 100 m",
        measured=f"max |delta ul| {worst:.3e} s",
        seconds=time.perf_counter() - t0,
    )


def criterion_5(battery: Battery) -> CriterionResult:
    t0 = time.perf_counter()
    problems: list[str] = []

    # interpolation: zero budget reproduces the samples
    rng = np.random.default_rng(55)
    t = np.sort(rng.uniform(0.0, 60.0, 40))
    t += np.arange(40) * 1e-3  # enforce separation
    y = rng.normal(0.0, 50.0, 40)
    g = fit_smoothing_spline(t, y, 0.0)
    dev = np.abs(g.evaluate(t) - y).max()
    scale = max(1.0, float(np.abs(y).max()))
    if dev > 1e-9 * scale:
        problems.append(f"interpolation dev {dev:.2e}")

    # residual budgets and C2 continuity on the battery's smoothed fits
    worst_resid_ratio = 0.0
    worst_jump = 0.0
    for run in battery.runs:
        tt = np.array([p.t for p in run.track.points])
        for axis, data in (
            (run.ptt.x_spline, np.array([p.x for p in run.track.points])),
            (run.ptt.y_spline, np.array([p.y for p in run.track.points])),
        ):
            resid = float(np.sum((data - axis.evaluate(tt)) ** 2))
            if run.ptt.s_final > 0:
                worst_resid_ratio = max(worst_resid_ratio, resid / run.ptt.s_final)
            jumps = np.abs(second_derivative_jumps(axis))
            acc_scale = max(1.0, float(np.abs(axis.evaluate(tt, 2)).max()))
            worst_jump = max(worst_jump, float(jumps.max()) / acc_scale)
    if worst_resid_ratio > 1.0 + 1e-6:
        problems.append(f"residual over budget x{worst_resid_ratio:.9f}")
    if worst_jump > 1e-6:
        problems.append(f"d2 jump {worst_jump:.2e}")

    # straight-line data comes back exactly, for any budget
    t_lin = np.sort(rng.uniform(0.0, 120.0, 30))
    t_lin += np.arange(30) * 1e-3
    y_lin = 3.0 * t_lin + 1.0
    lin_scale = max(1.0, float(np.abs(y_lin).max()))
    dense = np.linspace(t_lin[0], t_lin[-1], 500)
    for s in (0.0, 1.0, 1e3, 1e6):
        gl = fit_smoothing_spline(t_lin, y_lin, s)
        lin_dev = np.abs(gl.evaluate(dense) - (3.0 * dense + 1.0)).max()
        if lin_dev > 1e-9 * lin_scale:
            problems.append(f"line dev {lin_dev:.2e} at s={s:g}")

    passed = not problems
    return CriterionResult(
        5, "spline contract", passed,
        expected="interpolation, residual budget, C2, line reproduction",
        measured="all hold" if passed else "; ".join(problems),
        seconds=time.perf_counter() - t0,
    )


def _independent_grid_argmin(ptt, reports, grid: np.ndarray) -> float:
    """Exhaustive scan of the shift objective via scipy PPoly evaluation."""
    px = np.array([r.x for r in reports])
    py = np.array([r.y for r in reports])
    toas = np.array([r.toa for r in reports])
    fx = PPoly(ptt.x_spline.coefs[::-1], ptt.x_spline.knots)
    fy = PPoly(ptt.y_spline.coefs[::-1], ptt.y_spline.knots)
    ts = toas[None, :] - grid[:, None]
    ex = fx(ts) - px[None, :]
    ey = fy(ts) - py[None, :]
    sse = (ex * ex + ey * ey).sum(axis=1)
    return float(grid[int(np.argmin(sse))])


def criterion_6() -> CriterionResult:
    t0 = time.perf_counter()
    rng = np.random.default_rng(606)
    worst = 0.0
    for i in range(20):
        speed = float(rng.uniform(60.0, 240.0))
        heading = float(rng.uniform(0.0, 2.0 * math.pi))
        duration = float(rng.uniform(120.0, 240.0))
        ul = float(rng.uniform(-0.5, 0.5))
        profile = TrajectoryProfile(
            kind="straight",
            speed=speed, heading=heading, duration=duration,
            report_rate_hz=2.0, t_start=500.0,
        )
        scn = SyntheticScenario(
            profile=profile,
            ul_model=UlModel("constant", value=ul),
            name=f"rand{i}", icao="AD0001",
            nacp=int(rng.integers(8, 10)),
            seed=int(rng.integers(0, 2**31)),
        )
        reports, _ = generate_reports(scn)
        points = generate_track_points(
            scn, noise_sigma_m=float(rng.uniform(5.0, 25.0)), rate_hz=1.0
        )
        track = segment_tracks(scn.icao, points)[0]
        ptt = fit_pseudo_truth(track, reports)
        mt = mtpes(reports, ptt, bracket=(-1.0, 1.0), tol=1e-3)

        t_lo, t_hi = ptt.domain
        usable = [
            r for r in reports if r.toa - 1.0 >= t_lo and r.toa + 1.0 <= t_hi
        ]
        grid = np.linspace(-1.0, 1.0, 2001)
        oracle = _independent_grid_argmin(ptt, usable, grid)
        worst = max(worst, abs(mt.ul - oracle))
    passed = worst <= 1e-3 + 1e-9
    return CriterionResult(
        6, "solver equals exhaustive scan", passed,
        expected="|refined - 1 ms grid argmin| <= 1 ms on 20 random scenarios",
        measured=f"max gap {worst * 1e3:.3f} ms",
        seconds=time.perf_counter() - t0,
    )


def criterion_7(battery: Battery) -> CriterionResult:
    t0 = time.perf_counter()
    problems: list[str] = []

    # manufactured shift at a workable accuracy category must be recovered
    run = next(r for r in battery.runs if r.ul == 0.0)
    ptt = run.ptt
    t_lo, t_hi = ptt.domain
    shift = 0.120
    toas = np.arange(t_lo + 1.5, t_hi - 1.5, 0.5)
    fake = []
    for toa in toas:
        x = ptt.x_spline.evaluate(toa - shift)
        y = ptt.y_spline.evaluate(toa - shift)
        vx = ptt.x_spline.evaluate(toa, 1)
        vy = ptt.y_spline.evaluate(toa, 1)
        fake.append(
            AdsbReport(
                icao="AE0001", toa=float(toa), x=float(x), y=float(y),
                vx=float(vx), vy=float(vy), nacp=9,
                utc_coupled=False, link_version=2, source_tag="manufactured",
            )
        )
    res = epu_constrained_latency(fake, ptt, tol=1e-3)
    if not res.feasible:
        problems.append("clean shift reported infeasible")
    elif abs(res.ul - shift) > 1e-3 + 1e-9:
        problems.append(f"clean shift off by {abs(res.ul - shift) * 1e3:.2f} ms")

    # noise far beyond a tight accuracy claim must be infeasible
    scn = SyntheticScenario(
        profile=TrajectoryProfile(
            kind="straight", speed=100.0, heading=0.35,
            duration=120.0, report_rate_hz=2.0, t_start=1000.0,
        ),
        ul_model=UlModel("constant", value=0.0),
        name="overclaimed", icao="AE0002",
        nacp=11, position_noise_m=30.0, seed=RECOVERY_SEED + 7,
    )
    reports, _ = generate_reports(scn)
    points = generate_track_points(scn, noise_sigma_m=5.0, rate_hz=1.0)
    track = segment_tracks(scn.icao, points)[0]
    noisy_ptt = fit_pseudo_truth(track, reports)
    res2 = epu_constrained_latency(reports, noisy_ptt, tol=1e-3)
    if res2.feasible:
        problems.append("overclaimed accuracy reported feasible")

    passed = not problems
    measured = "all hold" if passed else "; ".join(problems)
    if passed and res.feasible:
        measured = f"clean shift {res.ul * 1e3:.2f} ms; overclaimed infeasible"
    return CriterionResult(
        7, "accuracy-constrained variant", passed,
        expected="clean 120 ms shift feasible and recovered; 30 m noise at "
                 "NACp 11 infeasible",
        measured=measured,
        seconds=time.perf_counter() - t0,
    )


def _fleet_scenarios() -> list[SyntheticScenario]:
    base = dict(speed=100.0, duration=60.0, report_rate_hz=2.0)
    out = []
    for k, t_start in enumerate((1000.0, 2000.2, 3000.4)):
        out.append(
            SyntheticScenario(
                profile=TrajectoryProfile(
                    kind="straight", heading=0.3 + 0.4 * k, t_start=t_start, **base
                ),
                ul_model=UlModel("constant", value=0.0),
                name=f"utc{k}", icao=f"B0000{k}",
                nacp=10, utc_coupled=True,
                link_version=1 if k == 2 else 2,
                seed=800 + k,
            )
        )
    for k, frac in enumerate((13.0 / 128.0, 29.0 / 128.0, 51.0 / 128.0)):
        out.append(
            SyntheticScenario(
                profile=TrajectoryProfile(
                    kind="straight", heading=1.0 + 0.4 * k,
                    t_start=4000.0 + 1000.0 * k + frac, **base
                ),
                ul_model=UlModel("constant", value=0.0),
                name=f"free{k}", icao=f"C0000{k}",
                nacp=9, utc_coupled=False, seed=900 + k,
            )
        )
    out.append(
        SyntheticScenario(
            profile=TrajectoryProfile(
                kind="straight", heading=2.2, speed=100.0,
                duration=30.0, report_rate_hz=8.0, t_start=8000.0,
            ),
            ul_model=UlModel("constant", value=0.0),
            name="desync", icao="D00000",
            nacp=10, utc_coupled=False,
            desync_offset=0.050, position_noise_m=2.0, seed=777,
        )
    )
    return out


def criterion_8() -> CriterionResult:
    t0 = time.perf_counter()
    problems: list[str] = []
    all_reports = []
    for scn in _fleet_scenarios():
        reports, _ = generate_reports(scn)
        if len(reports) < 50:
            problems.append(f"{scn.name}: only {len(reports)} reports")
        all_reports.extend(reports)
    by_icao = group_reports(all_reports)
    findings = run_anomaly_suite(
        by_icao, AnomalyConfig(include_non_utc=True)
    )
    by_key = {(f.icao, f.kind): f for f in findings}

    utc_icaos = {"B00000", "B00001", "B00002"}
    free_icaos = {"C00000", "C00001", "C00002", "D00000"}
    epoch_hits_utc = sum(
        1 for i in utc_icaos if by_key[(i, KIND_EPOCH)].triggered
    )
    epoch_hits_free = sum(
        1 for i in free_icaos if by_key[(i, KIND_EPOCH)].triggered
    )
    if epoch_hits_utc != len(utc_icaos):
        problems.append(f"epoch: {epoch_hits_utc}/{len(utc_icaos)} UTC flagged")
    if epoch_hits_free != 0:
        problems.append(f"epoch: {epoch_hits_free} free-running falsely flagged")

    link_hits = {i for i in by_key if by_key[i].triggered and i[1] == KIND_LINK}
    if link_hits != {("B00002", KIND_LINK)}:
        problems.append(f"link findings {sorted(link_hits)}")

    if not by_key[("D00000", KIND_SPEED)].triggered:
        problems.append("desync aircraft not flagged for speed mismatch")
    clean_speed_hits = [
        i for i in (utc_icaos | free_icaos) - {"D00000"}
        if by_key[(i, KIND_SPEED)].triggered
    ]
    if clean_speed_hits:
        problems.append(f"speed falsely flagged: {sorted(clean_speed_hits)}")

    passed = not problems
    return CriterionResult(
        8, "anomaly detectors", passed,
        expected="epoch 3/3 UTC and 0/4 free-running; link v1 flagged; "
                 "50 ms desync flagged for speed",
        measured="all hold" if passed else "; ".join(problems),
        seconds=time.perf_counter() - t0,
    )


def criterion_9(workdir: Path) -> CriterionResult:
    import json

    from .cli import main as cli_main

    t0 = time.perf_counter()
    workdir.mkdir(parents=True, exist_ok=True)
    scenario_doc = [
        {
            "name": "detA", "icao": "AB1234", "seed": 42,
            "nacp": 9, "utc_coupled": True,
            "profile": {
                "kind": "straight", "speed_mps": 120.0, "heading_rad": 0.8,
                "duration_s": 60.0, "report_rate_hz": 2.0, "t_start_s": 100.0,
            },
            "ul_model": {"kind": "uniform", "lo_s": -0.05, "hi_s": 0.25},
        },
        {
            "name": "detB", "icao": "AB1235", "seed": 43,
            "nacp": 8, "utc_coupled": False, "desync_offset_s": 0.02,
            "profile": {
                "kind": "coordinated_turn", "speed_mps": 90.0,
                "turn_rate_radps": 0.015, "duration_s": 80.0,
                "report_rate_hz": 2.0, "t_start_s": 300.0,
            },
            "ul_model": {"kind": "constant", "value_s": 0.1},
        },
    ]
    scenario_path = workdir / "scenario.json"
    scenario_path.write_text(json.dumps(scenario_doc), encoding="utf-8")
    out_a = workdir / "run_a"
    out_b = workdir / "run_b"
    rc_a = cli_main(["simulate", "--scenario", str(scenario_path), "--out", str(out_a)])
    rc_b = cli_main(["simulate", "--scenario", str(scenario_path), "--out", str(out_b)])
    names = ["reports.jsonl", "tracks.jsonl", "truth.jsonl", "scenario_echo.json"]
    identical = rc_a == 0 and rc_b == 0 and all(
        filecmp.cmp(out_a / n, out_b / n, shallow=False) for n in names
    )
    return CriterionResult(
        9, "generator determinism", identical,
        expected="two runs with one seed produce byte-identical files",
        measured="byte-identical" if identical else "outputs differ",
        seconds=time.perf_counter() - t0,
    )


def run_all(workdir: Path) -> list[CriterionResult]:
    """Criteria 1 through 9, in order, sharing the recovery battery."""
    _warmup_kernels()
    battery = Battery()
    return [
        criterion_1(battery),
        criterion_2(battery),
        criterion_3(),
        criterion_4(battery),
        criterion_5(battery),
        criterion_6(),
        criterion_7(battery),
        criterion_8(),
        criterion_9(workdir),
    ]
