"""Command line interface.

Subcommands: ``simulate`` (synthetic fleets), ``ingest`` (parse, segment,
filter), ``latency`` (full estimator pipeline), ``anomaly`` (timing and
consistency checks), ``validate`` (acceptance battery).

Exit codes: 0 success, 1 bad input, 2 internal failure, 3 validation
battery failure.  Options resolve as defaults < ``--config`` file <
explicit flags.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
import traceback
from pathlib import Path

from .anomaly import KIND_EPOCH, KIND_SPEED, AnomalyConfig, run_anomaly_suite
from .errors import AdsbUlError, CorruptInputError, InvalidInputError
from .ingest import (
    FilterCriteria,
    group_reports,
    parse_reports,
    parse_track_points,
)
from .model import AdsbReport, EpuTable, TrackPoint, UlBudget
from .pipeline import AnalysisConfig, analyze_dataset
from .simgen import (
    RNG_ALGORITHM,
    generate_reports,
    generate_track_points,
    scenario_from_dict,
    scenario_to_dict,
)
from .validate import TOTAL_TIME_LIMIT_S, CriterionResult, run_all

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INTERNAL = 2
EXIT_VALIDATION = 3


# ---------------------------------------------------------------- helpers

def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise InvalidInputError("config file must hold a JSON object")
    return doc


def _pick(flag, cfg: dict, key: str, default):
    """Explicit flag wins, then the config file, then the default."""
    if flag is not None:
        return flag
    return cfg.get(key, default)


def _epu_table(args, cfg: dict) -> EpuTable:
    path = _pick(getattr(args, "epu_table", None), cfg, "epu_table", None)
    return EpuTable.from_file(path) if path else EpuTable.default()


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _write_jsonl(path: Path, rows) -> None:
    with path.open("w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _report_row(r: AdsbReport) -> dict:
    row = {
        "icao": r.icao, "toa_s": r.toa, "x_m": r.x, "y_m": r.y,
        "vx_mps": r.vx, "vy_mps": r.vy, "nacp": r.nacp,
        "utc_coupled": r.utc_coupled, "link_version": r.link_version,
    }
    if r.link is not None:
        row["link"] = r.link
    return row


def _track_row(icao: str, p: TrackPoint) -> dict:
    return {"icao": icao, "t_s": p.t, "x_m": p.x, "y_m": p.y,
            "vx_mps": p.vx, "vy_mps": p.vy}


def _criteria(args, cfg: dict) -> FilterCriteria:
    allow_utc = getattr(args, "allow_utc", False)
    if allow_utc:
        require_non_utc = False
    else:
        require_non_utc = bool(cfg.get("require_non_utc_coupled", True))
    return FilterCriteria(
        require_1090es=bool(cfg.get("require_1090es", True)),
        nacp_min=int(_pick(args.nacp_min, cfg, "nacp_min", 8)),
        nacp_max=int(_pick(args.nacp_max, cfg, "nacp_max", 11)),
        require_non_utc_coupled=require_non_utc,
        min_tracks_per_icao=int(
            _pick(args.min_tracks, cfg, "min_tracks_per_icao", 2)
        ),
    )


def _analysis_config(args, cfg: dict) -> AnalysisConfig:
    bracket = cfg.get("bracket_s", [-1.0, 1.0])
    return AnalysisConfig(
        gap_threshold=float(_pick(args.gap_threshold, cfg, "gap_threshold_s", 60.0)),
        accel_margin=float(cfg.get("accel_margin_mps2", 0.5)),
        accel_grid_hz=float(cfg.get("accel_grid_hz", 10.0)),
        bracket=(float(bracket[0]), float(bracket[1])),
        tol=float(_pick(args.tol, cfg, "tol_s", 1e-3)),
        coarse_step=float(cfg.get("coarse_step_s", 0.010)),
        bin_width=float(_pick(args.bin_width, cfg, "bin_width_s", 0.010)),
        speed_floor=float(_pick(args.speed_floor, cfg, "speed_floor_mps", 30.0)),
        epu_min_fraction=float(cfg.get("epu_min_fraction", 0.95)),
    )


def _parse_inputs(args, cfg: dict):
    max_bad = float(
        _pick(getattr(args, "max_malformed", None), cfg,
              "max_malformed_fraction", 0.1)
    )
    parsed_r = parse_reports(
        args.reports, max_malformed_fraction=max_bad,
        source_name=Path(args.reports).name,
    )
    parsed_t = parse_track_points(args.tracks, max_malformed_fraction=max_bad)
    return parsed_r, parsed_t


# ------------------------------------------------------------ subcommands

def cmd_simulate(args) -> int:
    cfg = _load_config(args.config)
    table = _epu_table(args, cfg)
    with open(args.scenario, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    entries = doc if isinstance(doc, list) else [doc]

    report_rows: list[dict] = []
    track_rows: list[dict] = []
    truth_rows: list[dict] = []
    echo: list[dict] = []
    for entry in entries:
        if not isinstance(entry, dict):
            raise InvalidInputError("each scenario must be a JSON object")
        entry = dict(entry)
        # tracker knobs ride along in the scenario file but belong to the
        # generator call, not the scenario itself
        noise = float(entry.pop("track_noise_m", cfg.get("track_noise_m", 20.0)))
        rate = float(entry.pop("track_rate_hz", cfg.get("track_rate_hz", 1.0)))
        scenario = scenario_from_dict(entry)
        reports, truth = generate_reports(scenario, table=table)
        points = generate_track_points(scenario, noise_sigma_m=noise, rate_hz=rate)
        report_rows.extend(_report_row(r) for r in reports)
        track_rows.extend(_track_row(scenario.icao, p) for p in points)
        truth_rows.extend(
            {
                "toa_s": rec.toa, "ul_s": rec.ul, "t_star_s": rec.t_star,
                "true_x_m": rec.true_x, "true_y_m": rec.true_y,
            }
            for rec in truth
        )
        echo.append(
            {
                "scenario": scenario_to_dict(scenario),
                "track_noise_m": noise,
                "track_rate_hz": rate,
                "n_reports": len(reports),
                "n_track_points": len(points),
            }
        )

    out = _out_dir(args)
    _write_jsonl(out / "reports.jsonl", report_rows)
    _write_jsonl(out / "tracks.jsonl", track_rows)
    _write_jsonl(out / "truth.jsonl", truth_rows)
    _write_json(
        out / "scenario_echo.json",
        {"rng_algorithm": RNG_ALGORITHM, "scenarios": echo},
    )
    print(
        f"simulate: {len(entries)} scenario(s), {len(report_rows)} reports, "
        f"{len(track_rows)} track points -> {out}"
    )
    return EXIT_OK


def cmd_ingest(args) -> int:
    cfg = _load_config(args.config)
    parsed_r, parsed_t = _parse_inputs(args, cfg)
    criteria = _criteria(args, cfg)
    gap = float(_pick(args.gap_threshold, cfg, "gap_threshold_s", 60.0))

    from .ingest import filter_aircraft, group_track_points, segment_tracks

    reports_by_icao = group_reports(parsed_r.reports)
    points_by_icao = group_track_points(parsed_t.points)
    tracks_by_icao = {
        icao: segment_tracks(icao, pts, gap_threshold=gap)
        for icao, pts in points_by_icao.items()
    }
    accepted, summary = filter_aircraft(reports_by_icao, tracks_by_icao, criteria)

    out = _out_dir(args)
    (out / "reports").mkdir(exist_ok=True)
    (out / "tracks").mkdir(exist_ok=True)
    for icao in sorted(accepted):
        _write_jsonl(
            out / "reports" / f"{icao}.jsonl",
            (_report_row(r) for r in reports_by_icao.get(icao, [])),
        )
        for track in tracks_by_icao.get(icao, []):
            _write_jsonl(
                out / "tracks" / f"{icao}_t{track.track_index}.jsonl",
                (_track_row(icao, p) for p in track.points),
            )
    doc = summary.to_dict()
    doc["accepted"] = sorted(accepted)
    doc["malformed_report_lines"] = len(parsed_r.malformed)
    doc["malformed_track_lines"] = len(parsed_t.malformed)
    _write_json(out / "ingest_summary.json", doc)
    print(
        f"ingest: {summary.total_reports} reports, {summary.unique_icaos} "
        f"aircraft, {len(accepted)} accepted -> {out}"
    )
    return EXIT_OK


def cmd_latency(args) -> int:
    cfg = _load_config(args.config)
    parsed_r, parsed_t = _parse_inputs(args, cfg)
    table = _epu_table(args, cfg)
    budget = UlBudget(
        min_ul=float(cfg.get("budget_min_s", -0.200)),
        max_ul=float(cfg.get("budget_max_s", 0.400)),
    )
    analysis = analyze_dataset(
        parsed_r.reports,
        parsed_t.points,
        criteria=_criteria(args, cfg),
        config=_analysis_config(args, cfg),
        table=table,
        budget=budget,
        jobs=int(_pick(args.jobs, cfg, "jobs", 1)),
    )

    out = _out_dir(args)
    est_rows = []
    hist_rows = []
    mean_rows = []
    for tr in analysis.tracks:
        for e in tr.estimates:
            est_rows.append([
                e.icao, e.track_index, repr(e.toa),
                "" if e.ul is None else repr(e.ul),
                "" if e.e_at is None else repr(e.e_at),
                "" if e.speed is None else repr(e.speed),
                str(e.excluded).lower(), e.reason or "",
            ])
        if tr.summary is None:
            continue
        s = tr.summary
        for k in range(len(s.hist_counts)):
            hist_rows.append([
                s.icao, s.track_index, repr(s.hist_edges[k]),
                repr(s.hist_edges[k + 1]), s.hist_counts[k],
            ])
        epu = s.epu
        mean_rows.append([
            s.icao, s.track_index, s.n_used, repr(s.mean_ul), repr(s.std_ul),
            "" if s.mtpes_ul is None else repr(s.mtpes_ul),
            "" if s.mtpes_residual is None else repr(s.mtpes_residual),
            "" if epu is None else str(epu.feasible).lower(),
            "" if epu is None or epu.ul is None else repr(epu.ul),
        ])
    _write_csv(
        out / "estimates.csv",
        ["icao", "track_index", "toa_s", "ul_s", "e_at_m", "speed_mps",
         "excluded", "reason"],
        est_rows,
    )
    _write_csv(
        out / "track_means.csv",
        ["icao", "track_index", "n_used", "mean_ul_s", "std_ul_s",
         "mtpes_ul_s", "mtpes_residual_m2", "epu_feasible", "epu_ul_s"],
        mean_rows,
    )
    _write_csv(
        out / "histograms.csv",
        ["icao", "track_index", "bin_lo_s", "bin_hi_s", "count"],
        hist_rows,
    )
    _write_json(
        out / "fleet.json",
        {
            "fleet": analysis.fleet,
            "ingest": analysis.ingest_summary.to_dict(),
            "skipped_tracks": [
                {"icao": t.icao, "track_index": t.track_index,
                 "reason": t.skipped_reason}
                for t in analysis.tracks if not t.ok
            ],
        },
    )
    n_ok = sum(1 for t in analysis.tracks if t.ok)
    print(
        f"latency: {len(analysis.accepted)} aircraft, {n_ok}/"
        f"{len(analysis.tracks)} tracks analyzed -> {out}"
    )
    return EXIT_OK


def cmd_anomaly(args) -> int:
    cfg = _load_config(args.config)
    max_bad = float(
        _pick(args.max_malformed, cfg, "max_malformed_fraction", 0.1)
    )
    parsed = parse_reports(
        args.reports, max_malformed_fraction=max_bad,
        source_name=Path(args.reports).name,
    )
    config = AnomalyConfig(
        epoch_tolerance=float(
            _pick(args.epoch_tolerance, cfg, "epoch_tolerance_s", 1e-3)
        ),
        epoch_min_reports=int(
            _pick(args.epoch_min_reports, cfg, "epoch_min_reports", 10)
        ),
        speed_threshold=float(
            _pick(args.speed_threshold, cfg, "speed_threshold_mps", 50.0)
        ),
        compliant_versions=tuple(cfg.get("compliant_versions", [2])),
        include_non_utc=bool(args.all_aircraft),
    )
    findings = run_anomaly_suite(group_reports(parsed.reports), config)

    out = _out_dir(args)
    _write_jsonl(out / "findings.jsonl", (f.to_dict() for f in findings))
    epoch_rows = []
    speed_rows = []
    for f in findings:
        ev = f.evidence
        if f.kind == KIND_EPOCH:
            frac = ev.get("on_epoch_fraction")
            epoch_rows.append([
                f.icao, f.n_reports,
                "" if frac is None else repr(frac),
                str(f.triggered).lower(),
            ])
        elif f.kind == KIND_SPEED:
            speed_rows.append([
                f.icao, ev.get("n_pairs", 0),
                "" if "median_offset_mps" not in ev else repr(ev["median_offset_mps"]),
                "" if "max_offset_mps" not in ev else repr(ev["max_offset_mps"]),
                str(f.triggered).lower(),
            ])
    _write_csv(
        out / "epoch_fractions.csv",
        ["icao", "n_reports", "on_epoch_fraction", "triggered"],
        epoch_rows,
    )
    _write_csv(
        out / "speed_comparison.csv",
        ["icao", "n_pairs", "median_offset_mps", "max_offset_mps", "triggered"],
        speed_rows,
    )
    n_hit = sum(1 for f in findings if f.triggered)
    print(f"anomaly: {len(findings)} findings, {n_hit} triggered -> {out}")
    return EXIT_OK


def cmd_validate(args) -> int:
    out = _out_dir(args)
    start = time.perf_counter()
    rows = run_all(out / "determinism")
    total = time.perf_counter() - start
    n_pass = sum(1 for r in rows if r.passed)
    overall = n_pass == len(rows) and total < TOTAL_TIME_LIMIT_S
    rows.append(
        CriterionResult(
            10, "complete battery", overall,
            expected=f"criteria 1-9 pass within {TOTAL_TIME_LIMIT_S:.0f} s total",
            measured=f"{n_pass}/9 passed in {total:.1f} s",
            seconds=total,
        )
    )
    for r in rows:
        flag = "PASS" if r.passed else "FAIL"
        print(f"[{r.cid:2d}] {flag}  {r.name}: {r.measured}")
    print(f"overall: {'PASS' if overall else 'FAIL'} ({total:.1f} s)")
    _write_json(
        out / "results.json",
        {
            "results": [r.to_dict() for r in rows],
            "total_seconds": round(total, 3),
            "passed": overall,
        },
    )
    return EXIT_OK if overall else EXIT_VALIDATION


# ----------------------------------------------------------------- parser

def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON file with option defaults")
    sub.add_argument("--epu-table", help="containment-radius table file")


def _add_dataset_inputs(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--reports", required=True, help="report JSONL file")
    sub.add_argument("--tracks", required=True, help="track-point JSONL file")
    sub.add_argument("--gap-threshold", type=float, default=None,
                     help="track split gap, seconds")
    sub.add_argument("--nacp-min", type=int, default=None)
    sub.add_argument("--nacp-max", type=int, default=None)
    sub.add_argument("--min-tracks", type=int, default=None,
                     help="minimum tracks per aircraft")
    sub.add_argument("--allow-utc", action="store_true",
                     help="keep UTC-coupled aircraft in the analysis set")
    sub.add_argument("--max-malformed", type=float, default=None,
                     help="tolerated malformed line fraction")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adsb-ul",
        description="Uncompensated latency estimation for ADS-B position "
                    "reports.",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    p = subs.add_parser("simulate", help="generate a synthetic fleet")
    p.add_argument("--scenario", required=True,
                   help="scenario JSON (object or array)")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = subs.add_parser("ingest", help="parse, segment, and filter a dataset")
    _add_dataset_inputs(p)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_ingest)

    p = subs.add_parser("latency", help="estimate uncompensated latency")
    _add_dataset_inputs(p)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None,
                   help="parallel track fits")
    p.add_argument("--tol", type=float, default=None,
                   help="shift solver tolerance, seconds")
    p.add_argument("--bin-width", type=float, default=None,
                   help="histogram bin width, seconds")
    p.add_argument("--speed-floor", type=float, default=None,
                   help="minimum reported speed, m/s")
    _add_common(p)
    p.set_defaults(func=cmd_latency)

    p = subs.add_parser("anomaly", help="timing and consistency checks")
    p.add_argument("--reports", required=True, help="report JSONL file")
    p.add_argument("--out", required=True)
    p.add_argument("--all-aircraft", action="store_true",
                   help="also check non-UTC-coupled aircraft")
    p.add_argument("--epoch-tolerance", type=float, default=None)
    p.add_argument("--epoch-min-reports", type=int, default=None)
    p.add_argument("--speed-threshold", type=float, default=None)
    p.add_argument("--max-malformed", type=float, default=None)
    _add_common(p)
    p.set_defaults(func=cmd_anomaly)

    p = subs.add_parser("validate", help="run the acceptance battery")
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_validate)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 0
        return EXIT_OK if code == 0 else EXIT_INPUT
    try:
        return args.func(args)
    except (InvalidInputError, CorruptInputError, FileNotFoundError,
            IsADirectoryError, PermissionError, NotADirectoryError,
            UnicodeDecodeError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except AdsbUlError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except Exception:
        traceback.print_exc()
        return EXIT_INTERNAL


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
