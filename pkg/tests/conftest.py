"""Shared fixtures: one mid-size synthetic scenario fitted once per session."""

import numpy as np
import pytest

from adsb_ul.ingest import segment_tracks
from adsb_ul.simgen import (
    SyntheticScenario,
    TrajectoryProfile,
    UlModel,
    generate_reports,
    generate_track_points,
)
from adsb_ul.spline import fit_pseudo_truth


@pytest.fixture(scope="session")
def straight_scenario():
    profile = TrajectoryProfile(
        kind="straight", x0=0.0, y0=0.0, speed=100.0, heading=0.35,
        duration=120.0, report_rate_hz=2.0, t_start=1000.0,
    )
    return SyntheticScenario(
        profile=profile,
        ul_model=UlModel("constant", value=0.100),
        name="fixture", icao="AB1000", nacp=9, seed=33,
    )


@pytest.fixture(scope="session")
def straight_data(straight_scenario):
    reports, truth = generate_reports(straight_scenario)
    points = generate_track_points(straight_scenario, noise_sigma_m=20.0, rate_hz=1.0)
    track = segment_tracks(straight_scenario.icao, points)[0]
    return reports, truth, track


@pytest.fixture(scope="session")
def straight_ptt(straight_data):
    reports, _, track = straight_data
    return fit_pseudo_truth(track, reports)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
