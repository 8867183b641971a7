import os
import shutil
import warnings

import numpy as np
import pandas as pd
import pytest

from scorekeeper.core import DataQualityError, EventKind, ParseError, RatioKind, ValidationError
from scorekeeper.features import extract_potential_assists
from scorekeeper.ingest import (
    BoxLine,
    ObservationSkipped,
    attack_directions,
    compute_team_game_ratios,
    load_dir,
    load_game,
    normalize,
    read_moments,
    team_game_ratios,
    write_bundles,
)


def _copy_fixture(src, dst):
    shutil.copytree(src, dst)
    return str(dst)


def _paths(d):
    return [os.path.join(d, f) for f in ("moments.csv", "events.csv", "box.csv", "roster.csv")]


def test_fixture_loads_with_one_made_shot(worked_play_dir):
    bundle = load_game(*_paths(worked_play_dir))
    assert bundle.game_id == "WP0001"
    assert (bundle.home, bundle.away) == ("LAC", "LAL")
    assert sum(e.kind is EventKind.SHOT_MADE for e in bundle.events) == 1
    assert all(bundle.moments.moment(i).is_complete for i in range(len(bundle.moments)))


def test_empty_events_file(worked_play_dir, tmp_path):
    d = _copy_fixture(worked_play_dir, tmp_path / "g")
    with open(os.path.join(d, "events.csv"), "w") as fh:
        fh.write("game_id,wall_time_ms,kind,team_id,player_id\n")
    with pytest.raises(ValidationError, match="no events"):
        load_dir(d)


def test_out_of_bounds_row_reports_line(worked_play_dir, tmp_path):
    d = _copy_fixture(worked_play_dir, tmp_path / "g")
    path = os.path.join(d, "moments.csv")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df.loc[6, "x_ft"] = "101"
    df.to_csv(path, index=False)
    with pytest.raises(ParseError) as exc:
        read_moments(path)
    assert exc.value.line == 8
    assert "outside court bounds" in str(exc.value)


def test_malformed_number_reports_line(worked_play_dir, tmp_path):
    d = _copy_fixture(worked_play_dir, tmp_path / "g")
    path = os.path.join(d, "moments.csv")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df.loc[3, "y_ft"] = "12.x"
    df.to_csv(path, index=False)
    with pytest.raises(ParseError) as exc:
        read_moments(path)
    assert exc.value.line == 5


def test_unsorted_timestamps(worked_play_dir, tmp_path):
    d = _copy_fixture(worked_play_dir, tmp_path / "g")
    path = os.path.join(d, "events.csv")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df = df.iloc[[1, 0] + list(range(2, len(df)))]
    df.to_csv(path, index=False)
    with pytest.raises(ValidationError, match="not sorted"):
        load_dir(d)


def test_missing_ball_is_data_quality_error(worked_play_dir, tmp_path):
    d = _copy_fixture(worked_play_dir, tmp_path / "g")
    path = os.path.join(d, "moments.csv")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    balls = df.index[df["entity"] == "ball"]
    df = df.drop(balls[: max(2, len(balls) // 50)])
    df.to_csv(path, index=False)
    with pytest.raises(DataQualityError):
        load_dir(d)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_dir(str(tmp_path))


def test_event_player_must_be_in_roster(worked_play_dir, tmp_path):
    d = _copy_fixture(worked_play_dir, tmp_path / "g")
    path = os.path.join(d, "roster.csv")
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    df[df["player_id"] != "LAC-PAUL"].to_csv(path, index=False)
    with pytest.raises(ValidationError):
        load_dir(d)


def test_round_trip_is_bit_exact(small_season, tmp_path):
    bundles = [g.bundle() for g in small_season]
    write_bundles(bundles, str(tmp_path))
    again = load_dir(str(tmp_path))
    assert len(again) == len(bundles)
    for a, b in zip(bundles, again):
        assert a.equals(b)
        assert np.array_equal(a.moments.x, b.moments.x)


def test_normalization_idempotent(small_season):
    for g in small_season[:3]:
        once = normalize(g.raw)
        assert normalize(once).equals(once)


def test_normalization_matches_halves(small_season):
    g = small_season[0]
    raw = g.raw
    dirs = attack_directions(raw)
    # home attacks the low basket before halftime and the high one after
    assert dirs[(raw.home, 1)] is False and dirs[(raw.home, 2)] is True
    assert dirs[(raw.away, 1)] is True and dirs[(raw.away, 2)] is False
    assert all(not v for v in attack_directions(normalize(raw)).values())


def test_box_assists_cover_extracted_labels(small_season):
    for g in small_season:
        b = g.bundle()
        pas = extract_potential_assists(b, g.labels)
        for team in (b.home, b.away):
            labelled = sum(pa.label_recorded_assist for pa in pas if pa.team == team)
            assert b.box[team].ast >= labelled


def _pair(h, a):
    return [BoxLine("G1", "2016-01-01", "H", "A", True, *h), BoxLine("G1", "2016-01-01", "A", "H", False, *a)]


def test_ratio_arithmetic():
    obs = team_game_ratios(_pair((40, 85, 22, 0), (38, 80, 20, 5)))
    ar = {o.team: o.value for o in obs if o.ratio_kind is RatioKind.AR}
    br = {o.team: o.value for o in obs if o.ratio_kind is RatioKind.BR}
    assert ar["H"] == 0.55
    assert br["H"] == 0.0
    assert br["A"] == 5 / 85
    assert all(o.scorekeeper == "H" for o in obs)


def test_zero_fgm_is_skipped_with_warning():
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        obs = team_game_ratios(_pair((0, 60, 0, 3), (30, 70, 15, 2)))
    assert any(issubclass(w.category, ObservationSkipped) for w in caught)
    assert not [o for o in obs if o.team == "H" and o.ratio_kind is RatioKind.AR]
    assert len(obs) == 3


def test_assists_above_fgm_rejected():
    with pytest.raises(ValidationError):
        team_game_ratios(_pair((10, 60, 11, 3), (30, 70, 15, 2)))


def test_compute_team_game_ratios(worked_play_dir):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ObservationSkipped)
        obs = compute_team_game_ratios(load_dir(worked_play_dir)[0])
    ar = [o for o in obs if o.ratio_kind is RatioKind.AR]
    assert [(o.team, o.value) for o in ar] == [("LAC", 1.0)]
