import math
import os
from dataclasses import replace

import numpy as np
import pytest

from scorekeeper.core import ZONES, InvalidInputError
from scorekeeper.effects import group_contributions, linear_predictor
from scorekeeper.ingest import load_dir
from scorekeeper.regress import INTERCEPT, SCALAR, build_contextual_design, fit_contextual_model
from scorekeeper.synth import (
    ONE_HOT,
    GroundTruth,
    default_truth,
    worked_play_fixture,
    generate_season,
    planted_bias_truth,
    recovery_report,
    sample_potential_assists,
    write_season,
    zone_decomposition,
)


def _rate(pas):
    return float(np.mean([pa.label_recorded_assist for pa in pas]))


def _rmse(truth, fit):
    rep = recovery_report(truth, fit)
    num = sum(v["rmse"] ** 2 * v["n_levels"] for v in rep.values())
    return math.sqrt(num / sum(v["n_levels"] for v in rep.values()))


def test_zero_truth_gives_coin_flips():
    pas = sample_potential_assists(default_truth(0, zero=True), 200, seed=1)
    assert len(pas) > 9000
    assert _rate(pas) == pytest.approx(0.5, abs=0.01)


def test_intercept_only_truth_matches_base_rate():
    truth = default_truth(0, zero=True)
    truth.coefficients[INTERCEPT] = {SCALAR: math.log(0.6559 / 0.3441)}
    pas = sample_potential_assists(truth, 2000, seed=2)
    assert _rate(pas) == pytest.approx(0.6559, abs=0.005)


def test_full_scripts_zero_truth_rate():
    games = generate_season(default_truth(0, zero=True), 40, seed=3)
    pas = [pa for g in games for pa in g.truth]
    assert _rate(pas) == pytest.approx(0.5, abs=0.03)


def test_groups_are_centered(small_truth):
    for g in ONE_HOT:
        assert abs(math.fsum(small_truth.coefficients[g].values())) < 1e-12, g
    table = zone_decomposition(small_truth.coefficients)
    for part in table.values():
        assert abs(part.sum()) < 1e-12


def test_label_probabilities_inside_unit_interval(small_truth, small_season):
    pas = [pa for g in small_season for pa in g.truth]
    eta = linear_predictor(group_contributions(small_truth.as_fit(), pas))
    assert np.all(np.abs(eta) < 30)


def test_generation_is_deterministic(small_truth):
    a = generate_season(small_truth, 3, seed=7)
    b = generate_season(small_truth, 3, seed=7)
    c = generate_season(small_truth, 3, seed=8)
    for x, y in zip(a, b):
        assert x.raw.equals(y.raw) and x.labels == y.labels and x.truth == y.truth
    assert not all(x.raw.equals(z.raw) for x, z in zip(a, c))


def test_game_prefix_does_not_depend_on_season_length(small_truth):
    short = generate_season(small_truth, 2, seed=4)
    long = generate_season(small_truth, 5, seed=4)
    assert all(x.raw.equals(y.raw) for x, y in zip(short, long))


def test_written_season_is_byte_identical(small_truth, tmp_path):
    outs = []
    for name in ("a", "b"):
        d = tmp_path / name
        write_season(generate_season(small_truth, 2, seed=9), small_truth, str(d))
        outs.append({f: (d / f).read_bytes() for f in sorted(os.listdir(d))})
    assert outs[0] == outs[1]
    assert {"moments.csv", "events.csv", "box.csv", "roster.csv", "assists.csv",
            "ground_truth.json"} <= set(outs[0])
    assert len(load_dir(str(tmp_path / "a"))) == 2


def test_all_zones_are_generated(small_season):
    pas = [pa for g in small_season for pa in g.truth]
    assert {pa.c7_passer_zone for pa in pas} == set(ZONES)
    assert {pa.c8_shooter_zone for pa in pas} == set(ZONES)


def test_invalid_game_count(small_truth):
    with pytest.raises(InvalidInputError):
        generate_season(small_truth, 0, seed=1)
    with pytest.raises(InvalidInputError):
        sample_potential_assists(small_truth, 0, seed=1)


def test_truth_json_round_trip(small_truth, tmp_path):
    path = str(tmp_path / "truth.json")
    small_truth.save(path)
    again = GroundTruth.load(path)
    assert again.coefficients == small_truth.coefficients
    assert again.roster == small_truth.roster and again.teams == small_truth.teams


def test_planted_bias_truth():
    truth = planted_bias_truth(3, "DEN")
    bias = truth.coefficients["sk_bias"]
    assert min(bias, key=bias.get) == "DEN"
    assert abs(math.fsum(bias.values())) < 1e-12
    gen = truth.coefficients["sk_generosity"]
    assert abs(math.fsum(gen.values())) < 1e-12


def test_worked_play_fixture_has_one_labelled_pass():
    game = worked_play_fixture()
    assert game.labels == {("WP0001", 3400, "LAC-PAUL")}
    assert game.raw.home == "LAC" and game.raw.away == "LAL"


def test_recovery_against_itself_is_exact(small_truth):
    rep = recovery_report(small_truth, small_truth.as_fit())
    for group, row in rep.items():
        assert row["rmse"] < 1e-12, group
        if row["n_levels"] > 1:
            assert row["correlation"] == pytest.approx(1.0, abs=1e-12)


def test_recovery_from_deterministic_labels():
    truth = default_truth(1)
    pas = sample_potential_assists(truth, 2000, seed=1)
    eta = linear_predictor(group_contributions(truth.as_fit(), pas))
    # round probabilities to {0, 1}, dropping rows too close to the boundary
    det = [replace(pa, label_recorded_assist=bool(e > 0)) for pa, e in zip(pas, eta) if abs(e) > 0.25]
    design, y = build_contextual_design(det)
    rep = recovery_report(truth, fit_contextual_model(design, y, 1e-8))
    for group, row in rep.items():
        if row["n_levels"] > 1:
            assert row["correlation"] > 0.99, group


def test_recovery_error_is_u_shaped_in_lambda():
    truth = default_truth(2)
    design, y = build_contextual_design(sample_potential_assists(truth, 100, seed=3))
    grid = np.logspace(-7, 0, 15)
    errs = np.array([_rmse(truth, fit_contextual_model(design, y, lam)) for lam in grid])
    best = int(np.argmin(errs))
    assert 0 < best < len(grid) - 1
    assert errs[best] < 0.95 * errs[-1] and errs[best] < 0.5 * errs[0]


def test_recovery_error_halves_with_ten_times_the_data():
    small, large = [], []
    for rep in range(5):
        truth = default_truth(50 + rep)
        for n_games, out in ((200, small), (2000, large)):
            design, y = build_contextual_design(sample_potential_assists(truth, n_games, seed=rep))
            out.append(_rmse(truth, fit_contextual_model(design, y, 1e-4)))
    assert np.mean(large) < 0.5 * np.mean(small)
