import math

import numpy as np
import pytest
from scipy.special import expit

from scorekeeper.core import CourtZone, InvalidInputError, Position, PotentialAssist
from scorekeeper.effects import (
    EFFECT_FAMILIES,
    NONCONTEXTUAL,
    BonusDistribution,
    adjust_assists,
    average_potential_assist,
    baseline_value,
    bonus_samples,
    coefficient_stability,
    effect_curve,
    effect_of,
    group_contributions,
    league_ratio,
    linear_predictor,
    predicted_ratios,
    scorekeeper_bonus,
    scorekeeper_ratios,
)
from scorekeeper.ingest import BoxLine
from scorekeeper.regress import (
    CONTINUOUS,
    INTERCEPT,
    SCALAR,
    SK_BIAS,
    SK_GENEROSITY,
    TEAM,
    ModelFit,
    build_contextual_design,
    build_team_design,
    fit_contextual_model,
    fit_team_model,
)
from scorekeeper.synth import (
    default_team_truth,
    default_truth,
    generate_team_ratios,
    sample_potential_assists,
)


def _pa(**kw):
    base = dict(game_id="G1", passer="P1", shooter="S1", team="A", opponent="B", is_home=True,
                scorekeeper="A", passer_position=Position.POINT_GUARD, c1_possession_time=2.0,
                c2_dribbles=1, c3_travel_distance=10.0, c4_pass_distance=15.0,
                c5_passer_defender_dist=5.0, c6_shooter_defender_dist=8.0,
                c7_passer_zone=CourtZone.ARC3, c8_shooter_zone=CourtZone.PAINT,
                label_recorded_assist=True)
    base.update(kw)
    return PotentialAssist(**base)


def _linear_fit(gen, bias):
    return ModelFit("linear", {INTERCEPT: {SCALAR: 0.5}, SK_GENEROSITY: gen, SK_BIAS: bias}, 10, {})


# -- ratios ---------------------------------------------------------------------


def test_predicted_ratios_zero_effects():
    fit = _linear_fit({"A": 0.1, "B": 0.1, "C": 0.1}, {"A": -0.2, "B": -0.2, "C": -0.2})
    for home, away in predicted_ratios(fit, 0.58).values():
        assert home == away == 0.58


def test_predicted_ratios_bias_gap():
    fit = _linear_fit({"A": 0.0, "B": 0.03, "C": -0.03}, {"A": 0.02, "B": 0.0, "C": -0.02})
    home, away = predicted_ratios(fit, 0.6)["A"]
    assert home - away == pytest.approx(0.02, abs=1e-15)
    assert away == pytest.approx(0.6, abs=1e-15)


def test_predicted_ratios_require_linear_fit():
    with pytest.raises(InvalidInputError):
        predicted_ratios(ModelFit("logistic", {}, 0, {}), 0.5)


def test_predicted_ratios_recover_planted_generosity():
    truth = default_team_truth(5, n_teams=30, scale=0.01)
    gen = {t: (0.03 if t == "BOS" else 0.0) for t in truth[SK_GENEROSITY]}
    mean = sum(gen.values()) / len(gen)
    truth[SK_GENEROSITY] = {k: v - mean for k, v in gen.items()}
    design, y = build_team_design(generate_team_ratios(truth, 6000, seed=6, noise_sd=0.05))
    pr = predicted_ratios(fit_team_model(design, y), 0.58)
    assert pr["BOS"][1] - 0.58 == pytest.approx(truth[SK_GENEROSITY]["BOS"], abs=0.005)
    assert pr["BOS"][1] - 0.58 == pytest.approx(0.03, abs=0.005)


def test_league_and_scorekeeper_ratios():
    lines = [BoxLine("G1", "d", "A", "B", True, 40, 80, 30, 6),
             BoxLine("G1", "d", "B", "A", False, 35, 90, 20, 2),
             BoxLine("G2", "d", "B", "A", True, 30, 70, 18, 4),
             BoxLine("G2", "d", "A", "B", False, 50, 100, 25, 0)]
    assert league_ratio(lines) == (30 + 20 + 18 + 25) / (40 + 35 + 30 + 50)
    assert league_ratio(lines, "br") == (6 + 2 + 4 + 0) / (90 + 80 + 100 + 70)
    sk = scorekeeper_ratios(lines)
    assert sk["A"] == (30 / 40, 20 / 35)
    assert sk["B"] == (18 / 30, 25 / 50)


# -- effect isolation -------------------------------------------------------------------


def test_average_potential_assist():
    a = _pa()
    b = _pa(c1_possession_time=4.0, c2_dribbles=3, c3_travel_distance=0.0, c4_pass_distance=5.0,
            c5_passer_defender_dist=1.0, c6_shooter_defender_dist=2.0)
    one = average_potential_assist([a])
    assert (one.c1_possession_time, one.c2_dribbles, one.c6_shooter_defender_dist) == (2.0, 1.0, 8.0)
    two = average_potential_assist([a, b])
    assert (two.c1_possession_time, two.c2_dribbles, two.c3_travel_distance, two.c4_pass_distance,
            two.c5_passer_defender_dist, two.c6_shooter_defender_dist) == (3.0, 2.0, 5.0, 10.0, 3.0, 5.0)
    with pytest.raises(InvalidInputError):
        average_potential_assist([])


def test_baseline_value():
    avg = average_potential_assist([_pa()])
    assert baseline_value(ModelFit("logistic", {}, 0, {}), avg) == 0.0
    assert baseline_value(ModelFit("logistic", {INTERCEPT: {SCALAR: -0.44}}, 0, {}), avg) == -0.44
    coefs = dict(zip(CONTINUOUS, (-0.5, 0.1, 0.02, -0.03, 0.04, -0.05)))
    fit = ModelFit("logistic", {INTERCEPT: {SCALAR: 1.5}, **{k: {SCALAR: v} for k, v in coefs.items()},
                                TEAM: {"A": 9.0}}, 0, {})
    want = 1.5 + 2.0 * -0.5 + 1 * 0.1 + 10 * 0.02 + 15 * -0.03 + 5 * 0.04 + 8 * -0.05
    assert baseline_value(fit, avg) == pytest.approx(want, abs=1e-12)


def test_effect_of_closed_forms():
    fit = ModelFit("logistic", {TEAM: {"A": 0.0, "B": math.log(3)}}, 0, {})
    assert effect_of(fit, 0.7, TEAM, "A") == 0.0
    assert effect_of(fit, 0.0, TEAM, "B") == pytest.approx(0.25, abs=1e-12)
    with pytest.raises(InvalidInputError):
        effect_of(fit, 0.0, TEAM, "Z")
    with pytest.raises(InvalidInputError):
        effect_of(fit, 0.0, "nonsense", "A")


def test_effect_of_monotone_in_term():
    terms = np.linspace(-4, 4, 41)
    fit = ModelFit("logistic", {TEAM: {f"L{i}": float(t) for i, t in enumerate(terms)}}, 0, {})
    values = [effect_of(fit, 0.3, TEAM, f"L{i}") for i in range(len(terms))]
    assert all(b > a for a, b in zip(values, values[1:]))
    assert all(-1 < v < 1 for v in values)
    assert all(np.sign(v) == np.sign(t) for v, t in zip(values, terms))


def test_effect_of_continuous_removes_mean_term():
    avg = average_potential_assist([_pa()])
    fit = ModelFit("logistic", {INTERCEPT: {SCALAR: 0.2}, "c1_possession_time": {SCALAR: -0.5}}, 0, {})
    v = baseline_value(fit, avg)
    got = effect_of(fit, v, "c1_possession_time", 4.0, avg)
    assert got == pytest.approx(expit(0.2 - 2.0) - expit(0.2), abs=1e-15)


def test_possession_time_curve_decreases(small_truth):
    pas = sample_potential_assists(small_truth, 300, seed=2)
    design, y = build_contextual_design(pas)
    fit = fit_contextual_model(design, y, 1e-4)
    curve = effect_curve(fit, average_potential_assist(pas), "c1_possession_time", np.linspace(0.2, 7, 30))
    assert np.all(np.diff(curve) < 0)


# -- adjusted totals ------------------------------------------------------------------------


def test_adjust_with_zero_noncontextual_groups(small_truth):
    pas = sample_potential_assists(small_truth, 10, seed=1)
    coefs = {g: lv for g, lv in small_truth.coefficients.items() if g not in NONCONTEXTUAL}
    fit = ModelFit("logistic", coefs, 0, {})
    report = adjust_assists(fit, pas)
    eta = linear_predictor(group_contributions(fit, pas))
    p = expit(eta)
    for pl in report.players:
        rows = [j for j, pa in enumerate(pas) if pa.passer == pl.player]
        assert pl.adjusted == math.fsum(p[rows])
        assert all(v == 0.0 for v in pl.contributions.values())
        assert pl.recorded == sum(pas[j].label_recorded_assist for j in rows)


def test_single_pass_player_at_zero_log_odds():
    fit = ModelFit("logistic", {TEAM: {"A": 1.3}, SK_GENEROSITY: {"A": -0.4}}, 0, {})
    report = adjust_assists(fit, [_pa()])
    (row,) = report.players
    assert row.adjusted == 0.5
    assert row.change == -0.5
    assert row.contributions["team"] == pytest.approx(expit(0.9) - expit(-0.4), abs=1e-15)


def test_adjust_recorded_delta_mode():
    fit = ModelFit("logistic", {INTERCEPT: {SCALAR: 0.4}, TEAM: {"A": 1.0}}, 0, {})
    pas = [_pa(), _pa(label_recorded_assist=False)]
    report = adjust_assists(fit, pas, mode="recorded_delta")
    shift = 2 * (expit(1.4) - expit(0.4))
    assert report.players[0].adjusted == pytest.approx(1 - shift, abs=1e-15)
    with pytest.raises(InvalidInputError):
        adjust_assists(fit, pas, mode="bogus")


def test_planted_generosity_shows_in_home_contributions():
    truth = default_truth(3)
    truth.coefficients[SK_GENEROSITY] = {t: (1.0 if t == "BOS" else -1.0 / 29)
                                         for t in truth.teams}
    pas = sample_potential_assists(truth, 300, seed=4)
    # remove only the scorekeeper terms so the change isolates the planted effect
    report = adjust_assists(truth.as_fit(), pas, removed_groups=(SK_GENEROSITY, SK_BIAS))
    home = [p for p in report.players if p.player.startswith("BOS-")]
    assert home
    for p in home:
        assert p.contributions["home_scorekeeper"] > 0
    total_hsk = sum(p.contributions["home_scorekeeper"] for p in home)
    total_change = sum(p.change for p in home)
    assert total_change < 0
    assert 0.3 < -total_change / total_hsk < 3


def test_ranks_and_frame(small_truth):
    pas = sample_potential_assists(small_truth, 20, seed=9)
    report = adjust_assists(small_truth.as_fit(), pas)
    n = len(report.players)
    assert sorted(p.original_rank for p in report.players) == list(range(1, n + 1))
    assert sorted(p.adjusted_rank for p in report.players) == list(range(1, n + 1))
    best = min(report.players, key=lambda p: p.adjusted_rank)
    assert best.adjusted == max(p.adjusted for p in report.players)
    frame = report.frame()
    assert list(frame.columns[-len(EFFECT_FAMILIES):]) == list(EFFECT_FAMILIES)
    assert len(frame) == n


# -- scorekeeper bonus ----------------------------------------------------------------------


def test_bonus_arithmetic():
    assert BonusDistribution("A", "home", (2.5,)).mean == 2.5
    d = BonusDistribution("A", "away", (2.5, -2.5))
    assert d.mean == 0.0 and d.variance == 12.5 and d.mean_abs_from_zero == 2.5
    s = d.summary()
    assert s["n"] == 2 and s["side"] == "away"


def test_bonus_sample_is_recorded_minus_expected():
    # 25 recorded assists; 25 passes at probability 0.9 with scorekeeper terms removed
    fit = ModelFit("logistic", {INTERCEPT: {SCALAR: math.log(9)}, SK_GENEROSITY: {"A": 2.0},
                                SK_BIAS: {"A": 1.0}}, 0, {})
    pas = [_pa(shot_made_ms=i) for i in range(25)]
    (s,) = bonus_samples(fit, pas)
    assert s.recorded == 25
    assert s.expected == pytest.approx(22.5, abs=1e-12)
    assert s.bonus == pytest.approx(2.5, abs=1e-12)


def test_bonus_per_team_game_sums(small_truth):
    pas = sample_potential_assists(small_truth, 30, seed=3)
    samples = bonus_samples(small_truth.as_fit(), pas)
    assert len(samples) == len({(pa.game_id, pa.team) for pa in pas})
    assert sum(s.recorded for s in samples) == sum(pa.label_recorded_assist for pa in pas)
    dists = scorekeeper_bonus(small_truth.as_fit(), pas)
    assert len(dists) == 2 * len({pa.scorekeeper for pa in pas})
    assert sum(len(d.samples) for d in dists) == len(samples)


def test_bonus_centered_without_scorekeeper_effects():
    truth = default_truth(8)
    for g in (SK_GENEROSITY, SK_BIAS):
        truth.coefficients[g] = {t: 0.0 for t in truth.teams}
    pas = sample_potential_assists(truth, 6000, seed=8)  # 200 home games per scorekeeper
    dists = scorekeeper_bonus(truth.as_fit(), pas)
    assert len(dists) == 60
    means = np.array([d.mean for d in dists])
    # each mean has a sampling error near 0.17 here, so test them as z-scores
    z = means / np.array([math.sqrt(d.variance / len(d.samples)) for d in dists])
    assert np.all(np.abs(z) < 4)
    assert math.sqrt(np.mean(means ** 2)) < 0.3
    assert abs(means.mean()) < 0.05


# -- stability --------------------------------------------------------------------------------


def test_stability_identical_fits(small_truth):
    table = coefficient_stability([small_truth.as_fit(), small_truth.as_fit()])
    assert np.allclose(table["correlation"], 1.0)
    with pytest.raises(InvalidInputError):
        coefficient_stability([small_truth.as_fit()])


def test_stability_independent_fits():
    rng = np.random.default_rng(0)
    teams = [f"T{i}" for i in range(30)]

    def rand():
        return ModelFit("logistic", {TEAM: dict(zip(teams, rng.normal(size=30)))}, 0, {})
    rs = [coefficient_stability([rand(), rand()], groups=[TEAM])["correlation"].iloc[0]
          for _ in range(50)]
    assert abs(np.mean(rs)) < 0.2
    # a single pair at 30 levels has sd near 1/sqrt(29)
    assert np.std(rs) == pytest.approx(1 / math.sqrt(29), rel=0.35)


def test_generosity_more_stable_than_team():
    truth = default_truth(4, team_sd=0.05, generosity_sd=0.4)
    fits = []
    for seed in (1, 2):
        truth_s = default_truth(4, team_sd=0.05, generosity_sd=0.4)
        # team strength is redrawn each season, scorekeepers persist
        truth_s.coefficients[TEAM] = default_truth(100 + seed, team_sd=0.05).coefficients[TEAM]
        design, y = build_contextual_design(sample_potential_assists(truth_s, 1200, seed=seed))
        fits.append(fit_contextual_model(design, y, 1e-4))
    table = coefficient_stability(fits, ["s1", "s2"]).set_index("group")["correlation"]
    assert table[SK_GENEROSITY] > table[TEAM]
    assert set(truth.teams) == set(fits[0].coefficients[TEAM])
