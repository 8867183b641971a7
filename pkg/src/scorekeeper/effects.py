"""Post-fit analysis: scorekeeper ratios, effect isolation, adjusted assist
totals, scorekeeper bonus distributions and cross-season stability."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd
from scipy.special import expit

from .core import CourtZone, InvalidInputError, PotentialAssist, RatioKind, TeamId
from .ingest import BoxLine
from .regress import (
    CONTINUOUS,
    HOME,
    INTERCEPT,
    OPPONENT,
    PASSER,
    PASSER_ZONE,
    POSITION,
    SHOOTER_ZONE,
    SK_BIAS,
    SK_GENEROSITY,
    TEAM,
    ZONE_PAIR,
    ModelFit,
    continuous_values,
    zone_pair_level,
)

GROUP_ORDER = (INTERCEPT, HOME, TEAM, OPPONENT, SK_GENEROSITY, SK_BIAS, PASSER, POSITION) \
    + CONTINUOUS + (PASSER_ZONE, SHOOTER_ZONE, ZONE_PAIR)
NONCONTEXTUAL = (HOME, TEAM, OPPONENT, SK_GENEROSITY, SK_BIAS, PASSER, POSITION)
SCOREKEEPER_GROUPS = (SK_GENEROSITY, SK_BIAS)
EFFECT_FAMILIES = ("position", "passer", "home_scorekeeper", "away_scorekeeper",
                   "team", "opponent", "home")
STABILITY_GROUPS = (TEAM, OPPONENT, SK_BIAS, SK_GENEROSITY, POSITION,
                    PASSER_ZONE, SHOOTER_ZONE, ZONE_PAIR)


# -- ratios (team-level model) -----------------------------------------------


def league_ratio(lines: Iterable[BoxLine], kind: Union[RatioKind, str] = RatioKind.AR) -> float:
    """Season-long league AR (assists / FGM) or BR (blocks / opponent FGA)."""
    kind = RatioKind(kind.upper() if isinstance(kind, str) else kind)
    lines = list(lines)
    if kind is RatioKind.AR:
        return sum(b.ast for b in lines) / sum(b.fgm for b in lines)
    fga = {(b.game_id, b.team_id): b.fga for b in lines}
    return sum(b.blk for b in lines) / sum(fga[(b.game_id, b.opp_id)] for b in lines)


def scorekeeper_ratios(lines: Iterable[BoxLine], kind: Union[RatioKind, str] = RatioKind.AR,
                       ) -> dict[TeamId, tuple[float, float]]:
    """Season ratio awarded by each scorekeeper to (home team, away teams)."""
    kind = RatioKind(kind.upper() if isinstance(kind, str) else kind)
    lines = list(lines)
    fga = {(b.game_id, b.team_id): b.fga for b in lines}
    sk_of = {b.game_id: b.team_id for b in lines if b.is_home}
    num: dict[tuple[TeamId, bool], float] = {}
    den: dict[tuple[TeamId, bool], float] = {}
    for b in lines:
        key = (sk_of[b.game_id], b.is_home)
        if kind is RatioKind.AR:
            n, d = b.ast, b.fgm
        else:
            n, d = b.blk, fga[(b.game_id, b.opp_id)]
        num[key] = num.get(key, 0) + n
        den[key] = den.get(key, 0) + d
    out = {}
    for sk in sorted(set(sk_of.values())):
        home = num[(sk, True)] / den[(sk, True)] if den.get((sk, True)) else math.nan
        away = num[(sk, False)] / den[(sk, False)] if den.get((sk, False)) else math.nan
        out[sk] = (home, away)
    return out


def predicted_ratios(fit: ModelFit, league: float) -> dict[TeamId, tuple[float, float]]:
    """Predicted (home, away) ratio awarded by each scorekeeper.

    Home: league + centered generosity + centered bias; away: league +
    centered generosity.
    """
    if fit.fit_kind != "linear":
        raise InvalidInputError("predicted ratios need a team-level (linear) fit")
    gen = fit.centered(SK_GENEROSITY)
    bias = fit.centered(SK_BIAS)
    return {s: (league + gen[s] + bias.get(s, 0.0), league + gen[s]) for s in sorted(gen)}


# -- linear predictor pieces ----------------------------------------------------


def group_contributions(fit: ModelFit, pas: Sequence[PotentialAssist]) -> dict[str, np.ndarray]:
    """Per-row additive contribution of every coefficient group to the log-odds."""
    n = len(pas)
    c = fit.coefficients

    def lookup(group: str, keys: Iterable[str]) -> np.ndarray:
        table = c.get(group, {})
        return np.fromiter((table.get(k, 0.0) for k in keys), dtype=float, count=n)

    home = np.array([pa.is_home for pa in pas], dtype=float)
    cont = continuous_values(pas)
    out = {
        INTERCEPT: np.full(n, fit.coefficient(INTERCEPT)),
        HOME: home * fit.coefficient(HOME),
        TEAM: lookup(TEAM, (pa.team for pa in pas)),
        OPPONENT: lookup(OPPONENT, (pa.opponent for pa in pas)),
        SK_GENEROSITY: lookup(SK_GENEROSITY, (pa.scorekeeper for pa in pas)),
        SK_BIAS: home * lookup(SK_BIAS, (pa.scorekeeper for pa in pas)),
        PASSER: lookup(PASSER, (pa.passer for pa in pas)),
        POSITION: lookup(POSITION, (pa.passer_position.value for pa in pas)),
    }
    for k, name in enumerate(CONTINUOUS):
        out[name] = cont[:, k] * fit.coefficient(name)
    out[PASSER_ZONE] = lookup(PASSER_ZONE, (pa.c7_passer_zone.value for pa in pas))
    out[SHOOTER_ZONE] = lookup(SHOOTER_ZONE, (pa.c8_shooter_zone.value for pa in pas))
    out[ZONE_PAIR] = lookup(ZONE_PAIR, (zone_pair_level(pa.c7_passer_zone, pa.c8_shooter_zone)
                                        for pa in pas))
    return out


def linear_predictor(parts: Mapping[str, np.ndarray], exclude: Iterable[str] = ()) -> np.ndarray:
    """Sum of contributions in a fixed group order, skipping ``exclude``."""
    exclude = set(exclude)
    n = len(next(iter(parts.values())))
    eta = np.zeros(n)
    for g in GROUP_ORDER:
        if g not in exclude:
            eta = eta + parts[g]
    return eta


def _family_terms(parts: Mapping[str, np.ndarray], home: np.ndarray) -> dict[str, np.ndarray]:
    gen, bias = parts[SK_GENEROSITY], parts[SK_BIAS]
    return {
        "position": parts[POSITION],
        "passer": parts[PASSER],
        "home_scorekeeper": np.where(home, gen + bias, 0.0),
        "away_scorekeeper": np.where(home, 0.0, gen),
        "team": parts[TEAM],
        "opponent": parts[OPPONENT],
        "home": parts[HOME],
    }


# -- effect isolation ---------------------------------------------------------


@dataclass(frozen=True)
class AveragePotentialAssist:
    c1_possession_time: float
    c2_dribbles: float
    c3_travel_distance: float
    c4_pass_distance: float
    c5_passer_defender_dist: float
    c6_shooter_defender_dist: float

    def value(self, name: str) -> float:
        return getattr(self, name)


def average_potential_assist(pas: Sequence[PotentialAssist]) -> AveragePotentialAssist:
    if not pas:
        raise InvalidInputError("no potential assists")
    means = continuous_values(pas).mean(axis=0)
    return AveragePotentialAssist(*(float(v) for v in means))


def baseline_value(fit: ModelFit, avg: AveragePotentialAssist) -> float:
    """Log-odds of the average potential assist: intercept plus mean covariates
    times their coefficients, with no indicator contributions."""
    v = fit.coefficient(INTERCEPT)
    for name in CONTINUOUS:
        v += avg.value(name) * fit.coefficient(name)
    return v


def probability_effect(v: float, term: float) -> float:
    """Change in probability from adding ``term`` to log-odds ``v``."""
    return float(expit(v + term) - expit(v))


def _level_key(group: str, level) -> str:
    if group == ZONE_PAIR and isinstance(level, tuple):
        a, b = (z if isinstance(z, CourtZone) else CourtZone.parse(z) for z in level)
        return zone_pair_level(a, b)
    if hasattr(level, "value"):
        return level.value
    return str(level)


def effect_of(fit: ModelFit, v: float, group: str, level_or_value,
              avg: Optional[AveragePotentialAssist] = None) -> float:
    """Probability change for the average potential assist from setting one
    variable. For a continuous covariate pass ``avg`` so its mean term is first
    removed from ``v``; indicator levels contribute their coefficient."""
    if group in CONTINUOUS:
        coef = fit.coefficient(group)
        if avg is not None:
            v = v - avg.value(group) * coef
        term = float(level_or_value) * coef
    elif group == HOME:
        term = float(level_or_value) * fit.coefficient(HOME)
    elif group in fit.coefficients:
        key = _level_key(group, level_or_value)
        if key not in fit.coefficients[group]:
            raise InvalidInputError(f"level {key!r} not estimated for group {group!r}")
        term = fit.coefficients[group][key]
    else:
        raise InvalidInputError(f"unknown coefficient group {group!r}")
    return probability_effect(v, term)


def effect_curve(fit: ModelFit, avg: AveragePotentialAssist, group: str,
                 values: Sequence[float]) -> np.ndarray:
    """Predicted probability of the average potential assist as one continuous
    covariate sweeps over ``values``."""
    if group not in CONTINUOUS:
        raise InvalidInputError(f"{group!r} is not a continuous covariate")
    coef = fit.coefficient(group)
    v = baseline_value(fit, avg) - avg.value(group) * coef
    return expit(v + np.asarray(values, dtype=float) * coef)


def group_effects(fit: ModelFit, avg: AveragePotentialAssist, group: str) -> dict[str, float]:
    """Effect of every level of an indicator group, e.g. passer or position rankings."""
    v = baseline_value(fit, avg)
    return {lvl: probability_effect(v, b) for lvl, b in fit.coefficients.get(group, {}).items()}


# -- adjusted assist totals ---------------------------------------------------------


@dataclass(frozen=True)
class PlayerAdjustment:
    player: str
    recorded: int
    adjusted: float
    change: float
    original_rank: int
    adjusted_rank: int
    contributions: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class AdjustedAssistReport:
    players: tuple[PlayerAdjustment, ...]
    removed_groups: tuple[str, ...]
    mode: str

    def by_player(self) -> dict[str, PlayerAdjustment]:
        return {p.player: p for p in self.players}

    def frame(self) -> pd.DataFrame:
        rows = []
        for p in self.players:
            row = {"player": p.player, "recorded": p.recorded, "adjusted": p.adjusted,
                   "change": p.change, "original_rank": p.original_rank,
                   "adjusted_rank": p.adjusted_rank}
            row.update({k: p.contributions[k] for k in EFFECT_FAMILIES})
            rows.append(row)
        return pd.DataFrame(rows, columns=["player", "recorded", "adjusted", "change",
                                           "original_rank", "adjusted_rank", *EFFECT_FAMILIES])


def _ranks(keys: Sequence[tuple], ids: Sequence[str]) -> dict[str, int]:
    order = sorted(range(len(ids)), key=lambda i: keys[i])
    return {ids[i]: r + 1 for r, i in enumerate(order)}


def adjust_assists(fit: ModelFit, pas: Sequence[PotentialAssist],
                   removed_groups: Sequence[str] = NONCONTEXTUAL,
                   mode: str = "expected") -> AdjustedAssistReport:
    """Per-passer totals after zeroing ``removed_groups`` in every potential assist.

    ``mode="expected"`` sums adjusted probabilities over all potential assists;
    ``mode="recorded_delta"`` subtracts the summed probability shift from the
    recorded count instead. Effect contributions are leave-one-family-out
    probability differences at the full linear predictor, so they do not add
    up to the total change.
    """
    if mode not in ("expected", "recorded_delta"):
        raise InvalidInputError(f"unknown adjustment mode {mode!r}")
    removed = tuple(removed_groups)
    parts = group_contributions(fit, pas)
    home = np.array([pa.is_home for pa in pas], dtype=bool)
    eta = linear_predictor(parts)
    p_full = expit(eta)
    p_kept = expit(linear_predictor(parts, removed))
    family = {k: p_full - expit(eta - t) for k, t in _family_terms(parts, home).items()}
    labels = np.array([pa.label_recorded_assist for pa in pas], dtype=float)

    index: dict[str, list[int]] = {}
    for j, pa in enumerate(pas):
        index.setdefault(pa.passer, []).append(j)
    players = sorted(index)
    recorded, adjusted, contrib = {}, {}, {}
    for pl in players:
        rows = np.array(index[pl])
        recorded[pl] = int(labels[rows].sum())
        if mode == "expected":
            adjusted[pl] = math.fsum(p_kept[rows])
        else:
            adjusted[pl] = recorded[pl] - math.fsum(p_full[rows] - p_kept[rows])
        contrib[pl] = {k: math.fsum(family[k][rows]) for k in EFFECT_FAMILIES}

    orig = _ranks([(-recorded[p], p) for p in players], players)
    adj = _ranks([(-adjusted[p], -recorded[p], p) for p in players], players)
    rows_out = tuple(PlayerAdjustment(
        player=p, recorded=recorded[p], adjusted=adjusted[p], change=adjusted[p] - recorded[p],
        original_rank=orig[p], adjusted_rank=adj[p], contributions=contrib[p],
    ) for p in players)
    return AdjustedAssistReport(rows_out, removed, mode)


# -- scorekeeper bonus ----------------------------------------------------------------


@dataclass(frozen=True)
class BonusSample:
    game_id: str
    team: str
    scorekeeper: str
    side: str
    recorded: int
    expected: float

    @property
    def bonus(self) -> float:
        return self.recorded - self.expected


@dataclass(frozen=True)
class BonusDistribution:
    scorekeeper: str
    side: str
    samples: tuple[float, ...]

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples)) if self.samples else math.nan

    @property
    def variance(self) -> float:
        if len(self.samples) < 2:
            return 0.0 if self.samples else math.nan
        return float(np.var(self.samples, ddof=1))

    @property
    def mean_abs_from_zero(self) -> float:
        return float(np.mean(np.abs(self.samples))) if self.samples else math.nan

    def summary(self) -> dict:
        return {"scorekeeper": self.scorekeeper, "side": self.side, "n": len(self.samples),
                "mean": self.mean, "variance": self.variance,
                "mean_abs_from_zero": self.mean_abs_from_zero}


def bonus_samples(fit: ModelFit, pas: Sequence[PotentialAssist]) -> list[BonusSample]:
    """One sample per team-game: recorded assists minus expected assists with
    the scorekeeper generosity and bias terms removed."""
    parts = group_contributions(fit, pas)
    p = expit(linear_predictor(parts, SCOREKEEPER_GROUPS))
    groups: dict[tuple[str, str], list[int]] = {}
    for j, pa in enumerate(pas):
        groups.setdefault((pa.game_id, pa.team), []).append(j)
    out = []
    for (gid, team) in sorted(groups):
        rows = groups[(gid, team)]
        first = pas[rows[0]]
        out.append(BonusSample(
            game_id=gid, team=team, scorekeeper=first.scorekeeper,
            side="home" if first.is_home else "away",
            recorded=sum(1 for j in rows if pas[j].label_recorded_assist),
            expected=math.fsum(p[rows]),
        ))
    return out


def scorekeeper_bonus(fit: ModelFit, pas: Sequence[PotentialAssist]) -> list[BonusDistribution]:
    """Home and away bonus distributions for every scorekeeper in the data."""
    samples = bonus_samples(fit, pas)
    grouped: dict[tuple[str, str], list[float]] = {}
    for s in samples:
        grouped.setdefault((s.scorekeeper, s.side), []).append(s.bonus)
    keepers = sorted({pa.scorekeeper for pa in pas})
    return [BonusDistribution(sk, side, tuple(grouped.get((sk, side), ())))
            for sk in keepers for side in ("home", "away")]


def bonus_frame(samples: Sequence[BonusSample]) -> pd.DataFrame:
    return pd.DataFrame([(s.game_id, s.team, s.scorekeeper, s.side, s.recorded, s.expected, s.bonus)
                         for s in samples],
                        columns=["game_id", "team", "scorekeeper", "side", "recorded",
                                 "expected", "bonus"])


# -- stability ------------------------------------------------------------------------


def coefficient_stability(fits: Sequence[ModelFit], names: Optional[Sequence[str]] = None,
                          groups: Sequence[str] = STABILITY_GROUPS) -> pd.DataFrame:
    """Pearson correlation of same-named levels for each group and season pair."""
    if len(fits) < 2:
        raise InvalidInputError("need at least two fits")
    names = list(names) if names is not None else [str(i) for i in range(len(fits))]
    rows = []
    for (i, a), (j, b) in combinations(enumerate(fits), 2):
        for g in groups:
            la, lb = a.coefficients.get(g, {}), b.coefficients.get(g, {})
            shared = sorted(set(la) & set(lb))
            r = math.nan
            if len(shared) >= 2:
                xa = np.array([la[k] for k in shared])
                xb = np.array([lb[k] for k in shared])
                if xa.std() > 0 and xb.std() > 0:
                    r = float(np.corrcoef(xa, xb)[0, 1])
            rows.append((g, names[i], names[j], len(shared), r))
    return pd.DataFrame(rows, columns=["group", "season_a", "season_b", "n_levels", "correlation"])
