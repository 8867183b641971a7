"""Synthetic seasons with planted coefficients.

Possessions are scripted in normalized offensive coordinates, so every
covariate of a potential assist is known exactly. Games are written in a
raw frame where teams switch baskets at halftime; loading them through
``ingest`` exercises the normalization path. Labels are Bernoulli draws from
the contextual model under the planted coefficients.
"""

from __future__ import annotations

import datetime as dt
import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np
from scipy.special import expit

from .core import (
    BASKET_X,
    BASKET_Y,
    COURT_LENGTH,
    COURT_WIDTH,
    FRAME_MS,
    POSITIONS,
    ZONES,
    CourtPoint,
    CourtZone,
    EventKind,
    EventRecord,
    InvalidInputError,
    Position,
    PotentialAssist,
    RatioKind,
    ScorekeeperError,
    TeamGameRatio,
    zone_of,
)
from .effects import group_contributions, linear_predictor
from .features import write_assist_labels, write_potential_assists
from .ingest import BoxLine, GameBundle, MomentTable, RosterEntry, normalize, write_bundles
from .regress import (
    CONTINUOUS,
    HOME,
    INTERCEPT,
    OPPONENT,
    PASSER,
    PASSER_ZONE,
    POSITION,
    SCALAR,
    SHOOTER_ZONE,
    SK_BIAS,
    SK_GENEROSITY,
    TEAM,
    ZONE_PAIR,
    ModelFit,
    zone_pair_level,
)

NBA_TEAMS = ("ATL", "BOS", "BKN", "CHA", "CHI", "CLE", "DAL", "DEN", "DET", "GSW",
             "HOU", "IND", "LAC", "LAL", "MEM", "MIA", "MIL", "MIN", "NOP", "NYK",
             "OKC", "ORL", "PHI", "PHX", "POR", "SAC", "SAS", "TOR", "UTA", "WAS")

QUARTER_MS = 720_000
SEASON_START = dt.date(2015, 10, 27)
ONE_HOT = (TEAM, OPPONENT, SK_GENEROSITY, SK_BIAS, PASSER, POSITION,
           PASSER_ZONE, SHOOTER_ZONE, ZONE_PAIR)


class GenerationError(ScorekeeperError, RuntimeError):
    pass


@dataclass
class GroundTruth:
    """Planted coefficients (original covariate scale) and league structure."""

    teams: list[str]
    roster: dict[str, RosterEntry]
    coefficients: dict[str, dict[str, float]]
    pa_per_team_game: float = 25.0
    decoys_per_team_game: float = 3.0

    def as_fit(self) -> ModelFit:
        return ModelFit("logistic", self.coefficients, 0, {"source": "ground_truth"})

    def to_dict(self) -> dict:
        return {
            "teams": self.teams,
            "roster": [[r.player_id, r.name, r.team_id, r.position.value]
                       for r in sorted(self.roster.values(), key=lambda r: r.player_id)],
            "pa_per_team_game": self.pa_per_team_game,
            "decoys_per_team_game": self.decoys_per_team_game,
            "groups": self.coefficients,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "GroundTruth":
        roster = {p: RosterEntry(p, n, t, Position(pos)) for p, n, t, pos in d["roster"]}
        return cls(list(d["teams"]), roster,
                   {g: {k: float(v) for k, v in lv.items()} for g, lv in d["groups"].items()},
                   float(d.get("pa_per_team_game", 25.0)),
                   float(d.get("decoys_per_team_game", 3.0)))

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "GroundTruth":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


def _centered(values: np.ndarray) -> np.ndarray:
    return values - values.mean()


def default_truth(seed: int = 0, n_teams: int = 30, players_per_position: int = 3,
                  generosity_sd: float = 0.4, bias_sd: float = 0.3, team_sd: float = 0.2,
                  opponent_sd: float = 0.2, passer_sd: float = 0.4,
                  zero: bool = False) -> GroundTruth:
    """A league with centered one-hot effects of realistic size.

    Passer effects are centered inside every (team, position) cell so team
    and position effects are not absorbed into passers.
    """
    if n_teams < 2:
        raise InvalidInputError("need at least two teams")
    rng = np.random.default_rng(seed)
    teams = list(NBA_TEAMS[:n_teams]) + [f"T{i:02d}" for i in range(31, n_teams + 1)]
    roster: dict[str, RosterEntry] = {}
    for t in teams:
        for pos in POSITIONS:
            for k in range(players_per_position):
                pid = f"{t}-{pos.value}{k + 1}"
                roster[pid] = RosterEntry(pid, f"{t} {pos.value} {k + 1}", t, pos)

    def scalar(v: float) -> dict[str, float]:
        return {SCALAR: 0.0 if zero else v}

    def levels(names: Sequence[str], values: np.ndarray) -> dict[str, float]:
        values = np.zeros(len(names)) if zero else values
        return {n: float(v) for n, v in zip(names, values)}

    coefs: dict[str, dict[str, float]] = {INTERCEPT: scalar(2.0), HOME: scalar(0.05)}
    coefs[TEAM] = levels(teams, _centered(rng.normal(0, team_sd, n_teams)))
    coefs[OPPONENT] = levels(teams, _centered(rng.normal(0, opponent_sd, n_teams)))
    coefs[SK_GENEROSITY] = levels(teams, _centered(rng.normal(0, generosity_sd, n_teams)))
    coefs[SK_BIAS] = levels(teams, _centered(rng.normal(0, bias_sd, n_teams)))
    passer = {}
    for t in teams:
        for pos in POSITIONS:
            ids = [p for p in roster if roster[p].team_id == t and roster[p].position is pos]
            vals = rng.normal(0, passer_sd, len(ids))
            if len(ids) > 1:
                vals = _centered(vals)
            passer.update(zip(ids, vals))
    coefs[PASSER] = levels(sorted(passer), np.array([passer[p] for p in sorted(passer)]))
    coefs[POSITION] = levels([p.value for p in POSITIONS],
                             _centered(np.array([0.25, 0.08, 0.0, -0.1, -0.2])))
    for name, beta in zip(CONTINUOUS, (-0.55, -0.06, -0.02, 0.012, 0.03, -0.025)):
        coefs[name] = scalar(beta)
    zones = [z.value for z in ZONES]
    coefs[PASSER_ZONE] = levels(zones, _centered(rng.normal(0, 0.25, 6)))
    coefs[SHOOTER_ZONE] = levels(zones, _centered(rng.normal(0, 0.3, 6)))
    inter = rng.normal(0, 0.25, (6, 6))
    inter = inter - inter.mean(axis=0, keepdims=True) - inter.mean(axis=1, keepdims=True) + inter.mean()
    coefs[ZONE_PAIR] = levels([zone_pair_level(a, b) for a in ZONES for b in ZONES], inter.ravel())
    return GroundTruth(teams, roster, coefs)


# -- possession scripts -----------------------------------------------------------


@dataclass
class Frame:
    t: int
    players: dict[str, tuple[float, float]]  # on-court player -> normalized (x, y)
    ball: tuple[float, float, float]


@dataclass
class Possession:
    offense: str
    defense: str
    quarter: int
    events: list[tuple[int, EventKind, str, str]]  # (t, kind, team, player)
    frames: list[Frame]
    truth: Optional[PotentialAssist] = None
    made: bool = False


# zones sampled for passer/shooter locations; heaves are rare
ZONE_WEIGHTS = {CourtZone.DUNK: 0.12, CourtZone.PAINT: 0.22, CourtZone.LONG2: 0.22,
                CourtZone.ARC3: 0.24, CourtZone.CORNER3: 0.14, CourtZone.HEAVE: 0.06}
_ZONE_BOXES = {
    CourtZone.PAINT: (0.0, 19.0, 17.0, 33.0),
    CourtZone.LONG2: (0.0, 28.75, 3.0, 47.0),
    CourtZone.ARC3: (14.0, 39.0, 0.5, 49.5),
    CourtZone.CORNER3: (0.5, 14.0, 0.5, 49.5),
    CourtZone.HEAVE: (14.0, 46.5, 0.5, 49.5),
}


def sample_point(zone: CourtZone, rng: np.random.Generator) -> tuple[float, float]:
    """Uniform-ish point inside ``zone`` within the offensive half."""
    if zone is CourtZone.DUNK:
        r = 2.9 * math.sqrt(rng.random())
        a = rng.uniform(0, 2 * math.pi)
        return BASKET_X + r * math.cos(a), BASKET_Y + r * math.sin(a)
    x0, x1, y0, y1 = _ZONE_BOXES[zone]
    for _ in range(10_000):
        x, y = rng.uniform(x0, x1), rng.uniform(y0, y1)
        if zone_of(CourtPoint(x, y)) is zone:
            return x, y
    raise GenerationError(f"could not sample a point in {zone.value}")


def _in_half(p: tuple[float, float]) -> bool:
    return 0.0 <= p[0] <= 47.0 and 0.0 <= p[1] <= COURT_WIDTH


def _place_defenders(target: tuple[float, float], nearest: float, rng: np.random.Generator
                     ) -> list[tuple[float, float]]:
    """Five defender spots whose minimum distance to ``target`` is ``nearest``."""
    for _ in range(1000):
        a = rng.uniform(0, 2 * math.pi)
        first = (target[0] + nearest * math.cos(a), target[1] + nearest * math.sin(a))
        if _in_half(first):
            break
    else:
        raise GenerationError("cannot place nearest defender")
    out = [first]
    for _ in range(100_000):
        if len(out) == 5:
            return out
        p = (rng.uniform(0, 47.0), rng.uniform(0, COURT_WIDTH))
        if math.hypot(p[0] - target[0], p[1] - target[1]) > nearest + 0.5:
            out.append(p)
    raise GenerationError("cannot place remaining defenders")


# nearest-defender gaps are truncated here; a spot this far from any
# half-court point always exists
MAX_DEFENDER_GAP = 30.0


def _defender_gap(offset: float, scale: float, rng: np.random.Generator, n: Optional[int] = None):
    """``offset`` plus a Gamma(2, scale) draw, redrawn above ``MAX_DEFENDER_GAP``."""
    if n is None:
        while True:
            v = offset + rng.gamma(2.0, scale)
            if v <= MAX_DEFENDER_GAP:
                return v
    v = offset + rng.gamma(2.0, scale, n)
    bad = np.flatnonzero(v > MAX_DEFENDER_GAP)
    while len(bad):
        v[bad] = offset + rng.gamma(2.0, scale, len(bad))
        bad = bad[v[bad] > MAX_DEFENDER_GAP]
    return v


def _min_dist(p, others) -> float:
    return min(math.hypot(p[0] - q[0], p[1] - q[1]) for q in others)


def _drive_path(start: tuple[float, float], dribbles: int, kind: str, rng: np.random.Generator
                ) -> list[tuple[float, float]]:
    """Shooter positions at each dribble and at the shot release."""
    path = []
    x, y = start
    for _ in range(dribbles + 1):
        if kind == "drive":
            dx, dy = BASKET_X - x, BASKET_Y - y
            d = math.hypot(dx, dy)
            step = min(rng.uniform(2.0, 5.0), max(d - 1.0, 0.0))
            if d > 1e-9:
                x, y = x + step * dx / d, y + step * dy / d
            x, y = x + rng.normal(0, 0.4), y + rng.normal(0, 0.4)
        elif kind == "iso":
            x, y = x + rng.normal(0, 1.5), y + rng.normal(0, 1.5)
        else:  # catch-and-shoot pivot or small gather
            x, y = x + rng.normal(0, 0.5), y + rng.normal(0, 0.5)
        x = min(max(x, 0.5), 46.5)
        y = min(max(y, 0.5), COURT_WIDTH - 0.5)
        path.append((x, y))
    return path


def _lineup(truth: GroundTruth, team: str, rng: np.random.Generator) -> list[str]:
    players = []
    for pos in POSITIONS:
        pool = sorted(p for p, r in truth.roster.items() if r.team_id == team and r.position is pos)
        players.append(pool[int(rng.integers(len(pool)))])
    return players


def _frame(t, offense_pos, defense_pos, ball) -> Frame:
    players = dict(offense_pos)
    players.update(defense_pos)
    return Frame(t, players, ball)


def script_potential_assist(truth: GroundTruth, offense: str, defense: str, quarter: int,
                            t0: int, rng: np.random.Generator, game_id: str, home: str
                            ) -> Possession:
    """Inbound to the passer, a completed pass, the shooter's possession and a make."""
    off = _lineup(truth, offense, rng)
    dfn = _lineup(truth, defense, rng)
    i_passer, i_shooter = rng.choice(5, size=2, replace=False)
    passer, shooter = off[i_passer], off[i_shooter]
    inbounder = off[[k for k in range(5) if k not in (i_passer, i_shooter)][0]]

    zones = list(ZONE_WEIGHTS)
    w = np.array([ZONE_WEIGHTS[z] for z in zones])
    pz = zones[int(rng.choice(6, p=w))]
    sz = zones[int(rng.choice(6, p=w))]
    P = sample_point(pz, rng)
    S = sample_point(sz, rng)

    template = rng.choice(["catch_and_shoot", "drive", "iso"], p=[0.4, 0.45, 0.15])
    if template == "catch_and_shoot":
        k = 0
        c1_ms = int(rng.integers(350, 1600))
    elif template == "drive":
        k = int(rng.integers(1, 6))
        c1_ms = int(min(6900, 400 + 420 * k + rng.integers(0, 900)))
    else:
        k = int(rng.integers(3, 15))
        c1_ms = int(min(7000, 300 + 440 * k + rng.integers(0, 600)))
    c1_ms = max(c1_ms, 100 * (k + 1))
    path = _drive_path(S, k, "catch_and_shoot" if k == 0 else str(template), rng)

    c5 = _defender_gap(2.0, 2.2, rng)
    c6 = _defender_gap(1.5, 3.0, rng)
    d_release = _place_defenders(P, c5, rng)
    d_reception = _place_defenders(S, c6, rng)

    others = {p: (rng.uniform(0, 40.0), rng.uniform(2.0, 48.0)) for p in off
              if p not in (passer, shooter)}
    shooter_before = (min(max(S[0] + rng.normal(0, 3), 0.5), 46.5),
                      min(max(S[1] + rng.normal(0, 3), 0.5), 49.5))

    flight_ms = int(round(math.hypot(P[0] - S[0], P[1] - S[1]) * 25)) + 120
    pre_dribbles = int(rng.integers(0, 4))
    t_inbound = t0
    t_catch = t0 + 800
    t_release = t_catch + 400 * (pre_dribbles + 1)
    t_reception = t_release + flight_ms
    t_shot = t_reception + c1_ms
    t_made = t_shot + 600
    dribble_ts = [t_reception + round(c1_ms * (i + 1) / (k + 1)) for i in range(k)]

    ev = [(t_inbound, EventKind.INBOUND_PASS, offense, inbounder),
          (t_catch, EventKind.PASS_RECEIVE, offense, passer)]
    ev += [(t_catch + 400 * (i + 1), EventKind.DRIBBLE, offense, passer) for i in range(pre_dribbles)]
    ev += [(t_release, EventKind.PASS_RELEASE, offense, passer),
           (t_reception, EventKind.PASS_RECEIVE, offense, shooter)]
    ev += [(t, EventKind.DRIBBLE, offense, shooter) for t in dribble_ts]
    ev += [(t_shot, EventKind.SHOT_RELEASE, offense, shooter),
           (t_made, EventKind.SHOT_MADE, offense, shooter)]

    def offense_at(shooter_xy):
        pos = dict(others)
        pos[passer] = P
        pos[shooter] = shooter_xy
        return pos

    frames = [_frame(t_release, offense_at(shooter_before), dict(zip(dfn, d_release)), (*P, 5.0)),
              _frame(t_reception, offense_at(S), dict(zip(dfn, d_reception)), (*S, 5.0))]
    for t, xy in zip(dribble_ts, path[:-1]):
        frames.append(_frame(t, offense_at(xy), dict(zip(dfn, d_reception)), (*xy, 1.0)))
    Q = path[-1]
    frames.append(_frame(t_shot, offense_at(Q), dict(zip(dfn, d_reception)), (*Q, 7.0)))

    anchors = [S] + path
    c3 = math.fsum(math.hypot(b[0] - a[0], b[1] - a[1]) for a, b in zip(anchors[:-1], anchors[1:]))
    pa = PotentialAssist(
        game_id=game_id, passer=passer, shooter=shooter, team=offense, opponent=defense,
        is_home=offense == home, scorekeeper=home,
        passer_position=truth.roster[passer].position,
        c1_possession_time=c1_ms / 1000.0,
        c2_dribbles=k,
        c3_travel_distance=c3,
        c4_pass_distance=math.hypot(P[0] - S[0], P[1] - S[1]),
        c5_passer_defender_dist=_min_dist(P, d_release),
        c6_shooter_defender_dist=_min_dist(S, d_reception),
        c7_passer_zone=zone_of(CourtPoint(*P)),
        c8_shooter_zone=zone_of(CourtPoint(*S)),
        label_recorded_assist=False,
        shot_made_ms=t_made,
    )
    if not (0 < pa.c1_possession_time <= 7.0):
        raise GenerationError(f"possession time {pa.c1_possession_time} outside (0, 7]")
    return Possession(offense, defense, quarter, ev, frames, pa, made=True)


DECOY_KINDS = ("inbound_score", "late_shot", "putback", "turnover")


def script_decoy(truth: GroundTruth, offense: str, defense: str, quarter: int, t0: int,
                 rng: np.random.Generator) -> Possession:
    """A possession that must not yield a potential assist."""
    kind = DECOY_KINDS[int(rng.integers(len(DECOY_KINDS)))]
    off = _lineup(truth, offense, rng)
    dfn = _lineup(truth, defense, rng)
    a, b = (off[i] for i in rng.choice(5, size=2, replace=False))
    A = sample_point(CourtZone.ARC3, rng)
    B = sample_point(CourtZone.PAINT, rng)
    spots = {p: (rng.uniform(0, 40.0), rng.uniform(2.0, 48.0)) for p in off}
    d_spots = dict(zip(dfn, _place_defenders(B, 3.0, rng)))
    ev: list[tuple[int, EventKind, str, str]] = []
    t = t0
    made = False
    if kind == "inbound_score":
        ev += [(t, EventKind.INBOUND_PASS, offense, a), (t + 700, EventKind.PASS_RECEIVE, offense, b),
               (t + 1500, EventKind.SHOT_RELEASE, offense, b), (t + 2100, EventKind.SHOT_MADE, offense, b)]
        shot_t, made = t + 1500, True
    elif kind == "late_shot":
        gap = int(rng.integers(7001, 9500))
        ev += [(t, EventKind.PASS_RELEASE, offense, a), (t + 600, EventKind.PASS_RECEIVE, offense, b)]
        ev += [(t + 600 + 700 * (i + 1), EventKind.DRIBBLE, offense, b) for i in range(gap // 700 - 1)]
        ev += [(t + 600 + gap, EventKind.SHOT_RELEASE, offense, b),
               (t + 1200 + gap, EventKind.SHOT_MADE, offense, b)]
        shot_t, made = t + 600 + gap, True
    elif kind == "putback":
        ev += [(t, EventKind.PASS_RELEASE, offense, a), (t + 600, EventKind.PASS_RECEIVE, offense, b),
               (t + 1200, EventKind.SHOT_RELEASE, offense, b),
               (t + 1800, EventKind.SHOT_MISSED, offense, b), (t + 2200, EventKind.REBOUND, offense, b),
               (t + 2700, EventKind.SHOT_RELEASE, offense, b),
               (t + 3300, EventKind.SHOT_MADE, offense, b)]
        shot_t, made = t + 2700, True
    else:
        ev += [(t, EventKind.PASS_RELEASE, offense, a), (t + 600, EventKind.PASS_RECEIVE, offense, b),
               (t + 1400, EventKind.TURNOVER, offense, b)]
        shot_t = None
    frames = []
    for te, kind_e, _, pl in ev:
        if kind_e in (EventKind.SHOT_RELEASE, EventKind.PASS_RELEASE, EventKind.PASS_RECEIVE):
            pos = dict(spots)
            pos[b] = B
            frames.append(_frame(te, pos, d_spots, (*B, 5.0)))
    if shot_t is None:
        frames = frames[:2]
    return Possession(offense, defense, quarter, ev, frames, None, made=made)


# -- assembling games ----------------------------------------------------------------


def attacks_high(team: str, home: str, quarter: int) -> bool:
    """Raw-frame direction: home attacks the low basket in the first half."""
    first_half = quarter <= 2
    return (team == home) != first_half


def assemble_game(game_id: str, date: str, home: str, away: str, possessions: Sequence[Possession],
                  roster: Mapping[str, RosterEntry], box: Mapping[str, BoxLine],
                  frame_step_ms: Optional[int] = None) -> GameBundle:
    """Build a raw (unnormalized) bundle from scripted possessions."""
    events: list[EventRecord] = []
    times, quarters, clocks, offsets = [], [], [], [0]
    kinds, teams, players, xs, ys, zs = [], [], [], [], [], []
    team_of = {p: r.team_id for p, r in roster.items()}
    for pos in possessions:
        high = attacks_high(pos.offense, home, pos.quarter)
        for t, kind, team, pl in pos.events:
            events.append(EventRecord(game_id, int(t), kind, team, pl))
        frames = _fill_frames(pos.frames, frame_step_ms) if frame_step_ms else pos.frames
        q_start = (pos.quarter - 1) * QUARTER_MS
        for f in frames:
            if times and f.t <= times[-1]:
                raise GenerationError("frames overlap in time")
            times.append(f.t)
            quarters.append(pos.quarter)
            clocks.append(max(0.0, (QUARTER_MS - (f.t - q_start)) / 1000.0))
            for pl in sorted(f.players, key=lambda p: (team_of[p] != pos.offense, p)):
                x, y = f.players[pl]
                if high:
                    x, y = COURT_LENGTH - x, COURT_WIDTH - y
                kinds.append("player")
                teams.append(team_of[pl])
                players.append(pl)
                xs.append(x)
                ys.append(y)
                zs.append(math.nan)
            bx, by, bz = f.ball
            if high:
                bx, by = COURT_LENGTH - bx, COURT_WIDTH - by
            kinds.append("ball")
            teams.append("")
            players.append("")
            xs.append(bx)
            ys.append(by)
            zs.append(bz)
            offsets.append(len(kinds))
    events.sort(key=lambda e: e.wall_time)
    table = MomentTable(
        wall_time=np.array(times, dtype=np.int64), quarter=np.array(quarters, dtype=np.int64),
        game_clock=np.array(clocks, dtype=float), offsets=np.array(offsets, dtype=np.int64),
        kind=np.array(kinds, dtype=object), team=np.array(teams, dtype=object),
        player=np.array(players, dtype=object), x=np.array(xs, dtype=float),
        y=np.array(ys, dtype=float), z=np.array(zs, dtype=float),
    )
    return GameBundle(game_id, date, home, away, table, tuple(events), dict(box), roster)


def _fill_frames(frames: Sequence[Frame], step: int) -> list[Frame]:
    """Insert linearly interpolated frames on a ``step`` ms grid between anchors."""
    out: list[Frame] = []
    for a, b in zip(frames[:-1], frames[1:]):
        out.append(a)
        t = (a.t // step + 1) * step
        while t < b.t:
            u = (t - a.t) / (b.t - a.t)
            pl = {p: (xa + u * (b.players[p][0] - xa), ya + u * (b.players[p][1] - ya))
                  for p, (xa, ya) in a.players.items()}
            ball = tuple(va + u * (vb - va) for va, vb in zip(a.ball, b.ball))
            out.append(Frame(t, pl, ball))
            t += step
    out.append(frames[-1])
    return out


@dataclass
class SyntheticGame:
    raw: GameBundle
    labels: frozenset
    truth: list[PotentialAssist]

    def bundle(self) -> GameBundle:
        """The game as ``ingest`` would load it (normalized)."""
        return normalize(self.raw)


def _draw_labels(truth: GroundTruth, pas: list[PotentialAssist], rng: np.random.Generator
                 ) -> list[PotentialAssist]:
    if not pas:
        return pas
    eta = linear_predictor(group_contributions(truth.as_fit(), pas))
    u = rng.random(len(pas))
    out = []
    for pa, p, ui in zip(pas, expit(eta), u):
        out.append(PotentialAssist(**{**pa.__dict__, "label_recorded_assist": bool(ui < p)}))
    return out


def generate_game(truth: GroundTruth, game_id: str, date: str, home: str, away: str,
                  rng: np.random.Generator, frame_step_ms: Optional[int] = None) -> SyntheticGame:
    plan = []
    for team in (home, away):
        n_pa = int(rng.poisson(truth.pa_per_team_game))
        n_decoy = int(rng.poisson(truth.decoys_per_team_game))
        plan += [(team, True)] * n_pa + [(team, False)] * n_decoy
    order = rng.permutation(len(plan))
    plan = [plan[i] for i in order]
    per_q = max(1, math.ceil(len(plan) / 4))
    possessions: list[Possession] = []
    for i, (team, is_pa) in enumerate(plan):
        q = min(4, i // per_q + 1)
        slot = i - (q - 1) * per_q
        t0 = (q - 1) * QUARTER_MS + 1000 + slot * (QUARTER_MS - 2000) // per_q
        t0 = (t0 // FRAME_MS) * FRAME_MS
        opp = away if team == home else home
        if is_pa:
            possessions.append(script_potential_assist(truth, team, opp, q, t0, rng, game_id, home))
        else:
            possessions.append(script_decoy(truth, team, opp, q, t0, rng))

    truth_pas = _draw_labels(truth, [p.truth for p in possessions if p.truth is not None], rng)
    labels = frozenset((game_id, pa.shot_made_ms, pa.passer)
                       for pa in truth_pas if pa.label_recorded_assist)

    box = {}
    stats = {}
    for team in (home, away):
        made_scripted = sum(1 for p in possessions if p.offense == team and p.made)
        scripted_ast = sum(1 for pa in truth_pas if pa.team == team and pa.label_recorded_assist)
        extra_made = int(rng.poisson(10))
        inbound_ast = int(rng.binomial(sum(1 for p in possessions if p.offense == team and p.made
                                           and p.truth is None), 0.3))
        fgm = made_scripted + extra_made
        fga = fgm + int(rng.poisson(38))
        stats[team] = (fgm, fga, scripted_ast + inbound_ast)
    for team in (home, away):
        opp = away if team == home else home
        fgm, fga, ast = stats[team]
        opp_missed = stats[opp][1] - stats[opp][0]
        blk = int(rng.binomial(opp_missed, 0.1))
        box[team] = BoxLine(game_id, date, team, opp, team == home, fgm, fga, ast, blk)

    raw = assemble_game(game_id, date, home, away, possessions, truth.roster, box, frame_step_ms)
    return SyntheticGame(raw, labels, truth_pas)


def iter_season(truth: GroundTruth, n_games: int, seed: int,
                frame_step_ms: Optional[int] = None) -> Iterator[SyntheticGame]:
    """Games one at a time; each game draws from its own spawned seed so the
    output does not depend on how games are scheduled."""
    if n_games < 1:
        raise InvalidInputError("n_games must be >= 1")
    children = np.random.SeedSequence(seed).spawn(n_games + 1)
    sched = np.random.default_rng(children[0])
    teams = truth.teams
    for g in range(n_games):
        home = teams[g % len(teams)]
        away = teams[(g % len(teams) + 1 + int(sched.integers(len(teams) - 1))) % len(teams)]
        date = (SEASON_START + dt.timedelta(days=g // max(1, len(teams) // 2))).isoformat()
        rng = np.random.default_rng(children[g + 1])
        yield generate_game(truth, f"G{g + 1:05d}", date, home, away, rng, frame_step_ms)


def generate_season(truth: GroundTruth, n_games: int, seed: int,
                    frame_step_ms: Optional[int] = None) -> list[SyntheticGame]:
    return list(iter_season(truth, n_games, seed, frame_step_ms))


def write_season(games: Iterable[SyntheticGame], truth: GroundTruth, out_dir: str) -> int:
    """Emit moments/events/box/roster/assists CSVs, ground_truth.json and the
    generator's own covariate table (truth_potential_assists.csv).

    ``games`` may be a generator; returns the number of games written.
    """
    os.makedirs(out_dir, exist_ok=True)
    labels: list[tuple] = []
    pas: list[PotentialAssist] = []

    def raw():
        for g in games:
            labels.extend(g.labels)
            pas.extend(g.truth)
            yield g.raw

    lines = write_bundles(raw(), out_dir, truth.roster)
    write_assist_labels(labels, os.path.join(out_dir, "assists.csv"))
    write_potential_assists(pas, os.path.join(out_dir, "truth_potential_assists.csv"))
    truth.save(os.path.join(out_dir, "ground_truth.json"))
    return len(lines) // 2


# -- covariate-level sampling -------------------------------------------------------------


def _sample_points(zones: np.ndarray, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized rejection sampling of one point per requested zone index."""
    from .core import zone_codes

    n = len(zones)
    x, y = np.empty(n), np.empty(n)
    for code, zone in enumerate(ZONES):
        todo = np.flatnonzero(zones == code)
        while len(todo):
            if zone is CourtZone.DUNK:
                r = 2.9 * np.sqrt(rng.random(len(todo)))
                a = rng.uniform(0, 2 * np.pi, len(todo))
                px, py = BASKET_X + r * np.cos(a), BASKET_Y + r * np.sin(a)
            else:
                x0, x1, y0, y1 = _ZONE_BOXES[zone]
                px, py = rng.uniform(x0, x1, len(todo)), rng.uniform(y0, y1, len(todo))
            ok = zone_codes(px, py) == code
            x[todo[ok]], y[todo[ok]] = px[ok], py[ok]
            todo = todo[~ok]
    return x, y


def sample_potential_assists(truth: GroundTruth, n_games: int, seed: int) -> list[PotentialAssist]:
    """Labelled potential assists drawn straight from the covariate
    distributions of the possession scripts, without tracking data.

    Much faster than :func:`iter_season`; meant for replicate studies of the
    estimation stage. Distance covariates follow the scripts' marginals rather
    than their exact geometry.
    """
    if n_games < 1:
        raise InvalidInputError("n_games must be >= 1")
    rng = np.random.default_rng(seed)
    teams = truth.teams
    by_cell: dict[tuple[str, Position], list[str]] = {}
    for pid in sorted(truth.roster):
        r = truth.roster[pid]
        by_cell.setdefault((r.team_id, r.position), []).append(pid)

    rows = []
    for g in range(n_games):
        home = teams[g % len(teams)]
        away = teams[(g % len(teams) + 1 + int(rng.integers(len(teams) - 1))) % len(teams)]
        for team, opp in ((home, away), (away, home)):
            for _ in range(int(rng.poisson(truth.pa_per_team_game))):
                pos = POSITIONS[int(rng.integers(5))]
                cell = by_cell[(team, pos)]
                rows.append((f"G{g + 1:05d}", team, opp, home, pos, cell[int(rng.integers(len(cell)))]))
    n = len(rows)
    w = np.array([ZONE_WEIGHTS[z] for z in ZONES])
    pz = rng.choice(6, size=n, p=w)
    sz = rng.choice(6, size=n, p=w)
    px, py = _sample_points(pz, rng)
    sx, sy = _sample_points(sz, rng)
    template = rng.choice(3, size=n, p=[0.4, 0.45, 0.15])
    k = np.where(template == 0, 0, np.where(template == 1, rng.integers(1, 6, n), rng.integers(3, 15, n)))
    c1 = np.where(template == 0, rng.integers(350, 1600, n),
                  np.where(template == 1, np.minimum(6900, 400 + 420 * k + rng.integers(0, 900, n)),
                           np.minimum(7000, 300 + 440 * k + rng.integers(0, 600, n))))
    c1 = np.maximum(c1, 100 * (k + 1)) / 1000.0
    step = np.where(template == 0, np.abs(rng.normal(0, 0.6, n)),
                    np.where(template == 1, rng.uniform(2.0, 5.0, n), np.abs(rng.normal(0, 1.9, n))))
    c3 = (k + 1) * step
    c4 = np.hypot(px - sx, py - sy)
    c5 = _defender_gap(2.0, 2.2, rng, n)
    c6 = _defender_gap(1.5, 3.0, rng, n)
    pas = []
    for i, (gid, team, opp, home, pos, passer) in enumerate(rows):
        pas.append(PotentialAssist(
            game_id=gid, passer=passer, shooter=passer, team=team, opponent=opp,
            is_home=team == home, scorekeeper=home, passer_position=pos,
            c1_possession_time=float(c1[i]), c2_dribbles=int(k[i]),
            c3_travel_distance=float(c3[i]), c4_pass_distance=float(c4[i]),
            c5_passer_defender_dist=float(c5[i]), c6_shooter_defender_dist=float(c6[i]),
            c7_passer_zone=ZONES[pz[i]], c8_shooter_zone=ZONES[sz[i]],
            label_recorded_assist=False, shot_made_ms=i,
        ))
    return _draw_labels(truth, pas, rng)


def planted_bias_truth(seed: int, scorekeeper: str, bias: float = -0.8,
                       generosity_sd: float = 0.2, bias_sd: float = 0.15) -> GroundTruth:
    """Default league with one scorekeeper's bias fixed at ``bias`` and its
    generosity at the league mean; groups are re-centered afterwards."""
    truth = default_truth(seed, generosity_sd=generosity_sd, bias_sd=bias_sd)
    for group, value in ((SK_BIAS, bias), (SK_GENEROSITY, 0.0)):
        levels = dict(truth.coefficients[group])
        levels[scorekeeper] = value
        mean = sum(levels.values()) / len(levels)
        truth.coefficients[group] = {k: v - mean for k, v in levels.items()}
    return truth


# -- the worked example play ---------------------------------------------------------------


WORKED_PLAY = {
    "passer_release": (12.0, 20.0),
    "shooter_reception": (23.09, 20.0),
    "dribbles": [(16.09, 20.0), (10.09, 20.0)],
    "shot_release": (2.68, 20.0),
    "t_release": 400,
    "t_reception": 1000,
    "t_dribbles": [1600, 2200],
    "t_shot": 2820,
    "t_made": 3400,
}


def worked_play_fixture() -> SyntheticGame:
    """A one-possession game reproducing the annotated Clippers-Lakers play:
    1.82 s possession, 2 dribbles, 20.41 ft travelled, 11.09 ft pass, nearest
    defenders 3.58 ft (passer) and 13.63 ft (shooter), Paint to Long 2."""
    lac = [("LAC-PAUL", "Chris Paul", Position.POINT_GUARD),
           ("LAC-REDICK", "J.J. Redick", Position.SHOOTING_GUARD),
           ("LAC-MBAHAMOUTE", "Luc Mbah a Moute", Position.SMALL_FORWARD),
           ("LAC-GRIFFIN", "Blake Griffin", Position.POWER_FORWARD),
           ("LAC-JORDAN", "DeAndre Jordan", Position.CENTER)]
    lal = [("LAL-CLARKSON", "Jordan Clarkson", Position.POINT_GUARD),
           ("LAL-BRYANT", "Kobe Bryant", Position.SHOOTING_GUARD),
           ("LAL-YOUNG", "Nick Young", Position.SMALL_FORWARD),
           ("LAL-RANDLE", "Julius Randle", Position.POWER_FORWARD),
           ("LAL-HIBBERT", "Roy Hibbert", Position.CENTER)]
    roster = {p: RosterEntry(p, n, "LAC", pos) for p, n, pos in lac}
    roster.update({p: RosterEntry(p, n, "LAL", pos) for p, n, pos in lal})
    f = WORKED_PLAY
    P, S = f["passer_release"], f["shooter_reception"]
    offense_other = {"LAC-REDICK": (20.0, 45.0), "LAC-MBAHAMOUTE": (25.0, 8.0),
                     "LAC-JORDAN": (4.0, 31.0)}
    # passer's man 3.58 ft away at the pass; the rest stay at least 8 ft off
    d_release = {"LAL-CLARKSON": (12.0, 23.58), "LAL-BRYANT": (24.0, 12.0),
                 "LAL-YOUNG": (20.0, 40.0), "LAL-RANDLE": (30.0, 26.0),
                 "LAL-HIBBERT": (5.0, 30.0)}
    # at the catch the closest defender is 13.63 ft from Griffin
    d_reception = {"LAL-CLARKSON": (5.0, 23.58), "LAL-BRYANT": (23.09, 6.37),
                   "LAL-YOUNG": (22.0, 40.0), "LAL-RANDLE": (40.0, 26.0),
                   "LAL-HIBBERT": (5.0, 30.0)}

    def off(shooter_xy):
        pos = dict(offense_other)
        pos["LAC-PAUL"] = P
        pos["LAC-GRIFFIN"] = shooter_xy
        return pos

    frames = [Frame(0, {**off((30.0, 20.0)), **d_release}, (*P, 4.0)),
              Frame(f["t_release"], {**off((30.0, 20.0)), **d_release}, (*P, 5.0)),
              Frame(f["t_reception"], {**off(S), **d_reception}, (*S, 5.0))]
    for t, xy in zip(f["t_dribbles"], f["dribbles"]):
        frames.append(Frame(t, {**off(xy), **d_reception}, (*xy, 1.0)))
    frames.append(Frame(f["t_shot"], {**off(f["shot_release"]), **d_reception},
                        (*f["shot_release"], 7.0)))
    frames.append(Frame(f["t_made"], {**off(f["shot_release"]), **d_reception},
                        (BASKET_X, BASKET_Y, 10.0)))
    ev = [(0, EventKind.PASS_RECEIVE, "LAC", "LAC-PAUL"),
          (f["t_release"], EventKind.PASS_RELEASE, "LAC", "LAC-PAUL"),
          (f["t_reception"], EventKind.PASS_RECEIVE, "LAC", "LAC-GRIFFIN")]
    ev += [(t, EventKind.DRIBBLE, "LAC", "LAC-GRIFFIN") for t in f["t_dribbles"]]
    ev += [(f["t_shot"], EventKind.SHOT_RELEASE, "LAC", "LAC-GRIFFIN"),
           (f["t_made"], EventKind.SHOT_MADE, "LAC", "LAC-GRIFFIN")]
    poss = Possession("LAC", "LAL", 1, ev, frames, None, made=True)
    gid = "WP0001"
    box = {"LAC": BoxLine(gid, "2015-01-07", "LAC", "LAL", True, 1, 1, 1, 0),
           "LAL": BoxLine(gid, "2015-01-07", "LAL", "LAC", False, 0, 0, 0, 0)}
    raw = assemble_game(gid, "2015-01-07", "LAC", "LAL", [poss], roster, box,
                        frame_step_ms=FRAME_MS)
    labels = frozenset({(gid, f["t_made"], "LAC-PAUL")})
    return SyntheticGame(raw, labels, [])


# -- team-level synthetic data --------------------------------------------------------------


def default_team_truth(seed: int = 0, n_teams: int = 30, base: float = 0.58,
                       scale: float = 0.03) -> dict[str, dict[str, float]]:
    rng = np.random.default_rng(seed)
    teams = list(NBA_TEAMS[:n_teams])
    return {
        INTERCEPT: {SCALAR: base},
        HOME: {SCALAR: 0.01},
        TEAM: dict(zip(teams, _centered(rng.normal(0, scale, n_teams)).tolist())),
        OPPONENT: dict(zip(teams, _centered(rng.normal(0, scale, n_teams)).tolist())),
        SK_GENEROSITY: dict(zip(teams, _centered(rng.normal(0, scale, n_teams)).tolist())),
        SK_BIAS: dict(zip(teams, _centered(rng.normal(0, scale, n_teams)).tolist())),
    }


def generate_team_ratios(effects: Mapping[str, Mapping[str, float]], n_games: int, seed: int,
                         noise_sd: float = 0.05, kind: RatioKind = RatioKind.AR
                         ) -> list[TeamGameRatio]:
    """Two observations per game drawn from the linear team-level model."""
    rng = np.random.default_rng(seed)
    teams = sorted(effects[TEAM])
    out = []
    for g in range(n_games):
        home = teams[g % len(teams)]
        away = teams[(g % len(teams) + 1 + int(rng.integers(len(teams) - 1))) % len(teams)]
        for team, opp, is_home in ((home, away, True), (away, home, False)):
            mu = (effects[INTERCEPT][SCALAR] + is_home * effects[HOME][SCALAR]
                  + effects[TEAM][team] + effects[OPPONENT][opp]
                  + effects[SK_GENEROSITY][home] + is_home * effects[SK_BIAS][home])
            out.append(TeamGameRatio(f"G{g + 1:05d}", team, opp, is_home, home, kind,
                                     float(mu + (rng.normal(0, noise_sd) if noise_sd else 0.0))))
    return out


# -- recovery ----------------------------------------------------------------------------


def zone_table(coefficients: Mapping[str, Mapping[str, float]]) -> np.ndarray:
    """6x6 total zone contribution: passer zone + shooter zone + pair."""
    pz, sz, pair = (coefficients.get(g, {}) for g in (PASSER_ZONE, SHOOTER_ZONE, ZONE_PAIR))
    return np.array([[pz.get(a.value, 0.0) + sz.get(b.value, 0.0)
                      + pair.get(zone_pair_level(a, b), 0.0) for b in ZONES] for a in ZONES])


def zone_decomposition(coefficients: Mapping[str, Mapping[str, float]]) -> dict[str, np.ndarray]:
    """Identifiable row / column / interaction parts of the zone table.

    The pair indicators span both main-effect groups, so only this
    decomposition of the summed table is comparable across fits.
    """
    t = zone_table(coefficients)
    grand = t.mean()
    rows = t.mean(axis=1) - grand
    cols = t.mean(axis=0) - grand
    inter = t - rows[:, None] - cols[None, :] - grand
    return {PASSER_ZONE: rows, SHOOTER_ZONE: cols, ZONE_PAIR: inter.ravel()}


def _compare(a: np.ndarray, b: np.ndarray) -> dict[str, float]:
    a, b = a - a.mean(), b - b.mean()
    r = float(np.corrcoef(a, b)[0, 1]) if a.std() > 0 and b.std() > 0 else math.nan
    return {"n_levels": int(len(a)), "correlation": r,
            "rmse": float(np.sqrt(np.mean((a - b) ** 2)))}


def recovery_report(truth: GroundTruth, fit: ModelFit) -> dict[str, dict[str, float]]:
    """Correlation and RMSE between centered fitted and centered planted
    coefficients for every group; scalar groups report the absolute error.
    Zone groups are compared through :func:`zone_decomposition`."""
    zt, zf = zone_decomposition(truth.coefficients), zone_decomposition(fit.coefficients)
    out = {}
    for g, planted in truth.coefficients.items():
        if g == INTERCEPT:
            continue
        est = fit.coefficients.get(g, {})
        if g in zt:
            out[g] = _compare(zt[g], zf[g])
        elif g in ONE_HOT:
            shared = sorted(set(planted) & set(est))
            if len(shared) < 2:
                continue
            out[g] = _compare(np.array([planted[k] for k in shared]),
                              np.array([est[k] for k in shared]))
        else:
            err = abs(est.get(SCALAR, 0.0) - planted[SCALAR])
            out[g] = {"n_levels": 1, "correlation": math.nan, "rmse": err}
    return out
