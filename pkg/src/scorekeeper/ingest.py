"""CSV loading, validation and offensive normalization of tracking data.

The four input tables share ``game_id`` keys and may hold any number of
games. ``load_games`` splits them into one ``GameBundle`` per game.
"""

from __future__ import annotations

import logging
import os
import warnings
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from .core import (
    COURT_LENGTH,
    COURT_WIDTH,
    FRAME_MS,
    CourtPoint,
    DataQualityError,
    Entity,
    EventKind,
    EventRecord,
    GameId,
    Moment,
    ParseError,
    PlayerId,
    Position,
    RatioKind,
    TeamGameRatio,
    TeamId,
    ValidationError,
)

logger = logging.getLogger(__name__)

BOUNDS_MARGIN = 5.0
MAX_MISSING_BALL = 0.01
SNAP_TOLERANCE_MS = 2 * FRAME_MS

MOMENT_COLUMNS = ["game_id", "quarter", "wall_time_ms", "game_clock_s", "entity",
                  "team_id", "player_id", "x_ft", "y_ft", "z_ft"]
EVENT_COLUMNS = ["game_id", "wall_time_ms", "kind", "team_id", "player_id"]
BOX_COLUMNS = ["game_id", "date", "team_id", "opp_id", "is_home", "fgm", "fga", "ast", "blk"]
ROSTER_COLUMNS = ["player_id", "name", "team_id", "position"]


class ObservationSkipped(UserWarning):
    """A team-game could not produce a ratio and was left out."""


@dataclass(frozen=True)
class RosterEntry:
    player_id: PlayerId
    name: str
    team_id: TeamId
    position: Position


@dataclass(frozen=True)
class BoxLine:
    game_id: GameId
    date: str
    team_id: TeamId
    opp_id: TeamId
    is_home: bool
    fgm: int
    fga: int
    ast: int
    blk: int


@dataclass(frozen=True, eq=False)
class MomentTable:
    """Columnar store of a game's moments.

    Entity rows for moment ``i`` live in ``offsets[i]:offsets[i + 1]``.
    """

    wall_time: np.ndarray
    quarter: np.ndarray
    game_clock: np.ndarray
    offsets: np.ndarray
    kind: np.ndarray
    team: np.ndarray
    player: np.ndarray
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray

    def __post_init__(self):
        for name in ("wall_time", "quarter", "game_clock", "offsets", "kind",
                     "team", "player", "x", "y", "z"):
            getattr(self, name).flags.writeable = False

    def __len__(self) -> int:
        return len(self.wall_time)

    def equals(self, other: "MomentTable") -> bool:
        names = ("wall_time", "quarter", "game_clock", "offsets", "kind",
                 "team", "player", "x", "y", "z")
        return all(
            np.array_equal(getattr(self, n), getattr(other, n), equal_nan=n in ("z", "game_clock"))
            for n in names
        )

    def nearest(self, t: int, tolerance_ms: int = SNAP_TOLERANCE_MS) -> Optional[int]:
        """Index of the moment closest to ``t`` (earlier wins ties), or None."""
        n = len(self.wall_time)
        if n == 0:
            return None
        k = int(np.searchsorted(self.wall_time, t, side="left"))
        best = None
        for j in (k - 1, k):
            if 0 <= j < n:
                gap = abs(int(self.wall_time[j]) - t)
                if best is None or gap < best[0]:
                    best = (gap, j)
        if best is None or best[0] > tolerance_ms:
            return None
        return best[1]

    def position(self, i: int, player_id: PlayerId) -> Optional[CourtPoint]:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        for r in range(lo, hi):
            if self.player[r] == player_id and self.kind[r] == "player":
                return CourtPoint(float(self.x[r]), float(self.y[r]))
        return None

    def players(self, i: int, team_id: Optional[TeamId] = None) -> list[tuple[PlayerId, CourtPoint]]:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        out = []
        for r in range(lo, hi):
            if self.kind[r] == "player" and (team_id is None or self.team[r] == team_id):
                out.append((self.player[r], CourtPoint(float(self.x[r]), float(self.y[r]))))
        return out

    def ball(self, i: int) -> Optional[CourtPoint]:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        for r in range(lo, hi):
            if self.kind[r] == "ball":
                return CourtPoint(float(self.x[r]), float(self.y[r]), float(self.z[r]))
        return None

    def moment(self, i: int, game_id: GameId = "") -> Moment:
        lo, hi = self.offsets[i], self.offsets[i + 1]
        ents = []
        for r in range(lo, hi):
            z = None if np.isnan(self.z[r]) else float(self.z[r])
            ents.append(Entity(
                kind=str(self.kind[r]),
                point=CourtPoint(float(self.x[r]), float(self.y[r]), z),
                team_id=self.team[r] or None,
                player_id=self.player[r] or None,
            ))
        return Moment(game_id, int(self.quarter[i]), float(self.game_clock[i]),
                      int(self.wall_time[i]), tuple(ents))

    def with_xy(self, x: np.ndarray, y: np.ndarray) -> "MomentTable":
        return replace(self, x=x, y=y)


@dataclass(frozen=True, eq=False)
class GameBundle:
    game_id: GameId
    date: str
    home: TeamId
    away: TeamId
    moments: MomentTable
    events: tuple[EventRecord, ...]
    box: Mapping[TeamId, BoxLine]
    roster: Mapping[PlayerId, RosterEntry] = field(default_factory=dict)

    def opponent_of(self, team: TeamId) -> TeamId:
        if team == self.home:
            return self.away
        if team == self.away:
            return self.home
        raise ValidationError(f"team {team!r} is not playing in game {self.game_id}")

    def equals(self, other: "GameBundle") -> bool:
        return (
            self.game_id == other.game_id
            and self.date == other.date
            and self.home == other.home
            and self.away == other.away
            and self.events == other.events
            and dict(self.box) == dict(other.box)
            and self.moments.equals(other.moments)
        )


# -- CSV reading ----------------------------------------------------------


def _read_table(path: str, columns: Sequence[str]) -> pd.DataFrame:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise ParseError("missing header row", path) from None
    except pd.errors.ParserError as exc:
        raise ParseError(str(exc), path) from None
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", path, 1)
    return df


def _numeric(df: pd.DataFrame, col: str, path: str, integer: bool = False,
             allow_empty: bool = False) -> np.ndarray:
    raw = df[col].str.strip()
    values = pd.to_numeric(raw, errors="coerce")
    bad = values.isna().to_numpy()
    if allow_empty:
        bad &= (raw != "").to_numpy()
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise ParseError(f"bad {col} value {df[col].iloc[row]!r}", path, row + 2)
    arr = values.to_numpy(dtype=float)
    if integer:
        frac = arr != np.round(arr)
        if frac.any():
            row = int(np.flatnonzero(frac)[0])
            raise ParseError(f"{col} must be an integer", path, row + 2)
        return arr.astype(np.int64)
    return arr


def _exact_floats(df: pd.DataFrame, col: str) -> np.ndarray:
    # Python's float() parser round-trips repr() output exactly
    raw = df[col].str.strip().replace("", "nan")
    return np.array(raw.to_numpy(dtype=object), dtype=float)


def _parse_bool(values: pd.Series, path: str, col: str) -> np.ndarray:
    mapping = {"1": True, "true": True, "t": True, "0": False, "false": False, "f": False}
    out = np.empty(len(values), dtype=bool)
    for i, v in enumerate(values):
        key = v.strip().lower()
        if key not in mapping:
            raise ParseError(f"bad {col} value {v!r}", path, i + 2)
        out[i] = mapping[key]
    return out


def read_roster(path: str) -> dict[PlayerId, RosterEntry]:
    df = _read_table(path, ROSTER_COLUMNS)
    roster: dict[PlayerId, RosterEntry] = {}
    for i, row in enumerate(df.itertuples(index=False)):
        pid = row.player_id.strip()
        if not pid:
            raise ParseError("empty player_id", path, i + 2)
        try:
            pos = Position.parse(row.position)
        except ValueError as exc:
            raise ParseError(str(exc), path, i + 2) from None
        if pid in roster:
            raise ParseError(f"duplicate player {pid!r}", path, i + 2)
        roster[pid] = RosterEntry(pid, row.name, row.team_id.strip(), pos)
    return roster


def read_box(path: str) -> dict[GameId, list[BoxLine]]:
    df = _read_table(path, BOX_COLUMNS)
    ints = {c: _numeric(df, c, path, integer=True) for c in ("fgm", "fga", "ast", "blk")}
    home = _parse_bool(df["is_home"], path, "is_home")
    games: dict[GameId, list[BoxLine]] = {}
    for i in range(len(df)):
        if min(ints[c][i] for c in ints) < 0:
            raise ParseError("negative box count", path, i + 2)
        line = BoxLine(
            game_id=df["game_id"].iat[i].strip(), date=df["date"].iat[i].strip(),
            team_id=df["team_id"].iat[i].strip(), opp_id=df["opp_id"].iat[i].strip(),
            is_home=bool(home[i]), fgm=int(ints["fgm"][i]), fga=int(ints["fga"][i]),
            ast=int(ints["ast"][i]), blk=int(ints["blk"][i]),
        )
        if not line.game_id or not line.team_id or not line.opp_id:
            raise ParseError("empty identifier", path, i + 2)
        games.setdefault(line.game_id, []).append(line)
    return games


def read_events(path: str) -> dict[GameId, list[EventRecord]]:
    df = _read_table(path, EVENT_COLUMNS)
    times = _numeric(df, "wall_time_ms", path, integer=True)
    kinds = {k.value: k for k in EventKind}
    raw_kind = df["kind"].str.strip().str.upper()
    unknown = ~raw_kind.isin(list(kinds)).to_numpy()
    if unknown.any():
        row = int(np.flatnonzero(unknown)[0])
        raise ParseError(f"unknown event kind {df['kind'].iat[row]!r}", path, row + 2)
    gid, team, player = (df[c].str.strip() for c in ("game_id", "team_id", "player_id"))
    empty = ((gid == "") | (team == "") | (player == "")).to_numpy()
    if empty.any():
        raise ParseError("empty identifier", path, int(np.flatnonzero(empty)[0]) + 2)
    games: dict[GameId, list[EventRecord]] = {}
    for g, t, k, tm, p in zip(gid, times.tolist(), raw_kind, team, player):
        games.setdefault(g, []).append(EventRecord(g, t, kinds[k], tm, p))
    for g, evs in games.items():
        t = np.fromiter((e.wall_time for e in evs), dtype=np.int64, count=len(evs))
        if (np.diff(t) < 0).any():
            raise ValidationError(f"events for game {g} are not sorted by wall time")
    return games


_MOMENT_FLOATS = ("game_clock_s", "x_ft", "y_ft", "z_ft")
_MOMENT_IDS = ("game_id", "entity", "team_id", "player_id")


def _typed_moments(path: str) -> Optional[pd.DataFrame]:
    """Fast typed read; None when a value does not parse, so the string
    reader can report the offending line."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    dtypes = {c: "category" for c in _MOMENT_IDS}
    dtypes.update({c: np.float64 for c in _MOMENT_FLOATS + ("quarter", "wall_time_ms")})
    try:
        # round_trip parsing matches Python's float() on repr() output
        df = pd.read_csv(path, dtype=dtypes, keep_default_na=False,
                         na_values={c: [""] for c in _MOMENT_FLOATS}, float_precision="round_trip",
                         encoding="utf-8")
    except (ValueError, pd.errors.ParserError, pd.errors.EmptyDataError):
        return None
    if any(c not in df.columns for c in MOMENT_COLUMNS):
        return None
    for c in ("quarter", "wall_time_ms", "game_clock_s", "x_ft", "y_ft"):
        v = df[c].to_numpy()
        if not np.isfinite(v).all():
            return None
    for c in ("quarter", "wall_time_ms"):
        v = df[c].to_numpy()
        if (v != np.round(v)).any():
            return None
    return df


def _string_moments(path: str) -> pd.DataFrame:
    df = _read_table(path, MOMENT_COLUMNS)
    out = pd.DataFrame({
        "quarter": _numeric(df, "quarter", path, integer=True),
        "wall_time_ms": _numeric(df, "wall_time_ms", path, integer=True),
    })
    _numeric(df, "game_clock_s", path)
    _numeric(df, "x_ft", path)
    _numeric(df, "y_ft", path)
    _numeric(df, "z_ft", path, allow_empty=True)
    for c in _MOMENT_FLOATS:
        out[c] = _exact_floats(df, c)
    for c in _MOMENT_IDS:
        out[c] = df[c].astype("category")
    return out


def _ids(col: pd.Series, transform=str.strip) -> np.ndarray:
    # an object array sharing one string per category
    cats = np.array([transform(str(c)) for c in col.cat.categories] + [""], dtype=object)
    codes = col.cat.codes.to_numpy()
    return cats[np.where(codes < 0, len(cats) - 1, codes)]


def read_moments(path: str) -> dict[GameId, MomentTable]:
    df = _typed_moments(path)
    if df is None:
        df = _string_moments(path)
    if len(df) == 0:
        return {}
    quarter = df["quarter"].to_numpy().astype(np.int64)
    wall = df["wall_time_ms"].to_numpy().astype(np.int64)
    clock = df["game_clock_s"].to_numpy(dtype=float)
    x = df["x_ft"].to_numpy(dtype=float)
    y = df["y_ft"].to_numpy(dtype=float)
    z = df["z_ft"].to_numpy(dtype=float)
    kind = _ids(df["entity"], lambda v: v.strip().lower())

    bad_kind = ~np.isin(kind, ["player", "ball"])
    if bad_kind.any():
        row = int(np.flatnonzero(bad_kind)[0])
        raise ParseError(f"bad entity {df['entity'].iat[row]!r}", path, row + 2)
    if (quarter < 1).any():
        row = int(np.flatnonzero(quarter < 1)[0])
        raise ParseError("quarter must be >= 1", path, row + 2)
    out_of_bounds = ~(np.isfinite(x) & np.isfinite(y)
                      & (x >= -BOUNDS_MARGIN) & (x <= COURT_LENGTH + BOUNDS_MARGIN)
                      & (y >= -BOUNDS_MARGIN) & (y <= COURT_WIDTH + BOUNDS_MARGIN))
    if out_of_bounds.any():
        row = int(np.flatnonzero(out_of_bounds)[0])
        raise ParseError(f"coordinate ({x[row]}, {y[row]}) outside court bounds", path, row + 2)
    team = _ids(df["team_id"])
    player = _ids(df["player_id"])
    no_id = (kind == "player") & (player == "")
    if no_id.any():
        row = int(np.flatnonzero(no_id)[0])
        raise ParseError("player row without player_id", path, row + 2)

    gids = _ids(df["game_id"])
    codes = df["game_id"].cat.codes.to_numpy()
    starts = np.flatnonzero(np.r_[True, codes[1:] != codes[:-1]])
    bounds = np.r_[starts, len(codes)]
    tables: dict[GameId, MomentTable] = {}
    for a, b in zip(bounds[:-1], bounds[1:]):
        gid = gids[a]
        if gid in tables:
            raise ValidationError(f"rows of game {gid} are not contiguous in {path}")
        w = wall[a:b]
        if (np.diff(w) < 0).any():
            raise ValidationError(f"moment timestamps for game {gid} are not sorted")
        first = np.flatnonzero(np.r_[True, np.diff(w) != 0])
        q = quarter[a:b][first]
        if (np.diff(q) < 0).any():
            raise ValidationError(f"quarters decrease over time in game {gid}")
        tables[gid] = MomentTable(
            wall_time=w[first].copy(), quarter=q.copy(), game_clock=clock[a:b][first].copy(),
            offsets=np.r_[first, b - a].astype(np.int64), kind=kind[a:b].copy(),
            team=team[a:b].copy(), player=player[a:b].copy(), x=x[a:b].copy(),
            y=y[a:b].copy(), z=z[a:b].copy(),
        )
    return tables


# -- assembly ---------------------------------------------------------------


def _check_moments(gid: GameId, table: MomentTable) -> None:
    if len(table) == 0:
        raise ValidationError(f"game {gid}: no moments")
    balls = np.zeros(len(table), dtype=np.int64)
    idx = np.repeat(np.arange(len(table)), np.diff(table.offsets))
    np.add.at(balls, idx, table.kind == "ball")
    if (balls > 1).any():
        raise ValidationError(f"game {gid}: moment with more than one ball entity")
    missing = float((balls == 0).mean())
    if missing > MAX_MISSING_BALL:
        raise DataQualityError(f"game {gid}: ball missing in {missing:.1%} of moments")


def _assemble(gid: GameId, moments: Optional[MomentTable], events: list[EventRecord],
              lines: Optional[list[BoxLine]], roster: Mapping[PlayerId, RosterEntry]) -> GameBundle:
    if not events:
        raise ValidationError(f"game {gid}: no events")
    if moments is None:
        raise ValidationError(f"game {gid}: no moments")
    _check_moments(gid, moments)
    if not lines or len(lines) != 2:
        raise ValidationError(f"game {gid}: expected box lines for exactly two teams")
    home = [b for b in lines if b.is_home]
    away = [b for b in lines if not b.is_home]
    if len(home) != 1 or len(away) != 1:
        raise ValidationError(f"game {gid}: need one home and one away box line")
    h, a = home[0], away[0]
    if h.opp_id != a.team_id or a.opp_id != h.team_id:
        raise ValidationError(f"game {gid}: box lines disagree on opponents")
    for ev in events:
        if ev.player_id not in roster:
            raise ValidationError(f"game {gid}: event player {ev.player_id!r} not in roster")
        if ev.team_id not in (h.team_id, a.team_id):
            raise ValidationError(f"game {gid}: event team {ev.team_id!r} not in game")
    bundle = GameBundle(
        game_id=gid, date=h.date, home=h.team_id, away=a.team_id, moments=moments,
        events=tuple(events), box={h.team_id: h, a.team_id: a}, roster=roster,
    )
    return normalize(bundle)


def load_games(moments_path: str, events_path: str, box_path: str,
               roster_path: str) -> list[GameBundle]:
    """Load every game found in the event table, validated and normalized."""
    roster = read_roster(roster_path)
    box = read_box(box_path)
    events = read_events(events_path)
    moments = read_moments(moments_path)
    if not events:
        raise ValidationError("no events")
    bundles = []
    for gid in sorted(events):
        bundles.append(_assemble(gid, moments.get(gid), events[gid], box.get(gid), roster))
    skipped = sorted(set(box) - set(events))
    if skipped:
        logger.info("%d box-only games without tracking data ignored", len(skipped))
    return bundles


def load_game(moments_path: str, events_path: str, box_path: str, roster_path: str,
              game_id: Optional[GameId] = None) -> GameBundle:
    bundles = load_games(moments_path, events_path, box_path, roster_path)
    if game_id is not None:
        for b in bundles:
            if b.game_id == game_id:
                return b
        raise ValidationError(f"game {game_id} not found")
    if len(bundles) != 1:
        raise ValidationError(f"expected one game, found {len(bundles)}")
    return bundles[0]


def load_dir(data_dir: str) -> list[GameBundle]:
    return load_games(*(os.path.join(data_dir, f) for f in
                        ("moments.csv", "events.csv", "box.csv", "roster.csv")))


# -- normalization ----------------------------------------------------------


def _period(quarter: int) -> int:
    return 1 if quarter <= 2 else (2 if quarter <= 4 else quarter)


def possession_teams(bundle: GameBundle) -> np.ndarray:
    """Team in possession at each moment: the team of the latest event at or
    before the moment (the opponent after a turnover)."""
    ev_t = np.array([e.wall_time for e in bundle.events], dtype=np.int64)
    holders = [bundle.opponent_of(e.team_id) if e.kind is EventKind.TURNOVER else e.team_id
               for e in bundle.events]
    idx = np.searchsorted(ev_t, bundle.moments.wall_time, side="right") - 1
    idx = np.clip(idx, 0, len(holders) - 1)
    return np.array(holders, dtype=object)[idx]


def attack_directions(bundle: GameBundle) -> dict[tuple[TeamId, int], bool]:
    """Whether each team attacks the high-x basket in each period.

    Decided by a vote over the ball position at the team's own shot releases.
    Team-periods without shots get no entry and are left unreflected: once
    data is normalized their raw direction cannot be recovered, and guessing
    would break idempotence.
    """
    m = bundle.moments
    votes: dict[tuple[TeamId, int], int] = {}
    for ev in bundle.events:
        if ev.kind is not EventKind.SHOT_RELEASE:
            continue
        i = m.nearest(ev.wall_time)
        if i is None:
            continue
        ball = m.ball(i)
        if ball is None:
            continue
        key = (ev.team_id, _period(int(m.quarter[i])))
        votes[key] = votes.get(key, 0) + (1 if ball.x > COURT_LENGTH / 2 else -1)
    return {k: v > 0 for k, v in votes.items()}


def normalize(bundle: GameBundle) -> GameBundle:
    """Reflect moments so the team in possession attacks the basket at x = 5.25.

    Idempotent: after one pass every period votes for the low basket.
    """
    m = bundle.moments
    if len(m) == 0:
        return bundle
    directions = attack_directions(bundle)
    holders = possession_teams(bundle)
    flip = np.array([directions.get((team, _period(int(q))), False)
                     for team, q in zip(holders, m.quarter)], dtype=bool)
    if not flip.any():
        return bundle
    rows = np.repeat(flip, np.diff(m.offsets))
    x = np.where(rows, COURT_LENGTH - m.x, m.x)
    y = np.where(rows, COURT_WIDTH - m.y, m.y)
    return replace(bundle, moments=m.with_xy(x, y))


# -- writing ----------------------------------------------------------------


def _fmt_floats(values: np.ndarray) -> np.ndarray:
    # repr() round-trips exactly through float(); NaN becomes an empty field
    out = np.array(list(map(repr, values.tolist())), dtype=object)
    out[np.isnan(values)] = ""
    return out


def moments_frame(bundles: Iterable[GameBundle]) -> pd.DataFrame:
    parts = []
    for b in bundles:
        m = b.moments
        reps = np.diff(m.offsets)
        parts.append(pd.DataFrame({
            "game_id": b.game_id,
            "quarter": np.repeat(m.quarter, reps),
            "wall_time_ms": np.repeat(m.wall_time, reps),
            "game_clock_s": _fmt_floats(np.repeat(m.game_clock, reps)),
            "entity": m.kind,
            "team_id": m.team,
            "player_id": m.player,
            "x_ft": _fmt_floats(m.x),
            "y_ft": _fmt_floats(m.y),
            "z_ft": _fmt_floats(m.z),
        }))
    if not parts:
        return pd.DataFrame(columns=MOMENT_COLUMNS)
    return pd.concat(parts, ignore_index=True)[MOMENT_COLUMNS]


def events_frame(bundles: Iterable[GameBundle]) -> pd.DataFrame:
    rows = [(e.game_id, e.wall_time, e.kind.value, e.team_id, e.player_id)
            for b in bundles for e in b.events]
    return pd.DataFrame(rows, columns=EVENT_COLUMNS)


def box_frame(lines: Iterable[BoxLine]) -> pd.DataFrame:
    rows = [(b.game_id, b.date, b.team_id, b.opp_id, int(b.is_home), b.fgm, b.fga, b.ast, b.blk)
            for b in lines]
    return pd.DataFrame(rows, columns=BOX_COLUMNS)


def roster_frame(roster: Mapping[PlayerId, RosterEntry]) -> pd.DataFrame:
    rows = [(r.player_id, r.name, r.team_id, r.position.value)
            for r in sorted(roster.values(), key=lambda r: r.player_id)]
    return pd.DataFrame(rows, columns=ROSTER_COLUMNS)


def write_bundles(bundles: Iterable[GameBundle], out_dir: str,
                  roster: Optional[Mapping[PlayerId, RosterEntry]] = None) -> list[BoxLine]:
    """Write bundles in the canonical CSV schemas (moments, events, box, roster).

    Games are streamed one at a time, so ``bundles`` may be a generator.
    Returns the box lines written.
    """
    os.makedirs(out_dir, exist_ok=True)
    seen_roster: dict[PlayerId, RosterEntry] = {}
    lines: list[BoxLine] = []
    with open(os.path.join(out_dir, "moments.csv"), "w", newline="", encoding="utf-8") as mf, \
            open(os.path.join(out_dir, "events.csv"), "w", newline="", encoding="utf-8") as ef:
        mf.write(",".join(MOMENT_COLUMNS) + "\n")
        ef.write(",".join(EVENT_COLUMNS) + "\n")
        for b in bundles:
            moments_frame([b]).to_csv(mf, index=False, header=False)
            events_frame([b]).to_csv(ef, index=False, header=False)
            lines += [b.box[t] for t in (b.home, b.away)]
            if roster is None:
                seen_roster.update(b.roster)
    box_frame(lines).to_csv(os.path.join(out_dir, "box.csv"), index=False)
    roster_frame(roster if roster is not None else seen_roster).to_csv(
        os.path.join(out_dir, "roster.csv"), index=False)
    return lines


# -- ratios -----------------------------------------------------------------


def team_game_ratios(lines: Iterable[BoxLine]) -> list[TeamGameRatio]:
    """AR and BR observations from box lines; undefined ratios are skipped."""
    by_game: dict[GameId, list[BoxLine]] = {}
    for line in lines:
        by_game.setdefault(line.game_id, []).append(line)
    out: list[TeamGameRatio] = []
    for gid in sorted(by_game):
        pair = by_game[gid]
        if len(pair) != 2:
            raise ValidationError(f"game {gid}: expected two box lines, got {len(pair)}")
        home = [b for b in pair if b.is_home]
        if len(home) != 1:
            raise ValidationError(f"game {gid}: need exactly one home team")
        sk = home[0].team_id
        for line in sorted(pair, key=lambda b: not b.is_home):
            opp = pair[0] if pair[1] is line else pair[1]
            if line.ast > line.fgm:
                raise ValidationError(f"game {gid}: team {line.team_id} has AST > FGM")
            common = dict(game_id=gid, team=line.team_id, opponent=opp.team_id,
                          is_home=line.is_home, scorekeeper=sk)
            if line.fgm == 0:
                warnings.warn(f"game {gid} team {line.team_id}: FGM = 0, AR skipped",
                              ObservationSkipped, stacklevel=2)
            else:
                out.append(TeamGameRatio(ratio_kind=RatioKind.AR, value=line.ast / line.fgm, **common))
            if opp.fga == 0:
                warnings.warn(f"game {gid} team {line.team_id}: opponent FGA = 0, BR skipped",
                              ObservationSkipped, stacklevel=2)
            else:
                out.append(TeamGameRatio(ratio_kind=RatioKind.BR, value=line.blk / opp.fga, **common))
    return out


def compute_team_game_ratios(bundle: GameBundle) -> list[TeamGameRatio]:
    return team_game_ratios([bundle.box[bundle.home], bundle.box[bundle.away]])
