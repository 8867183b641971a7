"""Potential-assist detection and the spatio-temporal covariates C(1)-C(9)."""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from .core import (
    CourtPoint,
    CourtZone,
    EventKind,
    ExtractionError,
    GameId,
    ParseError,
    PlayerId,
    Position,
    PotentialAssist,
    distance,
    zone_of,
)
from .ingest import SNAP_TOLERANCE_MS, GameBundle

logger = logging.getLogger(__name__)

MAX_POSSESSION_S = 7.0

PA_COLUMNS = [
    "game_id", "shot_made_ms", "passer", "shooter", "team", "opponent", "is_home",
    "scorekeeper", "passer_position", "c1_possession_time", "c2_dribbles",
    "c3_travel_distance", "c4_pass_distance", "c5_passer_defender_dist",
    "c6_shooter_defender_dist", "c7_passer_zone", "c8_shooter_zone", "c9_zone_pair",
    "label_recorded_assist",
]

_BREAKS_POSSESSION = {
    EventKind.REBOUND, EventKind.TURNOVER, EventKind.PASS_RELEASE, EventKind.PASS_RECEIVE,
    EventKind.INBOUND_PASS, EventKind.SHOT_RELEASE, EventKind.SHOT_MADE, EventKind.SHOT_MISSED,
}


def possession_time(reception_ms: int, shot_release_ms: int) -> float:
    """C(1): seconds between catching the pass and releasing the shot."""
    if shot_release_ms <= reception_ms:
        raise ExtractionError(
            f"shot release at {shot_release_ms} ms does not follow reception at {reception_ms} ms")
    return (shot_release_ms - reception_ms) / 1000.0


def dribble_count(events: Iterable, shooter: PlayerId) -> int:
    """C(2): dribbles by ``shooter`` among ``events``."""
    return sum(1 for e in events if e.kind is EventKind.DRIBBLE and e.player_id == shooter)


def travel_distance(anchors: Sequence[CourtPoint]) -> float:
    """C(3): path length through the reception, dribble and release anchors."""
    if len(anchors) < 2:
        raise ExtractionError("travel distance needs reception and release anchors")
    return math.fsum(distance(a, b) for a, b in zip(anchors[:-1], anchors[1:]))


def pass_distance(release_point: CourtPoint, reception_point: CourtPoint) -> float:
    """C(4)."""
    return distance(release_point, reception_point)


def min_distance(target: CourtPoint, others: Sequence[CourtPoint]) -> float:
    if not others:
        raise ExtractionError("no defenders to measure against")
    return min(distance(target, p) for p in others)


def nearest_defender_distance(target: PlayerId, t: int, bundle: GameBundle) -> float:
    """C(5)/C(6): distance from ``target`` to the closest of the five opponents
    in the moment nearest ``t``."""
    m = bundle.moments
    i = m.nearest(t, SNAP_TOLERANCE_MS)
    if i is None:
        raise ExtractionError(f"no moment within {SNAP_TOLERANCE_MS} ms of {t}")
    here = m.position(i, target)
    if here is None:
        raise ExtractionError(f"player {target} missing from moment at {int(m.wall_time[i])}")
    team = _team_in_moment(m, i, target)
    defenders = [p for pid, p in m.players(i) if _team_in_moment(m, i, pid) != team]
    if len(defenders) != 5:
        raise ExtractionError(f"expected 5 defenders at {int(m.wall_time[i])}, found {len(defenders)}")
    return min_distance(here, defenders)


def _team_in_moment(m, i: int, player: PlayerId):
    lo, hi = m.offsets[i], m.offsets[i + 1]
    for r in range(lo, hi):
        if m.player[r] == player:
            return m.team[r]
    return None


def raw_path_length(bundle: GameBundle, player: PlayerId, t0: int, t1: int) -> float:
    """Length of the frame-by-frame polyline of ``player`` over [t0, t1]."""
    m = bundle.moments
    lo = int(np.searchsorted(m.wall_time, t0, side="left"))
    hi = int(np.searchsorted(m.wall_time, t1, side="right"))
    pts = [p for p in (m.position(i, player) for i in range(lo, hi)) if p is not None]
    return math.fsum(distance(a, b) for a, b in zip(pts[:-1], pts[1:]))


def _anchor(bundle: GameBundle, player: PlayerId, t: int) -> CourtPoint:
    i = bundle.moments.nearest(t, SNAP_TOLERANCE_MS)
    if i is None:
        raise ExtractionError(f"no moment within {SNAP_TOLERANCE_MS} ms of {t}")
    p = bundle.moments.position(i, player)
    if p is None:
        raise ExtractionError(f"player {player} missing from moment at {int(bundle.moments.wall_time[i])}")
    return p


def _find_candidate(events, k: int):
    """Walk back from the SHOT_MADE at ``k``; return (pass, reception, dribbles,
    shot release) events or None when the play is not a potential assist."""
    made = events[k]
    j = k - 1
    while j >= 0 and events[j].kind is not EventKind.SHOT_RELEASE:
        if events[j].kind in _BREAKS_POSSESSION:
            return None
        j -= 1
    if j < 0 or events[j].player_id != made.player_id:
        return None
    release = events[j]
    shooter = release.player_id
    dribbles = []
    j -= 1
    while j >= 0:
        ev = events[j]
        if ev.kind is EventKind.DRIBBLE and ev.player_id == shooter:
            dribbles.append(ev)
            j -= 1
            continue
        if ev.kind is EventKind.PASS_RECEIVE and ev.player_id == shooter:
            break
        return None
    if j < 0:
        return None
    reception = events[j]
    j -= 1
    if j < 0:
        return None
    pass_ev = events[j]
    if pass_ev.team_id != reception.team_id or pass_ev.player_id == shooter:
        return None
    if pass_ev.kind is EventKind.INBOUND_PASS:
        return None
    if pass_ev.kind is not EventKind.PASS_RELEASE:
        return None
    dribbles.reverse()
    return pass_ev, reception, dribbles, release


def extract_potential_assists(bundle: GameBundle, labels: Optional[frozenset] = None,
                              diagnostics: Optional[list] = None) -> list[PotentialAssist]:
    """Find every in-play pass followed by a made shot within seven seconds.

    ``labels`` holds ``(game_id, shot_made_ms, passer_id)`` keys of recorded
    assists; records whose anchors cannot be located are skipped and a message
    appended to ``diagnostics``.
    """
    labels = labels or frozenset()
    events = bundle.events
    out: list[PotentialAssist] = []
    for k, made in enumerate(events):
        if made.kind is not EventKind.SHOT_MADE:
            continue
        found = _find_candidate(events, k)
        if found is None:
            continue
        pass_ev, reception, dribbles, release = found
        if release.wall_time - reception.wall_time > MAX_POSSESSION_S * 1000:
            continue
        passer, shooter = pass_ev.player_id, reception.player_id
        try:
            c1 = possession_time(reception.wall_time, release.wall_time)
            passer_at = _anchor(bundle, passer, pass_ev.wall_time)
            shooter_at = _anchor(bundle, shooter, reception.wall_time)
            path = [shooter_at]
            path += [_anchor(bundle, shooter, d.wall_time) for d in dribbles]
            path.append(_anchor(bundle, shooter, release.wall_time))
            c5 = nearest_defender_distance(passer, pass_ev.wall_time, bundle)
            c6 = nearest_defender_distance(shooter, reception.wall_time, bundle)
            entry = bundle.roster.get(passer)
            if entry is None:
                raise ExtractionError(f"passer {passer} not in roster")
        except ExtractionError as exc:
            msg = f"game {bundle.game_id} shot at {made.wall_time} ms skipped: {exc}"
            logger.debug(msg)
            if diagnostics is not None:
                diagnostics.append(msg)
            continue
        team = reception.team_id
        out.append(PotentialAssist(
            game_id=bundle.game_id,
            passer=passer,
            shooter=shooter,
            team=team,
            opponent=bundle.opponent_of(team),
            is_home=team == bundle.home,
            scorekeeper=bundle.home,
            passer_position=entry.position,
            c1_possession_time=c1,
            c2_dribbles=len(dribbles),
            c3_travel_distance=travel_distance(path),
            c4_pass_distance=pass_distance(passer_at, shooter_at),
            c5_passer_defender_dist=c5,
            c6_shooter_defender_dist=c6,
            c7_passer_zone=zone_of(passer_at),
            c8_shooter_zone=zone_of(shooter_at),
            label_recorded_assist=(bundle.game_id, made.wall_time, passer) in labels,
            shot_made_ms=made.wall_time,
        ))
    return out


def extract_all(bundles: Sequence[GameBundle], labels: Optional[frozenset] = None,
                threads: int = 1) -> list[PotentialAssist]:
    """Extract over many games; output order follows ``bundles`` regardless of threads."""
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda b: extract_potential_assists(b, labels), bundles))
    else:
        parts = [extract_potential_assists(b, labels) for b in bundles]
    return [pa for part in parts for pa in part]


# -- files ------------------------------------------------------------------


def read_assist_labels(path: str) -> frozenset:
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    for col in ("game_id", "wall_time_ms", "passer_id"):
        if col not in df.columns:
            raise ParseError(f"missing column {col}", path, 1)
    return frozenset(
        (g.strip(), int(t), p.strip())
        for g, t, p in zip(df["game_id"], df["wall_time_ms"], df["passer_id"])
    )


def write_assist_labels(keys: Iterable[tuple[GameId, int, PlayerId]], path: str) -> None:
    rows = sorted(keys)
    pd.DataFrame(rows, columns=["game_id", "wall_time_ms", "passer_id"]).to_csv(path, index=False)


def _r(v: float) -> str:
    return repr(float(v))


def potential_assists_frame(pas: Sequence[PotentialAssist]) -> pd.DataFrame:
    rows = [(
        pa.game_id, pa.shot_made_ms, pa.passer, pa.shooter, pa.team, pa.opponent,
        int(pa.is_home), pa.scorekeeper, pa.passer_position.value,
        _r(pa.c1_possession_time), pa.c2_dribbles, _r(pa.c3_travel_distance),
        _r(pa.c4_pass_distance), _r(pa.c5_passer_defender_dist),
        _r(pa.c6_shooter_defender_dist), pa.c7_passer_zone.value, pa.c8_shooter_zone.value,
        f"{pa.c7_passer_zone.value}|{pa.c8_shooter_zone.value}", int(pa.label_recorded_assist),
    ) for pa in pas]
    return pd.DataFrame(rows, columns=PA_COLUMNS)


def write_potential_assists(pas: Sequence[PotentialAssist], path: str) -> None:
    d = os.path.dirname(path)
    if d:
        os.makedirs(d, exist_ok=True)
    potential_assists_frame(pas).to_csv(path, index=False)


def read_potential_assists(path: str) -> list[PotentialAssist]:
    df = pd.read_csv(path, dtype=str, keep_default_na=False)
    missing = [c for c in PA_COLUMNS if c not in df.columns]
    if missing:
        raise ParseError(f"missing columns {missing}", path, 1)
    out = []
    for i, r in enumerate(df.itertuples(index=False)):
        try:
            c7 = CourtZone.parse(r.c7_passer_zone)
            c8 = CourtZone.parse(r.c8_shooter_zone)
            if r.c9_zone_pair != f"{c7.value}|{c8.value}":
                raise ValueError("c9_zone_pair disagrees with c7/c8")
            out.append(PotentialAssist(
                game_id=r.game_id, passer=r.passer, shooter=r.shooter, team=r.team,
                opponent=r.opponent, is_home=r.is_home.strip() in ("1", "True", "true"),
                scorekeeper=r.scorekeeper, passer_position=Position.parse(r.passer_position),
                c1_possession_time=float(r.c1_possession_time), c2_dribbles=int(r.c2_dribbles),
                c3_travel_distance=float(r.c3_travel_distance),
                c4_pass_distance=float(r.c4_pass_distance),
                c5_passer_defender_dist=float(r.c5_passer_defender_dist),
                c6_shooter_defender_dist=float(r.c6_shooter_defender_dist),
                c7_passer_zone=c7, c8_shooter_zone=c8,
                label_recorded_assist=r.label_recorded_assist.strip() in ("1", "True", "true"),
                shot_made_ms=int(r.shot_made_ms),
            ))
        except ValueError as exc:
            raise ParseError(str(exc), path, i + 2) from None
    return out
