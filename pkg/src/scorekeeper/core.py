"""Shared vocabulary: identifiers, court geometry and the observation records.

Coordinates are in feet. After offensive normalization every possession
attacks the basket centred at (5.25, 25); the court spans [0, 94] x [0, 50].
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

TeamId = str
PlayerId = str
GameId = str

COURT_LENGTH = 94.0
COURT_WIDTH = 50.0
BASKET_X = 5.25
BASKET_Y = 25.0
DUNK_RADIUS = 3.0
KEY_DEPTH = 19.0
KEY_HALF_WIDTH = 8.0
ARC_RADIUS = 23.75
CORNER_OFFSET = 22.0
CORNER_END_X = 14.0
HEAVE_RADIUS = ARC_RADIUS + 10.0

FRAME_MS = 40  # 25 Hz


class ScorekeeperError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(ScorekeeperError, ValueError):
    pass


class ParseError(ScorekeeperError, ValueError):
    """A malformed CSV row. ``line`` is the 1-based line in the file."""

    def __init__(self, message: str, path: str = "", line: Optional[int] = None):
        self.path = path
        self.line = line
        where = f"{path}:{line}: " if line is not None else (f"{path}: " if path else "")
        super().__init__(where + message)


class ValidationError(ScorekeeperError, ValueError):
    pass


class DataQualityError(ValidationError):
    pass


class ExtractionError(ScorekeeperError, RuntimeError):
    pass


class Position(enum.Enum):
    POINT_GUARD = "PG"
    SHOOTING_GUARD = "SG"
    SMALL_FORWARD = "SF"
    POWER_FORWARD = "PF"
    CENTER = "C"

    @classmethod
    def parse(cls, code: str) -> "Position":
        try:
            return cls(code.strip().upper())
        except ValueError:
            raise InvalidInputError(f"unknown position {code!r}") from None


class CourtZone(enum.Enum):
    DUNK = "Dunk"
    PAINT = "Paint"
    LONG2 = "Long2"
    ARC3 = "Arc3"
    CORNER3 = "Corner3"
    HEAVE = "Heave"

    @classmethod
    def parse(cls, name: str) -> "CourtZone":
        try:
            return cls(name.strip())
        except ValueError:
            raise InvalidInputError(f"unknown court zone {name!r}") from None


ZONES = tuple(CourtZone)
POSITIONS = tuple(Position)


class EventKind(enum.Enum):
    PASS_RELEASE = "PASS_RELEASE"
    PASS_RECEIVE = "PASS_RECEIVE"
    DRIBBLE = "DRIBBLE"
    SHOT_RELEASE = "SHOT_RELEASE"
    SHOT_MADE = "SHOT_MADE"
    SHOT_MISSED = "SHOT_MISSED"
    REBOUND = "REBOUND"
    TURNOVER = "TURNOVER"
    INBOUND_PASS = "INBOUND_PASS"


class RatioKind(enum.Enum):
    AR = "AR"
    BR = "BR"


class CourtPoint(NamedTuple):
    x: float
    y: float
    z: Optional[float] = None


@dataclass(frozen=True)
class Entity:
    kind: str  # "player" or "ball"
    point: CourtPoint
    team_id: Optional[TeamId] = None
    player_id: Optional[PlayerId] = None


@dataclass(frozen=True)
class Moment:
    game_id: GameId
    quarter: int
    game_clock: float
    wall_time: int
    entities: tuple[Entity, ...]

    @property
    def is_complete(self) -> bool:
        players = sum(e.kind == "player" for e in self.entities)
        balls = sum(e.kind == "ball" for e in self.entities)
        return players == 10 and balls == 1


@dataclass(frozen=True)
class EventRecord:
    game_id: GameId
    wall_time: int
    kind: EventKind
    team_id: TeamId
    player_id: PlayerId


@dataclass(frozen=True)
class TeamGameRatio:
    game_id: GameId
    team: TeamId
    opponent: TeamId
    is_home: bool
    scorekeeper: TeamId
    ratio_kind: RatioKind
    value: float


@dataclass(frozen=True)
class PotentialAssist:
    game_id: GameId
    passer: PlayerId
    shooter: PlayerId
    team: TeamId
    opponent: TeamId
    is_home: bool
    scorekeeper: TeamId
    passer_position: Position
    c1_possession_time: float
    c2_dribbles: int
    c3_travel_distance: float
    c4_pass_distance: float
    c5_passer_defender_dist: float
    c6_shooter_defender_dist: float
    c7_passer_zone: CourtZone
    c8_shooter_zone: CourtZone
    label_recorded_assist: bool
    shot_made_ms: int = 0

    @property
    def c9_zone_pair(self) -> tuple[CourtZone, CourtZone]:
        return (self.c7_passer_zone, self.c8_shooter_zone)


def _check_finite(*values: float) -> None:
    for v in values:
        if not math.isfinite(v):
            raise InvalidInputError(f"non-finite coordinate {v!r}")


def distance(a: CourtPoint, b: CourtPoint) -> float:
    """Euclidean distance between two points in the x-y plane."""
    return math.hypot(a[0] - b[0], a[1] - b[1])


def zone_of(p: CourtPoint) -> CourtZone:
    """Classify a point given in normalized offensive coordinates.

    Points lying exactly on a dividing line go to the zone nearer the basket;
    on the Corner 3 / Arc 3 divider (x == 14) the point is Corner 3.
    """
    x, y = float(p[0]), float(p[1])
    _check_finite(x, y)
    d = math.hypot(x - BASKET_X, y - BASKET_Y)
    if d <= DUNK_RADIUS:
        return CourtZone.DUNK
    if x <= KEY_DEPTH and abs(y - BASKET_Y) <= KEY_HALF_WIDTH:
        return CourtZone.PAINT
    if x <= CORNER_END_X:
        if abs(y - BASKET_Y) <= CORNER_OFFSET:
            return CourtZone.LONG2
        return CourtZone.CORNER3
    if d <= ARC_RADIUS:
        return CourtZone.LONG2
    if d <= HEAVE_RADIUS:
        return CourtZone.ARC3
    return CourtZone.HEAVE


def zone_codes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Vectorized ``zone_of``; returns indices into ``ZONES``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise InvalidInputError("non-finite coordinate")
    d = np.hypot(x - BASKET_X, y - BASKET_Y)
    off = np.abs(y - BASKET_Y)
    conds = [
        d <= DUNK_RADIUS,
        (x <= KEY_DEPTH) & (off <= KEY_HALF_WIDTH),
        (x <= CORNER_END_X) & (off <= CORNER_OFFSET),
        x <= CORNER_END_X,
        d <= ARC_RADIUS,
        d <= HEAVE_RADIUS,
    ]
    order = [CourtZone.DUNK, CourtZone.PAINT, CourtZone.LONG2, CourtZone.CORNER3,
             CourtZone.LONG2, CourtZone.ARC3]
    choices = [ZONES.index(z) for z in order]
    return np.select(conds, choices, default=ZONES.index(CourtZone.HEAVE))
