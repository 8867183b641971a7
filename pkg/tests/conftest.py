import os

import numpy as np
import pytest

from scorekeeper.core import EventKind
from scorekeeper.ingest import BoxLine
from scorekeeper.synth import Frame, Possession, assemble_game, default_truth, worked_play_fixture, generate_season

DATA = os.path.join(os.path.dirname(__file__), "data")
WORKED_PLAY_DIR = os.path.join(DATA, "worked_play")

# filled by the acceptance tests, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def worked_play_dir():
    return WORKED_PLAY_DIR


@pytest.fixture(scope="session")
def small_truth():
    return default_truth(0)


@pytest.fixture(scope="session")
def small_season(small_truth):
    return generate_season(small_truth, 8, seed=5)


@pytest.fixture(scope="session")
def worked_play_roster():
    return worked_play_fixture().raw.roster


OFFENSE = {"LAC-PAUL": (12.0, 20.0), "LAC-GRIFFIN": (23.0, 20.0), "LAC-REDICK": (20.0, 45.0),
           "LAC-MBAHAMOUTE": (25.0, 8.0), "LAC-JORDAN": (4.0, 31.0)}
DEFENSE = {"LAL-CLARKSON": (12.0, 24.0), "LAL-BRYANT": (23.0, 10.0), "LAL-YOUNG": (22.0, 40.0),
           "LAL-RANDLE": (40.0, 26.0), "LAL-HIBBERT": (5.0, 30.0)}


def scripted_game(events, roster, frame_times=None, positions=None, quarter=1, gid="T1"):
    """Raw bundle with static players; ``events`` are (t, kind, player) for LAC unless
    the player id starts with LAL."""
    ev = [(t, EventKind[k] if isinstance(k, str) else k, "LAL" if p.startswith("LAL") else "LAC", p)
          for t, k, p in events]
    times = sorted(set(frame_times if frame_times is not None else [e[0] for e in ev]))
    pos = dict(OFFENSE)
    pos.update(DEFENSE)
    if positions:
        pos.update(positions)
    frames = [Frame(t, dict(pos), (*pos["LAC-PAUL"], 5.0)) for t in times]
    poss = Possession("LAC", "LAL", quarter, ev, frames, None, made=True)
    box = {"LAC": BoxLine(gid, "2016-01-01", "LAC", "LAL", True, 10, 20, 5, 1),
           "LAL": BoxLine(gid, "2016-01-01", "LAL", "LAC", False, 8, 20, 4, 2)}
    return assemble_game(gid, "2016-01-01", "LAC", "LAL", [poss], roster, box)


@pytest.fixture
def make_game(worked_play_roster):
    def make(events, **kw):
        return scripted_game(events, worked_play_roster, **kw)
    return make


def random_instance(seed, n=200, p=30):
    """Dense logistic instance with an intercept column."""
    rng = np.random.default_rng(seed)
    X = np.column_stack([np.ones(n), rng.normal(size=(n, p - 1))])
    beta = rng.normal(scale=0.5, size=p)
    y = (rng.random(n) < 1 / (1 + np.exp(-X @ beta))).astype(float)
    mask = np.ones(p)
    mask[0] = 0.0
    return X, y, mask
