"""Design matrices and estimators for the two assist models.

The team-level model is ordinary least squares on team-game ratios with
one-hot team, opponent and scorekeeper groups. The contextual model is an
L2-penalized logistic regression on potential assists, fit by Newton/IRLS
with step halving.
"""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence, Union

import numpy as np
import scipy.linalg
import scipy.optimize
import scipy.sparse as sp
from scipy.special import expit

from .core import (
    POSITIONS,
    ZONES,
    InvalidInputError,
    PotentialAssist,
    ScorekeeperError,
    TeamGameRatio,
    ValidationError,
)

logger = logging.getLogger(__name__)

INTERCEPT = "intercept"
HOME = "home"
TEAM = "team"
OPPONENT = "opponent"
SK_GENEROSITY = "sk_generosity"
SK_BIAS = "sk_bias"
PASSER = "passer"
POSITION = "position"
PASSER_ZONE = "passer_zone"
SHOOTER_ZONE = "shooter_zone"
ZONE_PAIR = "zone_pair"
CONTINUOUS = (
    "c1_possession_time",
    "c2_dribbles",
    "c3_travel_distance",
    "c4_pass_distance",
    "c5_passer_defender_dist",
    "c6_shooter_defender_dist",
)
SCALAR = "value"

TEAM_GROUPS = (INTERCEPT, HOME, TEAM, OPPONENT, SK_GENEROSITY, SK_BIAS)
CONTEXT_GROUPS = (PASSER, POSITION) + CONTINUOUS + (PASSER_ZONE, SHOOTER_ZONE, ZONE_PAIR)

MODEL_SPECS = {
    "full": (),
    "no_scorekeeper": (SK_GENEROSITY, SK_BIAS),
    "no_context": CONTEXT_GROUPS,
    "intercept": TEAM_GROUPS[1:] + CONTEXT_GROUPS,
}

DEFAULT_LAMBDA = 1e-4
MAX_ITER = 500
GRAD_TOL = 1e-8
WIDE_DESIGN = 4000  # columns beyond which Newton steps are replaced by L-BFGS


def default_lambda_grid(n: int = 25, lo: float = 1e-6, hi: float = 1e2) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)


class ConvergenceError(ScorekeeperError, RuntimeError):
    def __init__(self, message: str, grad_norm: float):
        self.grad_norm = grad_norm
        super().__init__(f"{message} (gradient max-norm {grad_norm:.3e})")


class UnderdeterminedError(ScorekeeperError, ValueError):
    pass


def zone_pair_level(passer_zone, shooter_zone) -> str:
    return f"{passer_zone.value}->{shooter_zone.value}"


ZONE_PAIR_LEVELS = tuple(zone_pair_level(a, b) for a in ZONES for b in ZONES)


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    """A design with (group, level) column labels.

    ``scaling`` maps a column label to the (mean, sd) used to standardize it.
    """

    matrix: Union[np.ndarray, sp.csr_matrix]
    columns: tuple[tuple[str, str], ...]
    scaling: Mapping[tuple[str, str], tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.columns)) != len(self.columns):
            raise ValidationError("duplicate design column names")
        if self.matrix.shape[1] != len(self.columns):
            raise ValidationError("column labels do not match matrix width")

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.shape

    def groups(self) -> dict[str, list[int]]:
        out: dict[str, list[int]] = {}
        for j, (g, _) in enumerate(self.columns):
            out.setdefault(g, []).append(j)
        return out

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if sp.issparse(self.matrix) else np.asarray(self.matrix)

    def penalty_mask(self) -> np.ndarray:
        return np.array([g != INTERCEPT for g, _ in self.columns], dtype=float)

    def drop_groups(self, groups: Sequence[str]) -> "DesignMatrix":
        keep = [j for j, (g, _) in enumerate(self.columns) if g not in set(groups)]
        cols = tuple(self.columns[j] for j in keep)
        return DesignMatrix(self.matrix[:, keep], cols,
                            {k: v for k, v in self.scaling.items() if k in set(cols)})

    def rows(self, idx: np.ndarray) -> "DesignMatrix":
        return DesignMatrix(self.matrix[idx], self.columns, self.scaling)

    @classmethod
    def from_array(cls, matrix: np.ndarray, intercept: bool = True) -> "DesignMatrix":
        """Wrap a plain matrix; column 0 is the unpenalized intercept when ``intercept``."""
        cols = [("x", str(j)) for j in range(matrix.shape[1])]
        if intercept:
            cols[0] = (INTERCEPT, SCALAR)
        return cls(np.asarray(matrix, dtype=float), tuple(cols))


@dataclass
class ModelFit:
    fit_kind: str  # "linear" or "logistic"
    coefficients: dict[str, dict[str, float]]
    n_obs: int
    diagnostics: dict
    lam: Optional[float] = None
    trace: tuple = ()

    def vector(self, columns: Sequence[tuple[str, str]]) -> np.ndarray:
        """Coefficients in ``columns`` order; levels absent from the fit are 0."""
        return np.array([self.coefficients.get(g, {}).get(l, 0.0) for g, l in columns])

    def coefficient(self, group: str, level: str = SCALAR) -> float:
        return self.coefficients.get(group, {}).get(level, 0.0)

    def centered(self, group: str) -> dict[str, float]:
        levels = self.coefficients.get(group, {})
        if not levels:
            return {}
        mean = math.fsum(levels.values()) / len(levels)
        return {k: v - mean for k, v in levels.items()}

    def to_dict(self) -> dict:
        return {
            "fit_kind": self.fit_kind,
            "lambda": self.lam,
            "n_obs": self.n_obs,
            "diagnostics": self.diagnostics,
            "groups": self.coefficients,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelFit":
        try:
            return cls(
                fit_kind=d["fit_kind"],
                coefficients={g: {k: float(v) for k, v in lv.items()} for g, lv in d["groups"].items()},
                n_obs=int(d["n_obs"]),
                diagnostics=dict(d.get("diagnostics", {})),
                lam=d.get("lambda"),
            )
        except (KeyError, TypeError, AttributeError) as exc:
            raise ValidationError(f"malformed model fit: {exc}") from None

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())
            fh.write("\n")

    @classmethod
    def load(cls, path: str) -> "ModelFit":
        with open(path, encoding="utf-8") as fh:
            try:
                return cls.from_dict(json.load(fh))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}: {exc}") from None


def _grouped(columns: Sequence[tuple[str, str]], values: np.ndarray) -> dict[str, dict[str, float]]:
    out: dict[str, dict[str, float]] = {}
    for (g, l), v in zip(columns, values):
        out.setdefault(g, {})[l] = float(v)
    return out


# -- team-level model -------------------------------------------------------


def build_team_design(obs: Sequence[TeamGameRatio],
                      teams: Optional[Sequence[str]] = None) -> tuple[DesignMatrix, np.ndarray]:
    """One row per team-game: intercept, home, team, opponent, scorekeeper
    generosity and scorekeeper bias (scorekeeper indicator times home)."""
    seen = sorted({t for o in obs for t in (o.team, o.opponent, o.scorekeeper)})
    if teams is None:
        teams = seen
    else:
        unknown = set(seen) - set(teams)
        if unknown:
            raise InvalidInputError(f"unknown team ids {sorted(unknown)}")
        teams = list(teams)
    if len(teams) < 2:
        raise InvalidInputError("team design needs at least two distinct teams")
    idx = {t: i for i, t in enumerate(teams)}
    k = len(teams)
    columns = [(INTERCEPT, SCALAR), (HOME, SCALAR)]
    for g in (TEAM, OPPONENT, SK_GENEROSITY, SK_BIAS):
        columns += [(g, t) for t in teams]
    X = np.zeros((len(obs), len(columns)))
    X[:, 0] = 1.0
    for r, o in enumerate(obs):
        h = 1.0 if o.is_home else 0.0
        X[r, 1] = h
        X[r, 2 + idx[o.team]] = 1.0
        X[r, 2 + k + idx[o.opponent]] = 1.0
        X[r, 2 + 2 * k + idx[o.scorekeeper]] = 1.0
        X[r, 2 + 3 * k + idx[o.scorekeeper]] = h
    y = np.array([o.value for o in obs], dtype=float)
    return DesignMatrix(X, tuple(columns)), y


def fit_team_model(design: DesignMatrix, target: np.ndarray) -> ModelFit:
    """Minimum-norm least squares; the indicator groups are collinear with the
    intercept, so only predictions and group-centered effects are identified."""
    X = design.dense()
    y = np.asarray(target, dtype=float)
    if X.shape[0] < 2:
        raise UnderdeterminedError(f"{X.shape[0]} observation(s) cannot identify the model")
    beta, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    fitted = X @ beta
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    ss_res = float(np.sum((y - fitted) ** 2))
    r2 = 0.0 if np.ptp(y) == 0.0 else 1.0 - ss_res / ss_tot
    return ModelFit("linear", _grouped(design.columns, beta), X.shape[0],
                    {"r_squared": r2, "rank": int(rank)})


def predict_linear(fit: ModelFit, design: DesignMatrix) -> np.ndarray:
    return design.dense() @ fit.vector(design.columns)


# -- contextual model -------------------------------------------------------


def _contextual_levels(pas: Sequence[PotentialAssist]) -> dict[str, list[str]]:
    teams = sorted({t for pa in pas for t in (pa.team, pa.opponent, pa.scorekeeper)})
    return {
        TEAM: teams,
        OPPONENT: teams,
        SK_GENEROSITY: teams,
        SK_BIAS: teams,
        PASSER: sorted({pa.passer for pa in pas}),
        POSITION: [p.value for p in POSITIONS],
        PASSER_ZONE: [z.value for z in ZONES],
        SHOOTER_ZONE: [z.value for z in ZONES],
        ZONE_PAIR: list(ZONE_PAIR_LEVELS),
    }


def contextual_columns(levels: Mapping[str, Sequence[str]]) -> tuple[tuple[str, str], ...]:
    cols = [(INTERCEPT, SCALAR), (HOME, SCALAR)]
    for g in (TEAM, OPPONENT, SK_GENEROSITY, SK_BIAS, PASSER, POSITION):
        cols += [(g, l) for l in levels[g]]
    cols += [(c, SCALAR) for c in CONTINUOUS]
    for g in (PASSER_ZONE, SHOOTER_ZONE, ZONE_PAIR):
        cols += [(g, l) for l in levels[g]]
    return tuple(cols)


def continuous_values(pas: Sequence[PotentialAssist]) -> np.ndarray:
    return np.array([[pa.c1_possession_time, pa.c2_dribbles, pa.c3_travel_distance,
                      pa.c4_pass_distance, pa.c5_passer_defender_dist,
                      pa.c6_shooter_defender_dist] for pa in pas], dtype=float).reshape(-1, 6)


def build_contextual_design(pas: Sequence[PotentialAssist],
                            levels: Optional[Mapping[str, Sequence[str]]] = None,
                            scaling: Optional[Mapping[tuple[str, str], tuple[float, float]]] = None,
                            ) -> tuple[DesignMatrix, np.ndarray]:
    """Sparse design for the contextual model plus the 0/1 label vector.

    Continuous covariates are standardized (population sd); pass ``scaling``
    to reuse a stored transform.
    """
    if not pas:
        raise InvalidInputError("no potential assists")
    if levels is None:
        levels = _contextual_levels(pas)
    columns = contextual_columns(levels)
    col = {c: j for j, c in enumerate(columns)}
    n = len(pas)

    cont = continuous_values(pas)
    if scaling is None:
        scaling = {}
        for k, name in enumerate(CONTINUOUS):
            mu = float(cont[:, k].mean())
            sd = float(cont[:, k].std())
            scaling[(name, SCALAR)] = (mu, sd if sd > 0 else 1.0)

    rows, cols, vals = [], [], []

    def put(r: int, key: tuple[str, str], v: float = 1.0) -> None:
        j = col.get(key)
        if j is None:
            raise InvalidInputError(f"unseen level {key[1]!r} for group {key[0]!r}")
        rows.append(r)
        cols.append(j)
        vals.append(v)

    for r, pa in enumerate(pas):
        put(r, (INTERCEPT, SCALAR))
        if pa.is_home:
            put(r, (HOME, SCALAR))
            put(r, (SK_BIAS, pa.scorekeeper))
        put(r, (TEAM, pa.team))
        put(r, (OPPONENT, pa.opponent))
        put(r, (SK_GENEROSITY, pa.scorekeeper))
        put(r, (PASSER, pa.passer))
        put(r, (POSITION, pa.passer_position.value))
        for k, name in enumerate(CONTINUOUS):
            mu, sd = scaling[(name, SCALAR)]
            put(r, (name, SCALAR), (cont[r, k] - mu) / sd)
        put(r, (PASSER_ZONE, pa.c7_passer_zone.value))
        put(r, (SHOOTER_ZONE, pa.c8_shooter_zone.value))
        put(r, (ZONE_PAIR, zone_pair_level(pa.c7_passer_zone, pa.c8_shooter_zone)))
    X = sp.csr_matrix((vals, (rows, cols)), shape=(n, len(columns)))
    y = np.array([1.0 if pa.label_recorded_assist else 0.0 for pa in pas])
    return DesignMatrix(X, columns, dict(scaling)), y


def penalized_objective(beta: np.ndarray, X, y: np.ndarray, lam: float,
                        mask: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean negative log-likelihood plus ``lam * sum(mask * beta**2)`` and its gradient."""
    eta = X @ beta
    n = len(y)
    nll = float(np.sum(np.logaddexp(0.0, eta) - y * eta)) / n
    value = nll + lam * float(np.sum(mask * beta * beta))
    grad = np.asarray(X.T @ (expit(eta) - y)).ravel() / n + 2.0 * lam * mask * beta
    return value, grad


def _gram(X, w: np.ndarray) -> np.ndarray:
    if sp.issparse(X):
        return np.asarray((X.T @ sp.diags(w) @ X).todense())
    return X.T @ (X * w[:, None])


def _newton_solve(H: np.ndarray, g: np.ndarray) -> np.ndarray:
    try:
        c = scipy.linalg.cho_factor(H, check_finite=False)
        step = scipy.linalg.cho_solve(c, g, check_finite=False)
        if np.all(np.isfinite(step)):
            return step
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError):
        pass
    return scipy.linalg.lstsq(H, g, cond=1e-12, check_finite=False)[0]


def fit_logistic(X, y: np.ndarray, lam: float, mask: np.ndarray,
                 start: Optional[np.ndarray] = None, max_iter: int = MAX_ITER,
                 tol: float = GRAD_TOL, trace: Optional[list] = None) -> tuple[np.ndarray, dict]:
    """Minimize ``penalized_objective``; returns (beta, info).

    Raises ConvergenceError when the gradient max-norm stays above ``tol``.
    """
    if lam < 0:
        raise InvalidInputError(f"lambda must be non-negative, got {lam}")
    n, p = X.shape
    y = np.asarray(y, dtype=float)
    if start is None:
        beta = np.zeros(p)
        free = np.flatnonzero(mask == 0)
        if len(free):
            rate = min(max(float(y.mean()), 1e-4), 1 - 1e-4)
            beta[free[0]] = math.log(rate / (1 - rate))
    else:
        beta = np.array(start, dtype=float)
    if p > WIDE_DESIGN:
        return _fit_lbfgs(X, y, lam, mask, beta, max_iter, tol, trace)

    f, g = penalized_objective(beta, X, y, lam, mask)
    if trace is not None:
        trace.append(f)
    for it in range(max_iter):
        gnorm = float(np.max(np.abs(g)))
        if gnorm < tol:
            return beta, {"iterations": it, "grad_norm": gnorm, "objective": f}
        p_hat = expit(X @ beta)
        H = _gram(X, p_hat * (1 - p_hat) / n)
        H[np.diag_indices_from(H)] += 2.0 * lam * mask
        step = _newton_solve(H, g)
        t = 1.0
        noise = 64 * np.finfo(float).eps * max(1.0, abs(f))
        for _ in range(60):
            cand = beta - t * step
            fc, gc = penalized_objective(cand, X, y, lam, mask)
            if fc <= f:
                break
            # near the optimum the decrease falls below rounding of the objective
            if fc - f <= noise and np.max(np.abs(gc)) < gnorm:
                break
            t *= 0.5
        else:
            raise ConvergenceError("step halving failed", gnorm)
        beta, f, g = cand, fc, gc
        if trace is not None:
            trace.append(f)
    gnorm = float(np.max(np.abs(g)))
    if gnorm < tol:
        return beta, {"iterations": max_iter, "grad_norm": gnorm, "objective": f}
    raise ConvergenceError(f"not converged after {max_iter} iterations", gnorm)


def _fit_lbfgs(X, y, lam, mask, beta, max_iter, tol, trace):
    def fun(b):
        f, g = penalized_objective(b, X, y, lam, mask)
        if trace is not None:
            trace.append(f)
        return f, g

    res = scipy.optimize.minimize(fun, beta, jac=True, method="L-BFGS-B",
                                  options={"maxiter": 50 * max_iter, "gtol": tol, "ftol": 0.0})
    _, g = penalized_objective(res.x, X, y, lam, mask)
    gnorm = float(np.max(np.abs(g)))
    if gnorm >= tol:
        raise ConvergenceError("first-order solver did not converge", gnorm)
    return res.x, {"iterations": int(res.nit), "grad_norm": gnorm, "objective": float(res.fun)}


def to_original_scale(design: DesignMatrix, beta: np.ndarray) -> np.ndarray:
    out = np.array(beta, dtype=float)
    icpt = [j for j, (g, _) in enumerate(design.columns) if g == INTERCEPT]
    for j, key in enumerate(design.columns):
        if key in design.scaling:
            mu, sd = design.scaling[key]
            out[j] = beta[j] / sd
            if icpt:
                out[icpt[0]] -= beta[j] * mu / sd
    return out


def to_design_scale(design: DesignMatrix, beta: np.ndarray) -> np.ndarray:
    out = np.array(beta, dtype=float)
    icpt = [j for j, (g, _) in enumerate(design.columns) if g == INTERCEPT]
    for j, key in enumerate(design.columns):
        if key in design.scaling:
            mu, sd = design.scaling[key]
            out[j] = beta[j] * sd
            if icpt:
                out[icpt[0]] += beta[j] * mu
    return out


def mean_log_likelihood(eta: np.ndarray, y: np.ndarray) -> float:
    return -float(np.sum(np.logaddexp(0.0, eta) - y * eta)) / len(y)


def fit_contextual_model(design: DesignMatrix, labels: np.ndarray, lam: float,
                         max_iter: int = MAX_ITER, tol: float = GRAD_TOL) -> ModelFit:
    """Penalized logistic fit; the intercept is not penalized.

    Coefficients are reported on the original covariate scale.
    """
    y = np.asarray(labels, dtype=float)
    trace: list[float] = []
    beta, info = fit_logistic(design.matrix, y, lam, design.penalty_mask(),
                              max_iter=max_iter, tol=tol, trace=trace)
    eta = design.matrix @ beta
    diagnostics = {"mean_log_likelihood": mean_log_likelihood(eta, y), **info}
    return ModelFit("logistic", _grouped(design.columns, to_original_scale(design, beta)),
                    len(y), diagnostics, lam=float(lam), trace=tuple(trace))


def predict_proba(fit: ModelFit, design: DesignMatrix) -> np.ndarray:
    beta = to_design_scale(design, fit.vector(design.columns))
    return expit(design.matrix @ beta)


# -- cross-validation -------------------------------------------------------


def fold_assignments(n: int, folds: int, seed: int) -> np.ndarray:
    """Fold id per row from a seeded permutation; fold sizes differ by at most one."""
    if folds < 2 or folds > n:
        raise InvalidInputError(f"need 2 <= folds <= n (folds={folds}, n={n})")
    perm = np.random.default_rng(seed).permutation(n)
    out = np.empty(n, dtype=np.int64)
    out[perm] = np.arange(n) % folds
    return out


def _map(fn, items, threads: int):
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def lambda_path_scores(design: DesignMatrix, labels: np.ndarray, grid: Sequence[float],
                       folds: int = 100, seed: int = 0, threads: int = 1) -> np.ndarray:
    """Mean held-out log-likelihood per observation for every grid value."""
    grid = np.asarray(grid, dtype=float)
    y = np.asarray(labels, dtype=float)
    fold = fold_assignments(len(y), folds, seed)
    X = design.matrix
    mask = design.penalty_mask()
    order = np.argsort(grid)[::-1]

    def run(k: int) -> np.ndarray:
        train, test = fold != k, fold == k
        Xtr, ytr, Xte, yte = X[train], y[train], X[test], y[test]
        sums = np.zeros(len(grid))
        beta = None
        for i in order:
            beta, _ = fit_logistic(Xtr, ytr, float(grid[i]), mask, start=beta)
            eta = Xte @ beta
            sums[i] = -float(np.sum(np.logaddexp(0.0, eta) - yte * eta))
        return sums

    per_fold = _map(run, range(folds), threads)
    return np.sum(per_fold, axis=0) / len(y)


def select_lambda(design: DesignMatrix, labels: np.ndarray, grid: Sequence[float],
                  folds: int = 100, seed: int = 0, threads: int = 1) -> float:
    """Grid value with the best held-out log-likelihood; ties go to the smaller value."""
    grid = [float(v) for v in grid]
    if not grid:
        raise InvalidInputError("empty lambda grid")
    if any(b < a for a, b in zip(grid, grid[1:])):
        raise InvalidInputError("lambda grid must be sorted ascending")
    if len(grid) == 1:
        return grid[0]
    scores = lambda_path_scores(design, labels, grid, folds, seed, threads)
    best = 0
    for i in range(1, len(grid)):
        if scores[i] > scores[best]:
            best = i
    logger.info("selected lambda %.3g (held-out mean log-likelihood %.5f)", grid[best], scores[best])
    return grid[best]


@dataclass(frozen=True)
class CVResult:
    model_spec: str
    mean_log_likelihood: float
    misclassification: float
    folds: int
    n_obs: int


def cross_validate(pas: Sequence[PotentialAssist], model_spec: str = "full", folds: int = 10,
                   seed: int = 0, lam: float = DEFAULT_LAMBDA, threads: int = 1) -> CVResult:
    """Held-out mean log-likelihood and 0.5-cutoff misclassification rate."""
    key = model_spec.replace("-", "_")
    if key not in MODEL_SPECS:
        raise InvalidInputError(f"unknown model spec {model_spec!r}")
    design, y = build_contextual_design(pas)
    design = design.drop_groups(MODEL_SPECS[key])
    return cross_validate_design(design, y, folds, seed, lam, threads, key)


def cross_validate_design(design: DesignMatrix, y: np.ndarray, folds: int = 10, seed: int = 0,
                          lam: float = DEFAULT_LAMBDA, threads: int = 1,
                          name: str = "") -> CVResult:
    fold = fold_assignments(len(y), folds, seed)
    X = design.matrix
    mask = design.penalty_mask()

    def run(k: int) -> tuple[float, int]:
        train, test = fold != k, fold == k
        beta, _ = fit_logistic(X[train], y[train], lam, mask)
        eta = X[test] @ beta
        ll = -float(np.sum(np.logaddexp(0.0, eta) - y[test] * eta))
        wrong = int(np.sum((expit(eta) >= 0.5) != (y[test] == 1)))
        return ll, wrong

    results = _map(run, range(folds), threads)
    n = len(y)
    return CVResult(name, sum(r[0] for r in results) / n, sum(r[1] for r in results) / n, folds, n)
