"""Kernel ridge regression runtime predictors, one per strategy."""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
import scipy.linalg

from stratsched.errors import DimensionMismatch, EmptyModel, NumericalFailure, TooFewSamples
from stratsched.runner import RunRecord

log = logging.getLogger(__name__)

# strategy id -> problem -> seconds, solved pairs only
SolvedTimes = Mapping[str, Mapping[str, float]]


def gaussian_kernel(x: Sequence[float], y: Sequence[float], sigma: float) -> float:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise DimensionMismatch(f"kernel arguments differ in shape: {x.shape} vs {y.shape}")
    d = x - y
    return float(np.exp(-np.dot(d, d) / sigma**2))


def kernel_matrix(X: np.ndarray, sigma: float, Z: np.ndarray | None = None) -> np.ndarray:
    """Gaussian kernel between rows of X and rows of Z (Z defaults to X).

    Distances are formed from differences, not from expanded dot products, so
    the self-kernel is exactly symmetric with an exact unit diagonal.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Z = X if Z is None else np.atleast_2d(np.asarray(Z, dtype=float))
    if X.shape[1] != Z.shape[1]:
        raise DimensionMismatch(f"feature dimension {X.shape[1]} vs {Z.shape[1]}")
    diff = X[:, None, :] - Z[None, :, :]
    return np.exp(-np.einsum("ijk,ijk->ij", diff, diff) / sigma**2)


def fit_weights(K: np.ndarray, Y: np.ndarray, lam: float) -> np.ndarray:
    """Solve (K + lam*I) A = Y by Cholesky factorization."""
    if not lam > 0:
        raise ValueError("regularization must be positive")
    K = np.asarray(K, dtype=float)
    Y = np.asarray(Y, dtype=float)
    try:
        factor = scipy.linalg.cho_factor(K + lam * np.eye(len(K)), lower=True)
        A = scipy.linalg.cho_solve(factor, Y)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"kernel system could not be solved: {exc}") from exc
    if not np.all(np.isfinite(A)):
        raise NumericalFailure("kernel system produced non-finite weights")
    return A


@dataclass(frozen=True)
class PredictionModel:
    strategy_id: str
    train_ids: tuple[str, ...]
    X: np.ndarray
    Y: np.ndarray
    A: np.ndarray
    sigma: float
    lam: float
    min_time: float
    max_time: float
    min_training_size: int = 5

    @property
    def size(self) -> int:
        return len(self.train_ids)

    def to_dict(self) -> dict:
        return {
            "strategy_id": self.strategy_id,
            "train_ids": list(self.train_ids),
            "X": self.X.tolist(),
            "Y": self.Y.tolist(),
            "A": self.A.tolist(),
            "sigma": self.sigma,
            "lambda": self.lam,
            "min_time": self.min_time,
            "max_time": self.max_time,
            "min_training_size": self.min_training_size,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> PredictionModel:
        n = len(d["train_ids"])
        X = np.array(d["X"], dtype=float).reshape(n, -1) if n else np.zeros((0, 0))
        return cls(d["strategy_id"], tuple(d["train_ids"]), X,
                   np.array(d["Y"], dtype=float), np.array(d["A"], dtype=float),
                   float(d["sigma"]), float(d["lambda"]), float(d["min_time"]),
                   float(d["max_time"]), int(d["min_training_size"]))


def train_model(strategy_id: str, train_ids: Sequence[str], X: np.ndarray, Y: np.ndarray,
                sigma: float, lam: float, min_training_size: int = 5) -> PredictionModel:
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    A = fit_weights(kernel_matrix(X, sigma), Y, lam)
    return PredictionModel(strategy_id, tuple(train_ids), X, Y, A, float(sigma), float(lam),
                           float(Y.min()), float(Y.max()), min_training_size)


def raw_predict(model: PredictionModel, x: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    if model.size == 0:
        raise EmptyModel(f"model {model.strategy_id} has no training data")
    if x.shape != (model.X.shape[1],):
        raise DimensionMismatch(f"query has shape {x.shape}, model expects {model.X.shape[1]}")
    k = kernel_matrix(model.X, model.sigma, x[None, :])[:, 0]
    return float(k @ model.A)


def clamped_predict(model: PredictionModel, x: Sequence[float], *, speed_ratio: float = 1.0,
                    min_run_time: float = 0.0) -> float:
    """Prediction guarded against the regressor's worst habits.

    Small models predict their largest training time; otherwise predictions
    are lifted to at least the smallest training time. The result is scaled
    by `speed_ratio` and floored at `min_run_time`.
    """
    if model.size == 0:
        raise EmptyModel(f"model {model.strategy_id} has no training data")
    if model.size < model.min_training_size:
        t = model.max_time
    else:
        t = max(raw_predict(model, x), model.min_time)
    return max(t * speed_ratio, min_run_time)


# ------------------------------------------------------------ model selection


def fold_indices(m: int, folds: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle of range(m) cut into `folds` contiguous chunks.

    Chunk sizes differ by at most one; the first m % folds chunks get the extra row.
    """
    perm = np.random.default_rng(seed).permutation(m)
    return np.array_split(perm, folds)


def cv_loss_table(X: np.ndarray, Y: np.ndarray, lam_grid: Sequence[float],
                  sigma_grid: Sequence[float], folds: int, seed: int = 0) -> np.ndarray:
    """Mean over folds of the held-out mean squared error, shape (len(lam), len(sigma))."""
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    m = len(Y)
    if m < folds:
        raise TooFewSamples(f"{m} samples cannot fill {folds} folds")
    parts = fold_indices(m, folds, seed)
    table = np.zeros((len(lam_grid), len(sigma_grid)))
    for j, sigma in enumerate(sigma_grid):
        K = kernel_matrix(X, sigma)
        for held in parts:
            train = np.setdiff1d(np.arange(m), held)
            K_tt = K[np.ix_(train, train)]
            K_ht = K[np.ix_(held, train)]
            for i, lam in enumerate(lam_grid):
                A = fit_weights(K_tt, Y[train], lam)
                err = K_ht @ A - Y[held]
                table[i, j] += float(np.mean(err**2))
    return table / folds


def cross_validate(X: np.ndarray, Y: np.ndarray, lam_grid: Sequence[float],
                   sigma_grid: Sequence[float], folds: int = 10, seed: int = 0,
                   enabled: bool = True) -> tuple[float, float]:
    """Grid pair (lambda, sigma) with the smallest cross-validated loss.

    Ties go to the smaller lambda, then the smaller sigma. When `enabled` is
    false the first entry of each grid is returned untouched.
    """
    if not lam_grid or not sigma_grid:
        raise ValueError("empty grid")
    if not enabled:
        return float(lam_grid[0]), float(sigma_grid[0])
    table = cv_loss_table(X, Y, lam_grid, sigma_grid, folds, seed)
    best = None
    for i, j in sorted(np.ndindex(table.shape), key=lambda ij: (lam_grid[ij[0]], sigma_grid[ij[1]])):
        if best is None or table[i, j] < table[best]:
            best = (i, j)
    assert best is not None
    return float(lam_grid[best[0]]), float(sigma_grid[best[1]])


# ------------------------------------------------------------ start strategies


def solved_times(records: Sequence[RunRecord]) -> dict[str, dict[str, float]]:
    """Fastest solved time per (strategy, problem) over a run log."""
    out: dict[str, dict[str, float]] = {}
    for r in records:
        if r.solved:
            row = out.setdefault(r.strategy_id, {})
            row[r.problem] = min(r.wall_seconds, row.get(r.problem, float("inf")))
    return out


def select_start_strategies(solved: SolvedTimes, n_start: int,
                            start_time: float) -> list[tuple[str, float]]:
    """Greedy cover of the problems solvable within `start_time`.

    Each pick maximizes newly covered problems; ties go to the smaller total
    time on those problems, then to the smaller strategy id.
    """
    covers = {sid: {p: t for p, t in row.items() if t <= start_time} for sid, row in solved.items()}
    covered: set[str] = set()
    schedule: list[tuple[str, float]] = []
    while len(schedule) < n_start:
        best = None
        for sid in sorted(covers):
            new = {p: t for p, t in covers[sid].items() if p not in covered}
            key = (-len(new), sum(new.values()), sid)
            if new and (best is None or key < best[0]):
                best = (key, sid, new)
        if best is None:
            break
        schedule.append((best[1], float(start_time)))
        covered.update(best[2])
        del covers[best[1]]
    return schedule


def global_best_strategy(solved: SolvedTimes) -> str | None:
    """Strategy solving the most problems (then least total time, then id)."""
    ranked = sorted(solved, key=lambda sid: (-len(solved[sid]), sum(solved[sid].values()), sid))
    return ranked[0] if ranked else None


# -------------------------------------------------------------- model building


@dataclass(frozen=True)
class LearnParams:
    regularization_grid: tuple[float, ...]
    kernel_grid: tuple[float, ...]
    crossvalidate: bool = True
    cv_folds: int = 10
    cpu_bias: float = 0.0
    min_training_size: int = 5
    seed: int = 0

    @classmethod
    def from_settings(cls, settings) -> LearnParams:
        return cls(tuple(settings.regularization_grid), tuple(settings.kernel_grid),
                   settings.crossvalidate, settings.cv_folds, settings.cpu_bias,
                   settings.min_training_size, settings.rng_seed)


def training_problems(strategy_id: str, problems: Sequence[str], solved: SolvedTimes,
                      schedule: Sequence[tuple[str, float]]) -> list[str]:
    """Problems solved by the strategy and by no start strategy within its slot."""
    mine = solved.get(strategy_id, {})
    out = []
    for p in problems:
        if p not in mine:
            continue
        if any(solved.get(sid, {}).get(p, float("inf")) <= t for sid, t in schedule):
            continue
        out.append(p)
    return out


def _select_params(X: np.ndarray, Y: np.ndarray, params: LearnParams) -> tuple[float, float]:
    m = len(Y)
    folds = params.cv_folds
    if params.crossvalidate and m < folds:
        if m < 2:
            return params.regularization_grid[0], params.kernel_grid[0]
        folds = m  # leave-one-out when too few rows for the configured folds
    return cross_validate(X, Y, params.regularization_grid, params.kernel_grid, folds,
                          params.seed, enabled=params.crossvalidate)


def fit_strategy_model(strategy_id: str, train_ids: Sequence[str], features: Mapping[str, np.ndarray],
                       solved: SolvedTimes, params: LearnParams) -> PredictionModel:
    X = np.vstack([features[p] for p in train_ids])
    Y = np.array([solved[strategy_id][p] + params.cpu_bias for p in train_ids])
    lam, sigma = _select_params(X, Y, params)
    return train_model(strategy_id, train_ids, X, Y, sigma, lam, params.min_training_size)


def build_models(strategy_ids: Sequence[str], problems: Sequence[str], solved: SolvedTimes,
                 features: Mapping[str, np.ndarray], schedule: Sequence[tuple[str, float]],
                 params: LearnParams, cores: int = 1) -> dict[str, PredictionModel]:
    """One model per strategy with a nonempty training set.

    `features` must already be normalized.
    """
    jobs = []
    for sid in strategy_ids:
        ids = training_problems(sid, problems, solved, schedule)
        if ids:
            jobs.append((sid, ids))
        else:
            log.info("strategy %s has no training problems left; dropped", sid)

    def fit(job):
        return fit_strategy_model(job[0], job[1], features, solved, params)

    if cores > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=cores) as pool:
            models = list(pool.map(fit, jobs))
    else:
        models = [fit(j) for j in jobs]
    return {m.strategy_id: m for m in models}
