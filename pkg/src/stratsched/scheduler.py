"""Building and running a strategy schedule for a single new problem."""
from __future__ import annotations

import logging
import random
import time
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np

from stratsched.errors import NoCandidate
from stratsched.features import normalize
from stratsched.learner import PredictionModel, SolvedTimes, clamped_predict, train_model
from stratsched.runner import Runner
from stratsched.store import ModelStore

log = logging.getLogger(__name__)


def choose_best_strategy(predictions: Sequence[tuple[float, str]], history: Mapping[str, float],
                         rng: random.Random) -> tuple[float, str]:
    """Fastest predicted strategy among those not yet run for at least that long.

    Exact ties are broken by a uniform draw from `rng`.
    """
    if not predictions:
        raise NoCandidate("no predictions")
    candidates = [(t, s) for t, s in predictions if s not in history or t > history[s]]
    if not candidates:
        raise NoCandidate("every strategy already ran for its predicted time")
    t_min = min(t for t, _ in candidates)
    tied = sorted(s for t, s in candidates if t == t_min)
    return t_min, tied[rng.randrange(len(tied))] if len(tied) > 1 else tied[0]


def update_models(live_models: Mapping[str, PredictionModel], ran: str, ran_for: float,
                  solved: SolvedTimes) -> dict[str, PredictionModel]:
    """Forget training problems that `ran` would have solved within `ran_for` seconds.

    Models losing rows are refit with their own lambda and sigma; models left
    without rows disappear. Untouched models are returned as the same objects.
    Times are compared against the raw (unbiased) run log.
    """
    times = solved.get(ran, {})
    out: dict[str, PredictionModel] = {}
    for sid, model in live_models.items():
        keep = [i for i, p in enumerate(model.train_ids) if not times.get(p, np.inf) <= ran_for]
        if len(keep) == model.size:
            out[sid] = model
        elif keep:
            out[sid] = train_model(sid, [model.train_ids[i] for i in keep], model.X[keep],
                                   model.Y[keep], model.sigma, model.lam, model.min_training_size)
    return out


@dataclass(frozen=True)
class RunEvent:
    strategy_id: str
    allotted: float
    solved: bool
    wall_seconds: float
    phase: str  # "start", "predicted" or "fallback"


@dataclass
class SolveResult:
    problem: str
    solved: bool
    time_used: float
    strategy_id: str | None = None
    event_log: list[RunEvent] = field(default_factory=list)
    update_seconds: list[float] = field(default_factory=list)
    feature_seconds: float = 0.0
    history: dict[str, float] = field(default_factory=dict)

    def result_line(self) -> str:
        if self.solved:
            return f"SOLVED {self.problem} {self.strategy_id} {self.time_used:.3f}"
        return f"UNSOLVED {self.problem} {self.time_used:.3f}"

    def to_dict(self) -> dict:
        return {
            "problem": self.problem,
            "solved": self.solved,
            "strategy_id": self.strategy_id,
            "time_used": self.time_used,
            "feature_seconds": self.feature_seconds,
            "update_seconds": self.update_seconds,
            "events": [vars(e) for e in self.event_log],
        }


def solve(problem: str, budget: float, store: ModelStore, runner: Runner,
          features: Callable[[str], np.ndarray], *, rng: random.Random,
          speed_ratio: float = 1.0, min_run_time: float = 0.1,
          clock: Callable[[], float] = time.monotonic) -> SolveResult:
    """Try to solve `problem` within `budget` seconds.

    Runs the start strategies, then alternates between predicting runtimes,
    running the most promising strategy and, after a failure, refitting the
    session's private copies of the models. Feature extraction and refits are
    charged to the budget. The model store is never modified.
    """
    if budget <= 0:
        raise ValueError("budget must be positive")
    manifest = store.manifest
    res = SolveResult(problem, False, 0.0)
    history = res.history

    t0 = clock()
    x = normalize(features(problem), manifest.stats)
    res.feature_seconds = clock() - t0
    res.time_used = res.feature_seconds

    def attempt(sid: str, allot: float, phase: str) -> bool:
        rec = runner.run(manifest.strategies[sid], problem, allot)
        res.event_log.append(RunEvent(sid, allot, rec.solved, rec.wall_seconds, phase))
        res.time_used += rec.wall_seconds
        history[sid] = max(history.get(sid, 0.0), allot)
        if rec.solved:
            res.solved, res.strategy_id = True, sid
        return rec.solved

    for sid, slot in manifest.start_schedule:
        remaining = budget - res.time_used
        if remaining < min_run_time or remaining <= 0:  # min_run_time may be 0
            return res
        if attempt(sid, min(slot, remaining), "start"):
            return res

    live = dict(store.models)
    while res.time_used < budget:
        remaining = budget - res.time_used
        if remaining < min_run_time:
            break
        predictions = [(clamped_predict(m, x, speed_ratio=speed_ratio, min_run_time=min_run_time), sid)
                       for sid, m in sorted(live.items())]
        try:
            t_pred, sid = choose_best_strategy(predictions, history, rng)
        except NoCandidate:
            fallback = manifest.global_best
            if fallback is not None and remaining > history.get(fallback, 0.0):
                log.info("schedule exhausted; running %s for the remaining %.2fs", fallback, remaining)
                attempt(fallback, remaining, "fallback")
            break
        allot = min(t_pred, remaining)
        if allot <= history.get(sid, 0.0):
            break
        if attempt(sid, allot, "predicted"):
            return res
        u0 = clock()
        live = update_models(live, sid, allot, manifest.solved_times)
        spent = clock() - u0
        res.update_seconds.append(spent)
        res.time_used += spent
    return res
