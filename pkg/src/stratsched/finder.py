"""Per-problem stochastic local search for fast strategies."""
from __future__ import annotations

import logging
import math
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from stratsched.runner import RunRecord, Runner, run_batch
from stratsched.strategy import ParameterSpace, Strategy, create_random_strategies

log = logging.getLogger(__name__)


@dataclass
class SearchResult:
    best: dict[str, tuple[Strategy, float]]
    records: list[RunRecord]
    strategies: dict[str, Strategy]
    # (problem, new best time) in the order improvements happened
    improvements: list[tuple[str, float]] = field(default_factory=list)
    evaluated: list[str] = field(default_factory=list)


def find_strategies(problems: Sequence[str], seeds: Sequence[Strategy], runner: Runner,
                    space: ParameterSpace, *, tol: float, t_max: float, n_walks: int,
                    walk_length: int, rng: random.Random, cores: int = 1) -> SearchResult:
    """Search, for every problem, the strategy that solves it fastest.

    Strategies are taken from a FIFO queue seeded with `seeds`. Each popped
    strategy runs on every problem with limit `t_max`. When it solves a
    problem within `tol` of the best known time, `n_walks` random neighbours
    (each `walk_length` mutations away) are tried on that problem with the
    popped strategy's time as their limit, and a neighbour that improved the
    problem's best time joins the queue. A strategy id is queued at most once.

    Note that with ``tol = 0`` no neighbourhood is ever explored: a run that
    just set the best time is not strictly faster than itself.
    """
    if not problems:
        raise ValueError("no problems to search on")
    if not seeds:
        raise ValueError("the strategy queue needs at least one seed")
    if tol < 0:
        raise ValueError("tolerance must be >= 0")

    queue: deque[Strategy] = deque()
    queued: set[str] = set()
    strategies: dict[str, Strategy] = {}
    for s in seeds:
        strategies.setdefault(s.id, s)
        if s.id not in queued:
            queued.add(s.id)
            queue.append(s)

    best_time = {p: float(t_max) for p in problems}
    best_strategy: dict[str, Strategy] = {}
    result = SearchResult({}, [], strategies)

    while queue:
        s = queue.popleft()
        result.evaluated.append(s.id)
        sweep = run_batch(runner, [(s, p, t_max) for p in problems], cores)
        result.records.extend(sweep)
        for p, rec in zip(problems, sweep):
            old_best = best_time[p]
            if not rec.solved:
                continue
            needed = rec.wall_seconds
            if needed < best_time[p]:
                best_time[p] = needed
                best_strategy[p] = s
                result.improvements.append((p, needed))
            if needed < best_time[p] + tol:
                neighbours = create_random_strategies(s, n_walks, walk_length, space, rng)
                for r in neighbours:
                    strategies.setdefault(r.id, r)
                local = run_batch(runner, [(r, p, needed) for r in neighbours], cores)
                result.records.extend(local)
                for r, rr in zip(neighbours, local):
                    if rr.solved and rr.wall_seconds < best_time[p]:
                        best_time[p] = rr.wall_seconds
                        best_strategy[p] = r
                        result.improvements.append((p, rr.wall_seconds))
                if best_time[p] < old_best:
                    winner = best_strategy[p]
                    if winner.id not in queued:
                        queued.add(winner.id)
                        queue.append(winner)
        log.debug("evaluated %s; %d queued", s.id, len(queue))

    result.best = {p: (best_strategy[p], best_time[p]) for p in problems if p in best_strategy}
    return result


def best_times(records: Sequence[RunRecord]) -> dict[str, float]:
    """Fastest solved time per problem over a run log."""
    out: dict[str, float] = {}
    for r in records:
        if r.solved and r.wall_seconds < out.get(r.problem, math.inf):
            out[r.problem] = r.wall_seconds
    return out


def select_preselected(records: Sequence[RunRecord], tolerance: float) -> set[str]:
    """Ids of strategies within `tolerance` of the best time on at least one problem."""
    best = best_times(records)
    return {r.strategy_id for r in records
            if r.solved and r.wall_seconds <= best[r.problem] + tolerance}


def rerun_full_time(strategies: Sequence[Strategy], problems: Sequence[str], runner: Runner,
                    full_limit: float | Mapping[str, float], cores: int = 1) -> list[RunRecord]:
    """Run every strategy on every problem at the long limit.

    `full_limit` may also map problems to their own limits; problems missing
    from such a mapping are skipped.
    """
    if isinstance(full_limit, Mapping):
        jobs = [(s, p, float(full_limit[p])) for s in strategies for p in problems if p in full_limit]
    else:
        jobs = [(s, p, float(full_limit)) for s in strategies for p in problems]
    return run_batch(runner, jobs, cores)
