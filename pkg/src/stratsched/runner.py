"""Running a solver on a problem under a wall-clock limit."""
from __future__ import annotations

import json
import logging
import os
import shutil
import signal
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from stratsched.config import SolverSpec
from stratsched.errors import SolverError, SpawnFailure
from stratsched.strategy import Strategy, format_invocation

log = logging.getLogger(__name__)

# the solver gets `limit` through its own time flag; the harness kills it this much later
KILL_GRACE = 0.5


@dataclass(frozen=True)
class RunRecord:
    problem: str
    strategy_id: str
    solved: bool
    wall_seconds: float
    time_limit: float
    error: str | None = None

    def __post_init__(self) -> None:
        if self.wall_seconds < 0:
            raise ValueError("negative wall time")
        if self.solved and self.wall_seconds > self.time_limit:
            raise ValueError("solved run exceeds its limit")


class Runner(Protocol):
    def run(self, strategy: Strategy, problem: str, limit: float) -> RunRecord: ...


Job = tuple[Strategy, str, float]


def run_strategy(runner: Runner, strategy: Strategy, problem: str, limit: float) -> RunRecord:
    if limit <= 0:
        raise ValueError("time limit must be positive")
    return runner.run(strategy, problem, limit)


def run_batch(runner: Runner, jobs: Sequence[Job], cores: int = 1) -> list[RunRecord]:
    """Run `jobs` with at most `cores` running at once; results keep input order.

    A failing job yields an unsolved record carrying the error text instead of
    aborting the batch.
    """
    if cores < 1:
        raise ValueError("cores must be >= 1")

    def one(job: Job) -> RunRecord:
        s, p, limit = job
        try:
            return run_strategy(runner, s, p, limit)
        except SolverError as exc:
            log.warning("run of %s on %s failed: %s", s.id, p, exc)
            return RunRecord(p, s.id, False, 0.0, limit, error=f"{type(exc).__name__}: {exc}")

    if cores == 1 or len(jobs) <= 1:
        return [one(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=cores) as pool:
        return list(pool.map(one, jobs))


# ------------------------------------------------------------------ real solver


def _kill_group(pid: int) -> None:
    try:
        os.killpg(pid, signal.SIGKILL)
    except (ProcessLookupError, PermissionError):
        pass


@dataclass
class SubprocessRunner:
    """Runs the external solver described by a SolverSpec.

    A run counts as solved when the process exits with status 0 before the
    deadline and its stdout contains the configured success marker. Output of each
    run goes to ``log_dir`` when set.
    """

    spec: SolverSpec
    tmp_dir: Path | None = None
    log_dir: Path | None = None
    grace: float = KILL_GRACE

    def run(self, strategy: Strategy, problem: str, limit: float) -> RunRecord:
        workdir = Path(tempfile.mkdtemp(prefix="run_", dir=self.tmp_dir))
        try:
            return self._run(strategy, problem, limit, workdir)
        finally:
            shutil.rmtree(workdir, ignore_errors=True)

    def _log_paths(self, strategy: Strategy, problem: str, limit: float,
                   workdir: Path) -> tuple[Path, Path]:
        if self.log_dir is None:
            return workdir / "stdout", workdir / "stderr"
        d = self.log_dir / strategy.id
        d.mkdir(parents=True, exist_ok=True)
        stem = f"{Path(problem).name}.{limit:g}"
        return d / f"{stem}.out", d / f"{stem}.err"

    def _run(self, strategy: Strategy, problem: str, limit: float, workdir: Path) -> RunRecord:
        inv = format_invocation(strategy, self.spec, problem, limit, mode_dir=workdir)
        if inv.aux_file is not None:
            Path(inv.aux_file[0]).write_text(inv.aux_file[1])
        out_path, err_path = self._log_paths(strategy, problem, limit, workdir)
        with open(out_path, "wb") as out, open(err_path, "wb") as err:
            start = time.monotonic()
            try:
                proc = subprocess.Popen(inv.argv, stdin=subprocess.DEVNULL, stdout=out,
                                        stderr=err, start_new_session=True)
            except OSError as exc:
                raise SpawnFailure(f"cannot start {inv.argv[0]}: {exc}") from exc
            timed_out = False
            try:
                code = proc.wait(timeout=limit + self.grace)
            except subprocess.TimeoutExpired:
                timed_out = True
                _kill_group(proc.pid)
                code = proc.wait()
            finally:
                # reap anything the solver left behind in its session
                _kill_group(proc.pid)
            wall = time.monotonic() - start
        if timed_out or wall > limit:
            return RunRecord(problem, strategy.id, False, float(limit), float(limit))
        stdout = out_path.read_text(errors="replace")
        solved = code == 0 and self.spec.success_marker in stdout
        if code == 0 and not solved:
            log.warning("%s on %s exited 0 without the success marker", strategy.id, problem)
        return RunRecord(problem, strategy.id, solved, wall, float(limit))


# ------------------------------------------------------------------ mock solver

UNSOLVABLE = None


@dataclass
class MockSolver:
    """Table-driven stand-in for a solver.

    ``table`` maps (problem, strategy id) to a solve time; missing pairs and
    pairs mapped to ``None`` are unsolvable. ``runtime_function`` is consulted
    for pairs absent from the table. With ``sleep_scale > 0`` a run really
    sleeps for ``scale * min(time, limit)`` seconds.
    """

    table: dict[tuple[str, str], float | None] = field(default_factory=dict)
    runtime_function: Callable[[str, Strategy], float | None] | None = None
    sleep_scale: float = 0.0
    calls: int = 0

    def __post_init__(self) -> None:
        for key, t in self.table.items():
            if t is not None and not t > 0:
                raise ValueError(f"mock time for {key} must be positive")

    def solve_time(self, strategy: Strategy, problem: str) -> float | None:
        key = (problem, strategy.id)
        if key in self.table:
            return self.table[key]
        if self.runtime_function is not None:
            return self.runtime_function(problem, strategy)
        return UNSOLVABLE

    def run(self, strategy: Strategy, problem: str, limit: float) -> RunRecord:
        self.calls += 1
        t = self.solve_time(strategy, problem)
        solved = t is not None and t <= limit
        wall = float(t) if solved else float(limit)
        if self.sleep_scale > 0:
            time.sleep(self.sleep_scale * wall)
        return RunRecord(problem, strategy.id, solved, wall, float(limit))

    @classmethod
    def from_json(cls, text: str) -> MockSolver:
        doc = json.loads(text)
        table: dict[tuple[str, str], float | None] = {}
        for row in doc.get("table", []):
            table[(str(row["problem"]), str(row["strategy"]))] = float(row["time"])
        for row in doc.get("unsolvable", []):
            table[(str(row["problem"]), str(row["strategy"]))] = UNSOLVABLE
        return cls(table, sleep_scale=float(doc.get("sleep_scale", 0.0)))

    def to_json(self) -> str:
        rows = sorted((p, s, t) for (p, s), t in self.table.items() if t is not None)
        unsolvable = sorted((p, s) for (p, s), t in self.table.items() if t is None)
        doc = {
            "table": [{"problem": p, "strategy": s, "time": t} for p, s, t in rows],
            "unsolvable": [{"problem": p, "strategy": s} for p, s in unsolvable],
        }
        return json.dumps(doc, indent=1) + "\n"


def feature_runtime_function(features: Mapping[str, Iterable[float]],
                             fn: Callable[[np.ndarray, Strategy], float | None]
                             ) -> Callable[[str, Strategy], float | None]:
    """Adapt a (feature vector, strategy) -> time function to MockSolver."""
    cache = {p: np.asarray(list(v), dtype=float) for p, v in features.items()}
    return lambda problem, strategy: fn(cache[problem], strategy)
