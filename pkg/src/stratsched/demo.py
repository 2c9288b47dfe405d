"""Synthetic two-cluster corpus for the mock solver.

Problems come in two clusters whose files differ syntactically (cluster A
uses ``fof(`` lines, cluster B ``cnf(`` lines), so the builtin features tell
them apart. Strategy ``heuristic=A`` solves exactly the A problems and
``heuristic=B`` exactly the B problems, in `solve_time` seconds (B problems
take `solve_time_b` when given).
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from pathlib import Path

from stratsched.config import parse_solver_config
from stratsched.runner import MockSolver
from stratsched.strategy import ParameterSpace, Strategy

SOLVER_INI = """\
[ATP Settings]
binary = mock-prover
time = --cpu-limit=
problem =
strategy = E
default = --auto
success = SZS status Theorem

[Boolean Parameters]
--presat

[List Parameters]
--heuristic = A,B,C
"""

SEEDS_INI = """\
[Default]
--heuristic = C

[ClauseHeavy]
--heuristic = A

[UnitHeavy]
--heuristic = B
"""


def problem_text(cluster: str, index: int, rng: random.Random) -> str:
    token = "fof" if cluster == "A" else "cnf"
    n = 20 + rng.randrange(6)
    lines = [f"% synthetic problem {cluster}{index:03d}"]
    lines += [f"{token}(ax{j}, axiom, p{j}(X) => q{j}(X))." for j in range(n)]
    lines.append(f"{token}(goal, conjecture, q0(a)).")
    return "\n".join(lines) + "\n"


@dataclass
class TwoClusterCorpus:
    root: Path
    space: ParameterSpace
    strategy_a: Strategy
    strategy_b: Strategy
    train: list[str]
    test: list[str]
    mock: MockSolver
    config: Path

    def cluster(self, problem: str) -> str:
        return Path(problem).name[0]


def write_two_cluster_corpus(root: str | Path, n_train: int = 20, n_test: int = 5,
                             solve_time: float = 2.0, seed: int = 0,
                             extra_settings: str = "",
                             solve_time_b: float | None = None) -> TwoClusterCorpus:
    """Write problems, solver/strategy/settings files and a mock table under `root`."""
    root = Path(root).resolve()
    rng = random.Random(seed)
    pdir = root / "problems"
    pdir.mkdir(parents=True, exist_ok=True)
    _, space = parse_solver_config(SOLVER_INI)
    sa = Strategy.make((), {"--heuristic": "A"})
    sb = Strategy.make((), {"--heuristic": "B"})

    def make(cluster: str, start: int, count: int) -> list[str]:
        out = []
        for i in range(start, start + count):
            path = pdir / f"{cluster}{i:03d}.p"
            path.write_text(problem_text(cluster, i, rng))
            out.append(str(path))
        return out

    train = [p for pair in zip(make("A", 0, n_train), make("B", 0, n_train)) for p in pair]
    test = make("A", n_train, n_test) + make("B", n_train, n_test)
    table = {}
    for p in train + test:
        if Path(p).name[0] == "A":
            table[(p, sa.id)] = solve_time
        else:
            table[(p, sb.id)] = solve_time if solve_time_b is None else solve_time_b
    mock = MockSolver(table)

    (root / "ATP.ini").write_text(SOLVER_INI)
    (root / "strategies.ini").write_text(SEEDS_INI)
    (root / "problems.txt").write_text("\n".join(train) + "\n")
    (root / "mock.json").write_text(mock.to_json())
    config = root / "setup.ini"
    config.write_text(f"""\
[Settings]
ATP = ATP.ini
MockSolver = mock.json
ResultsDir = results
ResultsPickle = models
Cores = 1
Seed = {seed}

[Search]
Time = 10
Problems = problems.txt
FullTime = True
Walks = 4
WalkLength = 1

[Learn]
Features = Builtin
StrategiesFile = strategies.ini
StartStrategies = 2
StartStrategiesTime = 1.0
Tolerance = 1.0

[Run]
MinRunTime = 0.1
OutputFile = results/last_run.json
{extra_settings}""")
    return TwoClusterCorpus(root, space, sa, sb, train, test, mock, config)
