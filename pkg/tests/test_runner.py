import dataclasses
import time

import psutil
import pytest

from stratsched.config import SolverSpec
from stratsched.errors import SpawnFailure
from stratsched.runner import MockSolver, RunRecord, SubprocessRunner, run_batch, run_strategy
from stratsched.strategy import InvocationFormat, Strategy

S1 = Strategy.make((), {"--mode": "succeed"})


def stub(mode="succeed", sleep=0.0):
    return Strategy.make((), {"--mode": mode, "--sleep": str(sleep)})


def test_mock_solved_and_timeout():
    mock = MockSolver({("p1", S1.id): 2.0})
    assert run_strategy(mock, S1, "p1", 10) == RunRecord("p1", S1.id, True, 2.0, 10.0)
    assert run_strategy(mock, S1, "p1", 1) == RunRecord("p1", S1.id, False, 1.0, 1.0)
    assert run_strategy(mock, S1, "p2", 1).solved is False


def test_mock_is_deterministic():
    mock = MockSolver({("p1", S1.id): 2.0, ("p2", S1.id): None})
    jobs = [(S1, p, lim) for p in ("p1", "p2", "p3") for lim in (1.0, 2.0, 5.0)]
    assert run_batch(mock, jobs) == run_batch(mock, jobs, cores=3)


def test_mock_json_round_trip():
    mock = MockSolver({("p1", "abc"): 2.0, ("p2", "abc"): None})
    again = MockSolver.from_json(mock.to_json())
    assert again.table == mock.table


def test_mock_rejects_nonpositive_times():
    with pytest.raises(ValueError):
        MockSolver({("p", "s"): 0.0})


def test_record_invariants():
    with pytest.raises(ValueError):
        RunRecord("p", "s", True, 3.0, 2.0)
    with pytest.raises(ValueError):
        RunRecord("p", "s", False, -1.0, 2.0)


def test_nonpositive_limit_rejected():
    with pytest.raises(ValueError):
        run_strategy(MockSolver(), S1, "p", 0)


def test_batch_preserves_order():
    table = {(f"p{i}", S1.id): 0.5 * (4 - i) for i in range(4)}
    mock = MockSolver(table, sleep_scale=0.1)
    jobs = [(S1, f"p{i}", 10.0) for i in range(4)]
    out = run_batch(mock, jobs, cores=2)
    assert [r.problem for r in out] == ["p0", "p1", "p2", "p3"]
    assert [r.wall_seconds for r in out] == [2.0, 1.5, 1.0, 0.5]


def test_single_core_batch_is_sequential():
    times = [1.0, 2.0, 1.5]
    mock = MockSolver({(f"p{i}", S1.id): t for i, t in enumerate(times)}, sleep_scale=0.05)
    start = time.monotonic()
    run_batch(mock, [(S1, f"p{i}", 10.0) for i in range(3)], cores=1)
    elapsed = time.monotonic() - start
    expected = 0.05 * sum(times)
    assert expected <= elapsed <= expected + 0.1


def test_stub_solves(stub_spec, tmp_path):
    runner = SubprocessRunner(stub_spec, log_dir=tmp_path / "logs")
    rec = runner.run(stub(sleep=0.2), "prob.p", 5)
    assert rec.solved
    assert 0.2 <= rec.wall_seconds <= 0.4
    out = list((tmp_path / "logs").rglob("*.out"))
    assert out and "SZS status Theorem" in out[0].read_text()


@pytest.mark.parametrize("mode", ["fail", "garbage"])
def test_stub_unsolved(stub_spec, mode):
    rec = SubprocessRunner(stub_spec).run(stub(mode), "prob.p", 5)
    assert not rec.solved and rec.wall_seconds < 5


def test_solver_own_time_limit(stub_spec):
    rec = SubprocessRunner(stub_spec).run(stub(sleep=3), "prob.p", 0.3)
    assert rec == RunRecord("prob.p", stub(sleep=3).id, False, 0.3, 0.3)


def _children():
    return [c for c in psutil.Process().children(recursive=True) if c.status() != psutil.STATUS_ZOMBIE]


@pytest.mark.parametrize("mode", ["hang", "hang-tree"])
def test_timeout_kills_process_tree(stub_spec, mode):
    start = time.monotonic()
    rec = SubprocessRunner(stub_spec).run(stub(mode), "prob.p", 1.0)
    assert time.monotonic() - start <= 1.0 + 1.0
    assert rec.solved is False and rec.wall_seconds == 1.0
    time.sleep(0.1)
    assert _children() == []


def test_spawn_failure(tmp_path):
    spec = SolverSpec(str(tmp_path / "missing"), "-t")
    with pytest.raises(SpawnFailure):
        SubprocessRunner(spec).run(S1, "p", 1)


def test_batch_isolates_spawn_failure(stub_spec, tmp_path):
    broken = dataclasses.replace(stub_spec, binary_path=str(tmp_path / "missing"))

    class Mixed:
        def run(self, s, p, limit):
            spec = broken if p == "bad" else stub_spec
            return SubprocessRunner(spec).run(s, p, limit)

    jobs = [(stub(), p, 5.0) for p in ("ok1", "bad", "ok2")]
    out = run_batch(Mixed(), jobs, cores=2)
    assert [r.solved for r in out] == [True, False, True]
    assert out[1].error.startswith("SpawnFailure")
    assert out[0].error is None and out[2].error is None
    assert _children() == []


def test_satallax_mode_file_removed(stub_binary, tmp_path):
    seen = []

    class Spy(SubprocessRunner):
        def _run(self, strategy, problem, limit, workdir):
            rec = super()._run(strategy, problem, limit, workdir)
            seen.extend((f.name, f.read_text()) for f in workdir.iterdir())
            return rec

    spec = SolverSpec(str(stub_binary), "--cpu-limit=", "", InvocationFormat.SATALLAX)
    tmp = tmp_path / "tmp"
    tmp.mkdir()
    rec = Spy(spec, tmp_dir=tmp).run(Strategy.make((), {"E_TIMEOUT": "1"}), "p.p", 5)
    # the stub ignores -m and succeeds
    assert rec.solved
    assert any(name.startswith("mode_") and "E_TIMEOUT = 1" in text for name, text in seen)
    assert list(tmp.iterdir()) == []
