"""Learned schedule vs. every fixed strategy on the two-cluster mock corpus.

Runs find-strategies and learn through the CLI, then solves each held-out
problem with the learned schedule and with each strategy of the space on
its own, all under the same budget.
"""
import argparse
import contextlib
import io
import random
import tempfile
from pathlib import Path

from stratsched.cli import main as cli
from stratsched.config import load_setup
from stratsched.demo import write_two_cluster_corpus
from stratsched.features import extract_features
from stratsched.scheduler import solve
from stratsched.store import load_models


def run(out: Path, args: argparse.Namespace) -> None:
    corpus = write_two_cluster_corpus(out, args.train, args.test, args.solve_time, args.seed,
                                      solve_time_b=args.solve_time_b)
    for cmd in ("find-strategies", "learn"):
        with contextlib.redirect_stdout(io.StringIO()):
            if cli(["--config", str(corpus.config), cmd]) != 0:
                raise SystemExit(f"{cmd} failed")
    setup = load_setup(corpus.config)
    store = load_models(setup.settings.results_store)
    print(f"start schedule: {store.manifest.start_schedule}")
    print(f"models: {sorted(store.models)}")

    print(f"\n{'problem':<8} {'result':<9} {'time':>6}  runs")
    learned = 0
    for p in corpus.test:
        res = solve(p, args.budget, store, corpus.mock, extract_features,
                    rng=random.Random(args.seed), min_run_time=setup.settings.min_run_time)
        learned += res.solved
        runs = " ".join(f"{e.strategy_id}:{e.allotted:.1f}{'+' if e.solved else '-'}"
                        for e in res.event_log)
        print(f"{Path(p).stem:<8} {'solved' if res.solved else 'unsolved':<9} {res.time_used:6.2f}  {runs}")

    n = len(corpus.test)
    print(f"\nlearned schedule: {learned}/{n}")
    for s in corpus.space.enumerate():
        count = sum(corpus.mock.run(s, p, args.budget).solved for p in corpus.test)
        print(f"fixed {s.id} {dict(s.values)} {sorted(s.flags)}: {count}/{n}")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=None, help="keep the corpus here")
    ap.add_argument("--train", type=int, default=20)
    ap.add_argument("--test", type=int, default=5)
    ap.add_argument("--budget", type=float, default=10.0)
    ap.add_argument("--solve-time", type=float, default=2.0)
    ap.add_argument("--solve-time-b", type=float, default=None)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    if args.out is not None:
        run(args.out, args)
    else:
        with tempfile.TemporaryDirectory() as tmp:
            run(Path(tmp), args)


if __name__ == "__main__":
    main()
