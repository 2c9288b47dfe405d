"""Command-line entry point: find-strategies, learn, run.

Exit codes: 0 success (for ``run``: solved), 7 ran fine but did not solve,
2 configuration error, 1 any other failure. Diagnostics go to stderr;
stdout carries only ``run``'s result line.
"""
from __future__ import annotations

import argparse
import json
import logging
import random
import shutil
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from stratsched.config import Settings, Setup, load_setup, parse_strategies
from stratsched.errors import ConfigError, NoStrategies, StratschedError
from stratsched.features import (
    extract_features,
    extract_many,
    fit_normalization,
    normalize,
    read_features_file,
    write_features_file,
)
from stratsched.finder import find_strategies, rerun_full_time, select_preselected
from stratsched.learner import (
    LearnParams,
    build_models,
    global_best_strategy,
    select_start_strategies,
    solved_times,
)
from stratsched.runner import MockSolver, Runner, SubprocessRunner
from stratsched.scheduler import solve
from stratsched.store import (
    Manifest,
    ModelStore,
    RecordingRunner,
    RunStore,
    fingerprint,
    load_models,
    save_models,
    write_strategies,
)

log = logging.getLogger("stratsched")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG, EXIT_UNSOLVED = 0, 1, 2, 7


class CommandFailure(StratschedError):
    pass


def read_problems(settings: Settings) -> list[str]:
    try:
        lines = settings.problems_file.read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"[Search] Problems: cannot read {settings.problems_file}: {exc}") from exc
    problems = [ln.strip() for ln in lines if ln.strip() and not ln.lstrip().startswith("#")]
    if not problems:
        raise ConfigError(f"[Search] Problems: {settings.problems_file} lists no problems")
    if settings.tptp_dir is not None:
        problems = [p if Path(p).is_absolute() else str(settings.tptp_dir / p) for p in problems]
    return problems


def make_runner(setup: Setup) -> Runner:
    s = setup.settings
    if s.mock_solver is not None:
        try:
            return MockSolver.from_json(s.mock_solver.read_text())
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"[Settings] MockSolver: {exc}") from exc
    if s.tmp_dir is not None:
        s.tmp_dir.mkdir(parents=True, exist_ok=True)
    return SubprocessRunner(setup.solver, tmp_dir=s.tmp_dir, log_dir=s.results_dir / "logs")


def features_path(settings: Settings) -> Path:
    return settings.features_file or settings.results_dir / "features.csv"


# ---------------------------------------------------------------- commands


def cmd_find_strategies(setup: Setup, runner: Runner | None = None) -> int:
    s = setup.settings
    problems = read_problems(s)
    s.results_dir.mkdir(parents=True, exist_ok=True)
    if s.clear:
        for f in (s.runs_file, s.discovered_file, s.preselected_file):
            f.unlink(missing_ok=True)
    if s.try_with_new_default_time:
        if s.tmp_results_dir is None:
            raise ConfigError("[Settings] TmpResultsDir is required with TryWithNewDefaultTime")
        seeds = parse_strategies((s.tmp_results_dir / "strategies.ini").read_text(), setup.space)
    else:
        seeds = setup.seeds
    if not seeds:
        raise ConfigError("[Learn] StrategiesFile must define at least one seed strategy")

    with RunStore(s.runs_file) as store:
        rec = RecordingRunner(runner or make_runner(setup), store, s.discovered_file)
        result = find_strategies(problems, seeds, rec, setup.space, tol=s.tolerance,
                                 t_max=s.search_time_limit, n_walks=s.walks,
                                 walk_length=s.walk_length, rng=random.Random(s.rng_seed),
                                 cores=s.cores)
        chosen = sorted(select_preselected(result.records, s.tolerance))
        strategies = [result.strategies[sid] for sid in chosen]
        if s.full_time:
            limit: float | dict[str, float] = s.search_time_limit
        else:
            limit = {p: float(np.ceil(t)) for p, (_, t) in result.best.items()}
        rerun_full_time(strategies, problems, rec, limit, s.cores)
        write_strategies(s.preselected_file, strategies)
        log.info("%d runs executed, %d replayed; %d of %d problems solved; %d strategies kept",
                 rec.executed, rec.replayed, len(result.best), len(problems), len(strategies))
    return EXIT_OK


def cmd_learn(setup: Setup) -> int:
    s = setup.settings
    problems = read_problems(s)
    if not s.preselected_file.exists() or not s.runs_file.exists():
        raise CommandFailure(f"no search results in {s.results_dir}; run find-strategies first")
    try:
        preselected = parse_strategies(s.preselected_file.read_text(), setup.space)
    except NoStrategies:
        raise CommandFailure("no solvable training problems") from None
    by_id = {st.id: st for st in preselected}
    with RunStore(s.runs_file) as store:
        records = store.records
    wanted = set(problems)
    solved = {sid: {p: t for p, t in row.items() if p in wanted}
              for sid, row in solved_times(records).items() if sid in by_id}
    solved = {sid: row for sid, row in solved.items() if row}
    if not solved:
        raise CommandFailure("no solvable training problems")

    cache_file = features_path(s)
    raw = extract_many(problems, s.feature_mode, s.feature_extractor_cmd, tokens=s.feature_tokens,
                       cores=s.cores, cache=read_features_file(cache_file))
    write_features_file(cache_file, raw)
    stats = fit_normalization([raw[p] for p in problems])
    normed = {p: normalize(raw[p], stats) for p in problems}

    schedule = select_start_strategies(solved, s.start_strategies, s.start_strategy_time)
    models = build_models(sorted(by_id), problems, solved, normed, schedule,
                          LearnParams.from_settings(s), cores=s.cores)
    manifest = Manifest(stats.dimension, stats, schedule,
                        fingerprint(s.learning_fingerprint_fields()), by_id,
                        {sid: dict(sorted(row.items())) for sid, row in sorted(solved.items())},
                        global_best_strategy(solved), s.cpu_bias)
    if s.results_store.exists():
        shutil.rmtree(s.results_store)
    save_models(s.results_store, ModelStore(manifest, models))
    log.info("learned %d models; %d start strategies", len(models), len(schedule))
    return EXIT_OK


def cmd_run(setup: Setup, budget: float, problem: str, runner: Runner | None = None) -> int:
    s = setup.settings
    if budget <= 0:
        raise ConfigError("-t must be positive")
    store = load_models(s.results_store, fingerprint(s.learning_fingerprint_fields()))

    def features(p: str) -> np.ndarray:
        return extract_features(p, s.feature_mode, s.feature_extractor_cmd,
                                tokens=s.feature_tokens, dimension=store.manifest.dimension)

    result = solve(problem, budget, store, runner or make_runner(setup), features,
                   rng=random.Random(s.rng_seed), speed_ratio=s.cpu_speed_ratio,
                   min_run_time=s.min_run_time)
    print(result.result_line(), flush=True)
    if s.output_file is not None:
        s.output_file.parent.mkdir(parents=True, exist_ok=True)
        s.output_file.write_text(json.dumps(result.to_dict(), indent=1) + "\n")
    return EXIT_OK if result.solved else EXIT_UNSOLVED


# -------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="stratsched", description=__doc__.split("\n")[0])
    ap.add_argument("--config", required=True, help="settings file (setup.ini)")
    ap.add_argument("--seed", type=int, default=None, help="override [Settings] Seed")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    sub.add_parser("find-strategies", help="search strategies on the training problems")
    sub.add_parser("learn", help="fit runtime models from the search results")
    run = sub.add_parser("run", help="solve one problem with a learned schedule")
    run.add_argument("-t", type=float, required=True, dest="time", help="time budget in seconds")
    run.add_argument("-p", required=True, dest="problem", help="problem file")
    return ap


def _setup_logging(settings: Settings | None, verbose: bool) -> None:
    root = logging.getLogger("stratsched")
    root.handlers.clear()
    root.setLevel(logging.DEBUG if verbose else logging.INFO)
    root.propagate = False
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    if settings is not None and settings.log_to_file:
        path = settings.log_file or settings.results_dir / "stratsched.log"
        path.parent.mkdir(parents=True, exist_ok=True)
        fh = logging.FileHandler(path)
        fh.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root.addHandler(fh)
    logging.captureWarnings(True)
    warn_log = logging.getLogger("py.warnings")
    warn_log.handlers = [handler]
    warn_log.propagate = False


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(None, args.verbose)
    try:
        setup = load_setup(args.config, seed=args.seed)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    _setup_logging(setup.settings, args.verbose)
    try:
        if args.command == "find-strategies":
            return cmd_find_strategies(setup)
        if args.command == "learn":
            return cmd_learn(setup)
        return cmd_run(setup, args.time, args.problem)
    except ConfigError as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except StratschedError as exc:
        log.error("%s", exc)
        return EXIT_FAILURE
    except Exception:  # noqa: BLE001
        log.exception("internal error")
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
