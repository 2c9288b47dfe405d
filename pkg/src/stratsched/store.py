"""Append-only run records and the JSON model store."""
from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import threading
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator, Mapping, Sequence

from stratsched.errors import DuplicateRecord, FingerprintMismatch, IoFailure, StoreError
from stratsched.features import NormalizationStats
from stratsched.learner import PredictionModel
from stratsched.runner import RunRecord, Runner
from stratsched.strategy import Strategy, strategies_to_ini

log = logging.getLogger(__name__)

HEADER = "problem,strategy_id,solved,wall_seconds,time_limit"


def _key(problem: str, strategy_id: str, time_limit: float) -> tuple[str, str, float]:
    return (problem, strategy_id, float(time_limit))


def _encode(r: RunRecord) -> str:
    for text in (r.problem, r.strategy_id):
        if any(c in text for c in ",\n\r"):
            raise StoreError(f"cannot store {text!r}: contains a separator")
    return f"{r.problem},{r.strategy_id},{int(r.solved)},{r.wall_seconds!r},{float(r.time_limit)!r}\n"


def _decode(line: str) -> RunRecord:
    problem, sid, solved, wall, limit = line.split(",")
    if solved not in ("0", "1"):
        raise ValueError(f"bad solved flag {solved!r}")
    return RunRecord(problem, sid, solved == "1", float(wall), float(limit))


class RunStore:
    """CSV file of RunRecords, loaded on open and appended to durably.

    A (problem, strategy, limit) triple is stored at most once. A torn final
    line left by a crash is dropped with a warning when the store is opened.
    """

    def __init__(self, path: str | os.PathLike[str], *, fsync: bool = True):
        self.path = Path(path)
        self.fsync = fsync
        self._lock = threading.Lock()
        self._records: list[RunRecord] = []
        self._index: dict[tuple[str, str, float], RunRecord] = {}
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._load()
        self._fh = open(self.path, "a", encoding="utf-8")

    def _load(self) -> None:
        if not self.path.exists() or self.path.stat().st_size == 0:
            self.path.write_text(HEADER + "\n")
            return
        raw = self.path.read_bytes()
        good_end = raw.rfind(b"\n") + 1
        if good_end < len(raw):
            log.warning("%s: dropping torn final line %r", self.path, raw[good_end:][:80])
            with open(self.path, "r+b") as fh:
                fh.truncate(good_end)
        lines = raw[:good_end].decode().splitlines()
        if not lines or lines[0] != HEADER:
            raise StoreError(f"{self.path} is not a run store (bad header)")
        for n, line in enumerate(lines[1:], start=2):
            try:
                rec = _decode(line)
            except ValueError:
                log.warning("%s:%d: skipping malformed record %r", self.path, n, line)
                continue
            k = _key(rec.problem, rec.strategy_id, rec.time_limit)
            if k not in self._index:
                self._index[k] = rec
                self._records.append(rec)

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> RunStore:
        return self

    def __exit__(self, *exc: Any) -> None:
        self.close()

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[RunRecord]:
        return iter(list(self._records))

    @property
    def records(self) -> list[RunRecord]:
        return list(self._records)

    def append(self, record: RunRecord) -> None:
        k = _key(record.problem, record.strategy_id, record.time_limit)
        line = _encode(record)
        with self._lock:
            if k in self._index:
                raise DuplicateRecord(f"record for {k} already stored")
            try:
                self._fh.write(line)
                self._fh.flush()
                if self.fsync:
                    os.fsync(self._fh.fileno())
            except OSError as exc:
                raise IoFailure(f"cannot append to {self.path}: {exc}") from exc
            self._index[k] = record
            self._records.append(record)

    def lookup(self, problem: str, strategy_id: str,
               time_limit: float | None = None) -> RunRecord | None:
        """Exact-match retrieval; without a limit, the record with the largest limit."""
        if time_limit is not None:
            return self._index.get(_key(problem, strategy_id, time_limit))
        hits = [r for r in self._records if r.problem == problem and r.strategy_id == strategy_id]
        return max(hits, key=lambda r: r.time_limit) if hits else None


def append_run(store: RunStore, record: RunRecord) -> None:
    store.append(record)


def lookup_run(store: RunStore, problem: str, strategy_id: str,
               time_limit: float | None = None) -> RunRecord | None:
    return store.lookup(problem, strategy_id, time_limit)


@dataclass
class RecordingRunner:
    """Wraps a runner: replays stored runs and appends every new one.

    New strategies are also appended to `strategies_path` (strategies.ini
    layout) so that stored ids can be mapped back to assignments.
    """

    inner: Runner
    store: RunStore
    strategies_path: Path | None = None
    replayed: int = 0
    executed: int = 0
    _known: set[str] = field(default_factory=set)
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def __post_init__(self) -> None:
        if self.strategies_path is not None and self.strategies_path.exists():
            from stratsched.config import _read

            self._known.update(_read(self.strategies_path.read_text(), "strategies").sections())

    def _remember(self, s: Strategy) -> None:
        if self.strategies_path is None or s.id in self._known:
            return
        self._known.add(s.id)
        with open(self.strategies_path, "a", encoding="utf-8") as fh:
            fh.write(("\n" if fh.tell() else "") + strategies_to_ini([s]))

    def run(self, strategy: Strategy, problem: str, limit: float) -> RunRecord:
        hit = self.store.lookup(problem, strategy.id, limit)
        if hit is not None:
            with self._lock:
                self.replayed += 1
            return hit
        rec = self.inner.run(strategy, problem, limit)
        with self._lock:
            self.executed += 1
            self._remember(strategy)
            if rec.error is None and self.store.lookup(problem, strategy.id, limit) is None:
                self.store.append(rec)
        return rec


# ------------------------------------------------------------------ model store


def fingerprint(fields: Mapping[str, Any]) -> str:
    blob = json.dumps(fields, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Manifest:
    dimension: int
    stats: NormalizationStats
    start_schedule: list[tuple[str, float]]
    fingerprint: str
    strategies: dict[str, Strategy]
    # raw solved times of every stored strategy on the training problems
    solved_times: dict[str, dict[str, float]]
    global_best: str | None = None
    cpu_bias: float = 0.0

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "normalization": self.stats.to_dict(),
            "start_schedule": [[sid, t] for sid, t in self.start_schedule],
            "fingerprint": self.fingerprint,
            "strategies": {sid: {"flags": sorted(s.flags), "values": dict(s.values)}
                           for sid, s in self.strategies.items()},
            "solved_times": self.solved_times,
            "global_best": self.global_best,
            "cpu_bias": self.cpu_bias,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> Manifest:
        strategies = {sid: Strategy.make(v["flags"], v["values"]) for sid, v in d["strategies"].items()}
        for sid, s in strategies.items():
            if s.id != sid:
                raise StoreError(f"strategy {sid} does not hash to its id")
        return cls(int(d["dimension"]), NormalizationStats.from_dict(d["normalization"]),
                   [(sid, float(t)) for sid, t in d["start_schedule"]], d["fingerprint"],
                   strategies, {k: dict(v) for k, v in d["solved_times"].items()},
                   d.get("global_best"), float(d.get("cpu_bias", 0.0)))


@dataclass
class ModelStore:
    manifest: Manifest
    models: dict[str, PredictionModel]


def _dump(obj: Any) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


def save_models(path: str | os.PathLike[str], store: ModelStore) -> None:
    """Write manifest.json plus models/<strategy id>.json, replacing older contents."""
    root = Path(path)
    for sid, model in store.models.items():
        if model.size and model.X.shape[1] != store.manifest.dimension:
            raise StoreError(f"model {sid} has dimension {model.X.shape[1]}, "
                             f"manifest says {store.manifest.dimension}")
    model_dir = root / "models"
    if model_dir.exists():
        shutil.rmtree(model_dir)
    model_dir.mkdir(parents=True)
    for sid in sorted(store.models):
        (model_dir / f"{sid}.json").write_text(_dump(store.models[sid].to_dict()))
    (root / "manifest.json").write_text(_dump(store.manifest.to_dict()))


def load_models(path: str | os.PathLike[str], expected_fingerprint: str | None = None, *,
                strict: bool = False) -> ModelStore:
    """Read a model store.

    A fingerprint differing from `expected_fingerprint` means the learning
    settings changed after training: a FingerprintMismatch warning is issued,
    or raised when `strict`.
    """
    root = Path(path)
    try:
        manifest = Manifest.from_dict(json.loads((root / "manifest.json").read_text()))
        models = {}
        model_dir = root / "models"
        for f in sorted(model_dir.glob("*.json")) if model_dir.exists() else []:
            m = PredictionModel.from_dict(json.loads(f.read_text()))
            models[m.strategy_id] = m
    except (OSError, ValueError, KeyError) as exc:
        raise StoreError(f"cannot load model store {root}: {exc}") from exc
    if expected_fingerprint is not None and expected_fingerprint != manifest.fingerprint:
        msg = (f"model store {root} was trained with different settings "
               f"({manifest.fingerprint} != {expected_fingerprint})")
        if strict:
            raise FingerprintMismatch(msg)
        warnings.warn(msg, FingerprintMismatch, stacklevel=2)
    return ModelStore(manifest, models)


def write_strategies(path: Path, strategies: Sequence[Strategy]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(strategies_to_ini(sorted(strategies, key=lambda s: s.id)))
