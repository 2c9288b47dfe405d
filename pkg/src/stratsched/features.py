"""Problem features and their min-max normalization."""
from __future__ import annotations

import csv
import io
import math
import re
import shlex
import subprocess
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from stratsched.config import DEFAULT_FEATURE_TOKENS, FeatureMode
from stratsched.errors import DimensionMismatch, EmptyTrainingSet, ExtractorFailure

BUILTIN_DIMENSION = 8
_SPLIT = re.compile(r"[\s,]+")


def builtin_features(text: str, tokens: Sequence[str] = DEFAULT_FEATURE_TOKENS) -> np.ndarray:
    """Cheap syntactic surrogate features of a problem file.

    [bytes, lines, count(token_1) .. count(token_5), longest line length]
    """
    if len(tokens) != 5:
        raise ValueError("builtin features need exactly 5 tokens")
    lines = text.splitlines()
    counts = [text.count(t) for t in tokens]
    return np.array([len(text.encode()), len(lines), *counts,
                     max((len(line) for line in lines), default=0)], dtype=float)


def parse_feature_output(stdout: str) -> np.ndarray:
    parts = [p for p in _SPLIT.split(stdout.strip()) if p]
    if not parts:
        raise ExtractorFailure("feature extractor printed nothing")
    try:
        values = [float(p) for p in parts]
    except ValueError as exc:
        raise ExtractorFailure(f"feature extractor printed non-numeric output: {exc}") from exc
    if not all(math.isfinite(v) for v in values):
        raise ExtractorFailure("feature extractor printed a non-finite value")
    return np.array(values, dtype=float)


def extract_features(problem: str | Path, mode: FeatureMode = FeatureMode.BUILTIN,
                     extractor_cmd: str = "", *, tokens: Sequence[str] = DEFAULT_FEATURE_TOKENS,
                     dimension: int | None = None, timeout: float | None = 60.0) -> np.ndarray:
    """Feature vector of one problem file.

    External mode runs ``extractor_cmd`` with the problem path appended (or
    substituted for ``{problem}``) and parses the numbers it prints.
    """
    if mode is FeatureMode.BUILTIN:
        try:
            text = Path(problem).read_text(errors="replace")
        except OSError as exc:
            raise ExtractorFailure(f"cannot read {problem}: {exc}") from exc
        vec = builtin_features(text, tokens)
    else:
        if not extractor_cmd:
            raise ExtractorFailure("no feature extractor command configured")
        if "{problem}" in extractor_cmd:
            argv = shlex.split(extractor_cmd.replace("{problem}", shlex.quote(str(problem))))
        else:
            argv = shlex.split(extractor_cmd) + [str(problem)]
        try:
            proc = subprocess.run(argv, stdin=subprocess.DEVNULL, capture_output=True,
                                  text=True, timeout=timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise ExtractorFailure(f"feature extractor failed on {problem}: {exc}") from exc
        if proc.returncode != 0:
            raise ExtractorFailure(
                f"feature extractor exited {proc.returncode} on {problem}: {proc.stderr.strip()}")
        vec = parse_feature_output(proc.stdout)
    if dimension is not None and len(vec) != dimension:
        raise DimensionMismatch(f"{problem}: got {len(vec)} features, expected {dimension}")
    return vec


def extract_many(problems: Sequence[str], mode: FeatureMode, extractor_cmd: str = "", *,
                 tokens: Sequence[str] = DEFAULT_FEATURE_TOKENS, cores: int = 1,
                 cache: Mapping[str, np.ndarray] | None = None) -> dict[str, np.ndarray]:
    """Features for many problems, reusing cached vectors; dimension must agree."""
    cache = cache or {}
    todo = [p for p in problems if p not in cache]

    def one(p: str) -> np.ndarray:
        return extract_features(p, mode, extractor_cmd, tokens=tokens)

    if cores > 1 and len(todo) > 1:
        with ThreadPoolExecutor(max_workers=cores) as pool:
            fresh = dict(zip(todo, pool.map(one, todo)))
    else:
        fresh = {p: one(p) for p in todo}
    out = {p: np.asarray(cache[p], dtype=float) if p in cache else fresh[p] for p in problems}
    dims = {len(v) for v in out.values()}
    if len(dims) > 1:
        raise DimensionMismatch(f"feature vectors of different lengths: {sorted(dims)}")
    return out


@dataclass(frozen=True)
class NormalizationStats:
    minimum: np.ndarray
    maximum: np.ndarray

    @property
    def dimension(self) -> int:
        return len(self.minimum)

    def to_dict(self) -> dict:
        return {"min": self.minimum.tolist(), "max": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d: Mapping) -> NormalizationStats:
        return cls(np.array(d["min"], dtype=float), np.array(d["max"], dtype=float))


def fit_normalization(train: Iterable[Sequence[float]]) -> NormalizationStats:
    rows = [np.asarray(v, dtype=float) for v in train]
    if not rows:
        raise EmptyTrainingSet("cannot normalize over an empty training set")
    if len({len(r) for r in rows}) != 1:
        raise DimensionMismatch("training vectors differ in length")
    X = np.vstack(rows)
    return NormalizationStats(X.min(axis=0), X.max(axis=0))


def normalize(v: Sequence[float] | np.ndarray, stats: NormalizationStats) -> np.ndarray:
    """Rescale so training minima go to 0 and maxima to 1.

    Constant features map to 0. Values outside the training range are not
    clipped.
    """
    v = np.asarray(v, dtype=float)
    if v.shape[-1] != stats.dimension:
        raise DimensionMismatch(f"vector has {v.shape[-1]} features, stats have {stats.dimension}")
    span = stats.maximum - stats.minimum
    constant = span == 0
    out = (v - stats.minimum) / np.where(constant, 1.0, span)
    return np.where(constant, 0.0, out)


# ------------------------------------------------------------ features file


def read_features_file(path: Path) -> dict[str, np.ndarray]:
    if not path.exists():
        return {}
    out = {}
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if row:
                out[row[0]] = np.array([float(x) for x in row[1:]], dtype=float)
    return out


def write_features_file(path: Path, features: Mapping[str, np.ndarray]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for p in sorted(features):
        w.writerow([p, *(repr(float(x)) for x in features[p])])
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
