"""Parsing of the three INI files that describe a tuning setup.

* the solver file (``ATP.ini``): how to call the solver and which parameters
  it accepts;
* the settings file (``setup.ini``): search, learning and run settings;
* the strategies file (``strategies.ini``): seed strategies, one per section.

Section and key names are case-sensitive. Duplicate keys are errors, and so
are keys this module does not know about.
"""
from __future__ import annotations

import configparser
import enum
import math
import shlex
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Callable

from stratsched.errors import (
    BadEnum,
    BadValue,
    ConfigError,
    DuplicateKey,
    EmptyValueList,
    IllegalValue,
    MissingKey,
    NoStrategies,
    UnknownKey,
    UnknownParameter,
)
from stratsched.strategy import InvocationFormat, ParameterSpace, Strategy

SOLVER_SECTION = "ATP Settings"
BOOLEAN_SECTION = "Boolean Parameters"
LIST_SECTION = "List Parameters"

DEFAULT_REGULARIZATION_GRID = (0.001, 0.01, 0.1, 1.0, 10.0)
DEFAULT_KERNEL_GRID = (0.1, 0.5, 1.0, 2.0, 5.0, 10.0)
DEFAULT_FEATURE_TOKENS = ("fof(", "cnf(", "thf(", "tff(", "include(")


class FeatureMode(enum.Enum):
    EXTERNAL = "External"
    BUILTIN = "Builtin"


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(
        strict=True,
        allow_no_value=True,
        interpolation=None,
        delimiters=("=", ":"),
        comment_prefixes=("#", ";"),
        inline_comment_prefixes=None,
        default_section="\x00no-default-section",
    )
    cp.optionxform = str  # type: ignore[assignment,method-assign]
    return cp


def _read(text: str, what: str) -> configparser.ConfigParser:
    cp = _parser()
    try:
        cp.read_string(text, source=what)
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as exc:
        raise DuplicateKey(str(exc)) from exc
    except configparser.Error as exc:
        raise ConfigError(f"{what}: {exc}") from exc
    return cp


# --------------------------------------------------------------------- solver


@dataclass(frozen=True)
class SolverSpec:
    binary_path: str
    time_flag: str
    problem_flag: str = ""
    invocation_format: InvocationFormat = InvocationFormat.E
    default_args: tuple[str, ...] = ()
    # substring of stdout that signals success; empty means "exit code 0 is enough"
    success_marker: str = ""

    def __post_init__(self) -> None:
        if not self.binary_path:
            raise BadValue("binary path is empty")
        if not isinstance(self.invocation_format, InvocationFormat):
            raise BadEnum(f"bad invocation format {self.invocation_format!r}")


_FORMATS = {"E": InvocationFormat.E, "LEO": InvocationFormat.LEO,
            "Satallax": InvocationFormat.SATALLAX}
_SOLVER_KEYS = {"binary", "time", "problem", "strategy", "default", "success"}


def parse_solver_config(text: str) -> tuple[SolverSpec, ParameterSpace]:
    cp = _read(text, "solver config")
    unknown = set(cp.sections()) - {SOLVER_SECTION, BOOLEAN_SECTION, LIST_SECTION}
    if unknown:
        raise UnknownKey(f"unknown section(s) {sorted(unknown)}")
    if not cp.has_section(SOLVER_SECTION):
        raise MissingKey(f"section [{SOLVER_SECTION}] is missing")
    sec = cp[SOLVER_SECTION]
    extra = set(sec) - _SOLVER_KEYS
    if extra:
        raise UnknownKey(f"unknown key(s) in [{SOLVER_SECTION}]: {sorted(extra)}")
    for key in ("binary", "time", "strategy"):
        if sec.get(key) is None or (key != "time" and not sec.get(key)):
            raise MissingKey(f"[{SOLVER_SECTION}] {key} is required")
    style = sec["strategy"].strip()
    if style not in _FORMATS:
        raise BadEnum(f"strategy = {style!r}; expected one of {sorted(_FORMATS)}")
    spec = SolverSpec(
        binary_path=sec["binary"].strip(),
        time_flag=(sec.get("time") or "").strip(),
        problem_flag=(sec.get("problem") or "").strip(),
        invocation_format=_FORMATS[style],
        default_args=tuple(shlex.split(sec.get("default") or "")),
        success_marker=(sec.get("success") or "").strip(),
    )

    booleans: list[str] = []
    if cp.has_section(BOOLEAN_SECTION):
        for name, value in cp[BOOLEAN_SECTION].items():
            if value:
                raise BadValue(f"boolean parameter {name!r} must not carry a value")
            booleans.append(name)
    lists: list[tuple[str, tuple[str, ...]]] = []
    if cp.has_section(LIST_SECTION):
        for name, value in cp[LIST_SECTION].items():
            values = tuple(v.strip() for v in (value or "").split(",") if v.strip())
            if not values:
                raise EmptyValueList(f"list parameter {name!r} has no values")
            if len(set(values)) != len(values):
                raise BadValue(f"list parameter {name!r} repeats a value")
            lists.append((name, values))
    try:
        space = ParameterSpace(frozenset(booleans), tuple(lists))
    except ValueError as exc:
        raise BadValue(str(exc)) from exc
    return spec, space


def solver_config_to_ini(spec: SolverSpec, space: ParameterSpace) -> str:
    fmt = {v: k for k, v in _FORMATS.items()}[spec.invocation_format]
    lines = [f"[{SOLVER_SECTION}]", f"binary = {spec.binary_path}", f"time = {spec.time_flag}",
             f"problem = {spec.problem_flag}", f"strategy = {fmt}",
             f"default = {shlex.join(spec.default_args)}", f"success = {spec.success_marker}",
             "", f"[{BOOLEAN_SECTION}]"]
    lines += sorted(space.boolean_params)
    lines += ["", f"[{LIST_SECTION}]"]
    lines += [f"{name} = {','.join(values)}" for name, values in space.list_params]
    return "\n".join(lines) + "\n"


# ----------------------------------------------------------------- strategies

_TRUE = {"true", "1", "yes", "on"}
_FALSE = {"false", "0", "no", "off"}


def parse_strategies(text: str, space: ParameterSpace) -> list[Strategy]:
    """Read seed strategies; list options a section leaves out get their first value.

    Section names are labels only: a strategy's identity is its assignment.
    """
    cp = _read(text, "strategies")
    if not cp.sections():
        raise NoStrategies("at least one strategy must be defined")
    allowed = space.allowed
    out = []
    for section in cp.sections():
        flags = []
        values = {}
        for name, value in cp[section].items():
            if name in space.boolean_params:
                v = (value or "true").strip().lower()
                if v in _TRUE:
                    flags.append(name)
                elif v not in _FALSE:
                    raise IllegalValue(f"[{section}] boolean {name} = {value!r}")
            elif name in allowed:
                if value is None or value.strip() not in allowed[name]:
                    raise IllegalValue(f"[{section}] {name} = {value!r} not in {list(allowed[name])}")
                values[name] = value.strip()
            else:
                raise UnknownParameter(f"[{section}] unknown parameter {name!r}")
        for name, vals in space.list_params:
            values.setdefault(name, vals[0])
        out.append(Strategy.make(flags, values))
    return out


# ------------------------------------------------------------------- settings


@dataclass
class Settings:
    problems_file: Path
    search_time_limit: float = 10.0
    full_time: bool = False
    walks: int = 10
    walk_length: int = 2
    cores: int = 1
    tmp_dir: Path | None = None
    results_dir: Path = Path("results")
    results_store: Path = Path("models")
    tmp_results_dir: Path | None = None
    tmp_results_store: Path | None = None
    try_with_new_default_time: bool = False
    clear: bool = False
    log_to_file: bool = False
    log_file: Path | None = None
    tptp_dir: Path | None = None
    feature_mode: FeatureMode = FeatureMode.BUILTIN
    feature_extractor_cmd: str = ""
    feature_tokens: tuple[str, ...] = DEFAULT_FEATURE_TOKENS
    features_file: Path | None = None
    strategies_file: Path | None = None
    kernel_file: Path | None = None
    regularization_grid: tuple[float, ...] = DEFAULT_REGULARIZATION_GRID
    kernel_grid: tuple[float, ...] = DEFAULT_KERNEL_GRID
    crossvalidate: bool = True
    cv_folds: int = 10
    start_strategies: int = 10
    start_strategy_time: float = 1.0
    cpu_bias: float = 0.0
    tolerance: float = 1.0
    cpu_speed_ratio: float = 1.0
    min_run_time: float = 0.1
    min_training_size: int = 5
    output_file: Path | None = None
    rng_seed: int = 0
    solver_config: Path | None = None
    mock_solver: Path | None = None

    def __post_init__(self) -> None:
        checks = [
            (self.search_time_limit > 0, "Time must be > 0"),
            (self.walks >= 1, "Walks must be >= 1"),
            (self.walk_length >= 0, "WalkLength must be >= 0"),
            (self.cores >= 1, "Cores must be >= 1"),
            (self.cv_folds >= 2, "CrossValidationFolds must be >= 2"),
            (len(self.regularization_grid) > 0, "RegularizationGrid is empty"),
            (len(self.kernel_grid) > 0, "KernelGrid is empty"),
            (all(v > 0 for v in self.regularization_grid), "RegularizationGrid values must be > 0"),
            (all(v > 0 for v in self.kernel_grid), "KernelGrid values must be > 0"),
            (self.cpu_speed_ratio > 0, "CPUSpeedRatio must be > 0"),
            (self.tolerance >= 0, "Tolerance must be >= 0"),
            (self.start_strategies >= 0, "StartStrategies must be >= 0"),
            (self.start_strategy_time >= 0, "StartStrategiesTime must be >= 0"),
            (self.min_run_time >= 0, "MinRunTime must be >= 0"),
            (self.min_training_size >= 1, "MinTrainingSize must be >= 1"),
            (self.feature_mode is FeatureMode.BUILTIN or bool(self.feature_extractor_cmd),
             "external features need FeatureExtractor"),
        ]
        for ok, message in checks:
            if not ok:
                raise BadValue(message)

    @property
    def runs_file(self) -> Path:
        return self.results_dir / "runs.csv"

    @property
    def preselected_file(self) -> Path:
        return self.results_dir / "strategies.ini"

    @property
    def discovered_file(self) -> Path:
        return self.results_dir / "discovered.ini"

    def learning_fingerprint_fields(self) -> dict[str, Any]:
        return {
            "regularization_grid": list(self.regularization_grid),
            "kernel_grid": list(self.kernel_grid),
            "crossvalidate": self.crossvalidate,
            "cv_folds": self.cv_folds,
            "start_strategies": self.start_strategies,
            "start_strategy_time": self.start_strategy_time,
            "cpu_bias": self.cpu_bias,
            "min_training_size": self.min_training_size,
            "rng_seed": self.rng_seed,
            "feature_mode": self.feature_mode.value,
            "feature_extractor_cmd": self.feature_extractor_cmd,
            "feature_tokens": list(self.feature_tokens),
        }


def _bool(raw: str) -> bool:
    v = raw.strip().lower()
    if v in _TRUE:
        return True
    if v in _FALSE:
        return False
    raise ValueError(f"not a boolean: {raw!r}")


def _float(raw: str) -> float:
    v = float(raw.strip())
    if not math.isfinite(v):
        raise ValueError(f"not finite: {raw!r}")
    return v


def _int(raw: str) -> int:
    return int(raw.strip())


def _grid(raw: str) -> tuple[float, ...]:
    return tuple(_float(x) for x in raw.replace(";", ",").split(",") if x.strip())


def _tokens(raw: str) -> tuple[str, ...]:
    return tuple(shlex.split(raw))


def _feature_mode(raw: str) -> FeatureMode:
    v = raw.strip()
    if v in ("E", "TPTP", "External"):
        return FeatureMode.EXTERNAL
    if v == "Builtin":
        return FeatureMode.BUILTIN
    raise ValueError(f"Features must be E, TPTP, External or Builtin, got {raw!r}")


def _path(raw: str) -> Path | None:
    v = raw.strip()
    return None if v in ("", "None") else Path(v)


def _str(raw: str) -> str:
    return raw.strip()


_Conv = Callable[[str], Any]

# (section, key) -> (field name, converter)
SETTINGS_KEYS: dict[tuple[str, str], tuple[str, _Conv]] = {
    ("Settings", "TPTP"): ("tptp_dir", _path),
    ("Settings", "TmpDir"): ("tmp_dir", _path),
    ("Settings", "Cores"): ("cores", _int),
    ("Settings", "ResultsDir"): ("results_dir", _path),
    ("Settings", "ResultsPickle"): ("results_store", _path),
    ("Settings", "TmpResultsDir"): ("tmp_results_dir", _path),
    ("Settings", "TmpResultsPickle"): ("tmp_results_store", _path),
    ("Settings", "Clear"): ("clear", _bool),
    ("Settings", "LogToFile"): ("log_to_file", _bool),
    ("Settings", "LogFile"): ("log_file", _path),
    ("Settings", "ATP"): ("solver_config", _path),
    ("Settings", "MockSolver"): ("mock_solver", _path),
    ("Settings", "Seed"): ("rng_seed", _int),
    ("Search", "Time"): ("search_time_limit", _float),
    ("Search", "Problems"): ("problems_file", _path),
    ("Search", "FullTime"): ("full_time", _bool),
    ("Search", "TryWithNewDefaultTime"): ("try_with_new_default_time", _bool),
    ("Search", "Walks"): ("walks", _int),
    ("Search", "WalkLength"): ("walk_length", _int),
    ("Learn", "Features"): ("feature_mode", _feature_mode),
    ("Learn", "FeatureExtractor"): ("feature_extractor_cmd", _str),
    ("Learn", "FeatureTokens"): ("feature_tokens", _tokens),
    ("Learn", "FeaturesFile"): ("features_file", _path),
    ("Learn", "StrategiesFile"): ("strategies_file", _path),
    ("Learn", "KernelFile"): ("kernel_file", _path),
    ("Learn", "RegularizationGrid"): ("regularization_grid", _grid),
    ("Learn", "KernelGrid"): ("kernel_grid", _grid),
    ("Learn", "CrossValidate"): ("crossvalidate", _bool),
    ("Learn", "CrossValidationFolds"): ("cv_folds", _int),
    ("Learn", "StartStrategies"): ("start_strategies", _int),
    ("Learn", "StartStrategiesTime"): ("start_strategy_time", _float),
    ("Learn", "CPU Bias"): ("cpu_bias", _float),
    ("Learn", "Tolerance"): ("tolerance", _float),
    ("Learn", "MinTrainingSize"): ("min_training_size", _int),
    ("Run", "CPUSpeedRatio"): ("cpu_speed_ratio", _float),
    ("Run", "MinRunTime"): ("min_run_time", _float),
    ("Run", "Features"): ("feature_mode", _feature_mode),
    ("Run", "StrategiesFile"): ("strategies_file", _path),
    ("Run", "FeaturesFile"): ("features_file", _path),
    ("Run", "OutputFile"): ("output_file", _path),
}
_SECTIONS = ("Settings", "Search", "Learn", "Run")
_PATH_FIELDS = {f.name for f in fields(Settings) if "Path" in str(f.type)}


def parse_settings(text: str, base_dir: str | Path | None = None) -> Settings:
    """Parse a settings file; relative paths are resolved against `base_dir` when given."""
    cp = _read(text, "settings")
    unknown = set(cp.sections()) - set(_SECTIONS)
    if unknown:
        raise UnknownKey(f"unknown section(s) {sorted(unknown)}")
    values: dict[str, Any] = {}
    origin: dict[str, tuple[str, str]] = {}
    for section in cp.sections():
        for key, raw in cp[section].items():
            entry = SETTINGS_KEYS.get((section, key))
            if entry is None:
                raise UnknownKey(f"unknown key [{section}] {key}")
            name, conv = entry
            try:
                value = conv(raw or "")
            except ValueError as exc:
                raise BadValue(f"[{section}] {key}: {exc}") from exc
            if name in values and values[name] != value:
                prev = origin[name]
                raise BadValue(f"[{section}] {key} disagrees with [{prev[0]}] {prev[1]}")
            values[name] = value
            origin[name] = (section, key)
    if values.get("problems_file") is None:
        raise MissingKey("[Search] Problems is required")
    if base_dir is not None:
        base = Path(base_dir)
        for name in _PATH_FIELDS & set(values):
            if values[name] is not None and not values[name].is_absolute():
                values[name] = base / values[name]
    return Settings(**values)


def _render(value: Any) -> str:
    if isinstance(value, bool):
        return "True" if value else "False"
    if isinstance(value, enum.Enum):
        return value.value
    if isinstance(value, tuple) and all(isinstance(v, float) for v in value):
        return ",".join(repr(v) for v in value)
    if isinstance(value, tuple):
        return shlex.join(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def settings_to_ini(settings: Settings) -> str:
    written: set[str] = set()
    out: list[str] = []
    for section in _SECTIONS:
        out.append(f"[{section}]")
        for (sec, key), (name, _) in SETTINGS_KEYS.items():
            if sec != section or name in written:
                continue
            value = getattr(settings, name)
            if value is None:
                continue
            written.add(name)
            out.append(f"{key} = {_render(value)}")
        out.append("")
    return "\n".join(out)


def load_settings(path: str | Path) -> Settings:
    path = Path(path)
    return parse_settings(path.read_text(), base_dir=path.parent)


@dataclass
class Setup:
    """Everything a CLI command needs, read from disk."""

    settings: Settings
    solver: SolverSpec
    space: ParameterSpace
    seeds: list[Strategy] = field(default_factory=list)


def load_setup(path: str | Path, seed: int | None = None) -> Setup:
    settings = load_settings(path)
    if seed is not None:
        settings.rng_seed = seed
    if settings.solver_config is None:
        raise MissingKey("[Settings] ATP is required")
    try:
        solver, space = parse_solver_config(settings.solver_config.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read solver config: {exc}") from exc
    seeds: list[Strategy] = []
    if settings.strategies_file is not None:
        try:
            seeds = parse_strategies(settings.strategies_file.read_text(), space)
        except OSError as exc:
            raise ConfigError(f"cannot read strategies file: {exc}") from exc
    return Setup(settings, solver, space, seeds)
