"""Strategies as points of a solver's parameter space.

A parameter space is a set of boolean flags plus a set of options that take
one value from a finite list. A strategy switches some flags on and picks one
value for every list option.
"""
from __future__ import annotations

import enum
import hashlib
import json
import os
import random
from dataclasses import dataclass
from functools import cached_property
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from stratsched.errors import IllegalValue, NoMutableParameter, UnknownParameter

if TYPE_CHECKING:
    from stratsched.config import SolverSpec


class InvocationFormat(enum.Enum):
    E = "E"
    LEO = "LEO"
    SATALLAX = "Satallax"


@dataclass(frozen=True)
class ParameterSpace:
    boolean_params: frozenset[str] = frozenset()
    # declaration order is kept; it fixes the order of mutation candidates
    list_params: tuple[tuple[str, tuple[str, ...]], ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "boolean_params", frozenset(self.boolean_params))
        lists = tuple((name, tuple(values)) for name, values in
                      (self.list_params.items() if isinstance(self.list_params, Mapping)
                       else self.list_params))
        object.__setattr__(self, "list_params", lists)
        names = [name for name, _ in lists]
        if len(set(names)) != len(names):
            raise ValueError("duplicate list parameter")
        overlap = self.boolean_params.intersection(names)
        if overlap:
            raise ValueError(f"parameters declared both boolean and list: {sorted(overlap)}")
        for name, values in lists:
            if not values:
                raise ValueError(f"list parameter {name!r} has no allowed values")

    @property
    def allowed(self) -> dict[str, tuple[str, ...]]:
        return dict(self.list_params)

    def __len__(self) -> int:
        return len(self.boolean_params) + len(self.list_params)

    def default_strategy(self) -> Strategy:
        """All flags off, every list option at its first allowed value."""
        return Strategy.make((), {name: values[0] for name, values in self.list_params})

    def validate(self, strategy: Strategy) -> None:
        unknown = strategy.flags - self.boolean_params
        if unknown:
            raise UnknownParameter(f"unknown boolean parameter(s) {sorted(unknown)}")
        allowed = self.allowed
        chosen = strategy.value_map
        for name, value in chosen.items():
            if name not in allowed:
                raise UnknownParameter(f"unknown list parameter {name!r}")
            if value not in allowed[name]:
                raise IllegalValue(f"{name}={value!r} not in {list(allowed[name])}")
        missing = set(allowed) - set(chosen)
        if missing:
            raise IllegalValue(f"no value chosen for {sorted(missing)}")

    def enumerate(self) -> list[Strategy]:
        """Every strategy of the space. Only sensible for tiny spaces."""
        import itertools

        flags = sorted(self.boolean_params)
        out = []
        for bits in itertools.product((False, True), repeat=len(flags)):
            on = [f for f, b in zip(flags, bits) if b]
            for combo in itertools.product(*(values for _, values in self.list_params)):
                out.append(Strategy.make(on, dict(zip((n for n, _ in self.list_params), combo))))
        return out


@dataclass(frozen=True)
class Strategy:
    flags: frozenset[str] = frozenset()
    values: tuple[tuple[str, str], ...] = ()

    @classmethod
    def make(cls, flags: Iterable[str] = (), values: Mapping[str, str] | None = None) -> Strategy:
        return cls(frozenset(flags), tuple(sorted((values or {}).items())))

    @cached_property
    def id(self) -> str:
        payload = json.dumps({"flags": sorted(self.flags), "values": list(self.values)},
                             separators=(",", ":"))
        return hashlib.sha1(payload.encode()).hexdigest()[:12]

    @property
    def value_map(self) -> dict[str, str]:
        return dict(self.values)

    def with_flag(self, name: str, on: bool) -> Strategy:
        flags = self.flags | {name} if on else self.flags - {name}
        return Strategy(frozenset(flags), self.values)

    def with_value(self, name: str, value: str) -> Strategy:
        values = self.value_map
        values[name] = value
        return Strategy.make(self.flags, values)


def hamming_distance(a: Strategy, b: Strategy) -> int:
    """Number of parameters on which two strategies disagree."""
    flags = len(a.flags ^ b.flags)
    va, vb = a.value_map, b.value_map
    return flags + sum(va.get(k) != vb.get(k) for k in set(va) | set(vb))


def change_random_parameter(s: Strategy, space: ParameterSpace, rng: random.Random) -> Strategy:
    """Return a copy of `s` with exactly one parameter changed.

    The parameter is drawn uniformly from all boolean flags and all list
    options with at least two allowed values. A flag is toggled; a list
    option moves to a uniformly drawn value other than its current one.
    """
    candidates: list[tuple[str, tuple[str, ...] | None]] = [
        (name, None) for name in sorted(space.boolean_params)
    ]
    candidates += [(name, values) for name, values in space.list_params if len(values) >= 2]
    if not candidates:
        raise NoMutableParameter("parameter space has nothing to mutate")
    name, values = candidates[rng.randrange(len(candidates))]
    if values is None:
        return s.with_flag(name, name not in s.flags)
    current = s.value_map.get(name)
    others = [v for v in values if v != current]
    return s.with_value(name, others[rng.randrange(len(others))])


def create_random_strategies(s: Strategy, n_strategies: int, n_changes: int,
                             space: ParameterSpace, rng: random.Random) -> list[Strategy]:
    out = []
    for _ in range(n_strategies):
        new = s
        for _ in range(n_changes):
            new = change_random_parameter(new, space, rng)
        out.append(new)
    return out


@dataclass(frozen=True)
class Invocation:
    argv: tuple[str, ...]
    aux_file: tuple[str, str] | None = None  # (path, contents) of a Satallax mode file


def _format_limit(limit: float) -> str:
    return f"{limit:g}"


def _param_pairs(s: Strategy) -> list[tuple[str, str | None]]:
    # flags first, then list options; both sorted by name so argv is reproducible
    pairs: list[tuple[str, str | None]] = [(name, None) for name in sorted(s.flags)]
    pairs += list(s.values)
    return pairs


def format_invocation(s: Strategy, spec: SolverSpec, problem: str, time_limit: float,
                      mode_dir: str | os.PathLike[str] = ".") -> Invocation:
    """Render the command line running `spec`'s binary with strategy `s`.

    Strategy arguments come first, then the solver's default arguments, the
    time flag with the limit, and the problem path.
    """
    argv: list[str] = [str(spec.binary_path)]
    aux = None
    fmt = spec.invocation_format
    if fmt is InvocationFormat.SATALLAX:
        lines = [f"{name} = {'true' if value is None else value}" for name, value in _param_pairs(s)]
        mode_path = os.path.join(os.fspath(mode_dir), f"mode_{s.id}")
        aux = (mode_path, "\n".join(lines) + "\n")
        argv += ["-m", mode_path]
    else:
        for name, value in _param_pairs(s):
            if value is None:
                argv.append(name)
            elif fmt is InvocationFormat.LEO:
                argv += [name, value]
            elif name.startswith("--"):
                argv.append(f"{name}={value}")
            else:
                argv.append(f"{name}{value}")
    argv += list(spec.default_args)
    if spec.time_flag:
        if spec.time_flag.endswith("="):
            argv.append(spec.time_flag + _format_limit(time_limit))
        else:
            argv += [spec.time_flag, _format_limit(time_limit)]
    if spec.problem_flag:
        argv.append(spec.problem_flag)
    argv.append(str(problem))
    return Invocation(tuple(argv), aux)


def strategies_to_ini(strategies: Sequence[Strategy], names: Sequence[str] | None = None) -> str:
    """Serialize strategies in strategies.ini layout, one section each."""
    chunks = []
    for i, s in enumerate(strategies):
        name = names[i] if names is not None else s.id
        lines = [f"[{name}]"]
        lines += [f"{flag} = true" for flag in sorted(s.flags)]
        lines += [f"{k} = {v}" for k, v in s.values]
        chunks.append("\n".join(lines) + "\n")
    return "\n".join(chunks)

