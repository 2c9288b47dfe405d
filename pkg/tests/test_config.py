from pathlib import Path

import pytest
from hypothesis import given, strategies as st

from stratsched.config import (
    FeatureMode,
    Settings,
    parse_settings,
    parse_solver_config,
    parse_strategies,
    settings_to_ini,
    solver_config_to_ini,
)
from stratsched.errors import (
    BadEnum,
    BadValue,
    DuplicateKey,
    EmptyValueList,
    IllegalValue,
    MissingKey,
    NoStrategies,
    UnknownKey,
    UnknownParameter,
)
from stratsched.strategy import InvocationFormat, ParameterSpace, Strategy

E_SOLVER = """\
[ATP Settings]
binary = /opt/E/PROVER/eprover
time = --cpu-limit=
problem =
strategy = E
default = --tstp-format -s

[Boolean Parameters]

[List Parameters]
ordering: 0,1,2
"""


def test_solver_e_style():
    spec, space = parse_solver_config(E_SOLVER)
    assert spec.invocation_format is InvocationFormat.E
    assert spec.binary_path == "/opt/E/PROVER/eprover"
    assert spec.default_args == ("--tstp-format", "-s")
    assert len(space.boolean_params) == 0
    assert space.allowed == {"ordering": ("0", "1", "2")}


@pytest.mark.parametrize("style,fmt", [("LEO", InvocationFormat.LEO),
                                       ("Satallax", InvocationFormat.SATALLAX)])
def test_solver_other_styles(style, fmt):
    spec, _ = parse_solver_config(E_SOLVER.replace("strategy = E", f"strategy = {style}"))
    assert spec.invocation_format is fmt


def test_solver_errors():
    with pytest.raises(EmptyValueList):
        parse_solver_config(E_SOLVER.replace("ordering: 0,1,2", "ordering ="))
    with pytest.raises(EmptyValueList):
        parse_solver_config(E_SOLVER.replace("ordering: 0,1,2", "ordering"))
    with pytest.raises(BadEnum):
        parse_solver_config(E_SOLVER.replace("strategy = E", "strategy = Vampire"))
    with pytest.raises(MissingKey):
        parse_solver_config(E_SOLVER.replace("binary = /opt/E/PROVER/eprover\n", ""))
    with pytest.raises(UnknownKey):
        parse_solver_config(E_SOLVER.replace("problem =", "problme ="))
    with pytest.raises(DuplicateKey):
        parse_solver_config(E_SOLVER + "ordering = 3,4\n")
    with pytest.raises(BadValue):
        parse_solver_config(E_SOLVER.replace("[Boolean Parameters]", "[Boolean Parameters]\nordering"))


def test_solver_round_trip():
    text = E_SOLVER.replace("[Boolean Parameters]", "[Boolean Parameters]\n--fast\n-x")
    spec, space = parse_solver_config(text)
    assert parse_solver_config(solver_config_to_ini(spec, space)) == (spec, space)


SATALLAX_SPACE = ParameterSpace(frozenset(), (
    ("E_TIMEOUT", ("1", "2", "5")),
    ("LEIBEQ_TO_PRIMEQ", ("false",)),
))


def test_strategies_listing():
    text = "[NewStrategy12884]\nE_TIMEOUT = 1\n"
    (s,) = parse_strategies(text, SATALLAX_SPACE)
    assert s.value_map["E_TIMEOUT"] == "1"
    # options a section leaves out take their first allowed value
    assert s.value_map["LEIBEQ_TO_PRIMEQ"] == "false"


def test_strategies_errors():
    with pytest.raises(NoStrategies):
        parse_strategies("", SATALLAX_SPACE)
    with pytest.raises(IllegalValue):
        parse_strategies("[s]\nLEIBEQ_TO_PRIMEQ = true\n", SATALLAX_SPACE)
    with pytest.raises(UnknownParameter):
        parse_strategies("[s]\nFORALL_DELAY = 0\n", SATALLAX_SPACE)


def test_strategies_booleans(small_space):
    (a, b) = parse_strategies("[a]\n--fast\n--split = false\n--ordering = 2\n\n[b]\n--split = true\n",
                              small_space)
    assert a == Strategy.make({"--fast"}, {"--ordering": "2"})
    assert b == Strategy.make({"--split"}, {"--ordering": "0"})


MINIMAL_SETTINGS = "[Search]\nProblems = problems.txt\n"


def test_settings_defaults():
    s = parse_settings(MINIMAL_SETTINGS)
    assert s.problems_file == Path("problems.txt")
    assert s.crossvalidate is True
    assert s.cv_folds == 10
    assert s.min_training_size == 5
    assert s.cpu_speed_ratio == 1.0
    assert s.cpu_bias == 0.0
    assert s.min_run_time == 0.1
    assert s.rng_seed == 0
    assert s.feature_mode is FeatureMode.BUILTIN


def test_settings_values():
    s = parse_settings(MINIMAL_SETTINGS + "\n[Learn]\nTolerance = 1.0\nCPU Bias = 0.5\n"
                       "RegularizationGrid = 0.1, 1\nKernelGrid = 2\n\n[Settings]\nCores = 4\n")
    assert s.tolerance == 1.0
    assert s.cpu_bias == 0.5
    assert s.regularization_grid == (0.1, 1.0)
    assert s.kernel_grid == (2.0,)
    assert s.cores == 4


@pytest.mark.parametrize("extra", [
    "[Settings]\nCores = 0\n",
    "[Settings]\nCores = four\n",
    "[Search]\nTime = 0\n",
    "[Learn]\nCrossValidationFolds = 1\n",
    "[Learn]\nKernelGrid =\n",
    "[Run]\nCPUSpeedRatio = -1\n",
    "[Learn]\nTolerance = -0.5\n",
    "[Learn]\nFeatures = E\n",  # external features need an extractor command
])
def test_settings_bad_values(extra):
    text = MINIMAL_SETTINGS + extra if not extra.startswith("[Search]") else \
        extra.replace("[Search]\n", "[Search]\nProblems = p.txt\n")
    with pytest.raises(BadValue):
        parse_settings(text)


def test_settings_missing_and_unknown():
    with pytest.raises(MissingKey, match="Problems"):
        parse_settings("[Search]\nTime = 10\n")
    with pytest.raises(UnknownKey):
        parse_settings(MINIMAL_SETTINGS + "Tolerance = 1\n")  # Tolerance lives in [Learn]
    with pytest.raises(UnknownKey):
        parse_settings(MINIMAL_SETTINGS + "[Extra]\n")
    with pytest.raises(DuplicateKey):
        parse_settings(MINIMAL_SETTINGS + "Problems = other.txt\n")


def test_settings_shared_keys_must_agree():
    parse_settings(MINIMAL_SETTINGS + "[Learn]\nFeaturesFile = f.csv\n[Run]\nFeaturesFile = f.csv\n")
    with pytest.raises(BadValue):
        parse_settings(MINIMAL_SETTINGS + "[Learn]\nFeaturesFile = f.csv\n[Run]\nFeaturesFile = g.csv\n")


def test_settings_relative_paths(tmp_path):
    s = parse_settings(MINIMAL_SETTINGS, base_dir=tmp_path)
    assert s.problems_file == tmp_path / "problems.txt"
    assert s.results_dir == Path("results")  # defaults are left alone


def test_every_documented_key_is_consumed():
    from stratsched.config import SETTINGS_KEYS

    sample = {"Cores": "2", "Clear": "True", "LogToFile": "False", "Seed": "3", "Time": "5",
              "FullTime": "True", "TryWithNewDefaultTime": "False", "Walks": "3",
              "WalkLength": "1", "Features": "Builtin", "FeatureTokens": "a b c d e",
              "RegularizationGrid": "1", "KernelGrid": "1", "CrossValidate": "False",
              "CrossValidationFolds": "3", "StartStrategies": "2", "StartStrategiesTime": "1",
              "CPU Bias": "0", "Tolerance": "1", "MinTrainingSize": "5", "CPUSpeedRatio": "1",
              "MinRunTime": "0.1", "FeatureExtractor": "x"}
    sections: dict[str, list[str]] = {}
    for sec, key in SETTINGS_KEYS:
        sections.setdefault(sec, []).append(f"{key} = {sample.get(key, 'some/path')}")
    text = "\n".join(f"[{sec}]\n" + "\n".join(lines) for sec, lines in sections.items())
    s = parse_settings(text)
    assert s.cores == 2 and s.walks == 3 and s.clear is True


floats = st.floats(min_value=0.001, max_value=1e4, allow_nan=False)


@given(time=floats, tol=st.floats(min_value=0, max_value=100), walks=st.integers(1, 50),
       walk_length=st.integers(0, 5), grid=st.lists(floats, min_size=1, max_size=4),
       clear=st.booleans(), mode=st.sampled_from(list(FeatureMode)))
def test_settings_round_trip(time, tol, walks, walk_length, grid, clear, mode):
    s = Settings(problems_file=Path("p.txt"), search_time_limit=time, tolerance=tol, walks=walks,
                 walk_length=walk_length, kernel_grid=tuple(grid), clear=clear, feature_mode=mode,
                 feature_extractor_cmd="extract --numbers", feature_tokens=("a(", "b", "c", "d", "e"))
    assert parse_settings(settings_to_ini(s)) == s
