import stat
import sys
from pathlib import Path

import pytest

from stratsched.config import SolverSpec
from stratsched.strategy import InvocationFormat, ParameterSpace


@pytest.fixture
def stub_binary(tmp_path: Path) -> Path:
    """Executable wrapper around stratsched.stub_solver."""
    path = tmp_path / "stub-prover"
    path.write_text(f"#!{sys.executable}\nimport sys\nfrom stratsched.stub_solver import main\n"
                    "sys.exit(main())\n")
    path.chmod(path.stat().st_mode | stat.S_IXUSR)
    return path


@pytest.fixture
def stub_spec(stub_binary: Path) -> SolverSpec:
    return SolverSpec(str(stub_binary), "--cpu-limit=", "", InvocationFormat.E, (),
                      "SZS status Theorem")


@pytest.fixture
def small_space() -> ParameterSpace:
    """2 booleans x one 3-valued list: 12 strategies."""
    return ParameterSpace(frozenset({"--fast", "--split"}), (("--ordering", ("0", "1", "2")),))
