import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))  # expose tests/helpers.py

from qnnv.lut import standard_tables
from qnnv.solver import discover_solvers

REPO_ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = Path(__file__).parent / "data"


def find_test_solver():
    solvers = discover_solvers(extra_dirs=(str(REPO_ROOT / "solvers" / "z3js"),))
    return solvers[0] if solvers else None


@pytest.fixture(scope="session")
def solver_spec():
    spec = find_test_solver()
    if spec is None:
        pytest.skip("no SMT solver available (run solvers/setup_z3js.sh)")
    return spec


@pytest.fixture(scope="session")
def std_luts():
    return standard_tables()


@pytest.fixture()
def data_dir():
    return DATA_DIR
