import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT))

from src.contact import ContactScenario, assemble_model, load_scenario  # noqa: E402
from src.history.grid import TimeGrid  # noqa: E402
from src.solvers.elliptic import SolveConfig  # noqa: E402
from src.solvers.evolution import EvolutionConfig  # noqa: E402

SCENARIOS = ROOT / "config" / "scenarios"


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def spd_gram(rng):
    a = rng.standard_normal((4, 4))
    return a @ a.T + 4.0 * np.eye(4)


@pytest.fixture(scope="session")
def demo_scenario():
    return load_scenario(SCENARIOS / "demo.yaml")


@pytest.fixture(scope="session")
def demo_model(demo_scenario):
    return assemble_model(demo_scenario)


@pytest.fixture(scope="session")
def small_model():
    """4 x 2 mesh, 10 steps: quick enough for the default test run."""
    scn = load_scenario(SCENARIOS / "demo.yaml").with_mesh(nx=4, ny=2).with_grid(TimeGrid(1.0, 10))
    return assemble_model(scn)


@pytest.fixture(scope="session")
def zero_model():
    return assemble_model(load_scenario(SCENARIOS / "zero_load.yaml").with_mesh(nx=4, ny=2))


def evolution(grid: TimeGrid, **kwargs) -> EvolutionConfig:
    return EvolutionConfig(grid, kwargs.pop("frozen_cfg", SolveConfig()), workers=kwargs.pop("workers", 1), **kwargs)


__all__ = ["ContactScenario", "SCENARIOS", "evolution"]
