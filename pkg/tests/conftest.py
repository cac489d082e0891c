from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]
if str(ROOT) not in sys.path:
    sys.path.insert(0, str(ROOT))

from geom import InvariantFunction, InvariantMetric, grid_size, moment_grid  # noqa: E402

FIT_POWERS = (16, 24, 32, 48, 64)


@pytest.fixture(scope="session")
def grid():
    return moment_grid(grid_size(max(FIT_POWERS)))


@pytest.fixture(scope="session")
def fs(grid):
    return InvariantMetric.fubini_study(grid)


@pytest.fixture(scope="session")
def bent(grid):
    """Symmetric admissible perturbation φ = 0.1 P_2."""
    return InvariantMetric(InvariantFunction.basis(2, 0.1), grid)


@pytest.fixture(scope="session")
def tilted(grid):
    """Asymmetric admissible perturbation φ = 0.05 P_3."""
    return InvariantMetric(InvariantFunction.basis(3, 0.05), grid)
