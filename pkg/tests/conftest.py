import logging
from fractions import Fraction
from pathlib import Path

import pytest
from hypothesis import settings

from treechain.acceptance import (
    FOUR_NODE_MATRIX,
    four_node_kernel,
)
from treechain.kernel import ExplicitKernel
from treechain.tree import FiniteTree

from .strategies import acceptance

settings.register_profile("acceptance", acceptance)
settings.register_profile("default", max_examples=100, deadline=None)
settings.load_profile("default")

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def logger():
    logger = logging.getLogger()
    logger.propagate = False

    return logger


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def four_node() -> ExplicitKernel:
    return four_node_kernel()


@pytest.fixture
def four_node_matrix() -> list[list[Fraction]]:
    return [list(row) for row in FOUR_NODE_MATRIX]


@pytest.fixture
def path3() -> FiniteTree:
    return FiniteTree.from_counts([1, 1, 0])

