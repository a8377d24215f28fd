from fractions import Fraction
from pathlib import Path

import pytest

from capauct import Instance

REPO_ROOT = Path(__file__).resolve().parent.parent
FIXTURES = REPO_ROOT / "fixtures"


@pytest.fixture
def example1() -> Instance:
    """Two agents (capacities 1 and 2), two unit goods, the canonical envy case."""
    return Instance((1, 2), (1, 1), ((Fraction(2), Fraction(2)), (Fraction(1), Fraction(2))))


@pytest.fixture
def example1_path() -> Path:
    return FIXTURES / "example1.json"
