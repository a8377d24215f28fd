"""Seeded random inputs for fuzzing and the CLI.

Values are uniform rationals with numerator in [0, 100] and denominator
in {1..10}; ties are possible on purpose, since the solvers break them
canonically and determinism is part of the contract.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Sequence

from .core import Instance
from .mechanisms import Subadditive2x2Valuation


def rng_for(seed: int, iteration: int) -> random.Random:
    """Independent, reproducible stream per fuzz iteration."""
    return random.Random(seed * 1_000_003 + iteration)


def random_rational(rng: random.Random, num_max: int = 100, den_max: int = 10) -> Fraction:
    return Fraction(rng.randint(0, num_max), rng.randint(1, den_max))


def random_instance(
    rng: random.Random,
    n_agents: int,
    n_goods: int,
    capacity_mode: str = "hetero",
    cap_choices: Sequence[int] = (1, 2, 3),
    supply_max: int = 1,
) -> Instance:
    """A random market; homogeneous mode gives every agent the same capacity."""
    if capacity_mode == "homo":
        cap = rng.choice(list(cap_choices))
        capacities = (cap,) * n_agents
    elif capacity_mode == "hetero":
        capacities = tuple(rng.choice(list(cap_choices)) for _ in range(n_agents))
    else:
        raise ValueError(f"unknown capacity mode {capacity_mode!r}")
    supplies = tuple(rng.randint(1, supply_max) for _ in range(n_goods))
    values = tuple(
        tuple(random_rational(rng) for _ in range(n_goods)) for _ in range(n_agents)
    )
    return Instance(capacities, supplies, values)


def random_sized_instance(
    rng: random.Random,
    max_agents: int = 4,
    max_goods: int = 5,
    capacity_mode: str = "hetero",
    supply_max: int = 2,
) -> Instance:
    """Random size and content, the staple diet of the fuzz suites."""
    n = rng.randint(2, max_agents)
    m = rng.randint(1, max_goods)
    return random_instance(rng, n, m, capacity_mode=capacity_mode, supply_max=supply_max)


def random_row(rng: random.Random, n_goods: int) -> tuple[Fraction, ...]:
    return tuple(random_rational(rng) for _ in range(n_goods))


def random_capacitated_valuation(
    rng: random.Random, n_goods: int, cap_max: int = 4
) -> tuple[tuple[Fraction, ...], int]:
    return random_row(rng, n_goods), rng.randint(0, cap_max)


def random_price_pair(
    rng: random.Random, n_goods: int
) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
    """Prices p <= q componentwise, equal on a random subset of goods."""
    low = tuple(random_rational(rng) for _ in range(n_goods))
    high = tuple(
        p if rng.random() < 0.5 else p + random_rational(rng, num_max=50) for p in low
    )
    return low, high


def random_subadditive_2x2(rng: random.Random) -> Subadditive2x2Valuation:
    """Monotone subadditive two-good valuation on a rational grid."""
    v1 = random_rational(rng)
    v2 = random_rational(rng)
    lo, hi = max(v1, v2), v1 + v2
    v12 = lo + Fraction(rng.randint(0, 20), 20) * (hi - lo)
    return Subadditive2x2Valuation(v1, v2, v12)
