"""Report types shared by the replication drivers and the CLI."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import NamedTuple, Optional

from .core import rat_to_json

_RELATION_CHECKS = {
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    "=": lambda a, b: a == b,
    ">=": lambda a, b: a >= b,
    ">": lambda a, b: a > b,
}


class ChainStep(NamedTuple):
    """One verified inequality in a replayed argument."""

    label: str
    lhs: Fraction
    relation: str
    rhs: Fraction
    anchor: str

    @property
    def holds(self) -> bool:
        return _RELATION_CHECKS[self.relation](self.lhs, self.rhs)

    def to_json(self) -> dict:
        return {
            "type": "chain_step",
            "label": self.label,
            "lhs": rat_to_json(self.lhs),
            "relation": self.relation,
            "rhs": rat_to_json(self.rhs),
            "anchor": self.anchor,
            "holds": self.holds,
        }


@dataclass(frozen=True)
class ChainReport:
    """A sequence of exact inequality steps plus an overall verdict.

    ``conclusion`` carries the derived bound or margin of the final step,
    when the chain has one.
    """

    steps: tuple[ChainStep, ...]
    verdict: bool
    conclusion: Optional[Fraction] = field(default=None)

    def to_json_lines(self) -> list[dict]:
        lines = [step.to_json() for step in self.steps]
        tail: dict = {"type": "verdict", "ok": self.verdict}
        if self.conclusion is not None:
            tail["conclusion"] = rat_to_json(self.conclusion)
        lines.append(tail)
        return lines


def checked_step(label: str, lhs: Fraction, relation: str, rhs: Fraction, anchor: str) -> ChainStep:
    """Build a step and fail loudly if the stated relation does not hold."""
    step = ChainStep(label, lhs, relation, rhs, anchor)
    if not step.holds:
        raise AssertionError(f"chain step {label}: {lhs} {relation} {rhs} does not hold")
    return step
