"""Exact representation of 2x2x2 observed data: counts, distributions, risk differences.

Counts convert to per-arm conditional distributions with exact rational
arithmetic, so downstream bound formulas built from ratios of small
differences do not accumulate rounding error. Floats appear only when a
caller supplies them or at reporting time.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable

from .errors import ZeroArm

__all__ = [
    "ObservedCounts",
    "ObservedDistribution",
    "RiskDiffSpec",
    "from_counts",
    "risk_difference",
    "recode_outcome",
    "arm_probability",
    "RD_Y",
    "RD_D",
    "RD_YD",
]

_NORM_TOL = 1e-12


def _cells() -> Iterable[tuple[int, int, int]]:
    for z in (0, 1):
        for d in (0, 1):
            for y in (0, 1):
                yield z, d, y


@dataclass(frozen=True)
class ObservedCounts:
    """Cell counts n[z][d][y] for the observed binary triple.

    `n` is indexed as n[z][d][y]; every cell must be a non-negative integer.
    Empty cells are fine, empty arms are not (see `from_counts`).
    """

    n: tuple[tuple[tuple[int, int], tuple[int, int]], tuple[tuple[int, int], tuple[int, int]]]

    def __post_init__(self):
        for z, d, y in _cells():
            v = self.n[z][d][y]
            if not isinstance(v, int) or v < 0:
                raise ValueError(f"cell n[{z}][{d}][{y}] = {v!r} is not a non-negative integer")

    @classmethod
    def from_nested(cls, nested) -> "ObservedCounts":
        """Build from any [z][d][y]-indexable nest of integers."""
        return cls(
            tuple(tuple(tuple(int(nested[z][d][y]) for y in (0, 1)) for d in (0, 1)) for z in (0, 1))
        )

    def cell(self, z: int, d: int, y: int) -> int:
        return self.n[z][d][y]

    def arm_total(self, z: int) -> int:
        return sum(self.n[z][d][y] for d in (0, 1) for y in (0, 1))

    @property
    def total(self) -> int:
        return self.arm_total(0) + self.arm_total(1)

    def to_dict(self) -> dict:
        """JSON-friendly form: {"z=0": {"d=0": {"y=0": n, ...}, ...}, ...}."""
        return {
            f"z={z}": {f"d={d}": {f"y={y}": self.n[z][d][y] for y in (0, 1)} for d in (0, 1)}
            for z in (0, 1)
        }


@dataclass(frozen=True)
class ObservedDistribution:
    """Instrument marginal pz = P(Z=1) plus per-arm cell probabilities.

    p[z][d][y] = P(D=d, Y=y | Z=z). Each arm must sum to one within 1e-12;
    entries may be Fractions (exact) or floats.
    """

    pz: object
    p: tuple

    def __post_init__(self):
        if not 0 <= self.pz <= 1:
            raise ValueError(f"pz = {self.pz} outside [0, 1]")
        for z in (0, 1):
            arm = sum(self.p[z][d][y] for d in (0, 1) for y in (0, 1))
            if abs(arm - 1) > _NORM_TOL:
                raise ValueError(f"arm z={z} probabilities sum to {arm}, not 1")
            for d in (0, 1):
                for y in (0, 1):
                    v = self.p[z][d][y]
                    if v < -_NORM_TOL or v > 1 + _NORM_TOL:
                        raise ValueError(f"p[{z}][{d}][{y}] = {v} outside [0, 1]")

    def cell(self, z: int, d: int, y: int):
        return self.p[z][d][y]


@dataclass(frozen=True)
class RiskDiffSpec:
    """A risk difference P(event | arm 1) - P(event | arm 0).

    The event is a product over the treatment and outcome coordinates:
    `d` and `y` each fix a level or, when None, leave the coordinate free.
    `flip_z` conditions on the complemented instrument, swapping the arms.
    """

    y: int | None = None
    d: int | None = None
    flip_z: bool = False

    def __post_init__(self):
        if self.y is None and self.d is None:
            raise ValueError("event must constrain at least one of d, y")
        for name in ("y", "d"):
            v = getattr(self, name)
            if v not in (None, 0, 1):
                raise ValueError(f"{name} must be None, 0, or 1, got {v!r}")


# Common specs, named by the quantity they measure.
RD_Y = RiskDiffSpec(y=1)
RD_D = RiskDiffSpec(d=1)
RD_YD = RiskDiffSpec(y=1, d=1)


def from_counts(counts: ObservedCounts) -> ObservedDistribution:
    """Convert counts to an exact-rational ObservedDistribution.

    Raises ZeroArm if either instrument arm is empty.
    """
    totals = [counts.arm_total(0), counts.arm_total(1)]
    for z in (0, 1):
        if totals[z] == 0:
            raise ZeroArm(z)
    pz = Fraction(totals[1], totals[0] + totals[1])
    p = tuple(
        tuple(tuple(Fraction(counts.n[z][d][y], totals[z]) for y in (0, 1)) for d in (0, 1))
        for z in (0, 1)
    )
    return ObservedDistribution(pz=pz, p=p)


def arm_probability(dist: ObservedDistribution, z: int, *, d: int | None = None, y: int | None = None):
    """P(D in d-level, Y in y-level | Z=z); free coordinates are summed out."""
    total = 0
    for dd in (0, 1):
        if d is not None and dd != d:
            continue
        for yy in (0, 1):
            if y is not None and yy != y:
                continue
            total += dist.p[z][dd][yy]
    return total


def risk_difference(dist: ObservedDistribution, spec: RiskDiffSpec):
    """Evaluate a RiskDiffSpec on a distribution. Result lies in [-1, 1]."""
    hi, lo = (0, 1) if spec.flip_z else (1, 0)
    return arm_probability(dist, hi, d=spec.d, y=spec.y) - arm_probability(
        dist, lo, d=spec.d, y=spec.y
    )


def recode_outcome(dist: ObservedDistribution) -> ObservedDistribution:
    """Swap the outcome labels: p[z][d][y] -> p[z][d][1-y]. Involutive."""
    p = tuple(
        tuple(tuple(dist.p[z][d][1 - y] for y in (0, 1)) for d in (0, 1)) for z in (0, 1)
    )
    return ObservedDistribution(pz=dist.pz, p=p)
