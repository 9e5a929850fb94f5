"""Bundled example datasets used in the documentation, tests, and CLI.

Cell layout per arm is (d, y). EX3 has structural zeros in the unencouraged
arm: nobody there receives treatment.
"""

from __future__ import annotations

from .core import ObservedCounts

__all__ = ["EX1", "EX2", "EX3", "FIXTURES"]

# Encouragement trial with two-sided noncompliance.
EX1 = ObservedCounts.from_nested(
    [
        # z = 0: n(d=0,y=0), n(d=0,y=1), n(d=1,y=0), n(d=1,y=1)
        [[79, 131], [8, 24]],
        # z = 1
        [[42, 68], [42, 107]],
    ]
)

# Encouragement study where the outcome coding in the source table is the
# reverse of the analysis coding; see the recode helpers.
EX2 = ObservedCounts.from_nested(
    [
        [[1041, 99], [237, 30]],
        [[944, 85], [424, 31]],
    ]
)

# One-sided compliance design: the unencouraged arm has no access to treatment.
EX3 = ObservedCounts.from_nested(
    [
        [[74, 11514], [0, 0]],
        [[34, 2385], [12, 9663]],
    ]
)

FIXTURES: dict[str, ObservedCounts] = {"ex1": EX1, "ex2": EX2, "ex3": EX3}
