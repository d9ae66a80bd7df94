"""JSON-friendly rendering of exact values."""

from __future__ import annotations

import json
from fractions import Fraction


def frac(x) -> str:
    x = Fraction(x)
    return f"{x.numerator}/{x.denominator}"


def parse_frac(s) -> Fraction:
    if isinstance(s, bool):
        raise ValueError(f"not a rational: {s!r}")
    if isinstance(s, (int, Fraction)):
        return Fraction(s)
    if isinstance(s, str):
        return Fraction(s.strip())
    raise ValueError(f"rationals are written as 'num/den' strings, got {s!r}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2)
