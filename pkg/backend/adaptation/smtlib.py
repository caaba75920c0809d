"""S-expression helpers for writing SMT-LIB2 scripts."""

import math
from collections.abc import Iterable, Sequence
from decimal import Decimal


def real(x: float) -> str:
    """
    Fixed-point SMT-LIB2 real literal. Negative values become (- x) since
    the standard has no signed numerals.
    """
    if not math.isfinite(x):
        raise ValueError(f"cannot encode {x!r} as an SMT-LIB2 real")
    text = format(Decimal(repr(abs(float(x)))), "f")
    if "." not in text:
        text += ".0"
    return f"(- {text})" if x < 0 else text


def sexpr(*parts: str) -> str:
    return "(" + " ".join(parts) + ")"


def add(terms: Sequence[str]) -> str:
    if not terms:
        return "0.0"
    if len(terms) == 1:
        return terms[0]
    return sexpr("+", *terms)


def ite(cond: str, then: str, otherwise: str) -> str:
    return sexpr("ite", cond, then, otherwise)


def declare(name: str, sort: str) -> str:
    return sexpr("declare-const", name, sort)


def assert_(term: str) -> str:
    return sexpr("assert", term)


def script(lines: Iterable[str]) -> str:
    return "\n".join(lines) + "\n"
