"""Three-valued (Kleene) logic values and scalar reference operators."""

from __future__ import annotations

import enum
from functools import reduce
from typing import Sequence

__all__ = ["LogicValue", "ZERO", "ONE", "X", "eval_gate"]


class LogicValue(enum.IntEnum):
    """0/1 plus X for "driven by an unpowered zone". Codes match trace arrays."""

    ZERO = 0
    ONE = 1
    X = 2

    @classmethod
    def coerce(cls, value) -> "LogicValue":
        if isinstance(value, LogicValue):
            return value
        if isinstance(value, str):
            v = value.strip().upper()
            if v in ("0", "1"):
                return cls(int(v))
            return cls[v]
        return cls(int(value))

    def __str__(self) -> str:
        return "x" if self is LogicValue.X else str(int(self))


ZERO, ONE, X = LogicValue.ZERO, LogicValue.ONE, LogicValue.X


def _not(a):
    return X if a is X else (ONE if a is ZERO else ZERO)


def _and2(a, b):
    if a is ZERO or b is ZERO:
        return ZERO
    if a is X or b is X:
        return X
    return ONE


def _or2(a, b):
    if a is ONE or b is ONE:
        return ONE
    if a is X or b is X:
        return X
    return ZERO


def _xor2(a, b):
    if a is X or b is X:
        return X
    return ONE if a is not b else ZERO


def eval_gate(kind: str, ins: Sequence[LogicValue]) -> LogicValue:
    """Reference single-gate evaluation, used as an oracle for the compiled engine.

    ``MUX2(s, a, b)`` selects *a* when ``s`` is ONE and *b* when ``s`` is ZERO.
    """
    k = kind.value if hasattr(kind, "value") else str(kind).upper()
    if k in ("BUF", "BUFF", "DFF"):
        return ins[0]
    if k == "NOT":
        return _not(ins[0])
    if k == "MUX2":
        s, a, b = ins
        if s is ONE:
            return a
        if s is ZERO:
            return b
        return a if a is b and a is not X else X
    op = {"AND": _and2, "NAND": _and2, "OR": _or2, "NOR": _or2, "XOR": _xor2, "XNOR": _xor2}[k]
    r = reduce(op, ins)
    return _not(r) if k in ("NAND", "NOR", "XNOR") else r
