"""Exact money arithmetic: Decimal quantized to 3 fractional digits, half-even."""

from decimal import ROUND_HALF_EVEN, Decimal
from fractions import Fraction
from typing import Union

Money = Decimal

MoneyLike = Union[Decimal, int, str, float, Fraction]

QUANTUM = Decimal("0.001")
ZERO = Decimal("0.000")


def money(value: MoneyLike) -> Decimal:
    """Coerce ``value`` to a quantized Money amount.

    Floats are converted through their exact binary value, so the result is
    deterministic on every platform.
    """
    if isinstance(value, Fraction):
        value = Decimal(value.numerator) / Decimal(value.denominator)
    elif not isinstance(value, Decimal):
        value = Decimal(value)
    return value.quantize(QUANTUM, rounding=ROUND_HALF_EVEN)


def fmt(amount: Decimal) -> str:
    return str(money(amount))
