"""Infinite-precision arithmetic coder over exact rationals.

Slow (each step multiplies ever-growing fractions) but exact, which makes it
the reference the fixed-precision coder is checked against.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .errors import ForbiddenRegionHit, SymbolOutOfRange, ZeroWidth
from .model import SymbolModel


@dataclass(frozen=True)
class RationalInterval:
    low: Fraction
    high: Fraction

    @property
    def width(self) -> Fraction:
        return self.high - self.low

    def __contains__(self, point) -> bool:
        return self.low <= Fraction(point) < self.high


def exact_encode(model: SymbolModel, message: Sequence[int]) -> RationalInterval:
    low, width = Fraction(0), Fraction(1)
    total = model.total
    for sym in message:
        if not 0 <= sym < model.alphabet_size:
            raise SymbolOutOfRange(f"symbol {sym} not in alphabet of {model.alphabet_size}")
        low += width * Fraction(model.sym_low[sym], total)
        width *= Fraction(model.freqs[sym], total)
    return RationalInterval(low, low + width)


def exact_decode(model: SymbolModel, point, n_symbols: int) -> list[int]:
    """Decode ``n_symbols`` symbols from a point in ``[0, 1)``."""
    x = Fraction(point)
    if not 0 <= x < 1:
        raise ValueError("point must lie in [0, 1)")
    bounds = model.slot_bounds
    total = model.total
    n_real = model.alphabet_size
    low, width = Fraction(0), Fraction(1)
    out: list[int] = []
    for index in range(n_symbols):
        # scaled position of x inside the current interval, in units of 1/total
        target = (x - low) / width * total
        slot = 0
        while slot + 1 < len(bounds) - 1 and bounds[slot + 1] <= target:
            slot += 1
        if slot >= n_real:
            raise ForbiddenRegionHit(index, out)
        low += width * Fraction(bounds[slot], total)
        width *= Fraction(bounds[slot + 1] - bounds[slot], total)
        out.append(model.order[slot])
    return out


def exact_width_bits(interval: RationalInterval | Fraction) -> int:
    """Smallest B with 2**-B <= width, i.e. ceil(-log2(width))."""
    width = interval.width if isinstance(interval, RationalInterval) else Fraction(interval)
    if width <= 0:
        raise ZeroWidth("interval has no width")
    # 1/width is exact; find the smallest B with 2**B >= 1/width
    inv = 1 / width
    bits = max(0, (inv.numerator // inv.denominator).bit_length() - 1)
    while Fraction(1 << bits) < inv:
        bits += 1
    return bits


def shortest_point(interval: RationalInterval) -> Fraction:
    """Dyadic point with the fewest fractional bits inside ``interval``."""
    bits = 0
    while True:
        scale = 1 << bits
        k = -((-interval.low.numerator * scale) // interval.low.denominator)  # ceil
        cand = Fraction(k, scale)
        if cand < interval.high:
            return cand
        bits += 1
