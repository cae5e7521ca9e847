"""Probability maps, keyed slot permutations and forbidden-symbol augmentation.

Probabilities are integer frequency counts over a common total no larger than
``MAX_TOTAL``.  A model keeps two things apart:

* ``freqs[s]`` -- the width (count) owned by real symbol ``s``;
* ``order[k]`` -- which symbol sits in slot ``k`` of the probability map.

Keyed encryption only reorders ``order``; every symbol keeps its own width, so
the product of widths for any message (and hence the compressed length) is
unchanged.  The forbidden symbol, when present, always occupies the last slot
and never takes part in a permutation.
"""

from __future__ import annotations

import hashlib
import hmac
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Sequence

from .errors import (
    EmptyAlphabet,
    FrequencyOverflow,
    KeySizeMismatch,
    SlotOutOfRange,
    ZeroFrequency,
)

MAX_TOTAL = 1 << 16
SEED_BYTES = 32


@dataclass(frozen=True)
class SymbolModel:
    freqs: tuple[int, ...]
    order: tuple[int, ...] = None  # type: ignore[assignment]
    forbidden_freq: int = 0
    # derived, filled in __post_init__
    cum: tuple[int, ...] = field(init=False, repr=False, compare=False)
    sym_low: tuple[int, ...] = field(init=False, repr=False, compare=False)
    slot_bounds: tuple[int, ...] = field(init=False, repr=False, compare=False)
    real_total: int = field(init=False, repr=False, compare=False)
    total: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        freqs = tuple(int(f) for f in self.freqs)
        object.__setattr__(self, "freqs", freqs)
        if not freqs:
            raise EmptyAlphabet("a model needs at least one symbol")
        if min(freqs) < 1:
            raise ZeroFrequency("every real symbol needs a frequency >= 1")
        if self.forbidden_freq < 0:
            raise ZeroFrequency("forbidden frequency cannot be negative")
        if sum(freqs) + self.forbidden_freq > MAX_TOTAL:
            raise FrequencyOverflow(
                f"total {sum(freqs) + self.forbidden_freq} exceeds {MAX_TOTAL}"
            )
        n = len(freqs)
        order = tuple(range(n)) if self.order is None else tuple(self.order)
        if sorted(order) != list(range(n)):
            raise KeySizeMismatch("slot order must be a permutation of the alphabet")
        object.__setattr__(self, "order", order)

        cum = []
        sym_low = [0] * n
        acc = 0
        for sym in order:
            cum.append(acc)
            sym_low[sym] = acc
            acc += freqs[sym]
        object.__setattr__(self, "cum", tuple(cum))
        object.__setattr__(self, "sym_low", tuple(sym_low))
        # slot k spans slot_bounds[k]..slot_bounds[k + 1]; the forbidden slot,
        # when present, is the last one and the final entry is always total
        bounds = tuple(cum) + (acc,)
        if self.forbidden_freq:
            bounds += (acc + self.forbidden_freq,)
        object.__setattr__(self, "slot_bounds", bounds)
        object.__setattr__(self, "real_total", acc)
        object.__setattr__(self, "total", acc + self.forbidden_freq)

    @property
    def alphabet_size(self) -> int:
        return len(self.freqs)

    @property
    def epsilon(self) -> Fraction:
        """Share of the map reserved for the forbidden symbol."""
        return Fraction(self.forbidden_freq, self.total)

    def slot_width(self, slot: int) -> int:
        return self.freqs[self.order[slot]]

    def probability(self, symbol: int) -> Fraction:
        return Fraction(self.freqs[symbol], self.total)


@dataclass(frozen=True)
class PermutationKey:
    seed: bytes
    derived_perm: tuple[int, ...]

    @property
    def size(self) -> int:
        return len(self.derived_perm)

    def inverse(self) -> tuple[int, ...]:
        inv = [0] * len(self.derived_perm)
        for i, p in enumerate(self.derived_perm):
            inv[p] = i
        return tuple(inv)


def build_model(freq_list: Sequence[int]) -> SymbolModel:
    """Build a probability map from positive integer counts."""
    return SymbolModel(tuple(freq_list))


def permute_model(model: SymbolModel, key: PermutationKey) -> SymbolModel:
    if key.size != model.alphabet_size:
        raise KeySizeMismatch(
            f"key derived for {key.size} symbols, model has {model.alphabet_size}"
        )
    order = tuple(model.order[p] for p in key.derived_perm)
    return SymbolModel(model.freqs, order, model.forbidden_freq)


def naive_swap_model(model: SymbolModel, i: int, j: int) -> SymbolModel:
    """Exchange the widths of the symbols in slots ``i`` and ``j``.

    The symbol-to-slot binding is kept, so unlike :func:`permute_model` this
    changes the statistics the coder sees.  Only useful to demonstrate the
    resulting code expansion.
    """
    n = model.alphabet_size
    for slot in (i, j):
        if not 0 <= slot < n:
            raise SlotOutOfRange(f"slot {slot} outside 0..{n - 1}")
    a, b = model.order[i], model.order[j]
    freqs = list(model.freqs)
    freqs[a], freqs[b] = freqs[b], freqs[a]
    return SymbolModel(tuple(freqs), model.order, model.forbidden_freq)


def add_forbidden(model: SymbolModel, forbidden_freq: int) -> SymbolModel:
    """Reserve ``forbidden_freq`` counts for a never-emitted dummy symbol."""
    if forbidden_freq < 0:
        raise ZeroFrequency("forbidden frequency cannot be negative")
    if model.real_total + forbidden_freq > MAX_TOTAL:
        raise FrequencyOverflow(
            f"total {model.real_total + forbidden_freq} exceeds {MAX_TOTAL}"
        )
    return SymbolModel(model.freqs, model.order, forbidden_freq)


def _keystream(seed: bytes, n: int) -> Iterator[int]:
    # HMAC-SHA256 in counter mode, domain-separated by the alphabet size
    counter = 0
    while True:
        block = hmac.new(
            seed, b"arithseal-perm" + struct.pack(">IQ", n, counter), hashlib.sha256
        ).digest()
        yield from struct.unpack(">4Q", block)
        counter += 1


def _uniform_below(stream: Iterator[int], bound: int) -> int:
    # rejection sampling keeps the draw exactly uniform
    limit = (1 << 64) - (1 << 64) % bound
    while True:
        word = next(stream)
        if word < limit:
            return word % bound


def derive_permutation(seed: bytes, n: int) -> PermutationKey:
    """Deterministic keyed Fisher-Yates shuffle of ``range(n)``."""
    if n < 1:
        raise EmptyAlphabet("permutation size must be >= 1")
    seed = bytes(seed)
    if len(seed) != SEED_BYTES:
        raise KeySizeMismatch(f"permutation seed must be {SEED_BYTES} bytes")
    perm = list(range(n))
    stream = _keystream(seed, n)
    for i in range(n - 1, 0, -1):
        j = _uniform_below(stream, i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return PermutationKey(seed, tuple(perm))


def fit_frequencies(counts: Sequence[int], max_total: int = MAX_TOTAL) -> list[int]:
    """Scale raw occurrence counts to frequencies >= 1 summing to <= max_total.

    Largest-remainder rounding; symbols that never occurred still get 1 so the
    model can code any symbol of the alphabet.
    """
    n = len(counts)
    if n == 0:
        raise EmptyAlphabet("no counts given")
    if n > max_total:
        raise FrequencyOverflow(f"{n} symbols cannot fit in a total of {max_total}")
    total = sum(counts)
    if total <= max_total - n:
        return [c + 1 for c in counts] if 0 in counts else list(counts)
    budget = max_total - n  # one count reserved per symbol
    shares = [Fraction(c * budget, total) for c in counts]
    freqs = [1 + int(s) for s in shares]
    left = max_total - sum(freqs)
    by_remainder = sorted(range(n), key=lambda k: shares[k] - int(shares[k]), reverse=True)
    for k in by_remainder[:left]:
        freqs[k] += 1
    return freqs
