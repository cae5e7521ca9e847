"""Fixed-precision streaming arithmetic coder.

Integer ``low``/``high`` registers of ``precision`` bits.  Whenever both
registers agree on their most significant bit, that bit is shifted out to the
output.  When the interval straddles the midpoint inside the middle half
(``low = 01...``, ``high = 10...``) the shift is deferred and counted as a
pending bit, to be emitted (inverted) after the next resolved bit.  With
frequency totals of at most 2**16 and 32-bit registers every product stays
below 2**48.

Two implementations live here and produce bit-identical output:

* :class:`Encoder` / :class:`Decoder` -- symbol-at-a-time objects mirroring
  one init ... flush coding cycle;
* :func:`encode_stream` / :func:`decode_stream` -- whole-buffer kernels,
  compiled with numba when it is importable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ForbiddenSymbolHit, SymbolOutOfRange, UnexpectedEndOfData
from .model import SymbolModel

DEFAULT_PRECISION = 32
LINEAR_SCAN_MAX = 32

try:  # pragma: no cover - exercised implicitly
    from numba import njit as _njit
except ImportError:  # pragma: no cover
    _njit = None


def _jit(fn):
    if _njit is None:
        return fn
    return _njit(cache=True, nogil=True)(fn)


@dataclass
class CodecState:
    precision: int = DEFAULT_PRECISION
    low: int = 0
    high: int = 0
    pending_bits: int = 0

    def __post_init__(self):
        if not 18 <= self.precision <= 46:
            raise ValueError("precision must be in 18..46 bits")
        self.top = (1 << self.precision) - 1
        self.half = 1 << (self.precision - 1)
        self.quarter = 1 << (self.precision - 2)
        self.init()

    def init(self):
        self.low = 0
        self.high = self.top
        self.pending_bits = 0


class BitSink:
    """MSB-first bit writer."""

    def __init__(self):
        self._buf = bytearray()
        self._acc = 0
        self._n = 0
        self.bit_count = 0

    def write(self, bit: int):
        self._acc = (self._acc << 1) | bit
        self._n += 1
        self.bit_count += 1
        if self._n == 8:
            self._buf.append(self._acc)
            self._acc = 0
            self._n = 0

    def getvalue(self) -> bytes:
        if self._n:
            return bytes(self._buf) + bytes([self._acc << (8 - self._n)])
        return bytes(self._buf)


class BitSource:
    """MSB-first bit reader; reads past the end return 0 and are counted."""

    def __init__(self, data: bytes):
        self._data = data
        self._pos = 0
        self.overrun = 0

    def read(self) -> int:
        byte, bit = divmod(self._pos, 8)
        self._pos += 1
        if byte >= len(self._data):
            self.overrun += 1
            return 0
        return (self._data[byte] >> (7 - bit)) & 1


class Encoder:
    """One complete coding cycle: ``init()``, ``encode()`` per symbol, ``flush()``."""

    def __init__(self, model: SymbolModel, precision: int = DEFAULT_PRECISION):
        self.model = model
        self.state = CodecState(precision)
        self.sink = BitSink()

    def init(self):
        self.state.init()
        self.sink = BitSink()

    def _emit(self, bit: int):
        st = self.state
        self.sink.write(bit)
        for _ in range(st.pending_bits):
            self.sink.write(bit ^ 1)
        st.pending_bits = 0

    def encode(self, symbol: int):
        m = self.model
        if not 0 <= symbol < m.alphabet_size:
            raise SymbolOutOfRange(f"symbol {symbol} not in alphabet of {m.alphabet_size}")
        st = self.state
        rng = st.high - st.low + 1
        lo = m.sym_low[symbol]
        st.high = st.low + rng * (lo + m.freqs[symbol]) // m.total - 1
        st.low = st.low + rng * lo // m.total
        while True:
            if st.high < st.half:
                self._emit(0)
            elif st.low >= st.half:
                self._emit(1)
                st.low -= st.half
                st.high -= st.half
            elif st.low >= st.quarter and st.high < st.half + st.quarter:
                st.pending_bits += 1
                st.low -= st.quarter
                st.high -= st.quarter
            else:
                break
            st.low <<= 1
            st.high = (st.high << 1) | 1

    def flush(self) -> bytes:
        """Emit two disambiguating bits plus pending bits, pad with zeros."""
        st = self.state
        st.pending_bits += 1
        self._emit(0 if st.low < st.quarter else 1)
        return self.sink.getvalue()

    @property
    def bit_count(self) -> int:
        return self.sink.bit_count


class Decoder:
    def __init__(self, model: SymbolModel, data: bytes, precision: int = DEFAULT_PRECISION):
        self.model = model
        self.state = CodecState(precision)
        self.source = BitSource(data)
        self.index = 0
        self.value = 0
        self.init()

    def init(self):
        self.state.init()
        self.index = 0
        self.value = 0
        for _ in range(self.state.precision):
            self.value = (self.value << 1) | self.source.read()

    def decode(self) -> int:
        m = self.model
        st = self.state
        if self.source.overrun > st.precision:
            raise UnexpectedEndOfData(self.index)
        rng = st.high - st.low + 1
        total = m.total
        target = ((self.value - st.low + 1) * total - 1) // rng
        bounds = m.slot_bounds
        slot = _find_slot(bounds, target)
        if slot >= m.alphabet_size:
            raise ForbiddenSymbolHit(self.index)
        st.high = st.low + rng * bounds[slot + 1] // total - 1
        st.low = st.low + rng * bounds[slot] // total
        while True:
            if st.high < st.half:
                pass
            elif st.low >= st.half:
                st.low -= st.half
                st.high -= st.half
                self.value -= st.half
            elif st.low >= st.quarter and st.high < st.half + st.quarter:
                st.low -= st.quarter
                st.high -= st.quarter
                self.value -= st.quarter
            else:
                break
            st.low <<= 1
            st.high = (st.high << 1) | 1
            self.value = (self.value << 1) | self.source.read()
        self.index += 1
        return m.order[slot]


def _find_slot(bounds, target):
    n = len(bounds) - 1
    if n <= LINEAR_SCAN_MAX:
        slot = 0
        while slot < n - 1 and bounds[slot + 1] <= target:
            slot += 1
        return slot
    lo, hi = 0, n - 1
    while lo < hi:
        mid = (lo + hi + 1) >> 1
        if bounds[mid] <= target:
            lo = mid
        else:
            hi = mid - 1
    return lo


# -- whole-buffer kernels ----------------------------------------------------
#
# Written in the numba-compatible subset: flat int64 arrays, no objects.


@_jit
def _encode_kernel(sym_low, sym_freq, total, symbols, precision, out):
    top = (np.int64(1) << precision) - 1
    half = np.int64(1) << (precision - 1)
    quarter = np.int64(1) << (precision - 2)
    low = np.int64(0)
    high = top
    pending = 0
    nbits = 0
    for i in range(symbols.shape[0]):
        s = symbols[i]
        rng = high - low + 1
        lo = sym_low[s]
        high = low + rng * (lo + sym_freq[s]) // total - 1
        low = low + rng * lo // total
        while True:
            if high < half:
                bit = 0
            elif low >= half:
                bit = 1
                low -= half
                high -= half
            elif low >= quarter and high < half + quarter:
                pending += 1
                low -= quarter
                high -= quarter
                low <<= 1
                high = (high << 1) | 1
                continue
            else:
                break
            out[nbits >> 3] |= bit << (7 - (nbits & 7))
            nbits += 1
            for _ in range(pending):
                out[nbits >> 3] |= (bit ^ 1) << (7 - (nbits & 7))
                nbits += 1
            pending = 0
            low <<= 1
            high = (high << 1) | 1
    # flush
    pending += 1
    bit = 0 if low < quarter else 1
    out[nbits >> 3] |= bit << (7 - (nbits & 7))
    nbits += 1
    for _ in range(pending):
        out[nbits >> 3] |= (bit ^ 1) << (7 - (nbits & 7))
        nbits += 1
    return nbits


@_jit
def _decode_kernel(bounds, slot_symbol, n_real, total, data, n_symbols, precision, strict, out):
    """Returns (status, index): 0 ok, 1 forbidden slot hit, 2 ran out of data."""
    top = (np.int64(1) << precision) - 1
    half = np.int64(1) << (precision - 1)
    quarter = np.int64(1) << (precision - 2)
    nbytes = data.shape[0]
    limit = nbytes * 8 + precision
    n_slots = bounds.shape[0] - 1
    pos = 0
    value = np.int64(0)
    for _ in range(precision):
        bit = 0
        if (pos >> 3) < nbytes:
            bit = (data[pos >> 3] >> (7 - (pos & 7))) & 1
        value = (value << 1) | bit
        pos += 1
    low = np.int64(0)
    high = top
    for i in range(n_symbols):
        if strict and pos > limit:
            return 2, i
        rng = high - low + 1
        target = ((value - low + 1) * total - 1) // rng
        if n_slots <= 32:
            slot = 0
            while slot < n_slots - 1 and bounds[slot + 1] <= target:
                slot += 1
        else:
            a = 0
            b = n_slots - 1
            while a < b:
                mid = (a + b + 1) >> 1
                if bounds[mid] <= target:
                    a = mid
                else:
                    b = mid - 1
            slot = a
        if slot >= n_real:
            return 1, i
        high = low + rng * bounds[slot + 1] // total - 1
        low = low + rng * bounds[slot] // total
        while True:
            if high < half:
                pass
            elif low >= half:
                low -= half
                high -= half
                value -= half
            elif low >= quarter and high < half + quarter:
                low -= quarter
                high -= quarter
                value -= quarter
            else:
                break
            low <<= 1
            high = (high << 1) | 1
            bit = 0
            if (pos >> 3) < nbytes:
                bit = (data[pos >> 3] >> (7 - (pos & 7))) & 1
            value = (value << 1) | bit
            pos += 1
        out[i] = slot_symbol[slot]
    return 0, n_symbols


def _as_symbols(model: SymbolModel, symbols) -> np.ndarray:
    if isinstance(symbols, (bytes, bytearray, memoryview)):
        arr = np.frombuffer(symbols, dtype=np.uint8).astype(np.int64)
    else:
        arr = np.asarray(symbols, dtype=np.int64).reshape(-1)
    if arr.size and (arr.min() < 0 or arr.max() >= model.alphabet_size):
        bad = arr[(arr < 0) | (arr >= model.alphabet_size)][0]
        raise SymbolOutOfRange(f"symbol {bad} not in alphabet of {model.alphabet_size}")
    return arr


def encode_stream_bits(
    model: SymbolModel, symbols, precision: int = DEFAULT_PRECISION
) -> tuple[bytes, int]:
    """Encode one coding cycle; returns (zero-padded bytes, unpadded bit count)."""
    arr = _as_symbols(model, symbols)
    # a symbol of frequency f costs at most ceil(log2(total/f)) + 1 <= 17 shifts
    out = np.zeros((arr.size * 18 + 2 * precision + 8) // 8 + 1, dtype=np.uint8)
    nbits = _encode_kernel(
        np.asarray(model.sym_low, dtype=np.int64),
        np.asarray(model.freqs, dtype=np.int64),
        np.int64(model.total),
        arr,
        np.int64(precision),
        out,
    )
    return out[: (nbits + 7) // 8].tobytes(), int(nbits)


def encode_stream(model: SymbolModel, symbols, precision: int = DEFAULT_PRECISION) -> bytes:
    return encode_stream_bits(model, symbols, precision)[0]


def decode_stream(
    model: SymbolModel,
    data: bytes,
    n_symbols: int,
    precision: int = DEFAULT_PRECISION,
    strict: bool = True,
) -> np.ndarray:
    """Decode exactly ``n_symbols`` symbols as an int64 array.

    A well-formed stream never needs more than ``precision`` zero bits past its
    end; with ``strict`` a decoder that does raises
    :class:`UnexpectedEndOfData`.  Otherwise the input is zero-extended
    indefinitely.  :class:`ForbiddenSymbolHit` and :class:`UnexpectedEndOfData`
    carry the failing symbol index and the symbols decoded before it.
    """
    out = np.zeros(n_symbols, dtype=np.int64)
    status, index = _decode_kernel(
        np.asarray(model.slot_bounds, dtype=np.int64),
        np.asarray(model.order, dtype=np.int64),
        np.int64(model.alphabet_size),
        np.int64(model.total),
        np.frombuffer(bytes(data), dtype=np.uint8),
        np.int64(n_symbols),
        np.int64(precision),
        bool(strict),
        out,
    )
    if status == 1:
        raise ForbiddenSymbolHit(int(index), out[:index].tolist())
    if status == 2:
        raise UnexpectedEndOfData(int(index), out[:index].tolist())
    return out


def encode_symbols(model: SymbolModel, symbols: Sequence[int], precision=DEFAULT_PRECISION):
    """Symbol-at-a-time path; returns (bytes, unpadded bit count)."""
    enc = Encoder(model, precision)
    for s in symbols:
        enc.encode(s)
    data = enc.flush()
    return data, enc.bit_count


def decode_symbols(model: SymbolModel, data: bytes, n_symbols: int, precision=DEFAULT_PRECISION):
    dec = Decoder(model, data, precision)
    out = []
    for _ in range(n_symbols):
        try:
            out.append(dec.decode())
        except (ForbiddenSymbolHit, UnexpectedEndOfData) as exc:
            exc.decoded = out
            raise
    return out
