"""Experiment harness: redundancy, expansion, avalanche, wrong-key, integrity
and signing-cost measurements.

Every randomized experiment takes an integer ``seed``; trial ``t`` draws from
``numpy.random.default_rng([seed, t])`` so results do not depend on the order
trials run in.
"""

from __future__ import annotations

import csv
import hashlib
import math
import time
from dataclasses import asdict, dataclass, fields
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from . import security
from .coder import decode_stream, encode_stream_bits
from .container import open_sealed, parse_sealed, write_sealed
from .errors import EpsilonUnrepresentable, ForbiddenSymbolHit
from .exact import exact_encode, exact_width_bits
from .model import (
    MAX_TOTAL,
    SymbolModel,
    add_forbidden,
    build_model,
    derive_permutation,
    fit_frequencies,
    naive_swap_model,
    permute_model,
)

DEMO_FREQS = (1, 2, 3, 4)
DEMO_MESSAGE = "ABDCDCBCDD"
# smallest MQ-coder region over the smallest total map size
MQ_EPSILON = 0.000023 / 0.75
CODE_BLOCK_SYMBOLS = 2 ** 15
# {0.1, 0.2, 0.3, 0.4} scaled to leave two counts for a forbidden symbol
WIDE_DEMO_FREQS = (6553, 13107, 19660, 26214)


def trial_rng(seed: int, trial: int) -> np.random.Generator:
    return np.random.default_rng([seed, trial])


def letters_to_symbols(text: str) -> list[int]:
    return [ord(c) - ord("A") for c in text]


def symbols_to_letters(symbols: Iterable[int]) -> str:
    return "".join(chr(ord("A") + int(s)) for s in symbols)


def entropy_bits(model: SymbolModel) -> float:
    """Shannon entropy of the real symbols, in bits per symbol."""
    t = model.real_total
    return -sum(f / t * math.log2(f / t) for f in model.freqs)


def sample_message(model: SymbolModel, n: int, rng: np.random.Generator) -> np.ndarray:
    p = np.asarray(model.freqs, dtype=float)
    return rng.choice(model.alphabet_size, size=n, p=p / p.sum()).astype(np.int64)


def symbol_error_rate(a, b) -> float:
    a, b = np.asarray(a), np.asarray(b)
    return float(np.mean(a != b)) if a.size else 0.0


def first_difference(a, b) -> Optional[int]:
    diff = np.flatnonzero(np.asarray(a) != np.asarray(b))
    return int(diff[0]) if diff.size else None


def flip_bit(data: bytes, bit: int) -> bytes:
    buf = bytearray(data)
    buf[bit >> 3] ^= 0x80 >> (bit & 7)
    return bytes(buf)


def _write_csv(path, rows: Sequence, cls) -> None:
    names = [f.name for f in fields(cls)]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=names)
        w.writeheader()
        for r in rows:
            w.writerow({k: v for k, v in asdict(r).items() if k in names})


# -- redundancy of the forbidden symbol --------------------------------------

def redundancy_per_symbol(epsilon: float) -> float:
    """Extra bits per coded symbol when a share epsilon of the map is forbidden."""
    return -math.log1p(-epsilon) / math.log(2)


def predicted_extra_bits(epsilon: float, n_symbols: int) -> float:
    return n_symbols * redundancy_per_symbol(epsilon)


def forbidden_freq_for_epsilon(epsilon: float, real_total: int) -> int:
    """Integer forbidden count whose share of the map is closest to epsilon."""
    if not 0 <= epsilon < 1:
        raise EpsilonUnrepresentable(f"epsilon {epsilon} outside [0, 1)")
    if epsilon == 0:
        return 0
    ff = round(epsilon * real_total / (1 - epsilon))
    if ff < 1:
        raise EpsilonUnrepresentable(
            f"epsilon {epsilon} rounds to zero counts over a total of {real_total}"
        )
    if real_total + ff > MAX_TOTAL:
        raise EpsilonUnrepresentable(f"epsilon {epsilon} needs a total above {MAX_TOTAL}")
    return ff


@dataclass
class RedundancyReport:
    epsilon: float
    realized_epsilon: float
    n_symbols: int
    blocks: int
    measured_extra_bits: float
    predicted_extra_bits: float
    predicted_realized_bits: float

    @property
    def relative_error(self) -> float:
        if self.predicted_realized_bits == 0:
            return 0.0 if self.measured_extra_bits == 0 else math.inf
        return abs(self.measured_extra_bits - self.predicted_realized_bits) / self.predicted_realized_bits


def run_redundancy(
    model: SymbolModel, epsilon: float, n: int, trials: int, seed: int = 0
) -> RedundancyReport:
    """Average extra output bits per block caused by a forbidden symbol.

    Each block is coded twice, with and without the forbidden slot, and the
    unpadded bit counts are compared.
    """
    ff = forbidden_freq_for_epsilon(epsilon, model.real_total)
    guarded = add_forbidden(model, ff)
    realized = float(guarded.epsilon)
    diffs = []
    for t in range(trials):
        msg = sample_message(model, n, trial_rng(seed, t))
        _, plain_bits = encode_stream_bits(model, msg)
        _, guarded_bits = encode_stream_bits(guarded, msg)
        diffs.append(guarded_bits - plain_bits)
    return RedundancyReport(
        epsilon=epsilon,
        realized_epsilon=realized,
        n_symbols=n,
        blocks=trials,
        measured_extra_bits=float(np.mean(diffs)) if diffs else 0.0,
        predicted_extra_bits=predicted_extra_bits(epsilon, n),
        predicted_realized_bits=predicted_extra_bits(realized, n),
    )


def write_redundancy_csv(path, reports: Sequence[RedundancyReport]) -> None:
    _write_csv(path, reports, RedundancyReport)


# -- expansion under a width-changing swap -----------------------------------

@dataclass
class ExpansionReport:
    message: str
    original_width: Fraction
    naive_width: Fraction
    permuted_width: Fraction
    naive_ratio: Fraction
    permuted_ratio: Fraction
    original_bits: int
    naive_bits: int
    permuted_bits: int

    @property
    def extra_bits(self) -> int:
        return self.naive_bits - self.original_bits


def run_expansion_counterexample(
    message: str = DEMO_MESSAGE, freqs: Sequence[int] = DEMO_FREQS, swap=(0, 3)
) -> ExpansionReport:
    """Compare final-interval widths for a naive swap vs. a width-keeping one."""
    model = build_model(freqs)
    msg = letters_to_symbols(message)
    naive = naive_swap_model(model, *swap)
    perm = list(range(model.alphabet_size))
    perm[swap[0]], perm[swap[1]] = perm[swap[1]], perm[swap[0]]
    permuted = SymbolModel(model.freqs, tuple(perm))

    w0 = exact_encode(model, msg).width
    w1 = exact_encode(naive, msg).width
    w2 = exact_encode(permuted, msg).width
    return ExpansionReport(
        message=message,
        original_width=w0,
        naive_width=w1,
        permuted_width=w2,
        naive_ratio=w0 / w1,
        permuted_ratio=w0 / w2,
        original_bits=exact_width_bits(w0),
        naive_bits=exact_width_bits(w1),
        permuted_bits=exact_width_bits(w2),
    )


# -- avalanche ----------------------------------------------------------------

@dataclass
class AvalancheReport:
    trial: int
    flip_bit_position: int
    payload_bits: int
    first_corrupted_symbol_index: int  # == msg_len when nothing changed
    determined_prefix: int
    symbol_error_rate: float  # over symbols from the first corrupted one on
    msg_len: int

    @property
    def prefix_intact(self) -> bool:
        return self.first_corrupted_symbol_index >= self.determined_prefix


def determined_prefix(model: SymbolModel, data: bytes, nbits: int, k: int, message) -> int:
    """Number of leading symbols fixed by payload bits ``0 .. k-1`` alone.

    A symbol is decoded correctly iff the codeword, read as a binary fraction,
    lies in that symbol's coding interval.  Codewords sharing the first ``k``
    bits span a range whose ends are the all-zeros and all-ones
    continuations, so a symbol that decodes correctly from both ends decodes
    correctly for every continuation.
    """
    n = len(message)
    length = (nbits + 64 + 7) // 8 + 8
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    lo = np.zeros(length * 8, dtype=np.uint8)
    lo[:k] = bits[:k]
    hi = lo.copy()
    hi[k:(nbits + 64)] = 1
    agree = n
    for cont in (lo, hi):
        try:
            dec = decode_stream(model, np.packbits(cont).tobytes(), n, strict=False)
        except ForbiddenSymbolHit as exc:
            dec = exc.decoded + [-1] * (n - len(exc.decoded))
        d = first_difference(dec, message)
        agree = min(agree, n if d is None else d)
    return agree


def avalanche_trial(model: SymbolModel, msg_len: int, seed: int, trial: int, position=None):
    rng = trial_rng(seed, trial)
    msg = sample_message(model, msg_len, rng)
    data, nbits = encode_stream_bits(model, msg)
    if position is None:
        k = int(rng.integers(nbits))
    else:
        k = position % nbits
    dec = decode_stream(model, flip_bit(data, k), msg_len, strict=False)
    first = first_difference(dec, msg)
    first = msg_len if first is None else first
    return AvalancheReport(
        trial=trial,
        flip_bit_position=k,
        payload_bits=nbits,
        first_corrupted_symbol_index=first,
        determined_prefix=determined_prefix(model, data, nbits, k, msg),
        symbol_error_rate=symbol_error_rate(dec[first:], msg[first:]),
        msg_len=msg_len,
    )


def run_avalanche(
    model: SymbolModel, msg_len: int, trials: int, seed: int = 0, position: Optional[int] = None
) -> list[AvalancheReport]:
    """Single-bit flips in the compressed stream.

    ``position`` pins the flipped bit (negative values count back from the
    last emitted bit); by default it is uniform over the emitted bits.
    """
    return [avalanche_trial(model, msg_len, seed, t, position) for t in range(trials)]


def collision_error_rate(model: SymbolModel) -> float:
    """Mismatch rate between two independent draws from the source."""
    t = model.real_total
    return 1.0 - sum((f / t) ** 2 for f in model.freqs)


def write_avalanche_csv(path, reports: Sequence[AvalancheReport]) -> None:
    _write_csv(path, reports, AvalancheReport)


# -- decoding with the wrong permutation key ----------------------------------

@dataclass
class WrongKeyReport:
    trial: int
    msg_len: int
    symbol_error_rate: float
    first_error: int


def run_wrong_key(
    model: SymbolModel, msg_len: int, keys: int, seed: int = 0
) -> list[WrongKeyReport]:
    """Encode under one key, decode under independently drawn different keys."""
    out = []
    for t in range(keys):
        rng = trial_rng(seed, t)
        true_key = derive_permutation(rng.bytes(32), model.alphabet_size)
        wrong_key = true_key
        while wrong_key.derived_perm == true_key.derived_perm:
            wrong_key = derive_permutation(rng.bytes(32), model.alphabet_size)
        msg = sample_message(model, msg_len, rng)
        data, _ = encode_stream_bits(permute_model(model, true_key), msg)
        dec = decode_stream(permute_model(model, wrong_key), data, msg_len, strict=False)
        first = first_difference(dec, msg)
        out.append(
            WrongKeyReport(t, msg_len, symbol_error_rate(dec, msg), msg_len if first is None else first)
        )
    return out


# -- integrity of sealed files ------------------------------------------------

def zipf_model(alphabet: int = 256, exponent: float = 1.0) -> SymbolModel:
    weights = 1.0 / np.arange(1, alphabet + 1) ** exponent
    counts = np.round(weights / weights.sum() * (MAX_TOTAL - alphabet)).astype(int)
    return build_model(fit_frequencies(counts.tolist(), MAX_TOTAL - 64))


@dataclass
class IntegrityReport:
    relevant_flips: int
    detected: int
    irrelevant_flips: int
    irrelevant_detected: int
    clean_roundtrips: int
    clean_false_tampered: int
    payload_len: int
    cds_cap: int

    @property
    def detection_rate(self) -> float:
        return self.detected / self.relevant_flips if self.relevant_flips else 1.0


def run_integrity(
    flips: int = 1000,
    clean: int = 1000,
    payload_len: int = 64 * 1024,
    cds_cap: int = security.DEFAULT_CDS_CAP,
    seed: int = 0,
    files: int = 8,
    private_key=None,
) -> IntegrityReport:
    """Flip single payload bits of sealed files and verify after decoding.

    A flip counts towards the detection rate only if it changed at least one
    decoded symbol; flips that leave decoding untouched (zero padding after
    the termination bits) are tallied separately.
    """
    key = private_key or security.generate_signing_key()
    pub = key.public_key()
    model = zipf_model()

    corpus = []
    for f in range(files):
        rng = trial_rng(seed, 1_000_000 + f)
        payload = sample_message(model, payload_len, rng).astype(np.uint8).tobytes()
        blob = write_sealed(model, payload, private_key=key, cds_cap=cds_cap)
        sf = parse_sealed(blob)
        spans = [(off, len(c.payload)) for off, c in zip(sf.payload_offsets(), sf.cds)]
        corpus.append((payload, blob, spans))

    relevant = detected = irrelevant = irrelevant_detected = 0
    t = 0
    while relevant < flips:
        rng = trial_rng(seed, t)
        t += 1
        payload, blob, spans = corpus[int(rng.integers(len(corpus)))]
        off, size = spans[int(rng.integers(len(spans)))]
        bit = off * 8 + int(rng.integers(size * 8))
        res = open_sealed(flip_bit(blob, bit), public_key=pub)
        tampered = res.verdict is not security.Verdict.AUTHENTIC
        if res.payload != payload:
            relevant += 1
            detected += tampered
        else:
            irrelevant += 1
            irrelevant_detected += tampered

    false_tampered = 0
    for c in range(clean):
        rng = trial_rng(seed, 2_000_000 + c)
        payload = sample_message(model, payload_len, rng).astype(np.uint8).tobytes()
        blob = write_sealed(model, payload, private_key=key, cds_cap=cds_cap)
        res = open_sealed(blob, public_key=pub)
        if res.verdict is not security.Verdict.AUTHENTIC or res.payload != payload:
            false_tampered += 1

    return IntegrityReport(
        relevant_flips=relevant,
        detected=detected,
        irrelevant_flips=irrelevant,
        irrelevant_detected=irrelevant_detected,
        clean_roundtrips=clean,
        clean_false_tampered=false_tampered,
        payload_len=payload_len,
        cds_cap=cds_cap,
    )


# -- signing cost: tail gathering vs. whole stream ----------------------------

class _CountingHash:
    def __init__(self, name=security.HASH_ALG):
        self._h = hashlib.new(name)
        self.count = 0

    def update(self, data: bytes):
        self.count += len(data)
        self._h.update(data)

    def digest(self) -> bytes:
        return self._h.digest()


@dataclass
class CostRatioReport:
    cds_count: int
    mean_cds_bytes: float
    tail_bytes_hashed: int
    whole_bytes_hashed: int
    measured_ratio: float
    expected_ratio: float
    tail_seconds: float
    whole_seconds: float

    @property
    def time_ratio(self) -> float:
        return self.whole_seconds / self.tail_seconds if self.tail_seconds else math.inf


def run_cost_ratio(cds_sizes: Sequence[int], seed: int = 0, repeats: int = 20) -> CostRatioReport:
    """Bytes (and time) hashed when signing tails only vs. every CDS byte.

    The nonce is common to both schemes and left out of the byte counts.
    """
    rng = trial_rng(seed, 0)
    chunks = [rng.bytes(int(n)) for n in cds_sizes]

    def tail_digest():
        h = _CountingHash()
        for c in chunks:
            h.update(security.tail_of(c))
        h.digest()
        return h.count

    def whole_digest():
        h = _CountingHash()
        for c in chunks:
            h.update(c)
        h.digest()
        return h.count

    def timed(fn):
        start = time.perf_counter()
        for _ in range(repeats):
            count = fn()
        return count, (time.perf_counter() - start) / repeats

    tail_count, tail_s = timed(tail_digest)
    whole_count, whole_s = timed(whole_digest)
    mean = float(np.mean(cds_sizes)) if len(cds_sizes) else 0.0
    return CostRatioReport(
        cds_count=len(chunks),
        mean_cds_bytes=mean,
        tail_bytes_hashed=tail_count,
        whole_bytes_hashed=whole_count,
        measured_ratio=whole_count / tail_count if tail_count else math.inf,
        expected_ratio=mean / security.TAIL_BYTES,
        tail_seconds=tail_s,
        whole_seconds=whole_s,
    )


def reference_cost_ratios() -> dict[str, float]:
    """Speedup over whole-stream signing for the CDS sizes quoted for JPEG2000.

    Two mean CDS lengths circulate for the same image (12325 and 13759.5
    bits); both are reported.
    """
    return {
        "max_code_block_4096B": 4096 / security.TAIL_BYTES,
        "mean_12325_bits": 12325 / 8 / security.TAIL_BYTES,
        "mean_13759.5_bits": 13759.5 / 8 / security.TAIL_BYTES,
    }
