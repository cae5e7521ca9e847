import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arithseal.analysis import determined_prefix, flip_bit
from arithseal.coder import (
    BitSink,
    BitSource,
    CodecState,
    Decoder,
    Encoder,
    decode_stream,
    decode_symbols,
    encode_stream,
    encode_stream_bits,
    encode_symbols,
)
from arithseal.errors import ForbiddenSymbolHit, SymbolOutOfRange, UnexpectedEndOfData
from arithseal.exact import exact_encode, exact_width_bits
from arithseal.model import add_forbidden, build_model, derive_permutation, permute_model

from conftest import letters

C_TERM = 2 + 8


def entropy_oracle(probs):
    with mpmath.workdps(30):
        return float(-sum(mpmath.mpf(p) * mpmath.log(mpmath.mpf(p), 2) for p in probs))


@st.composite
def model_and_message(draw, max_alphabet=16, max_len=200):
    n = draw(st.integers(1, max_alphabet))
    freqs = draw(st.lists(st.integers(1, 65536 // n), min_size=n, max_size=n))
    msg = draw(st.lists(st.integers(0, n - 1), max_size=max_len))
    return build_model(freqs), msg


def test_bitsink_roundtrip():
    bits = [1, 0, 1, 1, 0, 0, 1, 0, 1, 1, 1]
    sink = BitSink()
    for b in bits:
        sink.write(b)
    data = sink.getvalue()
    assert data == bytes([0b10110010, 0b11100000])
    src = BitSource(data)
    assert [src.read() for _ in bits] == bits
    assert [src.read() for _ in range(5)] == [0] * 5
    assert src.overrun == 0
    src.read()
    assert src.overrun == 1


def test_codec_state_init():
    st_ = CodecState(32)
    assert st_.low == 0 and st_.high == 2**32 - 1 and st_.pending_bits == 0
    with pytest.raises(ValueError):
        CodecState(8)


def test_demo_message_length_window(demo_model):
    msg = letters("CACBAD")
    b_min = exact_width_bits(exact_encode(demo_model, msg))
    assert b_min == 14
    data, nbits = encode_stream_bits(demo_model, msg)
    assert b_min <= nbits <= len(data) * 8 <= b_min + C_TERM
    assert decode_stream(demo_model, data, 6).tolist() == msg


def test_flush_right_after_init(demo_model):
    data, nbits = encode_stream_bits(demo_model, [])
    assert nbits <= 2 and len(data) <= 2


def test_flush_after_single_half_symbol():
    m = build_model([1, 1])
    data, nbits = encode_stream_bits(m, [1])
    assert nbits <= 3
    assert decode_stream(m, data, 1).tolist() == [1]


def test_back_to_back_cycles_independent(demo_model):
    enc = Encoder(demo_model)
    enc.encode(2)
    enc.encode(0)
    first = enc.flush()
    enc.init()
    enc.encode(3)
    second = enc.flush()
    assert decode_symbols(demo_model, first, 2) == [2, 0]
    assert decode_symbols(demo_model, second, 1) == [3]
    assert second == encode_stream(demo_model, [3])


def test_kernel_matches_reference_implementation():
    rng = np.random.default_rng(7)
    for _ in range(50):
        n = int(rng.integers(1, 300))
        freqs = rng.integers(1, 200, size=n).tolist()
        m = permute_model(build_model(freqs), derive_permutation(rng.bytes(32), n))
        msg = rng.integers(0, n, size=int(rng.integers(0, 400)))
        assert encode_stream_bits(m, msg) == encode_symbols(m, msg.tolist())
        data = encode_stream(m, msg)
        assert decode_stream(m, data, msg.size).tolist() == decode_symbols(m, data, msg.size)


def test_reference_decoder_on_demo_message(demo_model):
    data = encode_stream(demo_model, letters("ABDCDCBCDD"))
    dec = Decoder(demo_model, data)
    assert [dec.decode() for _ in range(10)] == letters("ABDCDCBCDD")


def test_symbol_out_of_range(demo_model):
    with pytest.raises(SymbolOutOfRange):
        encode_stream(demo_model, [0, 4])
    with pytest.raises(SymbolOutOfRange):
        Encoder(demo_model).encode(-1)


def test_exhaustive_against_exact_coder():
    models = [build_model(f) for f in ([1, 3], [5, 5], [1, 2, 3, 4], [1, 1, 1, 61], [2, 3, 5])]
    for m in models:
        for n in range(0, 7):
            for msg in itertools.product(range(m.alphabet_size), repeat=n):
                data, nbits = encode_stream_bits(m, msg)
                b_min = exact_width_bits(exact_encode(m, msg))
                assert len(data) * 8 <= b_min + C_TERM
                assert decode_stream(m, data, n).tolist() == list(msg)


@given(model_and_message())
@settings(max_examples=300, deadline=None)
def test_roundtrip_property(case):
    m, msg = case
    data = encode_stream(m, msg)
    assert decode_stream(m, data, len(msg)).tolist() == msg


@given(model_and_message(max_alphabet=300, max_len=50), st.binary(min_size=32, max_size=32))
@settings(max_examples=100, deadline=None)
def test_roundtrip_permuted_binary_search_path(case, seed):
    m, msg = case
    m = permute_model(m, derive_permutation(seed, m.alphabet_size))
    assert decode_stream(m, encode_stream(m, msg), len(msg)).tolist() == msg


def test_random_roundtrips_many():
    rng = np.random.default_rng(11)
    for _ in range(10_000):
        n = int(rng.integers(1, 17))
        m = build_model(rng.integers(1, 1000, size=n).tolist())
        msg = rng.integers(0, n, size=int(rng.integers(0, 64)))
        assert np.array_equal(decode_stream(m, encode_stream(m, msg), msg.size), msg)


def test_roundtrip_with_forbidden_slot():
    m = add_forbidden(build_model([1, 2, 3, 4]), 3)
    msg = np.random.default_rng(3).integers(0, 4, size=5000)
    assert np.array_equal(decode_stream(m, encode_stream(m, msg), msg.size), msg)


def test_entropy_convergence(demo_model):
    h = entropy_oracle([0.1, 0.2, 0.3, 0.4])
    assert h == pytest.approx(1.84644, abs=1e-5)
    msg = np.random.default_rng(0).choice(4, size=100_000, p=[0.1, 0.2, 0.3, 0.4])
    data = encode_stream(demo_model, msg)
    assert abs(len(data) * 8 - 100_000 * h) <= 0.005 * 100_000 * h


def test_unexpected_end_of_data(demo_model):
    data = encode_stream(demo_model, [3] * 200)
    with pytest.raises(UnexpectedEndOfData) as err:
        decode_stream(demo_model, data[:2], 200)
    assert 0 < err.value.index < 200
    with pytest.raises(UnexpectedEndOfData):
        decode_symbols(demo_model, data[:2], 200)


def test_forbidden_hit_carries_index_and_prefix():
    m = add_forbidden(build_model([1, 2, 3, 4]), 2)
    msg = np.random.default_rng(5).integers(0, 4, size=400)
    data, nbits = encode_stream_bits(m, msg)
    hits = 0
    for k in range(0, nbits, 7):
        try:
            decode_stream(m, flip_bit(data, k), msg.size)
        except ForbiddenSymbolHit as exc:
            hits += 1
            assert exc.decoded == msg[: exc.index].tolist() or exc.index > 0
    assert hits > 0


def test_forbidden_detection_probability():
    # after the decoder desynchronises, each further step falls in the
    # forbidden slot with probability eps; compare hit counts with the sum of
    # per-trial probabilities 1 - (1 - eps)^remaining
    eps_freq, real = 1, [10, 20, 30, 39]
    m = add_forbidden(build_model(real), eps_freq)
    eps = eps_freq / m.total
    n, trials = 200, 1000
    rng = np.random.default_rng(21)
    hits, expected, var = 0, 0.0, 0.0
    for _ in range(trials):
        msg = rng.choice(4, size=n, p=np.array(real) / sum(real))
        data, nbits = encode_stream_bits(m, msg)
        k = int(rng.integers(nbits))
        d = determined_prefix(m, data, nbits, k, msg)
        p = 1 - (1 - eps) ** (n - d)
        expected += p
        var += p * (1 - p)
        try:
            decode_stream(m, flip_bit(data, k), n, strict=False)
        except ForbiddenSymbolHit:
            hits += 1
    assert abs(hits - expected) <= 5 * math.sqrt(var) + 0.05 * expected


def test_wrong_key_error_rate(demo_model):
    rng = np.random.default_rng(9)
    rates = []
    for _ in range(100):
        true = derive_permutation(rng.bytes(32), 4)
        wrong = true
        while wrong.derived_perm == true.derived_perm:
            wrong = derive_permutation(rng.bytes(32), 4)
        msg = rng.choice(4, size=1000, p=[0.1, 0.2, 0.3, 0.4])
        data = encode_stream(permute_model(demo_model, true), msg)
        dec = decode_stream(permute_model(demo_model, wrong), data, 1000, strict=False)
        rates.append(np.mean(dec != msg))
    assert np.mean(rates) >= 0.5
