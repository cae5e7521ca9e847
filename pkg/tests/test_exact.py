import itertools
from fractions import Fraction

import mpmath
import pytest
from hypothesis import given
from hypothesis import strategies as st

from arithseal.errors import ForbiddenRegionHit, SymbolOutOfRange, ZeroWidth
from arithseal.exact import (
    RationalInterval,
    exact_decode,
    exact_encode,
    exact_width_bits,
    shortest_point,
)
from arithseal.model import add_forbidden, build_model

from conftest import letters, text

# the coded point 0.026189424 written out in binary, and the same with the
# eighth bit flipped
CODED_BITS = "000001101011010001011001101000100101"
FLIPPED_BITS = "000001111011010001011001101000100101"


def dyadic(bits):
    return Fraction(int(bits, 2), 2 ** len(bits))


def brute_width_bits(width):
    b = 0
    while Fraction(1, 2**b) > width:
        b += 1
    return b


def test_fig2_vector(demo_model):
    iv = exact_encode(demo_model, letters("CACBAD"))
    assert Fraction("0.31003") in iv
    assert text(exact_decode(demo_model, Fraction("0.31003"), 6)) == "CACBAD"


def test_final_width_is_exact(demo_model):
    iv = exact_encode(demo_model, letters("ABDCDCBCDD"))
    assert iv.width == Fraction(27648, 10**10)
    assert Fraction("0.026189424") in iv


def test_empty_message(demo_model):
    iv = exact_encode(demo_model, [])
    assert iv == RationalInterval(Fraction(0), Fraction(1))


def test_decode_correct_model(demo_model):
    assert text(exact_decode(demo_model, Fraction("0.026189424"), 10)) == "ABDCDCBCDD"


def test_decode_wrong_model_first_type_error():
    wrong = build_model([4, 2, 3, 1])
    out = text(exact_decode(wrong, Fraction("0.026189424"), 10))
    assert out == "AAABAAACAD"
    assert sum(a != b for a, b in zip(out, "ABDCDCBCDD")) == 7


def test_binary_expansion_matches_decimal_point():
    assert dyadic(CODED_BITS) in exact_encode(build_model([1, 2, 3, 4]), letters("ABDCDCBCDD"))
    assert float(dyadic(CODED_BITS)) == pytest.approx(0.026189424, abs=1e-9)
    assert sum(a != b for a, b in zip(CODED_BITS, FLIPPED_BITS)) == 1
    assert CODED_BITS[7] != FLIPPED_BITS[7]


def test_decode_bit_flip_second_type_error(demo_model):
    flipped = dyadic(FLIPPED_BITS)
    assert float(flipped) == pytest.approx(0.030095674635959, abs=1e-15)
    out = text(exact_decode(demo_model, flipped, 10))
    assert out == "ACAACADADC"
    assert out == text(exact_decode(demo_model, Fraction("0.030095674635959"), 10))
    assert sum(a != b for a, b in zip(out, "ABDCDCBCDD")) == 8


def test_encode_rejects_unknown_symbol(demo_model):
    with pytest.raises(SymbolOutOfRange):
        exact_encode(demo_model, [0, 4])


def test_decode_forbidden_region():
    g = add_forbidden(build_model([1, 1]), 2)  # slots: [0, .25) [.25, .5) forbidden [.5, 1)
    with pytest.raises(ForbiddenRegionHit) as err:
        exact_decode(g, Fraction(1, 5), 3)
    assert err.value.index == 1
    assert err.value.decoded == [0]


def test_width_bits_worked_values():
    assert exact_width_bits(Fraction(27648, 10**10)) == 19
    assert exact_width_bits(Fraction(1, 2)) == 1
    assert exact_width_bits(Fraction(1, 4)) == 2
    assert exact_width_bits(Fraction(1)) == 0


def test_width_bits_zero():
    with pytest.raises(ZeroWidth):
        exact_width_bits(Fraction(0))


@given(st.integers(1, 10**12), st.integers(1, 10**12))
def test_width_bits_against_oracles(a, b):
    w = Fraction(min(a, b), max(a, b))
    bits = exact_width_bits(w)
    assert bits == brute_width_bits(w)
    with mpmath.workdps(60):
        assert bits == int(mpmath.ceil(-mpmath.log(mpmath.mpf(w.numerator) / w.denominator, 2)))


def test_exhaustive_roundtrip_small_models():
    models = [build_model(f) for f in ([1], [1, 1], [1, 3], [2, 3, 5], [1, 2, 3, 4], [7, 1, 1, 1])]
    for m in models:
        for n in range(0, 5):
            for msg in itertools.product(range(m.alphabet_size), repeat=n):
                iv = exact_encode(m, msg)
                prod = Fraction(1)
                for s in msg:
                    prod *= Fraction(m.freqs[s], m.total)
                assert iv.width == prod
                for point in (iv.low, shortest_point(iv), (iv.low + iv.high) / 2):
                    assert tuple(exact_decode(m, point, n)) == msg


def test_monotone_nesting(demo_model):
    msg = letters("ABDCDCBCDDCBA")
    prev = exact_encode(demo_model, [])
    for i in range(1, len(msg) + 1):
        cur = exact_encode(demo_model, msg[:i])
        assert prev.low <= cur.low and cur.high <= prev.high
        prev = cur
