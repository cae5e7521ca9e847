import itertools
import math
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from arithseal.errors import (
    EmptyAlphabet,
    FrequencyOverflow,
    KeySizeMismatch,
    SlotOutOfRange,
    ZeroFrequency,
)
from arithseal.exact import exact_encode
from arithseal.model import (
    MAX_TOTAL,
    SymbolModel,
    add_forbidden,
    build_model,
    derive_permutation,
    fit_frequencies,
    naive_swap_model,
    permute_model,
)

from conftest import letters

SEED = bytes(range(32))


def test_build_model_demo_probabilities():
    m = build_model([1, 2, 3, 4])
    assert m.cum == (0, 1, 3, 6)
    assert m.total == 10
    assert m.forbidden_freq == 0


@pytest.mark.parametrize(
    "freqs, cum, total", [([1], (0,), 1), ([5, 5], (0, 5), 10)]
)
def test_build_model_trivial(freqs, cum, total):
    m = build_model(freqs)
    assert m.cum == cum and m.total == total


@pytest.mark.parametrize(
    "freqs, exc",
    [([], EmptyAlphabet), ([1, 0, 2], ZeroFrequency), ([MAX_TOTAL, 1], FrequencyOverflow)],
)
def test_build_model_errors(freqs, exc):
    with pytest.raises(exc):
        build_model(freqs)


def test_max_total_is_accepted():
    assert build_model([MAX_TOTAL // 2, MAX_TOTAL // 2]).total == MAX_TOTAL


def test_swap_permutation_keeps_final_width(demo_model):
    # slots become D, B, C, A with widths .4 .2 .3 .1
    permuted = SymbolModel(demo_model.freqs, (3, 1, 2, 0))
    assert [permuted.slot_width(k) for k in range(4)] == [4, 2, 3, 1]
    msg = letters("ABDCDCBCDD")
    a = exact_encode(demo_model, msg)
    b = exact_encode(permuted, msg)
    assert a.width == b.width
    assert b.width * 10**10 == 27648
    assert a.low != b.low


def test_identity_permutation_is_noop(demo_model):
    from arithseal.model import PermutationKey

    key = PermutationKey(SEED, (0, 1, 2, 3))
    assert permute_model(demo_model, key) == demo_model


def test_permute_model_key_size_mismatch(demo_model):
    with pytest.raises(KeySizeMismatch):
        permute_model(demo_model, derive_permutation(SEED, 5))


@given(
    freqs=st.lists(st.integers(1, 500), min_size=1, max_size=16),
    seed=st.binary(min_size=32, max_size=32),
)
def test_permutation_preserves_width_multiset(freqs, seed):
    m = build_model(freqs)
    p = permute_model(m, derive_permutation(seed, len(freqs)))
    assert sorted(p.slot_width(k) for k in range(len(freqs))) == sorted(freqs)
    assert p.freqs == m.freqs and p.total == m.total


def test_naive_swap_counterexample(demo_model):
    swapped = naive_swap_model(demo_model, 0, 3)
    assert swapped.freqs == (4, 2, 3, 1)
    msg = letters("ABDCDCBCDD")
    w0 = exact_encode(demo_model, msg).width
    w1 = exact_encode(swapped, msg).width
    assert w1 * 10**10 == 432  # 0.00432e-5
    assert w0 / w1 == 64


def test_naive_swap_equal_frequencies_unchanged():
    m = build_model([3, 5, 3])
    s = naive_swap_model(m, 0, 2)
    for msg in itertools.product(range(3), repeat=4):
        assert exact_encode(m, msg).width == exact_encode(s, msg).width


def test_naive_swap_commuting_product(demo_model):
    s = naive_swap_model(demo_model, 1, 2)
    assert exact_encode(s, letters("BC")).width == exact_encode(demo_model, letters("BC")).width


def test_naive_swap_out_of_range(demo_model):
    with pytest.raises(SlotOutOfRange):
        naive_swap_model(demo_model, 0, 4)


def test_add_forbidden_near_mq_minimum():
    real_total = MAX_TOTAL - 2
    target = 0.000023 / 0.75
    ff = round(target * real_total / (1 - target))
    m = add_forbidden(build_model([real_total // 2, real_total - real_total // 2]), ff)
    assert ff == 2
    assert float(m.epsilon) == pytest.approx(3.05e-5, rel=1e-3)
    # real-symbol counts untouched, probabilities shrink by total ratio
    assert m.freqs == (real_total // 2, real_total - real_total // 2)
    assert m.slot_bounds[-1] == MAX_TOTAL and m.slot_bounds[-2] == real_total


def test_add_forbidden_zero_is_noop(demo_model):
    assert add_forbidden(demo_model, 0) == demo_model


def test_add_forbidden_overflow():
    with pytest.raises(FrequencyOverflow):
        add_forbidden(build_model([MAX_TOTAL - 1]), 2)


def test_forbidden_slot_stays_last_under_permutation(demo_model):
    g = add_forbidden(demo_model, 5)
    p = permute_model(g, derive_permutation(SEED, 4))
    assert p.slot_bounds[-1] == 15 and p.slot_bounds[-2] == 10


def test_derive_permutation_deterministic():
    a = derive_permutation(SEED, 4)
    b = derive_permutation(SEED, 4)
    assert a == b
    assert derive_permutation(SEED, 1).derived_perm == (0,)


@pytest.mark.parametrize("n", range(1, 17))
def test_derive_permutation_is_bijection(n):
    for i in range(20):
        key = derive_permutation(bytes([i]) * 32, n)
        assert sorted(key.derived_perm) == list(range(n))
        inv = key.inverse()
        assert all(inv[key.derived_perm[j]] == j for j in range(n))


def test_derive_permutation_uniform_over_24():
    # chi-square style check: every ordering of 4 within 5 sigma of 1/24
    trials = 10_000
    counts = Counter(
        derive_permutation(i.to_bytes(32, "big"), 4).derived_perm for i in range(trials)
    )
    assert len(counts) == 24
    p = 1 / 24
    sigma = math.sqrt(trials * p * (1 - p))
    for c in counts.values():
        assert abs(c - trials * p) <= 5 * sigma
    chi2 = sum((c - trials * p) ** 2 / (trials * p) for c in counts.values())
    # 23 degrees of freedom; 0.999 quantile is about 49.7
    assert chi2 < 49.7


def test_derive_permutation_rejects_short_seed():
    with pytest.raises(KeySizeMismatch):
        derive_permutation(b"short", 4)


@given(st.lists(st.integers(0, 10**6), min_size=1, max_size=300))
@settings(max_examples=200)
def test_fit_frequencies_bounds(counts):
    freqs = fit_frequencies(counts)
    assert len(freqs) == len(counts)
    assert min(freqs) >= 1
    assert sum(freqs) <= MAX_TOTAL
