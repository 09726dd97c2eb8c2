import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caesar.ring import (
    EncodingOverflow,
    FixedPointParams,
    RingElement,
    RingError,
    RingParams,
    ScaleMismatch,
    decode,
    decode_array,
    encode,
    encode_array,
    ring_add,
    ring_mul,
    ring_sub,
    to_signed,
    truncate,
)

R64 = RingParams(64)


def test_encode_examples():
    assert encode(1.5, 2).value == 150
    assert encode(-0.25, 2).value == 2**64 - 25
    assert encode(0, 6).value == 0
    assert encode(1.5, 2).scale == 2


def test_decode_examples():
    assert decode(RingElement(150, 2)) == 1.5
    assert decode(RingElement(2**64 - 25, 2)) == -0.25
    assert decode(encode(3.1415, 4)) == 3.1415


def test_encode_overflow():
    with pytest.raises(EncodingOverflow):
        encode(2.0**63, 0)
    with pytest.raises(EncodingOverflow):
        encode(1e15, 4)
    with pytest.raises(EncodingOverflow):
        encode(float("nan"), 4)


def test_ring_params_validation():
    with pytest.raises(RingError):
        RingParams(16)
    with pytest.raises(RingError):
        FixedPointParams(5).check(R64)
    FixedPointParams(4).check(R64)


def test_shares_cancel_to_zero():
    # additive shares of zero reconstruct exactly, whatever the split
    a = RingElement(3, 0)
    b = RingElement(2**64 - 3, 0)
    assert ring_add(a, b).value == 0


def test_ring_ops_examples():
    p = ring_mul(encode(2, 2), encode(3, 2))
    assert p.value == 60000 and p.scale == 4
    assert decode(p) == 6.0
    assert ring_sub(RingElement(0, 0), RingElement(1, 0)).value == 2**64 - 1


def test_scale_mismatch():
    with pytest.raises(ScaleMismatch):
        ring_add(encode(1, 2), encode(1, 3))
    with pytest.raises(RingError):
        ring_add(encode(1, 2, RingParams(32)), encode(1, 2))


def test_truncate_examples():
    assert truncate(RingElement(22500, 4), 4, 2).value == 225
    assert to_signed(truncate(encode(-6.0, 4), 4, 2)) == -600
    with pytest.raises(RingError):
        truncate(RingElement(1, 2), 2, 2)


@pytest.mark.parametrize("x", [6.0, -6.0])
def test_share_truncation_error_distribution(x):
    ring = R64
    rng = random.Random(11)
    v = encode(x, 4).value
    target = to_signed(encode(x, 2))
    counts = {}
    trials = 20000
    s2 = ring.random(trials, rng)
    s1 = ring.sub(np.full(trials, v, dtype=np.uint64), s2)
    rec = ring.signed(ring.add(ring.truncate(s1, 2), ring.truncate(s2, 2)))
    for err in (rec - target).tolist():
        counts[err] = counts.get(err, 0) + 1
    assert sum(counts.get(k, 0) for k in (-1, 0, 1)) >= 0.999 * trials


@pytest.mark.parametrize("l", [32, 64, 128])
def test_array_helpers_wrap(l):
    ring = RingParams(l)
    a = ring.reduce(np.array([ring.modulus - 1, 5], dtype=object))
    b = ring.reduce(np.array([1, -7], dtype=object))
    assert ring.signed_ints(ring.add(a, b)) == [0, -2]
    assert ring.signed_ints(ring.mul(a, b)) == [-1, -35]
    raw = ring.to_bytes(a)
    assert len(raw) == 2 * l // 8
    assert ring.signed_ints(ring.from_bytes(raw, (2,))) == ring.signed_ints(a)


def test_encode_array_snaps_float_noise():
    vals = encode_array([3.1415, -0.0001, 2.5], 4)
    assert R64.signed_ints(vals) == [31415, -1, 25000]
    assert decode_array(vals, 4).tolist() == [3.1415, -0.0001, 2.5]


decimals = st.decimals(min_value=-10**9, max_value=10**9, places=4, allow_nan=False, allow_infinity=False)


@given(decimals)
def test_roundtrip_property(x):
    assert decode(encode(x, 4)) == float(x)


@given(st.integers(-10**6, 10**6), st.integers(-10**6, 10**6))
def test_mul_property(a, b):
    # |a*b| * 10^(2c) well below 2^63 for these ranges at c=2
    ea, eb = encode(a / 100, 2), encode(b / 100, 2)
    assert to_signed(ring_mul(ea, eb)) == a * b


@settings(max_examples=200)
@given(st.integers(-(2**20), 2**20), st.integers(0, 2**64 - 1))
def test_truncation_property(x, r):
    ring = R64
    s2 = np.array([r], dtype=np.uint64)
    s1 = ring.sub(ring.reduce(np.array([x])), s2)
    rec = ring.signed(ring.add(ring.truncate(s1, 4), ring.truncate(s2, 4)))[0]
    err = int(rec) - x // 10**4
    # +-1 except for the rare wraparound of the split
    assert err in (-1, 0, 1) or abs(err) > 2**50
