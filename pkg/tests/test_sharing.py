import random
import threading

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from caesar.protocols.transport import in_proc_pair
from caesar.ring import RingParams, ScaleMismatch, encode_array
from caesar.sharing import (
    Dealer,
    Share,
    ShareError,
    TripleExhausted,
    TripleReuse,
    add_public,
    add_shares,
    beaver_mul,
    load_triples,
    reconstruct,
    save_triples,
    scale_shares,
    share,
    sub_shares,
    truncate_share,
)

R = RingParams(64)


@given(st.lists(st.integers(-(2**62), 2**62), min_size=1, max_size=20), st.integers(0, 2**32))
def test_share_reconstruct_property(xs, seed):
    x = R.reduce(np.array(xs, dtype=object))
    s1, s2 = share(x, random.Random(seed), 0, R)
    assert np.array_equal(reconstruct(s1, s2), x)
    assert np.array_equal(reconstruct(s2, s1), x)


def test_second_share_is_uniform_looking():
    # top byte of s2 over many splits of the same value: chi-square near 255 dof
    rng = random.Random(2)
    x = R.reduce(np.zeros(20000, dtype=np.int64))
    _, s2 = share(x, rng, 0, R)
    counts = np.bincount((s2.value >> np.uint64(56)).astype(np.int64), minlength=256)
    exp = 20000 / 256
    chi2 = float(((counts - exp) ** 2 / exp).sum())
    assert chi2 < 360


def test_linear_ops():
    rng = random.Random(1)
    a = encode_array([1.5, -2.0], 4)
    b = encode_array([0.25, 3.0], 4)
    a1, a2 = share(a, rng, 4)
    b1, b2 = share(b, rng, 4)
    assert R.signed_ints(reconstruct(add_shares(a1, b1), add_shares(a2, b2))) == [17500, 10000]
    assert R.signed_ints(reconstruct(sub_shares(a1, b1), sub_shares(a2, b2))) == [12500, -50000]
    s = scale_shares(a1, 3), scale_shares(a2, 3)
    assert R.signed_ints(reconstruct(*s)) == [45000, -60000]
    p = add_public(a1, encode_array([1, 1], 4)), add_public(a2, encode_array([1, 1], 4))
    assert R.signed_ints(reconstruct(*p)) == [25000, -10000]
    t = truncate_share(a1, 2), truncate_share(a2, 2)
    assert all(abs(u - v) <= 1 for u, v in zip(R.signed_ints(reconstruct(*t)), [150, -200]))


def test_share_errors():
    a1, a2 = share(R.zeros(2), random.Random(0), 4)
    with pytest.raises(ShareError):
        reconstruct(a1, a1)
    with pytest.raises(ShareError):
        add_shares(a1, a2)
    with pytest.raises(ScaleMismatch):
        reconstruct(a1, a2.with_value(a2.value, 2))
    with pytest.raises(ShareError):
        Share(R.zeros(1), 3)


def _run_beaver(x, y, kind, dealer, k=0):
    rng = random.Random(9)
    x1, x2 = share(x, rng, 4)
    y1, y2 = share(y, rng, 4)
    ea, eb = in_proc_pair()
    t1 = dealer.party_triple(k, 1, kind, x.shape, y.shape if kind == "matmul" else None)
    t2 = dealer.party_triple(k, 2, kind, x.shape, y.shape if kind == "matmul" else None)
    out = {}
    th = threading.Thread(target=lambda: out.__setitem__(2, beaver_mul(x2, y2, t2, eb)))
    th.start()
    out[1] = beaver_mul(x1, y1, t1, ea)
    th.join()
    return reconstruct(out[1], out[2]), (t1, t2)


def test_beaver_elementwise_and_matmul():
    dealer = Dealer(3, R)
    rng = np.random.default_rng(0)
    x = R.reduce(rng.integers(-1000, 1000, 6))
    y = R.reduce(rng.integers(-1000, 1000, 6))
    z, _ = _run_beaver(x, y, "mul", dealer)
    assert np.array_equal(z, R.mul(x, y))
    X = R.reduce(rng.integers(-1000, 1000, (4, 3)))
    Y = R.reduce(rng.integers(-1000, 1000, (3, 2)))
    Z, _ = _run_beaver(X, Y, "matmul", dealer, k=1)
    assert np.array_equal(Z, R.matmul(X, Y))


def test_triple_reuse_and_exhaustion():
    dealer = Dealer(1, R, limit=1)
    x = R.reduce(np.arange(3))
    _, (t1, t2) = _run_beaver(x, x, "mul", dealer)
    assert t1.used and t2.used
    with pytest.raises(TripleReuse):
        t1.consume()
    with pytest.raises(TripleExhausted):
        dealer.triple(1, "mul", (3,))


def test_dealer_stream_is_seeded():
    a = Dealer(5, R).triple(4, "mul", (3,))
    b = Dealer(5, R).triple(4, "mul", (3,))
    assert np.array_equal(a[0].u, b[0].u) and np.array_equal(a[1].w, b[1].w)
    t1, t2 = a
    assert np.array_equal(R.add(t1.w, t2.w), R.mul(R.add(t1.u, t2.u), R.add(t1.v, t2.v)))


def test_triple_file_roundtrip(tmp_path):
    dealer = Dealer(0, R)
    ts = [dealer.party_triple(0, 1, "mul", (2,)), dealer.party_triple(1, 1, "matmul", (2, 3), (3, 1))]
    save_triples(tmp_path / "t.bin", ts)
    back = load_triples(tmp_path / "t.bin")
    assert [t.kind for t in back] == ["mul", "matmul"]
    for a, b in zip(ts, back):
        assert a.tid == b.tid and np.array_equal(a.w, b.w) and np.array_equal(a.v, b.v)
