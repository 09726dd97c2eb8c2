import random
import time

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caesar.he import (
    HEParams,
    KeyMismatch,
    ParameterError,
    PlaintextRangeError,
    WorkerPool,
    encrypt_matrix,
    keygen,
    op1_add_plain,
    op2_add_ct,
    op3_mul_plain,
)
from caesar.he.bench import bench_he, rows_to_csv
from caesar.he.keyfile import KeyFileError, dumps_key, load_keypair, loads_key, save_keypair
from caesar.he.matrix import ciphertext_from_bytes, ciphertext_to_bytes


@pytest.fixture(params=["ou", "paillier"])
def kp(request, ou1024, paillier1024):
    return (ou1024 if request.param == "ou" else paillier1024)[0]


def test_keygen_deterministic_under_seed():
    a = keygen(HEParams("OU", 1024), random.Random(1))
    b = keygen(HEParams("OU", 1024), random.Random(1))
    assert a.pk == b.pk and a.sk.p == b.sk.p


def test_keygen_rejects_unsupported_size():
    with pytest.raises(ParameterError):
        HEParams("OU", 1000)


def test_roundtrip_boundaries(kp):
    psi = kp.sk.plaintext_modulus
    for m in (0, 1, 5, psi - 1):
        assert kp.sk.decrypt(kp.pk.encrypt(m)) == m


def test_fresh_ciphertexts(kp):
    rng = random.Random(3)
    cts = {int(kp.pk.encrypt(7, rng).value) for _ in range(100)}
    assert len(cts) == 100
    assert kp.sk.decrypt(kp.pk.encrypt(7, rng)) == 7


def test_operation_examples(kp):
    pk, sk = kp.pk, kp.sk
    psi = sk.plaintext_modulus
    assert sk.decrypt(op2_add_ct(pk.encrypt(3), pk.encrypt(4))) == 7
    assert sk.decrypt(op3_mul_plain(2, pk.encrypt(10))) == 20
    assert sk.decrypt(op1_add_plain(psi - 1, pk.encrypt(1))) == 0


def test_signed_embedding(kp):
    for v in (-1, -(2**200), 12345):
        assert kp.sk.decrypt_signed(kp.pk.encrypt_signed(v)) == v
    with pytest.raises(PlaintextRangeError):
        kp.pk.encrypt_signed(2 ** kp.pk.plaintext_bits)
    with pytest.raises(PlaintextRangeError):
        kp.pk.encrypt(-1)


def test_key_mismatch(ou1024):
    a, b = ou1024
    ca, cb = a.pk.encrypt(1), b.pk.encrypt(1)
    with pytest.raises(KeyMismatch):
        op2_add_ct(ca, cb)
    with pytest.raises(KeyMismatch):
        a.sk.decrypt(cb)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_homomorphism_property(ou1024, paillier1024, data):
    for kp in (ou1024[0], paillier1024[0]):
        psi = kp.sk.plaintext_modulus
        m1 = data.draw(st.integers(0, psi - 1))
        m2 = data.draw(st.integers(0, psi - 1))
        x = data.draw(st.integers(0, psi - 1))
        c1, c2 = kp.pk.encrypt(m1), kp.pk.encrypt(m2)
        assert kp.sk.decrypt(op2_add_ct(c1, c2)) == (m1 + m2) % psi
        assert kp.sk.decrypt(op3_mul_plain(x, c1)) == x * m1 % psi
        assert kp.sk.decrypt(op1_add_plain(x, c1)) == (x + m1) % psi


def test_homomorphism_bulk(ou1024, paillier1024):
    # 10^3 random triples per scheme
    rng = random.Random(5)
    for kp in (ou1024[0], paillier1024[0]):
        pk, sk = kp.pk, kp.sk
        psi = sk.plaintext_modulus
        for _ in range(1000):
            m1, m2, x = (rng.randrange(psi) for _ in range(3))
            c1 = pk.raw_encrypt(m1, pk.random_r(rng))
            c2 = pk.raw_encrypt(m2, pk.random_r(rng))
            assert sk.raw_decrypt(pk.raw_add(c1, c2)) == (m1 + m2) % psi
            assert sk.raw_decrypt(pk.raw_mul_plain(c1, x)) == x * m1 % psi
            assert sk.raw_decrypt(pk.raw_add_plain(c1, x)) == (x + m1) % psi


def test_ou_plaintext_space_2048(ou2048):
    pk, sk = ou2048[0].pk, ou2048[0].sk
    assert pk.key_bits == 2048
    assert sk.plaintext_modulus.bit_length() >= 680


@pytest.mark.xfail(strict=True, reason="OU's plaintext prime p is |n|/3 bits; ~683 bits at 2048 (see decisions)")
def test_ou_plaintext_modulus_floor_2048(ou2048):
    assert ou2048[0].sk.plaintext_modulus.bit_length() >= 1365


def test_encrypt_matrix_worker_independence(ou1024):
    kp = ou1024[0]
    M = [[1, -2], [3, 2**60]]
    one = encrypt_matrix(kp.pk, M, random.Random(1))
    with WorkerPool(8) as pool:
        eight = encrypt_matrix(kp.pk, M, random.Random(1), pool=pool)
    assert one.values == eight.values
    assert one.decrypt(kp.sk, signed=True) == eight.decrypt(kp.sk, signed=True) == M
    empty = encrypt_matrix(kp.pk, [], random.Random(1))
    assert empty.shape == (0, 0) and empty.values == []


def test_worker_pool_smoke_perf(ou1024):
    kp = ou1024[0]
    ms = list(range(1000))
    times = {}
    for w in (1, 8):
        with WorkerPool(w) as pool:
            pool.encrypt(kp.pk, ms[:16], random.Random(0))
            t0 = time.perf_counter()
            pool.encrypt(kp.pk, ms, random.Random(1))
            times[w] = time.perf_counter() - t0
    assert times[8] < 1.5 * times[1]


def test_ciphertext_bytes_roundtrip(ou1024):
    pk = ou1024[0].pk
    cts = [pk.encrypt(i).value for i in range(5)]
    raw = ciphertext_to_bytes(pk, cts)
    assert len(raw) == 5 * pk.ct_bytes
    assert ciphertext_from_bytes(pk, raw) == cts


def test_keyfile_roundtrip(tmp_path, ou1024, paillier1024):
    for kp in (ou1024[0], paillier1024[0]):
        raw = dumps_key(kp.pk)
        assert raw.startswith(b"CAESARK1")
        assert loads_key(raw) == kp.pk
        save_keypair(kp, tmp_path, f"k{kp.pk.scheme.name}")
        back = load_keypair(tmp_path / f"k{kp.pk.scheme.name}.key")
        assert back.pk == kp.pk and back.owner == kp.owner
        assert back.sk.decrypt(kp.pk.encrypt(42)) == 42
    with pytest.raises(KeyFileError):
        loads_key(b"NOTAKEY!")
    with pytest.raises(KeyFileError):
        loads_key(dumps_key(ou1024[0].pk)[:-3])


def test_bench_rows(ou1024):
    rows = bench_he(HEParams("OU", 1024), trials=100, keypair=ou1024[0])
    assert [r["op"] for r in rows] == ["Enc", "Dec", "OP1", "OP2", "OP3"]
    means = {r["op"]: r["mean_us"] for r in rows}
    assert means["OP2"] > 0
    assert means["Enc"] > max(means["OP1"], means["OP2"], means["OP3"])
    assert rows_to_csv(rows).splitlines()[0] == "scheme,op,mean_us,stddev_us"
    with pytest.raises(ValueError):
        bench_he(HEParams("OU", 1024), trials=10)
