"""Paillier encryption with ``g = n + 1`` and CRT decryption."""

from __future__ import annotations

import gmpy2

from .core import (
    HEParams,
    KeyPair,
    ParameterError,
    PrivateKey,
    PublicKey,
    Scheme,
    mpz,
    powmod,
    random_prime,
    random_unit,
)


class PaillierPublicKey(PublicKey):
    scheme = Scheme.PAILLIER

    def __init__(self, n, owner: str = ""):
        self.n = mpz(n)
        self.nsquare = self.n * self.n
        self.owner = owner
        self.modulus = self.nsquare

    def _fields(self):
        return (int(self.n),)

    @property
    def key_bits(self) -> int:
        return int(self.n).bit_length()

    @property
    def plaintext_bits(self) -> int:
        return int(self.n).bit_length() - 1

    @property
    def encrypt_limit(self) -> int:
        return int(self.n)

    def random_r(self, rng):
        return random_unit(self.n, rng)

    def raw_encrypt(self, m: int, r):
        # (n+1)^m = 1 + m*n mod n^2
        return (1 + (m % self.n) * self.n) * powmod(r, self.n, self.nsquare) % self.nsquare

    def raw_add_plain(self, c, x: int):
        return c * (1 + (x % self.n) * self.n) % self.nsquare

    def raw_rerandomize(self, c, r):
        return c * powmod(r, self.n, self.nsquare) % self.nsquare

    def __repr__(self):
        return f"<PaillierPublicKey owner={self.owner!r} bits={self.key_bits} {self.fingerprint()}>"


class PaillierPrivateKey(PrivateKey):
    def __init__(self, pk: PaillierPublicKey, p, q):
        if p == q:
            raise ParameterError("p and q must differ")
        self.pk = pk
        p, q = (mpz(p), mpz(q)) if p < q else (mpz(q), mpz(p))
        self.p, self.q = p, q
        self.psquare, self.qsquare = p * p, q * q
        self.p_inverse = gmpy2.invert(p, q)
        self.hp = self._h(p, self.psquare)
        self.hq = self._h(q, self.qsquare)

    def _h(self, x, xsquare):
        return gmpy2.invert((powmod(self.pk.n + 1, x - 1, xsquare) - 1) // x, x)

    @property
    def plaintext_modulus(self) -> int:
        return int(self.pk.n)

    def raw_decrypt(self, c):
        mp = (powmod(c, self.p - 1, self.psquare) - 1) // self.p * self.hp % self.p
        mq = (powmod(c, self.q - 1, self.qsquare) - 1) // self.q * self.hq % self.q
        u = (mq - mp) * self.p_inverse % self.q
        return mp + u * self.p


def keygen(params: HEParams, rng, owner: str = "") -> KeyPair:
    if params.scheme is not Scheme.PAILLIER:
        raise ParameterError("Paillier keygen called with non-Paillier parameters")
    half = params.key_bits // 2
    while True:
        p = random_prime(half, rng)
        q = random_prime(params.key_bits - half, rng)
        n = p * q
        if p != q and n.bit_length() == params.key_bits:
            break
    pk = PaillierPublicKey(n, owner)
    return KeyPair(pk, PaillierPrivateKey(pk, p, q))
