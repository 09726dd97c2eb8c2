"""Okamoto-Uchiyama encryption.

``n = p^2 q`` with ``|p| = |q| = key_bits / 3``; plaintexts live in Z_p.
Since ``p`` is secret, the public key only advertises ``p_bits`` so callers
can keep plaintext magnitudes below ``2^(p_bits - 1)``.
"""

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
)


class OUPublicKey(PublicKey):
    scheme = Scheme.OU

    def __init__(self, n, g, h, p_bits: int, owner: str = ""):
        self.n = mpz(n)
        self.g = mpz(g)
        self.h = mpz(h)
        self.p_bits = int(p_bits)
        self.owner = owner
        self.modulus = self.n
        self._g_inv = gmpy2.invert(self.g, self.n)

    def _fields(self):
        return (int(self.n), int(self.g), int(self.h), self.p_bits)

    @property
    def key_bits(self) -> int:
        return int(self.n).bit_length()

    @property
    def plaintext_bits(self) -> int:
        return self.p_bits - 1

    @property
    def encrypt_limit(self) -> int:
        return int(self.n)

    def random_r(self, rng):
        return mpz(rng.randrange(1, int(self.n)))

    def _g_pow(self, m: int):
        if m >= 0:
            return powmod(self.g, m, self.n)
        return powmod(self._g_inv, -m, self.n)

    def raw_encrypt(self, m: int, r):
        return self._g_pow(m) * powmod(self.h, r, self.n) % self.n

    def raw_add_plain(self, c, x: int):
        return c * self._g_pow(x) % self.n

    def raw_rerandomize(self, c, r):
        return c * powmod(self.h, r, self.n) % self.n

    def __repr__(self):
        return f"<OUPublicKey owner={self.owner!r} bits={self.key_bits} {self.fingerprint()}>"


class OUPrivateKey(PrivateKey):
    def __init__(self, pk: OUPublicKey, p, q):
        self.pk = pk
        self.p = mpz(p)
        self.q = mpz(q)
        self.p2 = self.p * self.p
        gp = powmod(pk.g, self.p - 1, self.p2)
        self._gp_inv = gmpy2.invert((gp - 1) // self.p, self.p)

    @property
    def plaintext_modulus(self) -> int:
        return int(self.p)

    def raw_decrypt(self, c):
        a = powmod(c % self.p2, self.p - 1, self.p2)
        return (a - 1) // self.p * self._gp_inv % self.p


def keygen(params: HEParams, rng, owner: str = "") -> KeyPair:
    if params.scheme is not Scheme.OU:
        raise ParameterError("OU keygen called with non-OU parameters")
    bits = params.key_bits
    k = bits // 3
    while True:
        p = random_prime(k, rng)
        q = random_prime(bits - 2 * k, rng)
        if p == q:
            continue
        n = p * p * q
        if n.bit_length() != bits:
            continue
        p2 = p * p
        while True:
            g = mpz(rng.randrange(2, int(n)))
            if gmpy2.gcd(g, n) != 1:
                continue
            gp = powmod(g, p - 1, p2)
            # g must have order divisible by p modulo p^2
            if (gp - 1) // p % p != 0:
                break
        h = powmod(g, n, n)
        pk = OUPublicKey(n, g, h, k, owner)
        return KeyPair(pk, OUPrivateKey(pk, p, q))
