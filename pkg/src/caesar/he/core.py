"""Scheme-independent pieces of the additive HE layer."""

from __future__ import annotations

import enum
import hashlib
import secrets
from dataclasses import dataclass

import gmpy2

powmod = gmpy2.powmod
mpz = gmpy2.mpz

SUPPORTED_KEY_BITS = (1024, 2048, 3072)
MR_ROUNDS = 64


class HEError(Exception):
    pass


class KeyMismatch(HEError):
    pass


class PlaintextRangeError(HEError):
    pass


class ParameterError(HEError):
    pass


class Scheme(enum.Enum):
    OU = 1
    PAILLIER = 2

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, Scheme):
            return value
        key = str(value).strip().upper()
        if key in ("OU", "OKAMOTO-UCHIYAMA", "OKAMOTO_UCHIYAMA"):
            return cls.OU
        if key == "PAILLIER":
            return cls.PAILLIER
        raise ParameterError(f"unknown HE scheme {value!r}")


@dataclass(frozen=True)
class HEParams:
    scheme: Scheme = Scheme.OU
    key_bits: int = 2048

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if self.key_bits not in SUPPORTED_KEY_BITS:
            raise ParameterError(f"key_bits must be one of {SUPPORTED_KEY_BITS}, got {self.key_bits}")


def system_rng():
    """OS-backed randomness with the ``random.Random`` interface."""
    return secrets.SystemRandom()


def random_prime(bits: int, rng) -> gmpy2.mpz:
    """A random prime with exactly ``bits`` bits (top two bits set)."""
    while True:
        cand = mpz(rng.getrandbits(bits)) | (mpz(3) << (bits - 2)) | 1
        p = gmpy2.next_prime(cand - 2)
        if p.bit_length() == bits and gmpy2.is_prime(p, MR_ROUNDS):
            return p


def random_unit(n, rng) -> gmpy2.mpz:
    """Uniform element of Z_n^* (rejection on the negligible non-units)."""
    while True:
        r = mpz(rng.randrange(1, int(n)))
        if gmpy2.gcd(r, n) == 1:
            return r


class PublicKey:
    """Common surface of OU and Paillier public keys.

    Subclasses define ``modulus`` (the ciphertext group modulus),
    ``plaintext_bits`` (a public lower bound on log2 of the plaintext
    modulus) and the raw integer operations.
    """

    scheme: Scheme
    owner: str
    modulus: gmpy2.mpz

    @property
    def key_bits(self) -> int:
        raise NotImplementedError

    @property
    def ct_bytes(self) -> int:
        return (int(self.modulus).bit_length() + 7) // 8

    @property
    def plaintext_bits(self) -> int:
        raise NotImplementedError

    @property
    def encrypt_limit(self) -> int:
        """Exclusive upper bound accepted by :meth:`encrypt`."""
        raise NotImplementedError

    def fingerprint(self) -> str:
        return hashlib.sha256(repr(self._fields()).encode()).hexdigest()[:16]

    def _fields(self) -> tuple:
        raise NotImplementedError

    def __eq__(self, other):
        return type(self) is type(other) and self._fields() == other._fields()

    def __hash__(self):
        return hash(self._fields())

    # raw integer operations; subclasses override
    def random_r(self, rng):
        raise NotImplementedError

    def raw_encrypt(self, m: int, r) -> gmpy2.mpz:
        raise NotImplementedError

    def raw_add(self, c1, c2):
        return c1 * c2 % self.modulus

    def raw_add_plain(self, c, x: int):
        raise NotImplementedError

    def raw_mul_plain(self, c, x: int):
        return powmod(c, x, self.modulus)

    def raw_rerandomize(self, c, r):
        raise NotImplementedError

    # object-level API
    def encrypt(self, m: int, rng=None) -> "Ciphertext":
        m = int(m)
        if not 0 <= m < self.encrypt_limit:
            raise PlaintextRangeError(f"plaintext outside [0, {self.encrypt_limit})")
        rng = rng or system_rng()
        return Ciphertext(self.raw_encrypt(m, self.random_r(rng)), self)

    def encrypt_signed(self, v: int, rng=None) -> "Ciphertext":
        """Encrypt a possibly negative integer; decrypts (signed) back to ``v``."""
        v = int(v)
        if v.bit_length() >= self.plaintext_bits:
            raise PlaintextRangeError(f"|{v}| does not fit {self.plaintext_bits - 1} bits")
        rng = rng or system_rng()
        return Ciphertext(self.raw_encrypt(v, self.random_r(rng)), self)

    def rerandomize(self, ct: "Ciphertext", rng=None) -> "Ciphertext":
        self.check(ct)
        rng = rng or system_rng()
        return Ciphertext(self.raw_rerandomize(ct.value, self.random_r(rng)), self)

    def check(self, ct: "Ciphertext") -> None:
        if ct.pk is not self and ct.pk != self:
            raise KeyMismatch(f"ciphertext under {ct.pk.owner}'s key used with {self.owner}'s key")

    def zero_ciphertext(self):
        """Trivial (non-randomised) encryption of zero."""
        return mpz(1)


class PrivateKey:
    pk: PublicKey

    @property
    def plaintext_modulus(self) -> int:
        raise NotImplementedError

    def raw_decrypt(self, c) -> gmpy2.mpz:
        raise NotImplementedError

    def decrypt(self, ct: "Ciphertext") -> int:
        if ct.pk != self.pk:
            raise KeyMismatch(f"ciphertext under {ct.pk.owner}'s key, secret key is {self.pk.owner}'s")
        return int(self.raw_decrypt(ct.value))

    def decrypt_signed(self, ct: "Ciphertext") -> int:
        return self.centre(self.decrypt(ct))

    def centre(self, m: int) -> int:
        psi = self.plaintext_modulus
        return m - psi if m > psi // 2 else m


@dataclass(frozen=True)
class Ciphertext:
    value: gmpy2.mpz
    pk: PublicKey

    @property
    def key_owner(self) -> str:
        return self.pk.owner


@dataclass(frozen=True)
class KeyPair:
    pk: PublicKey
    sk: PrivateKey

    @property
    def owner(self) -> str:
        return self.pk.owner


def _same_key(a: Ciphertext, b: Ciphertext) -> PublicKey:
    if a.pk is not b.pk and a.pk != b.pk:
        raise KeyMismatch(f"cannot combine ciphertexts under {a.key_owner}'s and {b.key_owner}'s keys")
    return a.pk


def op1_add_plain(x: int, ct: Ciphertext) -> Ciphertext:
    """[[x + m]] from plaintext x and [[m]]."""
    return Ciphertext(ct.pk.raw_add_plain(ct.value, int(x)), ct.pk)


def op2_add_ct(ct1: Ciphertext, ct2: Ciphertext) -> Ciphertext:
    """[[m1 + m2]] from [[m1]] and [[m2]]."""
    pk = _same_key(ct1, ct2)
    return Ciphertext(pk.raw_add(ct1.value, ct2.value), pk)


def op3_mul_plain(x: int, ct: Ciphertext) -> Ciphertext:
    """[[x * m]] from plaintext x and [[m]]."""
    return Ciphertext(ct.pk.raw_mul_plain(ct.value, int(x)), ct.pk)
