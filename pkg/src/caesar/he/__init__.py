"""Additively homomorphic encryption: Okamoto-Uchiyama (default) and Paillier."""

from __future__ import annotations

from .core import (
    Ciphertext,
    HEError,
    HEParams,
    KeyMismatch,
    KeyPair,
    ParameterError,
    PlaintextRangeError,
    PrivateKey,
    PublicKey,
    Scheme,
    op1_add_plain,
    op2_add_ct,
    op3_mul_plain,
    system_rng,
)
from .matrix import EncryptedMatrix, WorkerPool, encrypt_matrix
from . import ou, paillier


def keygen(params: HEParams, rng=None, owner: str = "") -> KeyPair:
    """Generate a key pair; deterministic when ``rng`` is a seeded ``random.Random``."""
    rng = rng or system_rng()
    if params.scheme is Scheme.OU:
        return ou.keygen(params, rng, owner)
    return paillier.keygen(params, rng, owner)


def encrypt(pk: PublicKey, m: int, rng=None) -> Ciphertext:
    return pk.encrypt(m, rng)


def decrypt(sk: PrivateKey, ct: Ciphertext) -> int:
    return sk.decrypt(ct)


__all__ = [
    "Ciphertext",
    "EncryptedMatrix",
    "HEError",
    "HEParams",
    "KeyMismatch",
    "KeyPair",
    "ParameterError",
    "PlaintextRangeError",
    "PrivateKey",
    "PublicKey",
    "Scheme",
    "WorkerPool",
    "decrypt",
    "encrypt",
    "encrypt_matrix",
    "keygen",
    "op1_add_plain",
    "op2_add_ct",
    "op3_mul_plain",
]
