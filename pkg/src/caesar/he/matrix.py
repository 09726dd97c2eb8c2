"""Encrypted matrices and (parallel) elementwise encryption."""

from __future__ import annotations

import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import gmpy2

from .core import Ciphertext, KeyMismatch, PlaintextRangeError, PrivateKey, PublicKey


@dataclass
class EncryptedMatrix:
    """Row-major matrix of raw ciphertext integers under one public key."""

    rows: int
    cols: int
    values: list
    pk: PublicKey
    scale: int = 0

    def __post_init__(self):
        if len(self.values) != self.rows * self.cols:
            raise ValueError(f"{len(self.values)} ciphertexts for a {self.rows}x{self.cols} matrix")

    @property
    def key_owner(self) -> str:
        return self.pk.owner

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @property
    def size(self) -> int:
        return self.rows * self.cols

    def __getitem__(self, idx) -> Ciphertext:
        i, j = idx
        return Ciphertext(self.values[i * self.cols + j], self.pk)

    def check_key(self, pk: PublicKey) -> None:
        if self.pk is not pk and self.pk != pk:
            raise KeyMismatch(f"matrix is under {self.pk.owner}'s key, expected {pk.owner}'s")

    def decrypt(self, sk: PrivateKey, signed: bool = False) -> list[list[int]]:
        if sk.pk != self.pk:
            raise KeyMismatch("secret key does not match the matrix key")
        flat = [int(sk.raw_decrypt(c)) for c in self.values]
        if signed:
            flat = [sk.centre(m) for m in flat]
        return [flat[i * self.cols : (i + 1) * self.cols] for i in range(self.rows)]


def _encrypt_chunk(pk, ms, rs):
    return [pk.raw_encrypt(m, r) for m, r in zip(ms, rs)]


def _rerandomize_chunk(pk, cs, rs):
    return [pk.raw_rerandomize(c, r) for c, r in zip(cs, rs)]


class WorkerPool:
    """Process pool for encryption-heavy steps.

    Randomness is drawn in the calling process, so the ciphertexts produced
    do not depend on the worker count.
    """

    def __init__(self, workers: int = 1):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self._executor = None

    def _pool(self):
        if self._executor is None:
            ctx = multiprocessing.get_context("spawn")
            self._executor = ProcessPoolExecutor(self.workers, mp_context=ctx)
        return self._executor

    def _run(self, fn, pk, items, rs):
        if self.workers == 1 or len(items) < 2 * self.workers:
            return fn(pk, items, rs)
        step = -(-len(items) // self.workers)
        futures = [
            self._pool().submit(fn, pk, items[i : i + step], rs[i : i + step])
            for i in range(0, len(items), step)
        ]
        out = []
        for f in futures:
            out.extend(f.result())
        return out

    def encrypt(self, pk: PublicKey, plaintexts: list[int], rng) -> list:
        rs = [pk.random_r(rng) for _ in plaintexts]
        return self._run(_encrypt_chunk, pk, [int(m) for m in plaintexts], rs)

    def rerandomize(self, pk: PublicKey, ciphertexts: list, rng) -> list:
        rs = [pk.random_r(rng) for _ in ciphertexts]
        return self._run(_rerandomize_chunk, pk, list(ciphertexts), rs)

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


_SERIAL = WorkerPool(1)


def encrypt_matrix(pk: PublicKey, M, rng, pool: WorkerPool | None = None, scale: int = 0, signed: bool = True) -> EncryptedMatrix:
    """Elementwise encryption of a 2-D integer array (or list of lists).

    With ``signed`` (the default) entries may be negative and are embedded
    as ``m mod psi``; otherwise they must lie in ``[0, encrypt_limit)``.
    """
    rows = len(M)
    cols = len(M[0]) if rows else 0
    flat = [int(v) for row in M for v in row]
    for m in flat:
        if signed:
            if m.bit_length() >= pk.plaintext_bits:
                raise PlaintextRangeError(f"|{m}| exceeds {pk.plaintext_bits - 1} bits")
        elif not 0 <= m < pk.encrypt_limit:
            raise PlaintextRangeError(f"plaintext {m} outside [0, {pk.encrypt_limit})")
    values = (pool or _SERIAL).encrypt(pk, flat, rng)
    return EncryptedMatrix(rows, cols, values, pk, scale)


def ciphertext_to_bytes(pk: PublicKey, values: list) -> bytes:
    width = pk.ct_bytes
    return b"".join(int(c).to_bytes(width, "big") for c in values)


def ciphertext_from_bytes(pk: PublicKey, raw: bytes) -> list:
    width = pk.ct_bytes
    if len(raw) % width:
        raise ValueError("ciphertext payload is not a whole number of ciphertexts")
    return [gmpy2.mpz(int.from_bytes(raw[i : i + width], "big")) for i in range(0, len(raw), width)]
