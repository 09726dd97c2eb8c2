"""Secret sharing of encrypted values and secure sparse matrix multiplication.

Both sub-protocols are written as a pair of functions, one per side, that
talk over an :class:`~caesar.protocols.transport.Endpoint`.

Ring switch.  The holder of ``[[Z]]`` (encrypted under the *peer's* key)
samples ``r`` uniform in ``[0, 2^mask_bits)`` with
``mask_bits = max(bound_bits, l + log2(divisor)) + sigma`` and sends the
rerandomised ``[[Z + r]]``.  The key owner decrypts ``D = Z + r`` and keeps
``floor(D / divisor) mod 2^l``; the holder keeps ``-floor(r / divisor) mod
2^l``.  With ``divisor = 1`` the shares reconstruct to ``Z mod 2^l``
exactly, which is what subtracting a ring-valued share inside Z_psi cannot
guarantee because psi is not a multiple of 2^l.  With a power-of-ten divisor
the same message also rescales: the shares reconstruct to
``floor(Z / divisor)`` or one more.  Plaintexts are embedded signed, so
``Z`` is the true integer as long as ``|Z| < 2^bound_bits``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..he.core import HEParams, KeyMismatch, PlaintextRangeError, PublicKey
from ..he.matrix import EncryptedMatrix, WorkerPool, ciphertext_from_bytes, ciphertext_to_bytes, encrypt_matrix
from ..ring import RingParams
from ..sparse import OpCounter, SparseMatrix, accumulation_bits, spmm_encrypted, vec_spmm_encrypted
from .transport import Endpoint, ProtocolError, Tag

DEFAULT_SIGMA = 40


class MagnitudeBoundError(PlaintextRangeError):
    """Encrypted values may be too large for the plaintext space."""


@dataclass(frozen=True)
class ProtocolParams:
    ring: RingParams = field(default_factory=RingParams)
    he: HEParams = field(default_factory=HEParams)
    sigma: int = DEFAULT_SIGMA

    def __post_init__(self):
        if not 0 < self.sigma <= 128:
            raise ValueError("sigma must be in (0, 128]")


def mask_bits(params: ProtocolParams, bound_bits: int, divisor: int = 1) -> int:
    return max(bound_bits, params.ring.l + math.ceil(math.log2(divisor))) + params.sigma


def check_headroom(pk: PublicKey, params: ProtocolParams, bound_bits: int, divisor: int = 1) -> int:
    bits = mask_bits(params, bound_bits, divisor)
    if bits + 2 > pk.plaintext_bits:
        raise MagnitudeBoundError(
            f"masked values need {bits + 2} bits but the plaintext space of {pk.owner}'s key offers {pk.plaintext_bits}"
        )
    return bits


def product_bound_bits(x_bits: int, y_bits: int, acc_bits: int) -> int:
    """log2 bound on a sum of ``2^acc_bits`` products of ``x_bits``- and ``y_bits``-bit integers."""
    return x_bits + y_bits + acc_bits


# -- ciphertext messages -----------------------------------------------------------


def send_ciphertexts(ep: Endpoint, pk: PublicKey, values: list, tag: Tag = Tag.CIPHERTEXT, step: str = "") -> None:
    ep.send(tag, ciphertext_to_bytes(pk, values), step)


def recv_ciphertexts(ep: Endpoint, pk: PublicKey, count: int, tag: Tag = Tag.CIPHERTEXT, step: str = "") -> list:
    raw = ep.recv(tag, step)
    values = ciphertext_from_bytes(pk, raw)
    if len(values) != count:
        raise ProtocolError(f"step {step!r}: expected {count} ciphertexts, got {len(values)}")
    for c in values:
        if not 0 < c < pk.modulus:
            raise ProtocolError(f"step {step!r}: ciphertext outside the group of {pk.owner}'s key")
    return values


def encrypt_and_send(ep: Endpoint, pk: PublicKey, ints: list[int], rng, pool: WorkerPool | None = None, step: str = "", scale: int = 0) -> None:
    em = encrypt_matrix(pk, [ints], rng, pool, scale=scale)
    send_ciphertexts(ep, pk, em.values, Tag.CIPHERTEXT, step)


# -- secret sharing in the encrypted field -------------------------------------------


def sshef_holder(
    ep: Endpoint,
    EZ: EncryptedMatrix,
    params: ProtocolParams,
    rng,
    bound_bits: int,
    divisor: int = 1,
    pool: WorkerPool | None = None,
    step: str = "sshef",
) -> np.ndarray:
    """Holder side: mask, rerandomise and send ``[[Z]]``; return this party's share."""
    pk = EZ.pk
    bits = check_headroom(pk, params, bound_bits, divisor)
    ring = params.ring
    rs = [rng.getrandbits(bits) for _ in range(EZ.size)]
    masked = [pk.raw_add_plain(c, r) for c, r in zip(EZ.values, rs)]
    masked = (pool or WorkerPool(1)).rerandomize(pk, masked, rng)
    send_ciphertexts(ep, pk, masked, Tag.MASKED_CIPHERTEXT, step)
    mine = ring.reduce(np.array([-(r // divisor) for r in rs], dtype=object))
    return mine.reshape(EZ.shape)


def sshef_decryptor(
    ep: Endpoint,
    keypair,
    shape: tuple[int, int],
    params: ProtocolParams,
    divisor: int = 1,
    step: str = "sshef",
) -> np.ndarray:
    """Key-owner side: receive ``[[Z + r]]``, decrypt and keep ``floor(D / divisor)``."""
    pk, sk = keypair.pk, keypair.sk
    count = shape[0] * shape[1]
    values = recv_ciphertexts(ep, pk, count, Tag.MASKED_CIPHERTEXT, step)
    ds = [sk.centre(int(sk.raw_decrypt(c))) // divisor for c in values]
    return params.ring.reduce(np.array(ds, dtype=object)).reshape(shape)


# -- secure sparse matrix multiplication ------------------------------------------------


def ssmm_dense_side(
    ep: Endpoint,
    keypair,
    Y: np.ndarray,
    out_shape: tuple[int, int],
    params: ProtocolParams,
    rng,
    pool: WorkerPool | None = None,
    step: str = "ssmm",
    divisor: int = 1,
) -> np.ndarray:
    """Party holding the dense ``Y``: send ``[[Y]]`` under its own key, then
    take the decryptor role of the ring switch.  Returns ``Z_2``."""
    ints = params.ring.signed_ints(Y)
    encrypt_and_send(ep, keypair.pk, ints, rng, pool, step + ":enc")
    return sshef_decryptor(ep, keypair, out_shape, params, divisor, step + ":share")


def ssmm_sparse_side(
    ep: Endpoint,
    peer_pk: PublicKey,
    X: SparseMatrix,
    y_shape: tuple[int, int],
    params: ProtocolParams,
    rng,
    side: str = "right",
    y_bits: int | None = None,
    pool: WorkerPool | None = None,
    counter: OpCounter | None = None,
    step: str = "ssmm",
    divisor: int = 1,
) -> np.ndarray:
    """Party holding the sparse ``X``: receive ``[[Y]]``, compute the product
    homomorphically and share it.  Returns ``Z_1``.

    ``side="right"`` computes ``X @ Y`` (Y is ``X.cols x m``); ``side="left"``
    computes ``Y^T @ X`` for a vector Y of length ``X.rows``.
    ``y_bits`` bounds ``|Y|`` (default: any signed ring element).
    """
    if y_bits is None:
        y_bits = params.ring.l - 1
    count = y_shape[0] * y_shape[1]
    values = recv_ciphertexts(ep, peer_pk, count, Tag.CIPHERTEXT, step + ":enc")
    if side == "right":
        if y_shape[0] != X.cols:
            raise ProtocolError(f"[[Y]] has {y_shape[0]} rows, X has {X.cols} columns")
        EY = EncryptedMatrix(y_shape[0], y_shape[1], values, peer_pk)
        EZ = spmm_encrypted(X, EY, counter)
        acc = accumulation_bits(X, axis=1)
    elif side == "left":
        if count != X.rows:
            raise ProtocolError(f"[[y]] has {count} entries, X has {X.rows} rows")
        EZ = vec_spmm_encrypted(EncryptedMatrix(1, count, values, peer_pk), X, counter)
        acc = accumulation_bits(X, axis=0)
    else:
        raise ValueError("side must be 'right' or 'left'")
    bound = product_bound_bits(X.max_abs_bits(), y_bits, acc)
    return sshef_holder(ep, EZ, params, rng, bound, divisor, pool, step + ":share")


def check_key_owner(EZ: EncryptedMatrix, pk: PublicKey) -> None:
    if EZ.pk != pk:
        raise KeyMismatch(f"expected a matrix under {pk.owner}'s key, got {EZ.pk.owner}'s")
