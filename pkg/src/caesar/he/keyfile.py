"""Binary key files.

Layout::

    b"CAESARK1" | scheme:u8 | kind:u8 (0 public, 1 private) | owner_len:u8 | owner
    | count:u8 | count x (len:u32 BE | integer BE)

OU stores ``n, g, h, p_bits`` (+ ``p, q``); Paillier stores ``n`` (+ ``p, q``).
"""

from __future__ import annotations

import struct
from pathlib import Path

from .core import HEError, KeyPair, PrivateKey, PublicKey, Scheme
from .ou import OUPrivateKey, OUPublicKey
from .paillier import PaillierPrivateKey, PaillierPublicKey

MAGIC = b"CAESARK1"


class KeyFileError(HEError):
    pass


def _pack_ints(ints) -> bytes:
    out = [struct.pack(">B", len(ints))]
    for v in ints:
        v = int(v)
        raw = v.to_bytes(max(1, (v.bit_length() + 7) // 8), "big")
        out.append(struct.pack(">I", len(raw)) + raw)
    return b"".join(out)


def _unpack_ints(buf: bytes, pos: int) -> list[int]:
    (count,) = struct.unpack_from(">B", buf, pos)
    pos += 1
    ints = []
    for _ in range(count):
        (length,) = struct.unpack_from(">I", buf, pos)
        pos += 4
        if pos + length > len(buf):
            raise KeyFileError("truncated key file")
        ints.append(int.from_bytes(buf[pos : pos + length], "big"))
        pos += length
    if pos != len(buf):
        raise KeyFileError("trailing bytes in key file")
    return ints


def dumps_key(key: PublicKey | PrivateKey) -> bytes:
    private = isinstance(key, PrivateKey)
    pk = key.pk if private else key
    if isinstance(pk, OUPublicKey):
        ints = [pk.n, pk.g, pk.h, pk.p_bits]
    else:
        ints = [pk.n]
    if private:
        ints += [key.p, key.q]
    owner = pk.owner.encode()
    header = MAGIC + struct.pack(">BBB", pk.scheme.value, int(private), len(owner)) + owner
    return header + _pack_ints(ints)


def loads_key(buf: bytes) -> PublicKey | PrivateKey:
    if not buf.startswith(MAGIC):
        raise KeyFileError("bad magic; not a key file")
    try:
        scheme_b, kind, owner_len = struct.unpack_from(">BBB", buf, len(MAGIC))
        pos = len(MAGIC) + 3
        owner = buf[pos : pos + owner_len].decode()
        ints = _unpack_ints(buf, pos + owner_len)
        scheme = Scheme(scheme_b)
    except (struct.error, ValueError) as exc:
        raise KeyFileError(f"malformed key file: {exc}") from exc
    if scheme is Scheme.OU:
        pk = OUPublicKey(ints[0], ints[1], ints[2], ints[3], owner)
        rest = ints[4:]
        make_sk = OUPrivateKey
    else:
        pk = PaillierPublicKey(ints[0], owner)
        rest = ints[1:]
        make_sk = PaillierPrivateKey
    if kind == 0:
        return pk
    if len(rest) != 2:
        raise KeyFileError("private key file lacks its primes")
    return make_sk(pk, rest[0], rest[1])


def save_keypair(kp: KeyPair, directory: Path | str, stem: str) -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    pub, priv = directory / f"{stem}.pub", directory / f"{stem}.key"
    pub.write_bytes(dumps_key(kp.pk))
    priv.write_bytes(dumps_key(kp.sk))
    return pub, priv


def load_key(path: Path | str):
    return loads_key(Path(path).read_bytes())


def load_keypair(path: Path | str) -> KeyPair:
    sk = load_key(path)
    if not isinstance(sk, PrivateKey):
        raise KeyFileError(f"{path} holds a public key only")
    return KeyPair(sk.pk, sk)
