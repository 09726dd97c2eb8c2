"""Framed two-party message transport with byte accounting.

Every message travels as one frame::

    tag:u32 BE | length:u64 BE | payload

Tags come from the closed :class:`Tag` enumeration; a frame with any other
tag code is rejected on receipt.  Each endpoint records what it sends and
receives in a :class:`CommStats`, which is also the semi-honest "view" used
by transcript audits.
"""

from __future__ import annotations

import enum
import json
import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass

HEADER = struct.Struct(">IQ")
FRAME_OVERHEAD = HEADER.size


class TransportError(Exception):
    """Connection-level failure (peer gone, timeout, socket error)."""


class ProtocolError(Exception):
    """The peer sent something the protocol does not expect."""


class Tag(enum.IntEnum):
    CIPHERTEXT = 1
    SHARE = 2
    MASKED_CIPHERTEXT = 3
    CONTROL = 4


ALLOWED_TAGS = frozenset(Tag)


@dataclass
class MessageRecord:
    tag: str
    direction: str
    byte_len: int
    frame_len: int
    epoch: int
    batch: int
    step: str
    payload: bytes | None = None

    def to_json(self) -> dict:
        return {
            "tag": self.tag,
            "direction": self.direction,
            "byte_len": self.byte_len,
            "batch": self.batch,
            "step": self.step,
            "epoch": self.epoch,
        }


class CommStats:
    """Per-endpoint log of sent and received messages.

    ``epoch``/``batch`` are a context set by the training loop; setup traffic
    is recorded with ``epoch = -1``.
    """

    def __init__(self, capture: bool = False):
        self.sent: list[MessageRecord] = []
        self.received: list[MessageRecord] = []
        self.capture = capture
        self.epoch = -1
        self.batch = -1
        self._lock = threading.Lock()

    def set_context(self, epoch: int, batch: int) -> None:
        with self._lock:
            self.epoch, self.batch = epoch, batch

    def _record(self, box, tag, direction, payload, step):
        rec = MessageRecord(
            tag=Tag(tag).name.lower(),
            direction=direction,
            byte_len=len(payload),
            frame_len=len(payload) + FRAME_OVERHEAD,
            epoch=self.epoch,
            batch=self.batch,
            step=step,
            payload=bytes(payload) if self.capture else None,
        )
        with self._lock:
            box.append(rec)
        return rec

    def record_send(self, tag, direction, payload, step=""):
        return self._record(self.sent, tag, direction, payload, step)

    def record_recv(self, tag, direction, payload, step=""):
        return self._record(self.received, tag, direction, payload, step)

    # totals over sent messages
    def total_bytes(self, frames: bool = False, epoch=None, batch=None) -> int:
        key = "frame_len" if frames else "byte_len"
        return sum(getattr(m, key) for m in self.select(epoch, batch))

    def total_messages(self, epoch=None, batch=None) -> int:
        return len(self.select(epoch, batch))

    def select(self, epoch=None, batch=None) -> list[MessageRecord]:
        with self._lock:
            out = list(self.sent)
        if epoch is not None:
            out = [m for m in out if m.epoch == epoch]
        if batch is not None:
            out = [m for m in out if m.batch == batch]
        return out

    def by_tag(self, epoch=None) -> dict[str, int]:
        out: dict[str, int] = {}
        for m in self.select(epoch):
            out[m.tag] = out.get(m.tag, 0) + m.byte_len
        return out

    def per_batch(self) -> dict[tuple[int, int], int]:
        out: dict[tuple[int, int], int] = {}
        for m in self.select():
            out[(m.epoch, m.batch)] = out.get((m.epoch, m.batch), 0) + m.byte_len
        return out


def merged_transcript(*stats: CommStats) -> list[MessageRecord]:
    """Sent messages of several endpoints (i.e. every message on the wire)."""
    out = []
    for s in stats:
        out.extend(s.select())
    return out


def export_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(r.to_json()) + "\n")


def virtual_seconds(nbytes: int, mbps: float) -> float:
    """Transfer time of ``nbytes`` on a link of ``mbps`` megabits per second."""
    if mbps <= 0:
        raise ValueError("bandwidth must be positive")
    return nbytes * 8 / (mbps * 1e6)


# -- connections ---------------------------------------------------------------


class _QueueConn:
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue):
        self.inbox, self.outbox = inbox, outbox
        self.closed = False

    def send_frame(self, frame: bytes) -> None:
        if self.closed:
            raise TransportError("endpoint is closed")
        self.outbox.put(frame)

    def recv_frame(self, timeout) -> bytes:
        try:
            frame = self.inbox.get(timeout=timeout)
        except queue.Empty:
            raise TransportError(f"no message within {timeout}s") from None
        if frame is None:
            raise TransportError("peer closed the channel")
        return frame

    def close(self) -> None:
        if not self.closed:
            self.closed = True
            self.outbox.put(None)


class _SocketConn:
    def __init__(self, sock: socket.socket):
        self.sock = sock

    def send_frame(self, frame: bytes) -> None:
        try:
            self.sock.sendall(frame)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _read(self, n: int) -> bytes:
        chunks, remaining = [], n
        while remaining:
            try:
                chunk = self.sock.recv(min(remaining, 1 << 20))
            except socket.timeout:
                raise TransportError("receive timed out") from None
            except OSError as exc:
                raise TransportError(f"receive failed: {exc}") from exc
            if not chunk:
                raise TransportError("peer closed the connection")
            chunks.append(chunk)
            remaining -= len(chunk)
        return b"".join(chunks)

    def recv_frame(self, timeout) -> bytes:
        self.sock.settimeout(timeout)
        header = self._read(FRAME_OVERHEAD)
        _, length = HEADER.unpack(header)
        return header + self._read(length)

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class Endpoint:
    """One party's end of a two-party channel."""

    def __init__(self, name: str, peer: str, conn, stats: CommStats | None = None, timeout: float | None = 600.0):
        self.name = name
        self.peer = peer
        self.conn = conn
        self.stats = stats or CommStats()
        self.timeout = timeout

    def send(self, tag: Tag, payload: bytes, step: str = "") -> None:
        tag = Tag(tag)
        self.conn.send_frame(HEADER.pack(int(tag), len(payload)) + payload)
        self.stats.record_send(tag, f"{self.name}->{self.peer}", payload, step)

    def recv(self, expect: Tag | None = None, step: str = "") -> bytes:
        frame = self.conn.recv_frame(self.timeout)
        code, length = HEADER.unpack_from(frame)
        payload = frame[FRAME_OVERHEAD:]
        if len(payload) != length:
            raise TransportError("frame length does not match its header")
        if code not in Tag._value2member_map_:
            raise ProtocolError(f"unknown message tag {code}")
        tag = Tag(code)
        if expect is not None and tag != expect:
            raise ProtocolError(f"expected a {Tag(expect).name} message at step {step!r}, got {tag.name}")
        self.stats.record_recv(tag, f"{self.peer}->{self.name}", payload, step)
        return payload

    def send_control(self, obj: dict, step: str = "control") -> None:
        self.send(Tag.CONTROL, json.dumps(obj, sort_keys=True).encode(), step)

    def recv_control(self, step: str = "control") -> dict:
        try:
            return json.loads(self.recv(Tag.CONTROL, step).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"malformed control message: {exc}") from exc

    def close(self) -> None:
        self.conn.close()


def in_proc_pair(names=("A", "B"), capture: bool = False, timeout: float | None = 600.0) -> tuple[Endpoint, Endpoint]:
    qa, qb = queue.Queue(), queue.Queue()
    a = Endpoint(names[0], names[1], _QueueConn(qa, qb), CommStats(capture), timeout)
    b = Endpoint(names[1], names[0], _QueueConn(qb, qa), CommStats(capture), timeout)
    return a, b


def _parse_addr(addr) -> tuple[str, int]:
    if isinstance(addr, tuple):
        return addr[0], int(addr[1])
    host, _, port = str(addr).rpartition(":")
    return host or "127.0.0.1", int(port)


class Listener:
    def __init__(self, addr):
        host, port = _parse_addr(addr)
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        try:
            self.sock.bind((host, port))
        except OSError as exc:
            raise TransportError(f"cannot listen on {host}:{port}: {exc}") from exc
        self.sock.listen(1)

    @property
    def port(self) -> int:
        return self.sock.getsockname()[1]

    def accept(self, name: str, peer: str, timeout: float | None = 60.0, capture: bool = False) -> Endpoint:
        self.sock.settimeout(timeout)
        try:
            conn, _ = self.sock.accept()
        except socket.timeout:
            raise TransportError(f"no peer connected within {timeout}s") from None
        finally:
            self.sock.close()
        conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        return Endpoint(name, peer, _SocketConn(conn), CommStats(capture))


def tcp_listen(addr, name: str = "A", peer: str = "B", timeout: float | None = 60.0, capture: bool = False) -> Endpoint:
    return Listener(addr).accept(name, peer, timeout, capture)


def tcp_connect(addr, name: str = "B", peer: str = "A", timeout: float = 60.0, capture: bool = False) -> Endpoint:
    host, port = _parse_addr(addr)
    deadline = time.monotonic() + timeout
    while True:
        try:
            sock = socket.create_connection((host, port), timeout=5)
            break
        except OSError as exc:
            if time.monotonic() > deadline:
                raise TransportError(f"partner at {host}:{port} unreachable: {exc}") from exc
            time.sleep(0.1)
    sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    return Endpoint(name, peer, _SocketConn(sock), CommStats(capture))
