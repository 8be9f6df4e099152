"""Frame transports and per-operation byte accounting.

Every transport moves whole frames; the client talks through ``Channel``,
which encodes, meters and decodes.  Loopback and TCP carry identical bytes.
"""
from __future__ import annotations

import socket
import socketserver
import threading
from collections import defaultdict
from contextlib import contextmanager
from dataclasses import dataclass, field

from . import wire

CATEGORIES = ("init", "read", "write", "rebuild-tags", "audit", "other")


@dataclass
class ByteMeter:
    sent: dict = field(default_factory=lambda: defaultdict(int))
    received: dict = field(default_factory=lambda: defaultdict(int))
    frame_types: dict = field(default_factory=lambda: defaultdict(set))
    frames: dict = field(default_factory=lambda: defaultdict(int))

    def record(self, category: str, out_frame: bytes, in_frame: bytes) -> None:
        self.sent[category] += len(out_frame)
        self.received[category] += len(in_frame)
        self.frames[category] += 2
        self.frame_types[category].update((wire.frame_type(out_frame), wire.frame_type(in_frame)))

    def total(self, category: str | None = None) -> int:
        cats = CATEGORIES if category is None else (category,)
        return sum(self.sent[c] + self.received[c] for c in cats)

    def reset(self) -> None:
        self.sent.clear()
        self.received.clear()
        self.frame_types.clear()
        self.frames.clear()

    def snapshot(self) -> dict:
        return {c: (self.sent[c], self.received[c]) for c in CATEGORIES}


def serve_frame(server, codec: wire.Codec, frame: bytes) -> bytes:
    """Decode one request, run it against ``server``, encode the reply."""
    try:
        msg = codec.decode(frame)
    except wire.WireError as exc:
        return codec.encode(wire.ErrorMsg(3, f"bad frame: {exc}"))
    return codec.encode(server.dispatch(msg))


class LoopbackTransport:
    def __init__(self, server):
        self.server = server
        self.codec = wire.Codec(server.params)

    def exchange(self, frame: bytes) -> bytes:
        return serve_frame(self.server, self.codec, frame)

    def close(self) -> None:
        pass


def _recv_exact(sock: socket.socket, count: int) -> bytes:
    buf = bytearray()
    while len(buf) < count:
        chunk = sock.recv(count - len(buf))
        if not chunk:
            raise ConnectionError("peer closed mid-frame")
        buf += chunk
    return bytes(buf)


def recv_frame(sock: socket.socket) -> bytes:
    head = _recv_exact(sock, wire.FRAME_HEADER)
    return head + _recv_exact(sock, int.from_bytes(head[1:5], "big"))


class TCPTransport:
    def __init__(self, host: str, port: int, timeout: float = 30.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)

    def exchange(self, frame: bytes) -> bytes:
        self.sock.sendall(frame)
        return recv_frame(self.sock)

    def close(self) -> None:
        self.sock.close()


class _Handler(socketserver.BaseRequestHandler):
    def handle(self):
        srv = self.server
        while True:
            try:
                frame = recv_frame(self.request)
            except ConnectionError:
                return
            with srv.lock:  # mutating handlers are serialized
                reply = serve_frame(srv.por, srv.codec, frame)
                if srv.on_request is not None:
                    srv.on_request()
            self.request.sendall(reply)


class TCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, addr, por_server, on_request=None):
        super().__init__(addr, _Handler)
        self.por = por_server
        self.codec = wire.Codec(por_server.params)
        self.lock = threading.Lock()
        self.on_request = on_request


@contextmanager
def background_server(por_server, host: str = "127.0.0.1", port: int = 0):
    """Run a TCP server in a thread; yields the bound (host, port)."""
    srv = TCPServer((host, port), por_server)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    try:
        yield srv.server_address
    finally:
        srv.shutdown()
        srv.server_close()


class CountingTransport:
    """Independent tally of frame bytes, to cross-check the meter."""

    def __init__(self, inner):
        self.inner = inner
        self.bytes = 0
        self.log: list[tuple[bytes, bytes]] = []

    def exchange(self, frame: bytes) -> bytes:
        reply = self.inner.exchange(frame)
        self.bytes += len(frame) + len(reply)
        self.log.append((frame, reply))
        return reply

    def close(self) -> None:
        self.inner.close()


class RemoteError(RuntimeError):
    def __init__(self, code: int, reason: str):
        super().__init__(reason)
        self.code = code


class Channel:
    """Typed request/response over a frame transport, with metering."""

    def __init__(self, params, transport, meter: ByteMeter | None = None):
        self.codec = wire.Codec(params)
        self.transport = transport
        self.meter = meter or ByteMeter()
        self.category = "other"

    @contextmanager
    def metering(self, category: str):
        if category not in CATEGORIES:
            raise ValueError(f"unknown category {category!r}")
        prev, self.category = self.category, category
        try:
            yield
        finally:
            self.category = prev

    def call(self, msg, expect=None):
        out = self.codec.encode(msg)
        reply = self.transport.exchange(out)
        self.meter.record(self.category, out, reply)
        resp = self.codec.decode(reply)
        if isinstance(resp, wire.ErrorMsg):
            raise RemoteError(resp.code, resp.reason)
        if expect is not None and not isinstance(resp, expect):
            raise wire.WireError(f"expected {expect.__name__}, got {type(resp).__name__}")
        return resp

    def close(self) -> None:
        self.transport.close()
