"""Threaded network front door for one session.

Two equivalent transports carry the same JSON bodies: a raw stream
socket with 4-byte big-endian length prefixes on the base port, and RFC
6455 WebSocket text frames (for browsers) on the port above it. Raw
clients receive the hello the moment they connect; WebSocket clients
right after their handshake.

Event fan-out gives every client the identical envelope stream (one
global seq assigned per event), with per-client back-pressure: when a
client's queue is full, layout/audio frames are dropped for it;
epoch/state-class messages are never dropped — a client too slow for
those is disconnected.
"""

from __future__ import annotations

import base64
import hashlib
import logging
import queue
import socket
import struct
import threading

from . import protocol
from . import session as sess

log = logging.getLogger("aiive.server")

WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"
CLIENT_QUEUE_SIZE = 256
HANDSHAKE_LIMIT = 16 * 1024

DROPPABLE_TYPES = {"layout", "audio"}


class _WsFatal(Exception):
    """WebSocket violation that requires closing the connection."""


def ws_accept_value(key: str) -> str:
    digest = hashlib.sha1((key + WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def ws_encode_frame(payload: bytes, opcode: int = 0x1) -> bytes:
    """Server-to-client frame: FIN set, never masked."""
    head = bytearray([0x80 | opcode])
    n = len(payload)
    if n < 126:
        head.append(n)
    elif n < 1 << 16:
        head.append(126)
        head += struct.pack(">H", n)
    else:
        head.append(127)
        head += struct.pack(">Q", n)
    return bytes(head) + payload


class WsReader:
    """Incremental client-to-server frame parser: masked frames only,
    continuation assembly, interleaved control frames."""

    def __init__(self) -> None:
        self._buf = bytearray()
        self._fragments: bytearray | None = None
        self._fragment_opcode = 0

    def feed(self, data: bytes) -> list[tuple[int, bytes]]:
        """Completed (opcode, payload) messages; data frames are assembled
        across continuations, control frames pass through as-is."""
        self._buf.extend(data)
        out: list[tuple[int, bytes]] = []
        while True:
            parsed = self._parse_one()
            if parsed is None:
                return out
            fin, opcode, payload = parsed
            if opcode >= 0x8:  # control frame
                if not fin or len(payload) > 125:
                    raise _WsFatal("malformed control frame")
                out.append((opcode, payload))
            elif opcode in (0x1, 0x2):
                if self._fragments is not None:
                    raise _WsFatal("new data frame during fragmented message")
                if fin:
                    out.append((opcode, payload))
                else:
                    self._fragments = bytearray(payload)
                    self._fragment_opcode = opcode
            elif opcode == 0x0:
                if self._fragments is None:
                    raise _WsFatal("continuation without a started message")
                self._fragments.extend(payload)
                if len(self._fragments) > protocol.MAX_FRAME:
                    raise protocol.FrameTooLarge("fragmented message exceeds cap")
                if fin:
                    out.append((self._fragment_opcode, bytes(self._fragments)))
                    self._fragments = None
            else:
                raise _WsFatal(f"unsupported opcode {opcode}")

    def _parse_one(self) -> tuple[bool, int, bytes] | None:
        buf = self._buf
        if len(buf) < 2:
            return None
        fin = bool(buf[0] & 0x80)
        opcode = buf[0] & 0x0F
        masked = bool(buf[1] & 0x80)
        length = buf[1] & 0x7F
        offset = 2
        if length == 126:
            if len(buf) < offset + 2:
                return None
            (length,) = struct.unpack_from(">H", buf, offset)
            offset += 2
        elif length == 127:
            if len(buf) < offset + 8:
                return None
            (length,) = struct.unpack_from(">Q", buf, offset)
            offset += 8
        if length > protocol.MAX_FRAME:
            raise protocol.FrameTooLarge(f"websocket frame of {length} bytes")
        if not masked:
            raise _WsFatal("client frame not masked")
        if len(buf) < offset + 4 + length:
            return None
        mask = buf[offset : offset + 4]
        offset += 4
        payload = bytearray(buf[offset : offset + length])
        for i in range(len(payload)):
            payload[i] ^= mask[i % 4]
        del buf[: offset + length]
        return fin, opcode, bytes(payload)


def _parse_handshake(request: bytes) -> str:
    """Returns the Sec-WebSocket-Key, or raises _WsFatal."""
    try:
        head = request.decode("latin-1")
    except UnicodeDecodeError:
        raise _WsFatal("undecodable handshake") from None
    lines = head.split("\r\n")
    if not lines or not lines[0].startswith("GET "):
        raise _WsFatal("not a websocket GET request")
    headers = {}
    for line in lines[1:]:
        name, _, value = line.partition(":")
        headers[name.strip().lower()] = value.strip()
    if "websocket" not in headers.get("upgrade", "").lower():
        raise _WsFatal("missing upgrade header")
    key = headers.get("sec-websocket-key")
    if not key:
        raise _WsFatal("missing Sec-WebSocket-Key")
    return key


class _Client:
    """One connection: a reader thread (this object's loop) and a writer
    thread draining the outbox of fully transport-encoded messages."""

    def __init__(
        self, server: "ProtocolServer", sock: socket.socket, peer: str, is_websocket: bool
    ) -> None:
        self.server = server
        self.sock = sock
        self.peer = peer
        self.is_websocket = is_websocket
        self.alive = True
        self.last_client_seq = -1
        self._closing = threading.Lock()
        self._outbox: queue.Queue[bytes | None] = queue.Queue(maxsize=CLIENT_QUEUE_SIZE)
        self._reader = threading.Thread(target=self._read_loop, name=f"aiive-read-{peer}", daemon=True)
        self._writer = threading.Thread(target=self._write_loop, name=f"aiive-write-{peer}", daemon=True)

    def start(self) -> None:
        self._reader.start()

    # -- outbound -----------------------------------------------------------

    def enqueue_body(self, body: bytes, droppable: bool) -> bool:
        """Queue one JSON body; returns False when the client must be closed
        (critical backlog). Never closes or blocks by itself."""
        wire = ws_encode_frame(body) if self.is_websocket else protocol.frame(body)
        return self._enqueue_wire(wire, droppable)

    def _enqueue_wire(self, wire: bytes, droppable: bool) -> bool:
        if not self.alive:
            return True
        try:
            self._outbox.put_nowait(wire)
            return True
        except queue.Full:
            return droppable  # shed layout/audio; critical backlog is fatal

    def _write_loop(self) -> None:
        while True:
            wire = self._outbox.get()
            if wire is None:
                return
            if not self.alive:
                return
            try:
                self.sock.sendall(wire)
            except OSError:
                self.close()
                return

    # -- inbound ------------------------------------------------------------

    def _read_loop(self) -> None:
        try:
            if self.is_websocket:
                self._websocket_session()
            else:
                self._raw_session()
        except (protocol.FrameTooLarge, _WsFatal) as exc:
            log.info("closing %s: %s", self.peer, exc)
        except OSError:
            pass
        finally:
            self.close()

    def _register(self) -> None:
        self._writer.start()
        self.server.register(self)

    def _handle_body(self, body: bytes) -> None:
        try:
            envelope = protocol.decode(body)
            seq = envelope["seq"]
            if seq <= self.last_client_seq:
                raise protocol.ProtocolError(
                    "bad_seq", f"seq {seq} not greater than previous {self.last_client_seq}"
                )
            self.last_client_seq = seq
            command = protocol.command_from_payload(envelope)
        except protocol.ProtocolError as exc:
            self.server.send_error(self, exc.code, exc.text)
        else:
            if command is not None:
                self.server.session.submit(command)

    def _raw_session(self) -> None:
        self._register()  # hello goes out immediately on connect
        reader = protocol.FrameReader()
        while self.alive:
            try:
                data = self.sock.recv(65536)
            except OSError:
                return
            if data == b"":
                return
            reader.feed(data)
            while True:
                try:
                    body = reader.next_frame()
                except protocol.ProtocolError as exc:
                    self.server.send_error(self, exc.code, exc.text)
                    continue
                if body is None:
                    break
                self._handle_body(body)

    def _websocket_session(self) -> None:
        request = bytearray()
        while b"\r\n\r\n" not in request:
            if len(request) > HANDSHAKE_LIMIT:
                raise _WsFatal("oversized handshake")
            chunk = self.sock.recv(4096)
            if not chunk:
                return
            request.extend(chunk)
        split = request.index(b"\r\n\r\n") + 4
        try:
            key = _parse_handshake(bytes(request[:split]))
        except _WsFatal:
            try:
                self.sock.sendall(b"HTTP/1.1 400 Bad Request\r\nConnection: close\r\n\r\n")
            except OSError:
                pass
            raise
        self.sock.sendall(
            b"HTTP/1.1 101 Switching Protocols\r\n"
            b"Upgrade: websocket\r\n"
            b"Connection: Upgrade\r\n"
            b"Sec-WebSocket-Accept: " + ws_accept_value(key).encode("ascii") + b"\r\n\r\n"
        )
        self._register()

        ws = WsReader()
        data = bytes(request[split:])
        while self.alive:
            if data:
                for opcode, payload in ws.feed(data):
                    if opcode == 0x8:
                        self._enqueue_wire(ws_encode_frame(payload[:2], opcode=0x8), droppable=False)
                        return
                    if opcode == 0x9:
                        self._enqueue_wire(ws_encode_frame(payload, opcode=0xA), droppable=False)
                    elif opcode == 0x1:
                        self._handle_body(payload)
                    elif opcode == 0x2:
                        self.server.send_error(self, "bad_frame", "binary frames are not accepted")
            try:
                data = self.sock.recv(65536)
            except OSError:
                return
            if data == b"":
                return

    def close(self) -> None:
        with self._closing:
            if not self.alive:
                return
            self.alive = False
        self.server.unregister(self)
        try:
            self._outbox.put_nowait(None)
        except queue.Full:
            pass
        if self._writer.is_alive() and threading.current_thread() is not self._writer:
            self._writer.join(timeout=0.5)
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class ProtocolServer:
    """Accepts clients (raw framing on the base port, WebSocket on the one
    above), greets each with hello, relays commands into the session and
    broadcasts its events."""

    def __init__(self, session_obj: sess.Session, host: str = "127.0.0.1", port: int = 0) -> None:
        self.session = session_obj
        self.host = host
        self.port = port
        self.ws_port: int | None = None
        self._listeners: list[socket.socket] = []
        self._clients: list[_Client] = []
        self._lock = threading.Lock()  # guards client list + seq assignment + enqueue order
        self._next_seq = 0
        self._stopping = False

    def start(self) -> tuple[str, int]:
        """Bind both transports; returns (host, raw port). The WebSocket
        port is raw+1 (or the next free one when binding ephemeral)."""
        raw = socket.create_server((self.host, self.port))
        self.host, self.port = raw.getsockname()[:2]
        try:
            ws = socket.create_server((self.host, self.port + 1))
        except OSError:
            if self.port != raw.getsockname()[1] or self.port + 1 == 0:
                raise
            ws = socket.create_server((self.host, 0))  # ephemeral fallback
        self.ws_port = ws.getsockname()[1]
        self._listeners = [raw, ws]
        for listener, is_ws in ((raw, False), (ws, True)):
            threading.Thread(
                target=self._accept_loop, args=(listener, is_ws),
                name=f"aiive-accept-{'ws' if is_ws else 'raw'}", daemon=True,
            ).start()
        log.info("listening on %s:%d (raw) and %d (websocket)", self.host, self.port, self.ws_port)
        return self.host, self.port

    def stop(self) -> None:
        self._stopping = True
        for listener in self._listeners:
            listener.close()
        with self._lock:
            clients = list(self._clients)
        for client in clients:
            client.close()

    @property
    def address(self) -> str:
        return f"{self.host}:{self.port}"

    def _accept_loop(self, listener: socket.socket, is_websocket: bool) -> None:
        while not self._stopping:
            try:
                sock, addr = listener.accept()
            except OSError:
                return
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            _Client(self, sock, f"{addr[0]}:{addr[1]}", is_websocket).start()

    # -- registry; all seq assignment happens under _lock --------------------

    def register(self, client: _Client) -> None:
        """Greet and subscribe atomically: the hello precedes every broadcast
        the client will see and shares the global seq order."""
        with self._lock:
            if client in self._clients:
                return
            body = protocol.encode(
                {**protocol.hello_payload(self.session.describe()), "seq": self._take_seq()}
            )
            ok = client.enqueue_body(body, droppable=False)
            self._clients.append(client)
        if not ok:
            client.close()

    def unregister(self, client: _Client) -> None:
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)

    def _take_seq(self) -> int:
        seq = self._next_seq
        self._next_seq += 1
        return seq

    # -- outbound -------------------------------------------------------------

    def broadcast(self, event: sess.Event) -> None:
        payload = protocol.event_to_payload(event)
        droppable = payload["type"] in DROPPABLE_TYPES
        overloaded: list[_Client] = []
        with self._lock:
            body = protocol.encode({**payload, "seq": self._take_seq()})
            for client in self._clients:
                if not client.enqueue_body(body, droppable):
                    overloaded.append(client)
        for client in overloaded:
            log.warning("client %s cannot keep up with critical events, closing", client.peer)
            client.close()

    def send_error(self, client: _Client, code: str, text: str) -> None:
        with self._lock:
            body = protocol.encode(
                {"type": "error", "code": code, "text": text, "seq": self._take_seq()}
            )
            ok = client.enqueue_body(body, droppable=False)
        if not ok:
            client.close()


def serve(
    session_obj: sess.Session,
    address: str = "127.0.0.1:0",
    script: list[tuple[int, sess.Command]] | None = None,
) -> ProtocolServer:
    """Start a server plus a background thread pumping the session loop into
    it. Returns the running server; stop() ends it."""
    host, _, port = address.rpartition(":")
    server = ProtocolServer(session_obj, host or "127.0.0.1", int(port or 0))
    server.start()

    def pump() -> None:
        for event in session_obj.run(script):
            server.broadcast(event)

    threading.Thread(target=pump, name="aiive-session", daemon=True).start()
    return server
