"""Stream service: newline-delimited JSON records over TCP, with an
in-place WebSocket upgrade for browser clients on the same port.

Inbound record types:
  {"type": "window", "samples": [[...], ...]}   classify one window
  {"type": "intent", "label": n}                simulation: server draws a
                                                window of held-out samples
                                                of that class
  {"type": "watch"}                             receive copies of every
                                                decision/command emitted on
                                                other connections

Every inbound record gets exactly one reply line: a decision (plus an
additional command line when consensus fires), an ok, or an error.  The
model is shared read-only; each connection owns its consensus state.
"""

import base64
import hashlib
import json
import socket
import struct
import threading
import time

import numpy as np

from .errors import ValidationError
from .intent import (DEFAULT_REQUIRED_RUN, DEFAULT_WINDOW_SIZE, ConsensusState,
                     command_map, consensus_update, window_decide)

_WS_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"


def encode_record(record):
    return json.dumps(record, separators=(",", ":"))


def decode_record(line):
    record = json.loads(line)
    if not isinstance(record, dict) or "type" not in record:
        raise ValueError("record must be an object with a 'type' field")
    return record


class _LineTransport:
    """Newline-delimited text over a stream socket."""

    def __init__(self, sock, initial=b""):
        self.sock = sock
        self._buffer = bytearray(initial)

    def recv_message(self):
        while b"\n" not in self._buffer:
            chunk = self.sock.recv(4096)
            if not chunk:
                return None
            self._buffer.extend(chunk)
        line, _, rest = bytes(self._buffer).partition(b"\n")
        self._buffer = bytearray(rest)
        return line.decode("utf-8", errors="replace").strip()

    def send_message(self, text):
        self.sock.sendall(text.encode("utf-8") + b"\n")


class _WsTransport:
    """RFC 6455 text frames, one JSON record per frame (server side)."""

    def __init__(self, sock, initial=b""):
        self.sock = sock
        self._buffer = bytearray(initial)

    def _read_exact(self, count):
        while len(self._buffer) < count:
            chunk = self.sock.recv(4096)
            if not chunk:
                return None
            self._buffer.extend(chunk)
        out = bytes(self._buffer[:count])
        del self._buffer[:count]
        return out

    def recv_message(self):
        while True:
            head = self._read_exact(2)
            if head is None:
                return None
            opcode = head[0] & 0x0F
            masked = head[1] & 0x80
            length = head[1] & 0x7F
            if length == 126:
                ext = self._read_exact(2)
                if ext is None:
                    return None
                length = struct.unpack(">H", ext)[0]
            elif length == 127:
                ext = self._read_exact(8)
                if ext is None:
                    return None
                length = struct.unpack(">Q", ext)[0]
            mask = self._read_exact(4) if masked else b"\x00" * 4
            if mask is None:
                return None
            payload = self._read_exact(length)
            if payload is None:
                return None
            if masked:
                payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            if opcode == 0x8:  # close
                return None
            if opcode == 0x9:  # ping -> pong
                self._send_frame(0xA, payload)
                continue
            if opcode in (0x1, 0x2):
                return payload.decode("utf-8", errors="replace")

    def _send_frame(self, opcode, payload):
        head = bytearray([0x80 | opcode])
        n = len(payload)
        if n < 126:
            head.append(n)
        elif n < 1 << 16:
            head.append(126)
            head.extend(struct.pack(">H", n))
        else:
            head.append(127)
            head.extend(struct.pack(">Q", n))
        self.sock.sendall(bytes(head) + payload)

    def send_message(self, text):
        self._send_frame(0x1, text.encode("utf-8"))


def _websocket_accept(key):
    digest = hashlib.sha1((key + _WS_GUID).encode("ascii")).digest()
    return base64.b64encode(digest).decode("ascii")


def _try_upgrade(sock, first_chunk):
    """If the connection opens with an HTTP upgrade, complete the handshake.

    Returns a transport (line or websocket).
    """
    if not first_chunk.startswith(b"GET "):
        return _LineTransport(sock, initial=first_chunk)
    data = bytearray(first_chunk)
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            return None
        data.extend(chunk)
    header_blob, _, rest = bytes(data).partition(b"\r\n\r\n")
    headers = {}
    for line in header_blob.decode("latin-1").split("\r\n")[1:]:
        name, _, value = line.partition(":")
        headers[name.strip().lower()] = value.strip()
    key = headers.get("sec-websocket-key")
    if key is None or "websocket" not in headers.get("upgrade", "").lower():
        sock.sendall(b"HTTP/1.1 400 Bad Request\r\n\r\n")
        return None
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {_websocket_accept(key)}\r\n\r\n"
    )
    sock.sendall(response.encode("ascii"))
    return _WsTransport(sock, initial=rest)


class _Client:
    def __init__(self, transport, required_run):
        self.transport = transport
        self.consensus = ConsensusState(required_run=required_run)
        self.watching = False
        self.send_lock = threading.Lock()

    def send(self, record):
        with self.send_lock:
            self.transport.send_message(encode_record(record))


class StreamServer:
    """Serves one classifier model to many stream clients."""

    def __init__(self, model, port=0, host="127.0.0.1", mode="typing",
                 window_size=DEFAULT_WINDOW_SIZE, required_run=DEFAULT_REQUIRED_RUN,
                 sim_dataset=None):
        self.model = model
        self.mode = mode
        self.command_map = command_map(mode)
        self.window_size = window_size
        self.required_run = required_run
        self.sim_dataset = sim_dataset
        self._sim_cursors = {}
        self._clients = set()
        self._clients_lock = threading.Lock()
        self._running = False
        self._socket = socket.create_server((host, port))
        self.host, self.port = self._socket.getsockname()[:2]

    # -- lifecycle ---------------------------------------------------------

    def start(self):
        """Accept clients on a background thread; returns immediately."""
        self._running = True
        self._accept_thread = threading.Thread(target=self._accept_loop, daemon=True)
        self._accept_thread.start()
        return self

    def serve_forever(self):
        self.start()
        try:
            while self._running:
                time.sleep(0.2)
        except KeyboardInterrupt:
            pass
        finally:
            self.close()

    def close(self):
        self._running = False
        try:
            self._socket.close()
        except OSError:
            pass

    def _accept_loop(self):
        while self._running:
            try:
                sock, _ = self._socket.accept()
            except OSError:
                return
            threading.Thread(target=self._serve_client, args=(sock,), daemon=True).start()

    # -- per-connection ----------------------------------------------------

    def _serve_client(self, sock):
        try:
            first = sock.recv(4096)
            if not first:
                return
            transport = _try_upgrade(sock, first)
            if transport is None:
                return
            client = _Client(transport, self.required_run)
            with self._clients_lock:
                self._clients.add(client)
            try:
                while True:
                    text = transport.recv_message()
                    if text is None:
                        return
                    if not text:
                        continue
                    self._handle_text(client, text)
            finally:
                with self._clients_lock:
                    self._clients.discard(client)
        except (OSError, ValueError):
            pass
        finally:
            try:
                sock.close()
            except OSError:
                pass

    def _handle_text(self, client, text):
        try:
            record = decode_record(text)
        except ValueError as exc:
            client.send({"type": "error", "message": f"malformed record: {exc}"})
            return
        try:
            self._dispatch(client, record)
        except ValidationError as exc:
            client.send({"type": "error", "message": str(exc)})

    def _dispatch(self, client, record):
        kind = record["type"]
        if kind == "window":
            samples = record.get("samples")
            if not isinstance(samples, list) or not samples:
                client.send({"type": "error", "message": "window needs a 'samples' list"})
                return
            window = np.asarray(samples, dtype=float)
            if window.ndim != 2 or window.shape[1] != self.model.shuffle_map.source_dim:
                client.send({
                    "type": "error",
                    "message": (
                        f"window must be n x {self.model.shuffle_map.source_dim} "
                        f"samples, got shape {list(np.shape(samples))}"
                    ),
                })
                return
            self._process_window(client, window)
        elif kind == "intent":
            label = record.get("label")
            if not isinstance(label, int) or not 0 <= label < self.model.class_count:
                client.send({"type": "error",
                             "message": f"intent label must be in [0, {self.model.class_count})"})
                return
            if self.sim_dataset is None:
                client.send({"type": "error",
                             "message": "server has no simulation dataset loaded"})
                return
            window = self._draw_simulated(label)
            if window is None:
                client.send({"type": "error",
                             "message": f"no held-out samples for class {label}"})
                return
            self._process_window(client, window)
        elif kind == "watch":
            client.watching = True
            client.send({"type": "ok", "message": "watching"})
        else:
            client.send({"type": "error", "message": f"unknown record type {kind!r}"})

    def _process_window(self, client, window):
        decision = window_decide(self.model, window)
        client.consensus, emitted = consensus_update(
            client.consensus, decision, self.command_map
        )
        reply = {"type": "decision", "label": int(decision)}
        client.send(reply)
        self._forward_to_watchers(client, reply)
        if emitted is not None:
            label, command = emitted
            reply = {"type": "command", "label": int(label), "command": command}
            client.send(reply)
            self._forward_to_watchers(client, reply)

    def _forward_to_watchers(self, origin, record):
        with self._clients_lock:
            watchers = [c for c in self._clients if c.watching and c is not origin]
        for watcher in watchers:
            try:
                watcher.send(record)
            except OSError:
                pass

    def _draw_simulated(self, label):
        """Next window_size held-out samples of a class, wrapping around."""
        members = np.flatnonzero(self.sim_dataset.labels == label)
        if members.size == 0:
            return None
        cursor = self._sim_cursors.get(label, 0)
        picks = members[(cursor + np.arange(self.window_size)) % members.size]
        self._sim_cursors[label] = (cursor + self.window_size) % members.size
        return self.sim_dataset.features[picks]


def replay_stream(dataset, class_filter, destination, rate=2.0,
                  window_size=DEFAULT_WINDOW_SIZE, max_windows=None, on_event=None):
    """Stream windows of one class to a server at a fixed rate.

    Windows are drawn sequentially from the filtered dataset; the stream
    ends cleanly with a local terminal notice once the data is exhausted.
    Returns the list of reply records received.
    """
    members = np.flatnonzero(dataset.labels == class_filter)
    if members.size == 0:
        raise ValidationError(f"dataset has no samples of class {class_filter}")
    if rate <= 0:
        raise ValidationError("rate must be positive")
    notify = on_event or (lambda record: None)
    host, _, port = destination.rpartition(":")
    replies = []
    with socket.create_connection((host or "127.0.0.1", int(port))) as sock:
        transport = _LineTransport(sock)
        count = 0
        for begin in range(0, members.size, window_size):
            chunk = members[begin:begin + window_size]
            if chunk.size < window_size:
                break
            if max_windows is not None and count >= max_windows:
                break
            record = {
                "type": "window",
                "samples": dataset.features[chunk].tolist(),
            }
            transport.send_message(encode_record(record))
            reply = transport.recv_message()  # the guaranteed reply line
            if reply is None:
                break
            parsed = json.loads(reply)
            replies.append(parsed)
            notify(parsed)
            # drain any extra lines (a command after consensus) without blocking
            sock.settimeout(0.05)
            try:
                while True:
                    extra = transport.recv_message()
                    if extra is None:
                        break
                    parsed = json.loads(extra)
                    replies.append(parsed)
                    notify(parsed)
            except (socket.timeout, TimeoutError):
                pass
            finally:
                sock.settimeout(None)
            count += 1
            time.sleep(1.0 / rate)
    notify({"type": "end", "message": f"replayed {count} window(s); stream complete"})
    return replies
