"""Wire protocol: versioned JSON envelopes, length-prefixed framing, and the
mapping between wire messages and session commands/events.

Every message is one JSON object with a string `type` tag and an integer
`seq`, strictly increasing per direction. The raw-socket transport frames
each UTF-8 body with a 4-byte big-endian length; the WebSocket transport
carries the identical bodies in text frames.
"""

from __future__ import annotations

import json
import math
import struct
from typing import Any

from . import session as sess
from .layout import LayoutSnapshot
from .nn import Mlp
from .sonify import SonificationMode

PROTOCOL_VERSION = 1
MAX_FRAME = 1 << 20  # inbound cap; oversize closes the connection
_HEADER = struct.Struct(">I")


class ProtocolError(Exception):
    """Recoverable wire fault: reported to the peer, connection kept alive."""

    def __init__(self, code: str, text: str) -> None:
        super().__init__(text)
        self.code = code
        self.text = text


class FrameTooLarge(Exception):
    """Fatal wire fault: the connection must be closed."""


# -- framing ------------------------------------------------------------------


def frame(body: bytes) -> bytes:
    return _HEADER.pack(len(body)) + body


class FrameReader:
    """Incremental length-prefixed frame parser for one direction."""

    def __init__(self) -> None:
        self._buf = bytearray()

    def feed(self, data: bytes) -> None:
        self._buf.extend(data)

    def next_frame(self) -> bytes | None:
        """One completed frame body, or None until more bytes arrive.

        Raises ProtocolError on an empty frame (recoverable: the header is
        consumed) and FrameTooLarge beyond the 1 MiB inbound cap (fatal).
        """
        if len(self._buf) < _HEADER.size:
            return None
        (length,) = _HEADER.unpack_from(self._buf)
        if length == 0:
            del self._buf[: _HEADER.size]
            raise ProtocolError("bad_frame", "zero-length frame")
        if length > MAX_FRAME:
            raise FrameTooLarge(f"frame of {length} bytes exceeds the {MAX_FRAME} cap")
        if len(self._buf) < _HEADER.size + length:
            return None
        body = bytes(self._buf[_HEADER.size : _HEADER.size + length])
        del self._buf[: _HEADER.size + length]
        return body


# -- envelope codec -------------------------------------------------------------


def encode(envelope: dict[str, Any]) -> bytes:
    """Envelope dict to UTF-8 JSON. Floats keep full double precision
    (shortest round-trip repr)."""
    return json.dumps(envelope, separators=(",", ":"), allow_nan=False).encode("utf-8")


def decode(body: bytes) -> dict[str, Any]:
    """UTF-8 JSON to envelope dict, validating tag and seq."""
    try:
        obj = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError("bad_json", f"undecodable message: {exc}") from None
    if not isinstance(obj, dict):
        raise ProtocolError("bad_json", "message is not a JSON object")
    tag = obj.get("type")
    if not isinstance(tag, str):
        raise ProtocolError("bad_payload", "missing or non-string type tag")
    seq = obj.get("seq")
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 0:
        raise ProtocolError("bad_payload", "missing or invalid seq")
    return obj


# -- client -> server commands ---------------------------------------------------

CLIENT_TAGS = frozenset(
    {
        "hello_ack", "pause", "resume", "set_hyperparams", "add_neuron",
        "remove_neuron", "drag_node", "release_node", "set_sonification",
        "evaluate_now",
    }
)
# Accepted in script files only, never over the wire.
SCRIPT_ONLY_TAGS = frozenset({"shutdown"})


def _number(obj: dict, key: str) -> float:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ProtocolError("bad_payload", f"field {key!r} must be a finite number")
    return float(v)


def _integer(obj: dict, key: str) -> int:
    v = obj.get(key)
    if isinstance(v, bool) or not isinstance(v, int):
        raise ProtocolError("bad_payload", f"field {key!r} must be an integer")
    return v


def _position(obj: dict, key: str = "position") -> tuple[float, float, float]:
    v = obj.get(key)
    if (
        not isinstance(v, (list, tuple))
        or len(v) != 3
        or any(isinstance(c, bool) or not isinstance(c, (int, float)) or not math.isfinite(c) for c in v)
    ):
        raise ProtocolError("bad_payload", f"field {key!r} must be 3 finite numbers")
    return (float(v[0]), float(v[1]), float(v[2]))


def command_from_payload(obj: dict[str, Any], allow_script_tags: bool = False) -> sess.Command | None:
    """Wire/script message to a session command.

    Returns None for messages that carry no command (hello_ack). Raises
    ProtocolError for unknown tags or malformed payloads.
    """
    tag = obj.get("type")
    if tag == "hello_ack":
        return None
    if tag == "pause":
        return sess.Pause()
    if tag == "resume":
        return sess.Resume()
    if tag == "set_hyperparams":
        return sess.SetHyperparams(
            learning_rate=_number(obj, "learning_rate"), momentum=_number(obj, "momentum")
        )
    if tag == "add_neuron":
        return sess.AddNeuron(layer=_integer(obj, "layer"), position=_position(obj))
    if tag == "remove_neuron":
        return sess.RemoveNeuron(
            layer=_integer(obj, "layer"), node_id=_integer(obj, "node_id"), position=_position(obj)
        )
    if tag == "drag_node":
        return sess.DragNode(node_id=_integer(obj, "node_id"), position=_position(obj))
    if tag == "release_node":
        return sess.ReleaseNode(node_id=_integer(obj, "node_id"))
    if tag == "set_sonification":
        mode = obj.get("mode")
        try:
            return sess.SetSonification(SonificationMode(mode))
        except ValueError:
            raise ProtocolError("bad_payload", f"unknown sonification mode {mode!r}") from None
    if tag == "evaluate_now":
        return sess.EvaluateNow()
    if allow_script_tags and tag == "shutdown":
        return sess.Shutdown()
    raise ProtocolError("unknown_type", f"unknown message type {tag!r}")


# -- server -> client events -----------------------------------------------------


def _weights_payload(net: Mlp) -> dict[str, Any]:
    """Raw per-layer parameters, matrices as row-major flat arrays."""
    out: dict[str, Any] = {}
    for name in ("W1", "W2", "W3"):
        w = getattr(net, name)
        out[name.lower()] = {"rows": w.shape[0], "cols": w.shape[1], "data": w.ravel().tolist()}
    for name in ("b1", "b2", "b3"):
        out[name] = getattr(net, name).tolist()
    return out


def _layout_payload(snapshot: LayoutSnapshot) -> dict[str, Any]:
    return {
        "nodes": [
            {"id": n.id, "kind": n.kind.wire_name, "pos": [float(c) for c in n.position]}
            for n in snapshot.nodes
        ],
        "edges": [
            {"a": e.a, "b": e.b, "w": float(e.norm_weight)} for e in snapshot.edges
        ],
    }


def event_to_payload(event: sess.Event) -> dict[str, Any]:
    """Session event to a wire body (without seq, which the transport owns)."""
    if isinstance(event, sess.StateChanged):
        return {"type": "state", "value": event.state.value}
    if isinstance(event, sess.EpochCompleted):
        m = event.metrics
        return {
            "type": "epoch",
            "epoch": m.epoch,
            "accuracy": m.val_accuracy,
            "loss": m.val_loss,
            "weights": _weights_payload(event.weights),
        }
    if isinstance(event, sess.LayoutFrame):
        return {"type": "layout", **_layout_payload(event.snapshot)}
    if isinstance(event, sess.HyperparamsChanged):
        hp = event.hyperparams
        return {
            "type": "hyperparams",
            "learning_rate": hp.learning_rate,
            "momentum": hp.momentum,
            "batch_size": hp.batch_size,
        }
    if isinstance(event, sess.StructureChanged):
        return {"type": "structure", "layer_sizes": list(event.layer_sizes)}
    if isinstance(event, sess.EvalResult):
        return {"type": "eval", "accuracy": event.accuracy, "loss": event.loss}
    if isinstance(event, sess.AudioTargets):
        return {"type": "audio", "left_freq": event.left_freq, "right_freq": event.right_freq}
    if isinstance(event, sess.Error):
        return {"type": "error", "code": event.code, "text": event.text}
    raise TypeError(f"cannot serialize event {event!r}")


def hello_payload(described: dict[str, Any]) -> dict[str, Any]:
    return {"type": "hello", "protocol_version": PROTOCOL_VERSION, **described}


# -- command scripts ---------------------------------------------------------------


def load_script(path: str) -> list[tuple[int, sess.Command]]:
    """Command script: one {"at_step": n, "cmd": {...}} JSON object per line."""
    entries: list[tuple[int, sess.Command]] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            try:
                obj = json.loads(line)
                at_step = obj["at_step"]
                if isinstance(at_step, bool) or not isinstance(at_step, int) or at_step < 0:
                    raise ValueError("at_step must be a non-negative integer")
                cmd = command_from_payload(obj["cmd"], allow_script_tags=True)
            except (ValueError, KeyError, TypeError, ProtocolError) as exc:
                raise ValueError(f"{path}:{lineno}: bad script entry: {exc}") from None
            if cmd is not None:
                entries.append((at_step, cmd))
    return entries
