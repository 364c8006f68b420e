import json

import numpy as np
import pytest

from aiive import nn, protocol, session
from aiive.layout import build_graph
from aiive.sonify import SonificationMode


def conformance_corpus():
    """One message per tag plus boundary-value variants."""
    return [
        # client -> server
        {"type": "hello_ack", "seq": 0},
        {"type": "pause", "seq": 1},
        {"type": "resume", "seq": 2},
        {"type": "set_hyperparams", "seq": 3, "learning_rate": 1e-4, "momentum": 0.0},
        {"type": "set_hyperparams", "seq": 4, "learning_rate": 1.0, "momentum": 0.999},
        {"type": "add_neuron", "seq": 5, "layer": 1, "position": [0.0, -0.0, 1e-15]},
        {"type": "remove_neuron", "seq": 6, "layer": 2, "node_id": 7, "position": [1.5, 2.5, -3.5]},
        {"type": "drag_node", "seq": 7, "node_id": 0, "position": [-1e308, 1e308, 0.1]},
        {"type": "release_node", "seq": 8, "node_id": 12},
        {"type": "set_sonification", "seq": 9, "mode": "split"},
        {"type": "evaluate_now", "seq": 10},
        # server -> client
        {"type": "hello", "seq": 0, "protocol_version": 1, "layer_sizes": [2304, 3, 4, 7],
         "hyperparams": {"learning_rate": 0.1, "momentum": 0.9, "batch_size": 64}},
        {"type": "state", "seq": 11, "value": "paused"},
        {"type": "epoch", "seq": 12, "epoch": 0, "accuracy": 1.0 / 7.0, "loss": 1.9459101090932196,
         "weights": {"w1": {"rows": 1, "cols": 2, "data": [0.1, -0.2]}, "b1": []}},
        {"type": "layout", "seq": 13, "nodes": [], "edges": []},
        {"type": "layout", "seq": 14,
         "nodes": [{"id": 0, "kind": "input", "pos": [0.1, 0.2, 0.3]}],
         "edges": [{"a": 0, "b": 1, "w": -1.0}]},
        {"type": "hyperparams", "seq": 15, "learning_rate": 0.30000000000000004, "momentum": 0.0,
         "batch_size": 1},
        {"type": "structure", "seq": 16, "layer_sizes": [36, 1, 1, 7]},
        {"type": "eval", "seq": 17, "accuracy": 0.0, "loss": 27.631021115928547},
        {"type": "audio", "seq": 18, "left_freq": 220.0, "right_freq": 880.0},
        {"type": "error", "seq": 19, "code": "bad_payload", "text": "unicode é中文"},
    ]


class TestEnvelopeCodec:
    def test_round_trip_identity_over_corpus(self):
        for message in conformance_corpus():
            assert protocol.decode(protocol.encode(message)) == message

    def test_full_double_precision(self):
        value = 0.1 + 0.2  # 0.30000000000000004
        out = protocol.decode(protocol.encode({"type": "eval", "seq": 1, "loss": value, "accuracy": 0.0}))
        assert out["loss"] == value

    def test_field_order_irrelevant(self):
        a = b'{"seq": 3, "type": "pause"}'
        b = b'{"type": "pause", "seq": 3}'
        assert protocol.decode(a) == protocol.decode(b)

    def test_rejects_non_object(self):
        with pytest.raises(protocol.ProtocolError):
            protocol.decode(b"[1, 2, 3]")

    def test_rejects_bad_json(self):
        with pytest.raises(protocol.ProtocolError):
            protocol.decode(b"{nope")

    def test_rejects_missing_type_or_seq(self):
        with pytest.raises(protocol.ProtocolError):
            protocol.decode(b'{"seq": 0}')
        with pytest.raises(protocol.ProtocolError):
            protocol.decode(b'{"type": "pause"}')
        with pytest.raises(protocol.ProtocolError):
            protocol.decode(b'{"type": "pause", "seq": -1}')
        with pytest.raises(protocol.ProtocolError):
            protocol.decode(b'{"type": "pause", "seq": true}')

    def test_rejects_nan(self):
        with pytest.raises(ValueError):
            protocol.encode({"type": "eval", "seq": 0, "loss": float("nan")})


class TestFraming:
    def test_frame_layout(self):
        framed = protocol.frame(b"abc")
        assert framed == b"\x00\x00\x00\x03abc"

    def test_reader_reassembles_split_frames(self):
        reader = protocol.FrameReader()
        framed = protocol.frame(b"hello") + protocol.frame(b"world")
        out = []
        for i in range(0, len(framed), 3):
            reader.feed(framed[i : i + 3])
            while (body := reader.next_frame()) is not None:
                out.append(body)
        assert out == [b"hello", b"world"]

    def test_zero_length_frame_is_protocol_error(self):
        reader = protocol.FrameReader()
        reader.feed(b"\x00\x00\x00\x00" + protocol.frame(b"ok"))
        with pytest.raises(protocol.ProtocolError):
            reader.next_frame()
        assert reader.next_frame() == b"ok"  # stream recovers after the bad frame

    def test_oversize_frame_fatal(self):
        reader = protocol.FrameReader()
        reader.feed(b"\xff\xff\xff\xff")
        with pytest.raises(protocol.FrameTooLarge):
            reader.next_frame()

    def test_http_request_against_raw_port_is_fatal(self):
        # An HTTP client hitting the raw port reads as a 1.2 GB frame claim.
        reader = protocol.FrameReader()
        reader.feed(b"GET / HTTP/1.1\r\n")
        with pytest.raises(protocol.FrameTooLarge):
            reader.next_frame()


class TestCommandMapping:
    def test_every_client_tag_maps(self):
        for message in conformance_corpus():
            if message["type"] in protocol.CLIENT_TAGS:
                protocol.command_from_payload(message)  # must not raise

    def test_unknown_tag(self):
        with pytest.raises(protocol.ProtocolError) as err:
            protocol.command_from_payload({"type": "warp_drive", "seq": 0})
        assert err.value.code == "unknown_type"

    def test_server_tags_are_not_commands(self):
        with pytest.raises(protocol.ProtocolError):
            protocol.command_from_payload({"type": "epoch", "seq": 0})

    def test_bad_position_rejected(self):
        for bad in ([1, 2], [1, 2, "x"], None, [1.0, 2.0, float("inf")]):
            with pytest.raises(protocol.ProtocolError):
                protocol.command_from_payload(
                    {"type": "drag_node", "seq": 0, "node_id": 1, "position": bad}
                )

    def test_bool_is_not_a_number(self):
        with pytest.raises(protocol.ProtocolError):
            protocol.command_from_payload(
                {"type": "set_hyperparams", "seq": 0, "learning_rate": True, "momentum": 0.0}
            )

    def test_shutdown_only_in_scripts(self):
        with pytest.raises(protocol.ProtocolError):
            protocol.command_from_payload({"type": "shutdown", "seq": 0})
        cmd = protocol.command_from_payload({"type": "shutdown", "seq": 0}, allow_script_tags=True)
        assert isinstance(cmd, session.Shutdown)

    def test_unknown_sonification_mode(self):
        with pytest.raises(protocol.ProtocolError):
            protocol.command_from_payload({"type": "set_sonification", "seq": 0, "mode": "loud"})


class TestEventPayloads:
    def test_weights_payload_shape_audit(self):
        net = nn.init_network([2304, 3, 4, 7], seed=0)
        metrics = nn.EpochMetrics(epoch=2, val_accuracy=0.5, val_loss=1.0)
        payload = protocol.event_to_payload(session.EpochCompleted(metrics, net))
        w = payload["weights"]
        assert w["w1"]["rows"] == 3 and w["w1"]["cols"] == 2304
        assert len(w["w1"]["data"]) == 3 * 2304
        assert len(w["w2"]["data"]) == 4 * 3
        assert len(w["w3"]["data"]) == 7 * 4
        assert len(w["b1"]) == 3 and len(w["b2"]) == 4 and len(w["b3"]) == 7
        # row-major: w2.data[cols*r + c] == W2[r, c]
        assert w["w2"]["data"][3 * 2 + 1] == net.W2[2, 1]
        assert json.loads(protocol.encode({**payload, "seq": 0}))["epoch"] == 2

    def test_layout_payload(self):
        graph = build_graph(nn.init_network([8, 3, 4, 5], seed=1), seed=2)
        payload = protocol.event_to_payload(session.LayoutFrame(graph.snapshot()))
        assert payload["type"] == "layout"
        assert len(payload["nodes"]) == 9
        assert len(payload["edges"]) == 19
        kinds = {n["kind"] for n in payload["nodes"]}
        assert kinds == {"input", "hidden1", "hidden2", "output"}
        for e in payload["edges"]:
            assert abs(e["w"]) <= 1.0

    def test_state_and_error_payloads(self):
        assert protocol.event_to_payload(session.StateChanged(session.SessionState.PAUSED)) == {
            "type": "state", "value": "paused",
        }
        assert protocol.event_to_payload(session.Error("x", "y")) == {
            "type": "error", "code": "x", "text": "y",
        }

    def test_hello_payload(self, tiny_dataset):
        s = session.Session(tiny_dataset, session.SessionConfig(h1=3, h2=4, epochs=1))
        payload = protocol.hello_payload(s.describe())
        assert payload["type"] == "hello"
        assert payload["protocol_version"] == 1
        assert payload["layer_sizes"] == [36, 3, 4, 7]
        assert payload["sonification"]["mode"] == "accuracy"
        assert set(payload["sonification"]["mappings"]) == {
            "accuracy", "loss", "learning_rate", "momentum",
        }


class TestScripts:
    def test_load_script(self, tmp_path):
        path = tmp_path / "script.jsonl"
        path.write_text(
            '{"at_step": 3, "cmd": {"type": "pause"}}\n'
            "# comment line\n"
            '{"at_step": 9, "cmd": {"type": "shutdown"}}\n'
        )
        script = protocol.load_script(str(path))
        assert script == [(3, session.Pause()), (9, session.Shutdown())]

    def test_bad_script_line(self, tmp_path):
        path = tmp_path / "script.jsonl"
        path.write_text('{"at_step": -1, "cmd": {"type": "pause"}}\n')
        with pytest.raises(ValueError, match="bad script entry"):
            protocol.load_script(str(path))

    def test_hello_ack_dropped(self, tmp_path):
        path = tmp_path / "script.jsonl"
        path.write_text('{"at_step": 0, "cmd": {"type": "hello_ack"}}\n')
        assert protocol.load_script(str(path)) == []
