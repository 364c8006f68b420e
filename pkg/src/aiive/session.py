"""Training session: the state machine tying net, layout and sonifier together.

One owner thread drives the deterministic tick loop (`Session.run`);
other threads may only `submit` commands. Each tick: drain due commands,
one training batch if Running, one layout step, then frame/audio events
on their fixed cadences (layout frames every 3rd tick = 20 Hz of the
60 ticks/s simulated clock, audio targets every 6th = 10 Hz).

Edits follow the pause gesture semantics: nothing structural happens
while Running, weight drags re-derive weights from distance changes, and
hyperparameter changes are staged until Resume.
"""

from __future__ import annotations

import enum
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Iterator, Union

import numpy as np

from . import layout, nn, sonify
from .data import Dataset

TICKS_PER_SECOND = 60
LAYOUT_FRAME_EVERY = 3  # 20 Hz
AUDIO_EVERY = 6  # 10 Hz
EDIT_RADIUS = 1.0  # layout units, server-side re-check of the spawn/delete gesture


class SessionState(enum.Enum):
    RUNNING = "running"
    PAUSED = "paused"
    EDITING_STRUCTURE = "editing_structure"
    EDITING_WEIGHTS = "editing_weights"
    TUNING_HYPERPARAMS = "tuning_hyperparams"


# -- commands ---------------------------------------------------------------


@dataclass(frozen=True)
class Pause:
    pass


@dataclass(frozen=True)
class Resume:
    pass


@dataclass(frozen=True)
class SetHyperparams:
    learning_rate: float
    momentum: float


@dataclass(frozen=True)
class AddNeuron:
    layer: int
    position: tuple[float, float, float]


@dataclass(frozen=True)
class RemoveNeuron:
    layer: int
    node_id: int
    position: tuple[float, float, float]


@dataclass(frozen=True)
class DragNode:
    node_id: int
    position: tuple[float, float, float]


@dataclass(frozen=True)
class ReleaseNode:
    node_id: int


@dataclass(frozen=True)
class SetSonification:
    mode: sonify.SonificationMode


@dataclass(frozen=True)
class EvaluateNow:
    pass


@dataclass(frozen=True)
class Shutdown:
    pass


Command = Union[
    Pause, Resume, SetHyperparams, AddNeuron, RemoveNeuron,
    DragNode, ReleaseNode, SetSonification, EvaluateNow, Shutdown,
]


# -- events -------------------------------------------------------------------


@dataclass(frozen=True)
class StateChanged:
    state: SessionState


@dataclass(frozen=True)
class EpochCompleted:
    metrics: nn.EpochMetrics
    weights: nn.Mlp  # immutable copy


@dataclass(frozen=True)
class LayoutFrame:
    snapshot: layout.LayoutSnapshot


@dataclass(frozen=True)
class HyperparamsChanged:
    hyperparams: nn.Hyperparams


@dataclass(frozen=True)
class StructureChanged:
    layer_sizes: tuple[int, int, int, int]


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    loss: float


@dataclass(frozen=True)
class AudioTargets:
    left_freq: float
    right_freq: float


@dataclass(frozen=True)
class Error:
    code: str
    text: str


Event = Union[
    StateChanged, EpochCompleted, LayoutFrame, HyperparamsChanged,
    StructureChanged, EvalResult, AudioTargets, Error,
]


# -- config -------------------------------------------------------------------


@dataclass
class SessionConfig:
    h1: int = 32
    h2: int = 16
    seed: int = 0
    hyperparams: nn.Hyperparams = field(default_factory=nn.Hyperparams)
    epochs: int | None = None
    paper_literal_momentum: bool = False
    layout_params: layout.LayoutParams = field(default_factory=layout.LayoutParams)
    sonification_mode: sonify.SonificationMode = sonify.SonificationMode.ACCURACY_BOTH
    realtime: bool = False  # pace ticks to wall clock (serve mode)
    exit_on_completion: bool = True  # stop the loop once the epoch target is reached


@dataclass(frozen=True)
class SessionSeeds:
    """Independent deterministic streams derived from the one user seed."""

    init: np.random.SeedSequence
    shuffle: np.random.SeedSequence
    layout: np.random.SeedSequence
    edits: np.random.SeedSequence


def derive_seeds(seed: int) -> SessionSeeds:
    return SessionSeeds(*np.random.SeedSequence(seed).spawn(4))


_KIND_FOR_LAYER = {1: layout.NodeKind.HIDDEN1, 2: layout.NodeKind.HIDDEN2}


class Session:
    """Owns the network, the force graph and the sonifier state."""

    def __init__(self, dataset: Dataset, config: SessionConfig) -> None:
        if config.hyperparams.batch_size > len(dataset.train_idx):
            raise ValueError("batch_size exceeds the training split")
        self.dataset = dataset
        self.config = config
        self.seeds = derive_seeds(config.seed)

        sizes = [dataset.input_dim, config.h1, config.h2, dataset.num_classes]
        self.net = nn.init_network(sizes, np.random.default_rng(self.seeds.init))
        self.velocity = nn.GradientSet.zeros_like(self.net)
        self.hp = config.hyperparams
        self.graph = layout.build_graph(self.net, np.random.default_rng(self.seeds.layout))
        self.mappings = sonify.default_mappings(dataset.num_classes)
        self.mode = config.sonification_mode

        self.state = SessionState.RUNNING
        self.tick = 0
        self.epoch = 0
        self._shuffle_rng = np.random.default_rng(self.seeds.shuffle)
        self._edit_seq = self.seeds.edits
        self._plan: list[np.ndarray] = []
        self._staged_hp: nn.Hyperparams | None = None
        self._tuning_param: str | None = None
        self._dragging: int | None = None
        self._training_done = config.epochs == 0
        self._shutdown = False
        self._live_commands: deque[Command] = deque()

        acc, loss = self._evaluate()
        self.latest_accuracy = acc
        self.latest_loss = loss

    # -- thread-safe producer side -------------------------------------------

    def submit(self, command: Command) -> None:
        """Queue a command from any thread; applied at the next tick boundary."""
        self._live_commands.append(command)

    def describe(self) -> dict:
        """Snapshot for the protocol hello message."""
        hp = self.hp
        return {
            "layer_sizes": list(self.net.layer_sizes),
            "hyperparams": {
                "learning_rate": hp.learning_rate,
                "momentum": hp.momentum,
                "batch_size": hp.batch_size,
            },
            "sonification": {
                "mode": self.mode.value,
                "mappings": {
                    name: {
                        "f_min": m.f_min,
                        "f_max": m.f_max,
                        "domain_min": m.domain_min,
                        "domain_max": m.domain_max,
                        "scale": m.scale,
                    }
                    for name, m in self.mappings.items()
                },
            },
        }

    # -- helpers ---------------------------------------------------------------

    def _evaluate(self) -> tuple[float, float]:
        ds = self.dataset
        return nn.evaluate(
            self.net, ds.images[ds.val_idx], ds.labels[ds.val_idx], ds.num_classes
        )

    def current_frequencies(self) -> tuple[float, float]:
        """Routed (left, right) targets; a tuned hyperparameter takes over the
        channel matching the adjusting hand (learning rate right, momentum left)."""
        fa = sonify.map_to_freq(self.mappings["accuracy"], self.latest_accuracy)
        fl = sonify.map_to_freq(self.mappings["loss"], self.latest_loss)
        left, right = sonify.route(self.mode, fa, fl)
        if self.state is SessionState.TUNING_HYPERPARAMS and self._tuning_param:
            hp = self._staged_hp or self.hp
            value = getattr(hp, self._tuning_param)
            tone = sonify.map_to_freq(self.mappings[self._tuning_param], value)
            if self._tuning_param == "learning_rate":
                right = tone
            else:
                left = tone
        return left, right

    def _set_state(self, state: SessionState, events: list[Event]) -> None:
        if state is not self.state:
            self.state = state
            events.append(StateChanged(state))

    def _error(self, events: list[Event], code: str, text: str) -> None:
        events.append(Error(code, text))

    def _next_edit_seed(self) -> np.random.SeedSequence:
        child = self._edit_seq.spawn(1)[0]
        return child

    # -- transition function -----------------------------------------------------

    def handle(self, command: Command) -> list[Event]:
        """Apply one command: returns the emitted events (state unchanged on error)."""
        events: list[Event] = []
        state = self.state

        if isinstance(command, Pause):
            if state is SessionState.RUNNING:
                self._set_state(SessionState.PAUSED, events)
            else:
                self._error(events, "illegal_command", f"pause ignored in state {state.value}")

        elif isinstance(command, Resume):
            if state is SessionState.RUNNING:
                self._error(events, "illegal_command", "resume ignored while running")
            else:
                if self._dragging is not None:
                    self.graph.set_pinned(self._dragging, False)
                    self._dragging = None
                if self._staged_hp is not None:
                    self.hp = self._staged_hp
                    self._staged_hp = None
                    events.append(HyperparamsChanged(self.hp))
                self._tuning_param = None
                self._set_state(SessionState.RUNNING, events)

        elif isinstance(command, SetHyperparams):
            if state not in (
                SessionState.RUNNING, SessionState.PAUSED, SessionState.TUNING_HYPERPARAMS,
            ):
                self._error(events, "illegal_command", f"cannot tune hyperparams in state {state.value}")
            else:
                try:
                    staged = nn.Hyperparams(
                        learning_rate=command.learning_rate,
                        momentum=command.momentum,
                        batch_size=self.hp.batch_size,
                    )
                except ValueError as exc:
                    self._error(events, "invalid_argument", str(exc))
                else:
                    base = self._staged_hp or self.hp
                    if staged.learning_rate != base.learning_rate:
                        self._tuning_param = "learning_rate"
                    elif staged.momentum != base.momentum:
                        self._tuning_param = "momentum"
                    self._staged_hp = staged
                    self._set_state(SessionState.TUNING_HYPERPARAMS, events)
                    events.append(AudioTargets(*self.current_frequencies()))

        elif isinstance(command, AddNeuron):
            if state not in (SessionState.PAUSED, SessionState.EDITING_STRUCTURE):
                self._error(events, "illegal_command", f"cannot add a neuron in state {state.value}")
            elif command.layer not in _KIND_FOR_LAYER:
                self._error(events, "invalid_argument", f"no hidden layer {command.layer}")
            else:
                kind = _KIND_FOR_LAYER[command.layer]
                center = self.graph.layer_center(kind)
                pos = np.asarray(command.position, dtype=np.float64)
                if np.linalg.norm(pos - center) > EDIT_RADIUS:
                    self._error(
                        events, "threshold",
                        f"spawn position farther than {EDIT_RADIUS} from the layer center",
                    )
                else:
                    count = self.net.layer_sizes[command.layer]
                    self.net, self.velocity = nn.resize_hidden_layer(
                        self.net, command.layer, count + 1,
                        np.random.default_rng(self._next_edit_seed()),
                        velocity=self.velocity,
                    )
                    layout.insert_hidden_node(self.graph, self.net, command.layer, pos)
                    self._set_state(SessionState.EDITING_STRUCTURE, events)
                    events.append(StructureChanged(tuple(self.net.layer_sizes)))

        elif isinstance(command, RemoveNeuron):
            if state not in (
                SessionState.PAUSED, SessionState.EDITING_STRUCTURE, SessionState.EDITING_WEIGHTS,
            ):
                self._error(events, "illegal_command", f"cannot remove a neuron in state {state.value}")
            else:
                events.extend(self._remove_neuron(command))

        elif isinstance(command, DragNode):
            if state not in (
                SessionState.PAUSED, SessionState.EDITING_STRUCTURE, SessionState.EDITING_WEIGHTS,
            ):
                self._error(events, "illegal_command", f"cannot drag nodes in state {state.value}")
            else:
                try:
                    self._apply_drag(command)
                except ValueError as exc:
                    self._error(events, "invalid_argument", str(exc))
                else:
                    self._set_state(SessionState.EDITING_WEIGHTS, events)

        elif isinstance(command, ReleaseNode):
            if state is not SessionState.EDITING_WEIGHTS or self._dragging != command.node_id:
                self._error(events, "illegal_command", "no matching drag to release")
            else:
                self.graph.set_pinned(command.node_id, False)
                self._dragging = None
                acc, loss = self._evaluate()
                self.latest_accuracy, self.latest_loss = acc, loss
                events.append(EvalResult(acc, loss))
                self._set_state(SessionState.PAUSED, events)

        elif isinstance(command, SetSonification):
            self.mode = command.mode
            events.append(AudioTargets(*self.current_frequencies()))

        elif isinstance(command, EvaluateNow):
            acc, loss = self._evaluate()
            self.latest_accuracy, self.latest_loss = acc, loss
            events.append(EvalResult(acc, loss))

        elif isinstance(command, Shutdown):
            self._shutdown = True

        else:
            self._error(events, "invalid_argument", f"unknown command {command!r}")
        return events

    def _remove_neuron(self, command: RemoveNeuron) -> list[Event]:
        events: list[Event] = []
        if command.layer not in _KIND_FOR_LAYER:
            self._error(events, "invalid_argument", f"no hidden layer {command.layer}")
            return events
        kind = _KIND_FOR_LAYER[command.layer]
        try:
            node_kind = self.graph.kind_of(command.node_id)
        except ValueError as exc:
            self._error(events, "invalid_argument", str(exc))
            return events
        if node_kind is not kind:
            self._error(events, "invalid_argument", f"node {command.node_id} is not in layer {command.layer}")
            return events
        count = self.net.layer_sizes[command.layer]
        if count <= 1:
            self._error(events, "invalid_argument", "cannot remove the last neuron of a layer")
            return events
        center = self.graph.layer_center(kind)
        pos = np.asarray(command.position, dtype=np.float64)
        if np.linalg.norm(pos - center) > EDIT_RADIUS:
            self._error(
                events, "threshold",
                f"drop position farther than {EDIT_RADIUS} from the layer center",
            )
            return events

        if self._dragging == command.node_id:
            self._dragging = None
        rank = self.graph.rank_in_kind(command.node_id)
        self.net, self.velocity = nn.resize_hidden_layer(
            self.net, command.layer, count - 1,
            np.random.default_rng(0),  # shrink draws nothing
            velocity=self.velocity, remove_index=rank,
        )
        layout.remove_hidden_node(self.graph, command.node_id)
        self._set_state(SessionState.EDITING_STRUCTURE, events)
        events.append(StructureChanged(tuple(self.net.layer_sizes)))
        return events

    def _apply_drag(self, command: DragNode) -> None:
        """Pin the node to the dragged position and rescale the weights of its
        edges from the distance changes."""
        g = self.graph
        i = g.index_of(command.node_id)
        new_pos = np.asarray(command.position, dtype=np.float64)
        if new_pos.shape != (3,) or not np.all(np.isfinite(new_pos)):
            raise ValueError(f"bad drag position {command.position!r}")
        old_pos = g.positions[i].copy()
        eps = self.config.layout_params.epsilon_dist

        for e in g.edges_of_node(command.node_id):
            other = int(g.edge_b[e]) if int(g.edge_a[e]) == i else int(g.edge_a[e])
            d_old = float(np.linalg.norm(old_pos - g.positions[other]))
            d_new = float(np.linalg.norm(new_pos - g.positions[other]))
            new_raw = layout.weight_from_drag(g.raw_weights[e], d_old, d_new, eps)
            self._write_edge_weight(e, new_raw)
            g.raw_weights[e] = new_raw
        layout.normalize_weights(g)

        g.set_position(command.node_id, new_pos)
        g.set_pinned(command.node_id, True)
        self._dragging = command.node_id

    def _write_edge_weight(self, edge_index: int, new_raw: float) -> None:
        """Push one edge's raw weight back into the network parameters.

        Aggregate edges carry a row/column norm: scaling every entry by the
        norm ratio preserves direction and signs. A zero row/column stays
        zero (no direction to scale).
        """
        target, j, i = self.graph.edge_coords(edge_index)
        old_raw = float(self.graph.raw_weights[edge_index])
        if target == "w2":
            nn.set_edge_weight(self.net, 2, j, i, new_raw)
        elif target == "w1_row":
            if old_raw > 0.0:
                self.net.W1[j, :] *= new_raw / old_raw
        else:  # w3_col
            if old_raw > 0.0:
                self.net.W3[:, j] *= new_raw / old_raw

    # -- tick loop -------------------------------------------------------------

    def run(self, script: list[tuple[int, Command]] | None = None) -> Iterator[Event]:
        """Drive the session until shutdown or the epoch target.

        `script` is a list of (at_tick, command) pairs, applied in order at
        their tick boundaries; live commands (submit) are drained first each
        tick. The event stream is a pure function of (dataset, config,
        script) when no live commands arrive.
        """
        pending = sorted(script or [], key=lambda item: item[0])
        cursor = 0
        yield StateChanged(self.state)
        next_deadline = time.monotonic()
        while not self._shutdown:
            while self._live_commands:
                for ev in self.handle(self._live_commands.popleft()):
                    yield ev
                if self._shutdown:
                    return
            while cursor < len(pending) and pending[cursor][0] <= self.tick:
                for ev in self.handle(pending[cursor][1]):
                    yield ev
                cursor += 1
                if self._shutdown:
                    return

            for ev in self._tick():
                yield ev
            self.tick += 1

            if self.config.realtime:
                next_deadline += 1.0 / TICKS_PER_SECOND
                delay = next_deadline - time.monotonic()
                if delay > 0:
                    time.sleep(delay)
                else:
                    next_deadline = time.monotonic()

            if (
                self._training_done
                and self.config.exit_on_completion
                and cursor >= len(pending)
            ):
                return

    def _tick(self) -> list[Event]:
        events: list[Event] = []

        if self.state is SessionState.RUNNING and not self._training_done:
            try:
                events.extend(self._train_one_batch())
            except nn.NumericError as exc:
                self._error(events, "numeric", str(exc))
                self._set_state(SessionState.PAUSED, events)

        try:
            layout.step(self.graph, self.config.layout_params)
        except nn.NumericError as exc:
            self._error(events, "numeric", str(exc))
            self._set_state(SessionState.PAUSED, events)

        if self.tick % LAYOUT_FRAME_EVERY == 0:
            events.append(LayoutFrame(self.graph.snapshot()))
        if self.tick % AUDIO_EVERY == 0:
            events.append(AudioTargets(*self.current_frequencies()))
        return events

    def _train_one_batch(self) -> list[Event]:
        events: list[Event] = []
        ds = self.dataset
        if not self._plan:
            self._plan = nn.epoch_batches(
                self._shuffle_rng, len(ds.train_idx), self.hp.batch_size
            )
        batch = self._plan.pop(0)
        idx = ds.train_idx[batch]
        x = ds.images[idx]
        t = nn.one_hot(ds.labels[idx], ds.num_classes)
        nn.train_step(
            self.net, self.velocity, x, t, self.hp,
            paper_literal=self.config.paper_literal_momentum,
        )
        layout.refresh_weights(self.graph, self.net)

        if not self._plan:
            acc, loss = self._evaluate()
            metrics = nn.EpochMetrics(epoch=self.epoch, val_accuracy=acc, val_loss=loss)
            self.epoch += 1
            self.latest_accuracy, self.latest_loss = acc, loss
            events.append(EpochCompleted(metrics, self.net.copy()))
            if self.config.epochs is not None and self.epoch >= self.config.epochs:
                self._training_done = True
                if not self.config.exit_on_completion:
                    self._set_state(SessionState.PAUSED, events)
        return events
