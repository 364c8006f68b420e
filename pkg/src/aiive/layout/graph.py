"""Force-graph state mirroring the network: nodes, weight edges, geometry queries.

The graph stores flat numpy arrays (positions, velocities, edge index
arrays) so the stepping kernels can run without object traversal;
`LayoutNode`/`LayoutEdge` dataclasses are the snapshot view handed to
renderers and the wire protocol.

Aggregation: all 2304 inputs collapse to one input node and all classes
to one output node, so those edges carry the Euclidean norm of the
corresponding W1 row / W3 column instead of a single entry.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from ..nn import Mlp


class NodeKind(enum.IntEnum):
    INPUT = 0
    HIDDEN1 = 1
    HIDDEN2 = 2
    OUTPUT = 3

    @property
    def wire_name(self) -> str:
        return _WIRE_NAMES[self]


_WIRE_NAMES = {
    NodeKind.INPUT: "input",
    NodeKind.HIDDEN1: "hidden1",
    NodeKind.HIDDEN2: "hidden2",
    NodeKind.OUTPUT: "output",
}
_KINDS_BY_NAME = {v: k for k, v in _WIRE_NAMES.items()}


def kind_from_wire(name: str) -> NodeKind:
    return _KINDS_BY_NAME[name]


# Edge groups for per-layer-pair weight normalization.
GROUP_IN_H1 = 0
GROUP_H1_H2 = 1
GROUP_H2_OUT = 2


@dataclass
class LayoutNode:
    id: int
    kind: NodeKind
    position: np.ndarray
    velocity: np.ndarray
    pinned: bool = False


@dataclass
class LayoutEdge:
    a: int  # node id
    b: int  # node id
    raw_weight: float
    norm_weight: float


@dataclass
class LayoutParams:
    k_a: float = 1.0
    k_r: float = 1.0
    dt: float = 1.0 / 60.0
    damping: float = 0.98
    max_speed: float = 10.0
    epsilon_dist: float = 1e-3

    def __post_init__(self) -> None:
        for name in ("k_a", "k_r", "dt", "max_speed", "epsilon_dist"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.damping <= 1.0:
            raise ValueError("damping must be in [0, 1]")


@dataclass
class LayoutSnapshot:
    """Immutable copy handed to renderers/subscribers."""

    nodes: list[LayoutNode]
    edges: list[LayoutEdge]


class LayoutGraph:
    """Positions, velocities and normalized-weight edges for one network."""

    def __init__(self) -> None:
        self.ids: list[int] = []
        self.kinds: np.ndarray = np.zeros(0, dtype=np.int32)
        self.positions: np.ndarray = np.zeros((0, 3))
        self.velocities: np.ndarray = np.zeros((0, 3))
        self.pinned: np.ndarray = np.zeros(0, dtype=np.uint8)
        # Edges as parallel arrays over node *indices* (not ids).
        self.edge_a: np.ndarray = np.zeros(0, dtype=np.int32)
        self.edge_b: np.ndarray = np.zeros(0, dtype=np.int32)
        self.edge_group: np.ndarray = np.zeros(0, dtype=np.int32)
        self.raw_weights: np.ndarray = np.zeros(0)
        self.norm_weights: np.ndarray = np.zeros(0)
        self._next_id = 0
        self._index_of: dict[int, int] = {}
        self._intra_a: np.ndarray = np.zeros(0, dtype=np.int32)
        self._intra_b: np.ndarray = np.zeros(0, dtype=np.int32)

    # -- structure ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def num_edges(self) -> int:
        return len(self.edge_a)

    def index_of(self, node_id: int) -> int:
        try:
            return self._index_of[node_id]
        except KeyError:
            raise ValueError(f"unknown node id {node_id}") from None

    def kind_of(self, node_id: int) -> NodeKind:
        return NodeKind(int(self.kinds[self.index_of(node_id)]))

    def ids_of_kind(self, kind: NodeKind) -> list[int]:
        """Node ids of one kind, in neuron-index order."""
        return [nid for nid, k in zip(self.ids, self.kinds) if k == kind]

    def rank_in_kind(self, node_id: int) -> int:
        """Neuron index of a hidden node: its rank among same-kind nodes."""
        kind = self.kinds[self.index_of(node_id)]
        rank = 0
        for nid, k in zip(self.ids, self.kinds):
            if nid == node_id:
                return rank
            if k == kind:
                rank += 1
        raise ValueError(f"unknown node id {node_id}")

    def _add_node(self, kind: NodeKind, position: np.ndarray, at: int | None = None) -> int:
        node_id = self._next_id
        self._next_id += 1
        i = len(self.ids) if at is None else at
        self.ids.insert(i, node_id)
        self.kinds = np.insert(self.kinds, i, int(kind))
        self.positions = np.insert(self.positions, i, np.asarray(position, dtype=np.float64), axis=0)
        self.velocities = np.insert(self.velocities, i, np.zeros(3), axis=0)
        self.pinned = np.insert(self.pinned, i, 0)
        self._reindex()
        return node_id

    def _add_edge(self, ia: int, ib: int, group: int, raw: float) -> None:
        self.edge_a = np.append(self.edge_a, np.int32(ia))
        self.edge_b = np.append(self.edge_b, np.int32(ib))
        self.edge_group = np.append(self.edge_group, np.int32(group))
        self.raw_weights = np.append(self.raw_weights, float(raw))
        self.norm_weights = np.append(self.norm_weights, 0.0)

    def _reindex(self) -> None:
        self._index_of = {nid: i for i, nid in enumerate(self.ids)}
        self._rebuild_intra_pairs()

    def _rebuild_intra_pairs(self) -> None:
        pairs_a: list[int] = []
        pairs_b: list[int] = []
        for kind in (NodeKind.HIDDEN1, NodeKind.HIDDEN2):
            members = np.flatnonzero(self.kinds == kind)
            for i in range(len(members)):
                for j in range(i + 1, len(members)):
                    pairs_a.append(int(members[i]))
                    pairs_b.append(int(members[j]))
        self._intra_a = np.asarray(pairs_a, dtype=np.int32)
        self._intra_b = np.asarray(pairs_b, dtype=np.int32)

    @property
    def intra_pairs(self) -> tuple[np.ndarray, np.ndarray]:
        return self._intra_a, self._intra_b

    # -- snapshots ---------------------------------------------------------

    def node(self, node_id: int) -> LayoutNode:
        i = self.index_of(node_id)
        return LayoutNode(
            id=node_id,
            kind=NodeKind(int(self.kinds[i])),
            position=self.positions[i].copy(),
            velocity=self.velocities[i].copy(),
            pinned=bool(self.pinned[i]),
        )

    def snapshot(self) -> LayoutSnapshot:
        nodes = [self.node(nid) for nid in self.ids]
        edges = [
            LayoutEdge(
                a=self.ids[int(self.edge_a[e])],
                b=self.ids[int(self.edge_b[e])],
                raw_weight=float(self.raw_weights[e]),
                norm_weight=float(self.norm_weights[e]),
            )
            for e in range(self.num_edges)
        ]
        return LayoutSnapshot(nodes=nodes, edges=edges)

    # -- geometry ----------------------------------------------------------

    def center_of_mass(self) -> np.ndarray:
        return self.positions.mean(axis=0)

    def layer_center(self, kind: NodeKind) -> np.ndarray:
        members = self.kinds == kind
        if not members.any():
            raise ValueError(f"no nodes of kind {kind}")
        return self.positions[members].mean(axis=0)

    def set_position(self, node_id: int, position: np.ndarray) -> None:
        self.positions[self.index_of(node_id)] = np.asarray(position, dtype=np.float64)

    def set_pinned(self, node_id: int, pinned: bool) -> None:
        i = self.index_of(node_id)
        self.pinned[i] = 1 if pinned else 0
        if pinned:
            self.velocities[i] = 0.0

    # -- weights -----------------------------------------------------------

    def edge_coords(self, edge_index: int) -> tuple[str, int, int]:
        """Map an edge to its network parameter.

        Returns ("w1_row", i, -1), ("w2", j, i) or ("w3_col", j, -1) where
        i is the h1 neuron index and j the h2 neuron index.
        """
        group = int(self.edge_group[edge_index])
        ia, ib = int(self.edge_a[edge_index]), int(self.edge_b[edge_index])
        if group == GROUP_IN_H1:
            h1 = ib if self.kinds[ib] == NodeKind.HIDDEN1 else ia
            return ("w1_row", self.rank_in_kind(self.ids[h1]), -1)
        if group == GROUP_H1_H2:
            h1, h2 = (ia, ib) if self.kinds[ia] == NodeKind.HIDDEN1 else (ib, ia)
            return ("w2", self.rank_in_kind(self.ids[h2]), self.rank_in_kind(self.ids[h1]))
        h2 = ia if self.kinds[ia] == NodeKind.HIDDEN2 else ib
        return ("w3_col", self.rank_in_kind(self.ids[h2]), -1)

    def edges_of_node(self, node_id: int) -> list[int]:
        i = self.index_of(node_id)
        return [e for e in range(self.num_edges) if self.edge_a[e] == i or self.edge_b[e] == i]


def _unit_ball_points(rng: np.random.Generator, n: int) -> np.ndarray:
    """n seeded points uniform in the unit ball."""
    directions = rng.standard_normal((n, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True) + 1e-300
    radii = rng.uniform(0.0, 1.0, size=n) ** (1.0 / 3.0)
    return directions * radii[:, None]


def _edge_raws(net: Mlp) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Raw edge weights per group, in construction order."""
    in_h1 = np.linalg.norm(net.W1, axis=1)          # one per h1 neuron
    h1_h2 = net.W2.T.ravel()                        # (i, j) pairs, h1-major
    h2_out = np.linalg.norm(net.W3, axis=0)         # one per h2 neuron
    return in_h1, h1_h2, h2_out


def build_graph(net: Mlp, seed) -> LayoutGraph:
    """One node per hidden neuron plus aggregate input/output nodes,
    seeded-random initial positions in the unit ball, zero velocities."""
    _, n1, n2, _ = net.layer_sizes
    g = LayoutGraph()
    rng = np.random.default_rng(seed)
    points = _unit_ball_points(rng, 2 + n1 + n2)

    g._add_node(NodeKind.INPUT, points[0])
    for i in range(n1):
        g._add_node(NodeKind.HIDDEN1, points[1 + i])
    for j in range(n2):
        g._add_node(NodeKind.HIDDEN2, points[1 + n1 + j])
    g._add_node(NodeKind.OUTPUT, points[1 + n1 + n2])

    in_idx = 0
    h1_idx = list(range(1, 1 + n1))
    h2_idx = list(range(1 + n1, 1 + n1 + n2))
    out_idx = 1 + n1 + n2

    in_h1, h1_h2, h2_out = _edge_raws(net)
    for i in range(n1):
        g._add_edge(in_idx, h1_idx[i], GROUP_IN_H1, in_h1[i])
    for i in range(n1):
        for j in range(n2):
            g._add_edge(h1_idx[i], h2_idx[j], GROUP_H1_H2, h1_h2[i * n2 + j])
    for j in range(n2):
        g._add_edge(h2_idx[j], out_idx, GROUP_H2_OUT, h2_out[j])

    normalize_weights(g)
    return g


def normalize_weights(graph: LayoutGraph, raw_weights: np.ndarray | None = None) -> LayoutGraph:
    """norm = raw / max |raw| within the edge's layer pair (0 if the max is 0)."""
    if raw_weights is not None:
        raw_weights = np.asarray(raw_weights, dtype=np.float64)
        if raw_weights.shape != graph.raw_weights.shape:
            raise ValueError(
                f"got {raw_weights.shape[0]} weights for {graph.num_edges} edges"
            )
        graph.raw_weights = raw_weights.copy()
    norms = np.zeros_like(graph.raw_weights)
    for group in (GROUP_IN_H1, GROUP_H1_H2, GROUP_H2_OUT):
        members = graph.edge_group == group
        if not members.any():
            continue
        peak = np.abs(graph.raw_weights[members]).max()
        if peak > 0.0:
            norms[members] = graph.raw_weights[members] / peak
    graph.norm_weights = norms
    return graph


def refresh_weights(graph: LayoutGraph, net: Mlp) -> LayoutGraph:
    """Re-derive all raw edge weights from the net (same topology) and renormalize."""
    in_h1, h1_h2, h2_out = _edge_raws(net)
    raws = np.concatenate([in_h1, h1_h2, h2_out])
    order = np.concatenate(
        [
            np.flatnonzero(graph.edge_group == GROUP_IN_H1),
            np.flatnonzero(graph.edge_group == GROUP_H1_H2),
            np.flatnonzero(graph.edge_group == GROUP_H2_OUT),
        ]
    )
    if len(order) != len(raws):
        raise ValueError("graph topology does not match the network")
    new_raws = graph.raw_weights.copy()
    new_raws[order] = raws
    return normalize_weights(graph, new_raws)


def insert_hidden_node(graph: LayoutGraph, net: Mlp, which: int, position: np.ndarray) -> int:
    """Mirror a grown hidden layer: append the node and its edges, renormalize.

    The net must already contain the new neuron (as the last one of its
    layer). Returns the new node id. Surviving nodes keep position,
    velocity and id.
    """
    kind = NodeKind.HIDDEN1 if which == 1 else NodeKind.HIDDEN2
    same = graph.ids_of_kind(kind)
    # Keep same-kind nodes contiguous in neuron order: insert after the last one.
    at = graph.index_of(same[-1]) + 1 if same else (1 if kind == NodeKind.HIDDEN1 else len(graph.ids) - 1)
    node_id = graph._add_node(kind, position, at=at)
    # Index arrays shifted by the insertion.
    graph.edge_a = np.where(graph.edge_a >= at, graph.edge_a + 1, graph.edge_a).astype(np.int32)
    graph.edge_b = np.where(graph.edge_b >= at, graph.edge_b + 1, graph.edge_b).astype(np.int32)

    i_new = graph.index_of(node_id)
    in_idx = graph.index_of(graph.ids_of_kind(NodeKind.INPUT)[0])
    out_idx = graph.index_of(graph.ids_of_kind(NodeKind.OUTPUT)[0])
    if which == 1:
        rank = graph.rank_in_kind(node_id)
        graph._add_edge(in_idx, i_new, GROUP_IN_H1, np.linalg.norm(net.W1[rank]))
        for other in graph.ids_of_kind(NodeKind.HIDDEN2):
            j = graph.rank_in_kind(other)
            graph._add_edge(i_new, graph.index_of(other), GROUP_H1_H2, net.W2[j, rank])
    else:
        rank = graph.rank_in_kind(node_id)
        for other in graph.ids_of_kind(NodeKind.HIDDEN1):
            i = graph.rank_in_kind(other)
            graph._add_edge(graph.index_of(other), i_new, GROUP_H1_H2, net.W2[rank, i])
        graph._add_edge(i_new, out_idx, GROUP_H2_OUT, np.linalg.norm(net.W3[:, rank]))
    normalize_weights(graph)
    return node_id


def remove_hidden_node(graph: LayoutGraph, node_id: int) -> None:
    """Drop a hidden node and its incident edges; other nodes keep state."""
    i = graph.index_of(node_id)
    if graph.kinds[i] not in (NodeKind.HIDDEN1, NodeKind.HIDDEN2):
        raise ValueError("only hidden nodes can be removed")
    keep = [e for e in range(graph.num_edges) if graph.edge_a[e] != i and graph.edge_b[e] != i]
    graph.edge_a = graph.edge_a[keep]
    graph.edge_b = graph.edge_b[keep]
    graph.edge_group = graph.edge_group[keep]
    graph.raw_weights = graph.raw_weights[keep]
    graph.norm_weights = graph.norm_weights[keep]
    graph.edge_a = np.where(graph.edge_a > i, graph.edge_a - 1, graph.edge_a).astype(np.int32)
    graph.edge_b = np.where(graph.edge_b > i, graph.edge_b - 1, graph.edge_b).astype(np.int32)

    del graph.ids[i]
    graph.kinds = np.delete(graph.kinds, i)
    graph.positions = np.delete(graph.positions, i, axis=0)
    graph.velocities = np.delete(graph.velocities, i, axis=0)
    graph.pinned = np.delete(graph.pinned, i)
    graph._reindex()
    normalize_weights(graph)


def weight_from_drag(raw_weight: float, d_old: float, d_new: float, epsilon_dist: float = 1e-3) -> float:
    """Rescale a raw weight after a drag changed the endpoint distance.

    From the pair balance k_a|W| = k_r/d^2: halving the distance quadruples
    the magnitude. Sign is preserved; distances are floored.
    """
    d_old = max(float(d_old), epsilon_dist)
    d_new = max(float(d_new), epsilon_dist)
    return float(raw_weight) * (d_old / d_new) ** 2
