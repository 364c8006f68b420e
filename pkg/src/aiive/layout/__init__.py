from .engine import (
    attractive_force,
    compute_forces,
    intra_layer_attraction,
    kernel_name,
    repulsive_force,
    step,
)
from .graph import (
    LayoutEdge,
    LayoutGraph,
    LayoutNode,
    LayoutParams,
    LayoutSnapshot,
    NodeKind,
    build_graph,
    insert_hidden_node,
    kind_from_wire,
    normalize_weights,
    refresh_weights,
    remove_hidden_node,
    weight_from_drag,
)

__all__ = [
    "LayoutEdge",
    "LayoutGraph",
    "LayoutNode",
    "LayoutParams",
    "LayoutSnapshot",
    "NodeKind",
    "attractive_force",
    "build_graph",
    "compute_forces",
    "insert_hidden_node",
    "intra_layer_attraction",
    "kernel_name",
    "kind_from_wire",
    "normalize_weights",
    "refresh_weights",
    "remove_hidden_node",
    "repulsive_force",
    "step",
    "weight_from_drag",
]
