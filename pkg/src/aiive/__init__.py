"""aiive: a live, steerable MLP training engine with a force-directed 3D
view of the network, pitch sonification of its metrics, and a framed
JSON wire protocol for interactive clients."""

__version__ = "0.1.0"

from . import data, layout, nn, protocol, sonify
from .session import Session, SessionConfig, SessionState

__all__ = [
    "Session",
    "SessionConfig",
    "SessionState",
    "data",
    "layout",
    "nn",
    "protocol",
    "sonify",
    "__version__",
]
