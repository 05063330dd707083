"""Middleware for coupling heterogeneous functional-structural plant models.

State is exchanged through a single-rooted multiscale property graph, moved
between simulators as XEG documents over a lockstep one-client/many-servers
protocol, and reshaped on the way by a staged transformation pipeline
(edge-type mapping, local/global geometry, graphic-type translation, unit
conversion, scale decomposition and property upscaling).
"""

from fspm_bridge.graph import (
    EdgeType,
    ExchangeGraph,
    GraphBuilder,
    GraphEdge,
    GraphNode,
    Violation,
    canonical_diff,
    canonical_equal,
)
from fspm_bridge.values import PropValue

__version__ = "0.1.0"

__all__ = [
    "EdgeType",
    "ExchangeGraph",
    "GraphBuilder",
    "GraphEdge",
    "GraphNode",
    "PropValue",
    "Violation",
    "canonical_diff",
    "canonical_equal",
    "__version__",
]
