"""Byzantine-resilient network partition detection (NECTAR) with baselines and a round simulator."""

from .graph import Graph, gen_topology, vertex_connectivity, is_partitioned
from .nectar import Decision, NectarNode, Verdict
from .simnet import measure, run

__all__ = [
    "Graph",
    "gen_topology",
    "vertex_connectivity",
    "is_partitioned",
    "Decision",
    "NectarNode",
    "Verdict",
    "measure",
    "run",
]
__version__ = "0.1.0"
