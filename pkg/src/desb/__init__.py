"""Neuroevolution of fixed-topology tanh networks by differential evolution,
with optional breaking of the networks' point and permutation symmetries."""

from .de import DEConfig, RunResult, run_de
from .network import NetworkCost, Topology, parse_topology
from .symmetry import count_symmetric_equivalents, mgod_step

__version__ = "0.1.0"

__all__ = ["DEConfig", "RunResult", "run_de", "NetworkCost", "Topology", "parse_topology",
           "count_symmetric_equivalents", "mgod_step"]
