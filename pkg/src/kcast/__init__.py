"""Byzantine agreement over k-cast channels: protocol, adversaries, harness."""

from .adversary import (
    ChainAdversary,
    ChainPartition,
    RandomStrategy,
    ScriptedStrategy,
    SilentStrategy,
    Strategy,
    build_chain,
    chain_adversary,
    enumerate_adversaries,
    random_adversary,
    ring_feasible,
)
from .distribution import Report, consistent, distribute, ksubsets, uniform_value
from .harness import RunConfig, Verdict, check_threshold, replay, run, sweep
from .netmodel import Cast, Config, Engine, Transcript, deliver_cast
from .protocol import (
    broadcast,
    broadcast_from_consensus,
    build_schedule,
    consensus_from_broadcast,
)
from .trustgraph import TrustGraph, TrustNode, build_trust_graph, decide, has_bistar, prune

__all__ = [
    "broadcast",
    "broadcast_from_consensus",
    "build_chain",
    "build_schedule",
    "build_trust_graph",
    "Cast",
    "chain_adversary",
    "ChainAdversary",
    "ChainPartition",
    "check_threshold",
    "Config",
    "consensus_from_broadcast",
    "consistent",
    "decide",
    "deliver_cast",
    "distribute",
    "Engine",
    "enumerate_adversaries",
    "has_bistar",
    "ksubsets",
    "prune",
    "random_adversary",
    "RandomStrategy",
    "replay",
    "Report",
    "ring_feasible",
    "run",
    "RunConfig",
    "ScriptedStrategy",
    "SilentStrategy",
    "Strategy",
    "sweep",
    "Transcript",
    "TrustGraph",
    "TrustNode",
    "uniform_value",
    "Verdict",
]
