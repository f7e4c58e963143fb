"""Hop-by-hop forwarding auctions for offloading a WiFi backbone onto an ad hoc network."""

from .money import money
from .topology import Topology, generate_geometric, load_topology, save_topology
from .tightness import StrategyParams
from .config import GameConfig, load_config, parse_config
from .engine import run_experiment, run_game

__all__ = [
    "GameConfig",
    "StrategyParams",
    "Topology",
    "generate_geometric",
    "load_config",
    "load_topology",
    "money",
    "parse_config",
    "run_experiment",
    "run_game",
    "save_topology",
]
