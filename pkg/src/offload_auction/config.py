"""Scenario configuration: JSON document, ``version: 1``.

Example::

    {
      "version": 1,
      "seed": 42,
      "rounds": 2,
      "games_per_round": 50,
      "auction_window": 3.0,
      "topology": {"generate": {"handhelds": 8, "aps": 2, "radius": 0.5}},
      "strategies": {"default": "tightness", "nodes": {"5": "greedy_zero_budget"}},
      "packet": {
        "budget": {"uniform": [50, 200]},
        "fine": {"fraction": 0.4},
        "timeout": {"slack": 2}
      },
      "params": {"k1": 2, "k2": 3}
    }

``topology`` is either ``{"file": path}`` (relative to the config file) or
``{"generate": {handhelds, aps, radius, seed?, max_attempts?}}``. Packet
fields accept a constant, ``{"uniform": [lo, hi]}``; ``fine`` also accepts
``{"fraction": f}`` of the drawn budget, and ``timeout`` accepts
``{"slack": s}`` meaning shortest source-destination hop count plus ``s``.
``packet.source`` and ``packet.destination`` optionally pin the endpoint APs;
otherwise each game draws two distinct APs.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any, Mapping, Optional

from .money import money
from .strategies import StrategyKind
from .tightness import StrategyParams
from .topology import Topology, generate_geometric, load_topology

CONFIG_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class Dist:
    """Constant, uniform range, fraction-of-budget or slack-over-shortest-path."""

    kind: str
    lo: Decimal
    hi: Decimal = Decimal(0)


def _dec(name: str, value) -> Decimal:
    if isinstance(value, bool):
        raise ConfigError(name, "expected a number")
    try:
        return Decimal(str(value))
    except (InvalidOperation, ValueError):
        raise ConfigError(name, f"expected a number, got {value!r}") from None


def _parse_dist(name: str, raw, allowed: tuple[str, ...]) -> Dist:
    if isinstance(raw, (int, float, str)) and not isinstance(raw, bool):
        return Dist("constant", _dec(name, raw))
    if isinstance(raw, Mapping) and len(raw) == 1:
        (kind, val), = raw.items()
        if kind not in allowed:
            raise ConfigError(name, f"unsupported form {kind!r}; use one of {allowed}")
        if kind == "uniform":
            if not (isinstance(val, list) and len(val) == 2):
                raise ConfigError(name, "uniform expects [lo, hi]")
            lo, hi = _dec(name, val[0]), _dec(name, val[1])
            if lo > hi:
                raise ConfigError(name, "uniform range has lo > hi")
            return Dist(kind, lo, hi)
        return Dist(kind, _dec(name, val))
    raise ConfigError(name, f"cannot interpret {raw!r}")


@dataclass(frozen=True)
class PacketSpec:
    budget: Dist = Dist("uniform", Decimal(50), Decimal(200))
    fine: Dist = Dist("fraction", Decimal("0.4"))
    timeout: Dist = Dist("slack", Decimal(2))
    source: Optional[int] = None
    destination: Optional[int] = None

    def validate(self) -> None:
        b, f, h = self.budget, self.fine, self.timeout
        if self.source is not None and self.source == self.destination:
            raise ConfigError("packet.destination", "source and destination must differ")
        if b.lo < 0:
            raise ConfigError("packet.budget", "budget must be non-negative")
        if f.kind == "fraction":
            if not 0 <= f.lo <= 1:
                raise ConfigError("packet.fine", "fine fraction must be in [0, 1] so fine <= budget")
        else:
            f_hi = f.hi if f.kind == "uniform" else f.lo
            if f.lo < 0:
                raise ConfigError("packet.fine", "fine must be non-negative")
            if f_hi > b.lo:
                raise ConfigError("packet.fine", "fine exceeds budget (fine must be <= budget)")
        if h.kind == "slack":
            if h.lo < 0 or h.lo != h.lo.to_integral_value():
                raise ConfigError("packet.timeout", "slack must be a non-negative integer")
        else:
            if h.lo < 1:
                raise ConfigError("packet.timeout", "timeout must be at least 1 hop")
            if any(v != v.to_integral_value() for v in (h.lo, h.hi if h.kind == "uniform" else h.lo)):
                raise ConfigError("packet.timeout", "timeout must be an integer number of hops")

    def draw(self, rng: random.Random, shortest: int) -> tuple[Decimal, Decimal, int]:
        b = self.budget
        budget = money(b.lo) if b.kind == "constant" else money(rng.uniform(float(b.lo), float(b.hi)))
        f = self.fine
        if f.kind == "fraction":
            fine = money(f.lo * budget)
        elif f.kind == "constant":
            fine = money(f.lo)
        else:
            fine = money(rng.uniform(float(f.lo), float(f.hi)))
        fine = min(fine, budget)
        h = self.timeout
        if h.kind == "slack":
            timeout = shortest + int(h.lo)
        elif h.kind == "constant":
            timeout = int(h.lo)
        else:
            timeout = rng.randint(int(h.lo), int(h.hi))
        return budget, fine, timeout


@dataclass(frozen=True)
class TopologySource:
    file: Optional[Path] = None
    handhelds: int = 8
    aps: int = 2
    radius: float = 0.5
    seed: Optional[int] = None
    max_attempts: int = 1000

    def build(self, master_seed: int) -> Topology:
        if self.file is not None:
            return load_topology(self.file)
        seed = master_seed if self.seed is None else self.seed
        return generate_geometric(self.handhelds, self.aps, self.radius, seed, self.max_attempts)


@dataclass(frozen=True)
class GameConfig:
    seed: int = 0
    rounds: int = 1
    games_per_round: int = 1
    auction_window: float = 3.0
    topology: TopologySource = field(default_factory=TopologySource)
    default_strategy: StrategyKind = StrategyKind.TIGHTNESS
    node_strategies: Mapping[int, StrategyKind] = field(default_factory=dict)
    packet: PacketSpec = field(default_factory=PacketSpec)
    params: StrategyParams = field(default_factory=StrategyParams)

    def validate(self) -> None:
        if self.rounds < 1:
            raise ConfigError("rounds", "must be >= 1")
        if self.games_per_round < 1:
            raise ConfigError("games_per_round", "must be >= 1")
        if self.auction_window <= 0:
            raise ConfigError("auction_window", "must be > 0")
        self.packet.validate()

    def strategy_of(self, node: int) -> StrategyKind:
        return self.node_strategies.get(node, self.default_strategy)


_TOP_KEYS = {"version", "seed", "rounds", "games_per_round", "auction_window",
             "topology", "strategies", "packet", "params"}


def _int(name: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(name, f"expected an integer, got {value!r}")
    return value


def parse_config(data: Mapping[str, Any], base_dir: Path | str = ".") -> GameConfig:
    if not isinstance(data, Mapping):
        raise ConfigError("config", "top level must be an object")
    if data.get("version") != CONFIG_VERSION:
        raise ConfigError("version", f"expected {CONFIG_VERSION}, got {data.get('version')!r}")
    unknown = set(data) - _TOP_KEYS
    if unknown:
        raise ConfigError(sorted(unknown)[0], "unknown field")

    topo_raw = data.get("topology", {"generate": {}})
    if "file" in topo_raw:
        topo = TopologySource(file=Path(base_dir) / topo_raw["file"])
    elif "generate" in topo_raw:
        g = topo_raw["generate"]
        try:
            topo = TopologySource(
                handhelds=_int("topology.generate.handhelds", g.get("handhelds", 8)),
                aps=_int("topology.generate.aps", g.get("aps", 2)),
                radius=float(g.get("radius", 0.5)),
                seed=None if g.get("seed") is None else _int("topology.generate.seed", g["seed"]),
                max_attempts=_int("topology.generate.max_attempts", g.get("max_attempts", 1000)),
            )
        except (TypeError, AttributeError):
            raise ConfigError("topology.generate", "expected an object") from None
        if topo.handhelds < 1 or topo.aps < 2 or topo.radius <= 0:
            raise ConfigError("topology.generate", "need handhelds >= 1, aps >= 2, radius > 0")
    else:
        raise ConfigError("topology", "expected {file} or {generate}")

    strat_raw = data.get("strategies", {})
    try:
        default = StrategyKind(strat_raw.get("default", "tightness"))
        nodes = {int(k): StrategyKind(v) for k, v in strat_raw.get("nodes", {}).items()}
    except ValueError as exc:
        raise ConfigError("strategies", str(exc)) from None

    pk = data.get("packet", {})
    packet = PacketSpec(
        budget=_parse_dist("packet.budget", pk.get("budget", {"uniform": [50, 200]}), ("uniform",)),
        fine=_parse_dist("packet.fine", pk.get("fine", {"fraction": 0.4}), ("uniform", "fraction")),
        timeout=_parse_dist("packet.timeout", pk.get("timeout", {"slack": 2}), ("uniform", "slack")),
        source=None if pk.get("source") is None else _int("packet.source", pk["source"]),
        destination=None if pk.get("destination") is None else _int("packet.destination", pk["destination"]),
    )

    try:
        params = StrategyParams(**data.get("params", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError("params", str(exc)) from None

    cfg = GameConfig(
        seed=_int("seed", data.get("seed", 0)),
        rounds=_int("rounds", data.get("rounds", 1)),
        games_per_round=_int("games_per_round", data.get("games_per_round", 1)),
        auction_window=float(data.get("auction_window", 3.0)),
        topology=topo,
        default_strategy=default,
        node_strategies=nodes,
        packet=packet,
        params=params,
    )
    cfg.validate()
    return cfg


def load_config(path: str | Path) -> GameConfig:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"line {exc.lineno}: {exc.msg}") from None
    return parse_config(data, path.parent)
