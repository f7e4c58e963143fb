"""Backbone-plus-ad-hoc network graph and hop-count queries.

Nodes are integers tagged either ``handheld`` or ``access_point``. Shortest
paths toward a destination only ever transit handhelds; the final edge enters
the destination itself. Access points other than the destination are never
relay nodes, even when the file declares AP-AP edges.
"""

from __future__ import annotations

import json
import math
import random
from collections import deque
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping

FORMAT_VERSION = 1


class Role(str, Enum):
    HANDHELD = "handheld"
    ACCESS_POINT = "access_point"


class TopologyError(Exception):
    """Base class for topology failures."""


class UnknownNodeError(TopologyError, KeyError):
    def __str__(self) -> str:
        return f"unknown node {self.args[0]}"


class UnreachableError(TopologyError):
    pass


class InvariantError(TopologyError):
    pass


class TopologyFormatError(TopologyError):
    pass


class GenerationError(TopologyError):
    pass


class Topology:
    """Immutable node/edge set with cached BFS distance tables."""

    def __init__(
        self,
        roles: Mapping[int, Role | str],
        edges: Iterable[tuple[int, int]],
        *,
        validate: bool = True,
    ):
        self._roles: dict[int, Role] = {int(n): Role(r) for n, r in roles.items()}
        adj: dict[int, set[int]] = {n: set() for n in self._roles}
        pairs = set()
        for a, b in edges:
            a, b = int(a), int(b)
            for n in (a, b):
                if n not in self._roles:
                    raise InvariantError(f"edge references unknown node {n}")
            if a == b:
                raise InvariantError(f"self-loop on node {a}")
            key = (min(a, b), max(a, b))
            if key in pairs:
                raise InvariantError(f"duplicate edge {key[0]}-{key[1]}")
            pairs.add(key)
            adj[a].add(b)
            adj[b].add(a)
        self._edges = frozenset(pairs)
        self._adj = {n: frozenset(s) for n, s in adj.items()}
        self._dist_cache: dict[int, dict[int, int]] = {}
        if validate:
            self.validate()

    # -- basic accessors -------------------------------------------------

    @property
    def nodes(self) -> list[int]:
        return sorted(self._roles)

    @property
    def edges(self) -> list[tuple[int, int]]:
        return sorted(self._edges)

    @property
    def handhelds(self) -> list[int]:
        return sorted(n for n, r in self._roles.items() if r is Role.HANDHELD)

    @property
    def access_points(self) -> list[int]:
        return sorted(n for n, r in self._roles.items() if r is Role.ACCESS_POINT)

    def role(self, node: int) -> Role:
        try:
            return self._roles[node]
        except KeyError:
            raise UnknownNodeError(node) from None

    def is_ap(self, node: int) -> bool:
        return self.role(node) is Role.ACCESS_POINT

    def is_handheld(self, node: int) -> bool:
        return self.role(node) is Role.HANDHELD

    def __contains__(self, node: object) -> bool:
        return node in self._roles

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Topology):
            return NotImplemented
        return self._roles == other._roles and self._edges == other._edges

    def __repr__(self) -> str:
        return (
            f"Topology(handhelds={len(self.handhelds)}, "
            f"aps={len(self.access_points)}, edges={len(self._edges)})"
        )

    def neighbors(self, node: int) -> frozenset[int]:
        try:
            return self._adj[node]
        except KeyError:
            raise UnknownNodeError(node) from None

    def handheld_neighbors(self, node: int) -> list[int]:
        return sorted(v for v in self.neighbors(node) if self._roles[v] is Role.HANDHELD)

    # -- shortest paths --------------------------------------------------

    def distances_to(self, dest: int) -> dict[int, int]:
        """Hop counts from every node that can reach ``dest``.

        BFS outward from ``dest``; only handhelds are expanded, so any AP
        other than ``dest`` can appear as a path endpoint but never inside.
        AP-AP links carry no ad hoc traffic and are skipped.
        """
        if dest not in self._roles:
            raise UnknownNodeError(dest)
        cached = self._dist_cache.get(dest)
        if cached is not None:
            return cached
        dist = {dest: 0}
        queue = deque([dest])
        while queue:
            v = queue.popleft()
            v_is_ap = self._roles[v] is not Role.HANDHELD
            if v != dest and v_is_ap:
                continue
            for w in self._adj[v]:
                if v_is_ap and self._roles[w] is not Role.HANDHELD:
                    continue
                if w not in dist:
                    dist[w] = dist[v] + 1
                    queue.append(w)
        self._dist_cache[dest] = dist
        return dist

    def hop_count(self, src: int, dest: int) -> int:
        if src not in self._roles:
            raise UnknownNodeError(src)
        dist = self.distances_to(dest)
        try:
            return dist[src]
        except KeyError:
            raise UnreachableError(f"node {dest} unreachable from node {src}") from None

    # -- invariants ------------------------------------------------------

    def validate(self) -> None:
        handhelds = self.handhelds
        if not handhelds:
            raise InvariantError("topology has no handhelds")
        seen = {handhelds[0]}
        queue = deque(seen)
        while queue:
            v = queue.popleft()
            for w in self._adj[v]:
                if w not in seen and self._roles[w] is Role.HANDHELD:
                    seen.add(w)
                    queue.append(w)
        if len(seen) != len(handhelds):
            raise InvariantError("handheld subgraph not connected")
        for ap in self.access_points:
            if not self.handheld_neighbors(ap):
                raise InvariantError(f"access point {ap} has no handheld neighbor")

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "version": FORMAT_VERSION,
            "nodes": [{"id": n, "role": self._roles[n].value} for n in self.nodes],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "Topology":
        if not isinstance(data, Mapping):
            raise TopologyFormatError("top level must be an object")
        version = data.get("version")
        if version != FORMAT_VERSION:
            raise TopologyFormatError(f"unsupported version {version!r}; expected {FORMAT_VERSION}")
        roles: dict[int, str] = {}
        for i, entry in enumerate(data.get("nodes", [])):
            try:
                node_id, role = entry["id"], entry["role"]
            except (KeyError, TypeError):
                raise TopologyFormatError(f"nodes[{i}]: expected {{id, role}}") from None
            if not isinstance(node_id, int) or isinstance(node_id, bool):
                raise TopologyFormatError(f"nodes[{i}].id must be an integer")
            if role not in {r.value for r in Role}:
                raise TopologyFormatError(f"nodes[{i}].role: unknown role {role!r}")
            if node_id in roles:
                raise InvariantError(f"duplicate node id {node_id}")
            roles[node_id] = role
        edges = []
        for i, edge in enumerate(data.get("edges", [])):
            if not (isinstance(edge, list) and len(edge) == 2 and all(isinstance(x, int) for x in edge)):
                raise TopologyFormatError(f"edges[{i}]: expected [id, id]")
            edges.append((edge[0], edge[1]))
        return cls(roles, edges)


def load_topology(path: str | Path) -> Topology:
    text = Path(path).read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyFormatError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return Topology.from_dict(data)


def save_topology(topo: Topology, path: str | Path) -> None:
    Path(path).write_text(json.dumps(topo.to_dict(), indent=2) + "\n")


def generate_geometric(
    n_handhelds: int,
    n_aps: int,
    radius: float,
    seed: int,
    max_attempts: int = 1000,
) -> Topology:
    """Random geometric graph in the unit square.

    Access points get ids ``0..n_aps-1``, handhelds follow. Placements that
    break a topology invariant are discarded and redrawn from the same RNG.
    """
    if n_handhelds < 1:
        raise ValueError("n_handhelds must be >= 1")
    if n_aps < 2:
        raise ValueError("n_aps must be >= 2")
    if radius <= 0:
        raise ValueError("radius must be > 0")
    rng = random.Random(seed)
    roles = {i: Role.ACCESS_POINT for i in range(n_aps)}
    roles.update({n_aps + i: Role.HANDHELD for i in range(n_handhelds)})
    ids = sorted(roles)
    for _ in range(max_attempts):
        pos = {n: (rng.random(), rng.random()) for n in ids}
        edges = [
            (a, b)
            for i, a in enumerate(ids)
            for b in ids[i + 1:]
            if math.dist(pos[a], pos[b]) <= radius
        ]
        try:
            return Topology(roles, edges)
        except InvariantError:
            continue
    raise GenerationError(
        f"no valid placement after {max_attempts} attempts; try a larger radius than {radius}"
    )
