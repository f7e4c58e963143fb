"""Game and experiment orchestration.

One game injects one packet at a random source AP and follows it through
recursive auctions until it is delivered (ad hoc or via the backbone) or
fails (drop, hop budget exhausted, no one left to hand it to). Simulation
time is logical: the auction window only orders bid visibility.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Optional

from . import accounting as acct
from .accounting import Ledger, Transfer
from .baselines import make_strategy
from .config import ConfigError, GameConfig
from .money import ZERO, fmt
from .protocol import Auction, Bid, HopContract, Rfb, ap_select_winner, open_auction
from .strategies import BYPASS, DROP, Strategy
from .topology import Topology

log = logging.getLogger(__name__)

IN_FLIGHT = "in_flight"
DELIVERED = "delivered"
FAILED = "failed"

# delivery modes / failure reasons
AD_HOC = "ad_hoc"
BYPASSED = "bypass"
DROPPED = "drop"
TIMEOUT = "timeout"
STRANDED = "stranded"

GAME_COLUMNS = (
    "round", "game", "packet_id", "source", "destination", "budget", "fine", "timeout",
    "outcome", "reason", "hops", "path",
)


@dataclass
class Packet:
    """``path`` lists every node the packet reached after leaving the source,
    so ``hops == len(path)``; on ad hoc delivery it ends with the destination."""

    id: int
    source: int
    destination: int
    budget: Decimal
    fine: Decimal
    timeout: int
    path: list[int] = field(default_factory=list)
    status: str = IN_FLIGHT

    @property
    def hops(self) -> int:
        return len(self.path)

    @property
    def forwarders(self) -> tuple[int, ...]:
        return (self.source, *self.path)


def hop_deadline_check(packet: Packet) -> bool:
    """True while one more hop still lands within the hop budget."""
    return packet.hops < packet.timeout


def derive_seed(master: int, round_index: int, game_index: int) -> int:
    digest = hashlib.sha256(f"{master}:{round_index}:{game_index}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass
class AuctionRecord:
    auction: Auction

    def to_dict(self) -> dict:
        a = self.auction
        r = a.rfb
        return {
            "auctioneer": r.auctioneer,
            "budget": fmt(r.budget),
            "fine": fmt(r.fine),
            "timeout": r.timeout,
            "hops": r.hops,
            "window": a.window,
            "eligible": sorted(a.eligible),
            "bids": [
                {"bidder": b.bidder, "amount": fmt(b.amount), "time": round(b.submit_time, 9)}
                for b in a.bids
            ],
            "winner": a.winner,
        }


@dataclass
class GameTrace:
    round: int
    game: int
    seed: int
    packet: Packet
    auctions: list[Auction]
    contracts: list[HopContract]
    outcome: str
    reason: str
    bypass_by: Optional[int]
    transfers: list[Transfer]
    dropped_by: Optional[int] = None

    @property
    def deltas(self) -> dict:
        return {k: v for k, v in sorted(acct.replay_balances(self.transfers).items(), key=lambda kv: str(kv[0]))}

    def to_record(self) -> dict:
        p = self.packet
        return {
            "round": self.round,
            "game": self.game,
            "seed": self.seed,
            "packet": {
                "id": p.id,
                "source": p.source,
                "destination": p.destination,
                "budget": fmt(p.budget),
                "fine": fmt(p.fine),
                "timeout": p.timeout,
            },
            "auctions": [AuctionRecord(a).to_dict() for a in self.auctions],
            "contracts": [
                {"upstream": c.upstream, "downstream": c.downstream, "price": fmt(c.price), "fine": fmt(c.fine)}
                for c in self.contracts
            ],
            "path": list(p.path),
            "hops": p.hops,
            "outcome": self.outcome,
            "reason": self.reason,
            "bypass_by": self.bypass_by,
            "dropped_by": self.dropped_by,
            "transfers": [t.to_row() for t in self.transfers],
            "deltas": {str(k): fmt(v) for k, v in self.deltas.items()},
        }

    def to_row(self) -> dict:
        p = self.packet
        return {
            "round": self.round,
            "game": self.game,
            "packet_id": p.id,
            "source": p.source,
            "destination": p.destination,
            "budget": fmt(p.budget),
            "fine": fmt(p.fine),
            "timeout": p.timeout,
            "outcome": self.outcome,
            "reason": self.reason,
            "hops": p.hops,
            "path": " ".join(str(n) for n in p.path),
        }


def build_strategies(config: GameConfig, topo: Topology) -> dict[int, Strategy]:
    for node in config.node_strategies:
        if node not in topo:
            raise ConfigError("strategies.nodes", f"node {node} is not in the topology")
    for name in ("source", "destination"):
        node = getattr(config.packet, name)
        if node is not None and (node not in topo or not topo.is_ap(node)):
            raise ConfigError(f"packet.{name}", f"node {node} is not an access point")
    return {n: make_strategy(config.strategy_of(n), config.params) for n in topo.handhelds}


def _collect_bids(auction: Auction, topo: Topology, strategies: dict[int, Strategy], rng: random.Random) -> None:
    window = auction.window
    times = [(strategies[n].bid_time(window, rng), n) for n in sorted(auction.eligible)]
    for t, node in sorted(times):
        amount = strategies[node].bid(node, auction, topo, t, rng)
        auction.submit(Bid(node, amount, t))


def _endpoints(config: GameConfig, topo: Topology, rng: random.Random) -> tuple[int, int]:
    source, dest = config.packet.source, config.packet.destination
    if source is None and dest is None:
        source, dest = rng.sample(topo.access_points, 2)
    elif source is None:
        source = rng.choice([a for a in topo.access_points if a != dest])
    elif dest is None:
        dest = rng.choice([a for a in topo.access_points if a != source])
    return source, dest


def run_game(
    config: GameConfig,
    topo: Topology,
    game_seed: int,
    round_index: int = 0,
    game_index: int = 0,
    strategies: Optional[dict[int, Strategy]] = None,
) -> GameTrace:
    rng = random.Random(game_seed)
    strategies = strategies or build_strategies(config, topo)
    source, dest = _endpoints(config, topo, rng)
    budget0, fine0, timeout = config.packet.draw(rng, topo.hop_count(source, dest))
    if timeout < 1:
        raise ConfigError("packet.timeout", "timeout must be at least 1 hop")
    packet = Packet(
        id=round_index * config.games_per_round + game_index,
        source=source,
        destination=dest,
        budget=budget0,
        fine=fine0,
        timeout=timeout,
    )

    auctions: list[Auction] = []
    contracts: list[HopContract] = []
    holder = source
    budget, fine = budget0, fine0
    outcome = reason = None
    bypass_by = dropped_by = None

    def stranded(why: str):
        nonlocal outcome, reason, bypass_by
        if contracts and strategies[holder].on_stranded(contracts[-1], budget0):
            outcome, reason, bypass_by = DELIVERED, BYPASSED, holder
        else:
            outcome, reason = FAILED, why

    while outcome is None:
        if holder != source and dest in topo.neighbors(holder):
            if hop_deadline_check(packet):
                packet.path.append(dest)
                outcome, reason = DELIVERED, AD_HOC
            else:
                stranded(TIMEOUT)
            break
        if not hop_deadline_check(packet):
            stranded(TIMEOUT)
            break
        rfb = Rfb(
            auctioneer=holder,
            packet_id=packet.id,
            budget=budget,
            fine=fine,
            timeout=timeout,
            hops=packet.hops,
            destination=dest,
            forwarders=packet.forwarders,
            upstream_fine=contracts[-1].fine if contracts else None,
            source_timeout=timeout,
        )
        auction = open_auction(rfb, topo, config.auction_window)
        if not auction.eligible:
            stranded(STRANDED)
            break
        _collect_bids(auction, topo, strategies, rng)
        if auction.auctioneer_is_ap:
            winner = ap_select_winner(auction)
        else:
            winner = strategies[holder].choose_winner(auction, topo)
        contract = auction.close(winner, now=auction.window)
        auctions.append(auction)
        contracts.append(contract)
        packet.path.append(winner)
        holder = winner

        action = strategies[winner].on_win(rfb, contract)
        if action == DROP:
            outcome, reason, dropped_by = FAILED, DROPPED, winner
        elif action == BYPASS:
            outcome, reason, bypass_by = DELIVERED, BYPASSED, winner
        else:
            budget, fine = strategies[winner].announce(contract)

    packet.status = outcome
    ledger = Ledger(topo.nodes)
    if outcome == DELIVERED:
        acct.settle_success(ledger, contracts)
        if bypass_by is not None:
            acct.settle_bypass(ledger, bypass_by, budget0, packet.id)
    else:
        acct.settle_failure(ledger, contracts)

    return GameTrace(
        round=round_index,
        game=game_index,
        seed=game_seed,
        packet=packet,
        auctions=auctions,
        contracts=contracts,
        outcome=outcome,
        reason=reason,
        bypass_by=bypass_by,
        transfers=list(ledger.transfers),
        dropped_by=dropped_by,
    )


@dataclass
class Metrics:
    balances: dict
    packets_won: dict
    packets_dropped: dict
    bypass_count: dict
    delivered: int
    total: int
    hop_counts: list[int]
    # operator account plus every AP account; APs spend operator money
    operator_total: Decimal = ZERO

    @property
    def delivery_ratio(self) -> float:
        return self.delivered / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        key = lambda kv: (1, 0) if kv[0] == acct.OPERATOR else (0, kv[0])
        return {
            "games": self.total,
            "delivered": self.delivered,
            "delivery_ratio": self.delivery_ratio,
            "balances": {str(k): fmt(v) for k, v in sorted(self.balances.items(), key=key)},
            "operator_total": fmt(self.operator_total),
            "packets_won": {str(k): v for k, v in sorted(self.packets_won.items())},
            "packets_dropped": {str(k): v for k, v in sorted(self.packets_dropped.items())},
            "bypass_count": {str(k): v for k, v in sorted(self.bypass_count.items())},
            "hop_counts": self.hop_counts,
        }


@dataclass
class ExperimentResult:
    config: GameConfig
    topology: Topology
    traces: list[GameTrace]
    ledger: Ledger
    metrics: Metrics

    def games_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=GAME_COLUMNS, lineterminator="\n")
        w.writeheader()
        for t in self.traces:
            w.writerow(t.to_row())
        return buf.getvalue()

    def transfers_csv(self) -> str:
        return self.ledger.to_csv()

    def summary_json(self) -> str:
        return json.dumps(self.metrics.to_dict(), indent=2) + "\n"

    def traces_jsonl(self) -> str:
        return trace_file_text(self.topology, self.traces)

    def write(self, out_dir: str | Path, traces: bool = False) -> list[Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = {
            "games.csv": self.games_csv(),
            "transfers.csv": self.transfers_csv(),
            "summary.json": self.summary_json(),
        }
        if traces:
            files["traces.jsonl"] = self.traces_jsonl()
        written = []
        for name, text in files.items():
            path = out / name
            path.write_text(text)
            written.append(path)
        return written


def trace_file_text(topo: Topology, traces: Iterable[GameTrace]) -> str:
    """Line-delimited JSON: a topology header, then one record per game."""
    lines = [json.dumps({"type": "topology", **topo.to_dict()}, sort_keys=True)]
    lines += [json.dumps({"type": "game", **t.to_record()}, sort_keys=True) for t in traces]
    return "\n".join(lines) + "\n"


def aggregate(topo: Topology, traces: list[GameTrace]) -> tuple[Ledger, Metrics]:
    ledger = Ledger(topo.nodes)
    won = {n: 0 for n in topo.handhelds}
    dropped = {n: 0 for n in topo.handhelds}
    bypass = {n: 0 for n in topo.handhelds}
    for t in traces:
        ledger.extend(t.transfers)
        for c in t.contracts:
            won[c.downstream] += 1
        if t.dropped_by is not None:
            dropped[t.dropped_by] += 1
        if t.bypass_by is not None:
            bypass[t.bypass_by] += 1
    metrics = Metrics(
        balances=ledger.balances(),
        packets_won=won,
        packets_dropped=dropped,
        bypass_count=bypass,
        delivered=sum(t.outcome == DELIVERED for t in traces),
        total=len(traces),
        hop_counts=[t.packet.hops for t in traces],
    )
    metrics.operator_total = sum(
        (metrics.balances[k] for k in [*topo.access_points, acct.OPERATOR]), ZERO
    )
    return ledger, metrics


def _run_one(args):
    config, topo, r, g = args
    return run_game(config, topo, derive_seed(config.seed, r, g), r, g)


def run_experiment(
    config: GameConfig,
    topo: Optional[Topology] = None,
    parallel: bool = False,
    workers: Optional[int] = None,
) -> ExperimentResult:
    config.validate()
    topo = topo if topo is not None else config.topology.build(config.seed)
    strategies = build_strategies(config, topo)
    jobs = [(r, g) for r in range(config.rounds) for g in range(config.games_per_round)]
    if parallel:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            # map preserves submission order, so reduction stays deterministic
            traces = list(pool.map(_run_one, [(config, topo, r, g) for r, g in jobs], chunksize=16))
    else:
        traces = [
            run_game(config, topo, derive_seed(config.seed, r, g), r, g, strategies) for r, g in jobs
        ]
    ledger, metrics = aggregate(topo, traces)
    log.info("ran %d games, delivery ratio %.3f", metrics.total, metrics.delivery_ratio)
    return ExperimentResult(config, topo, traces, ledger, metrics)
