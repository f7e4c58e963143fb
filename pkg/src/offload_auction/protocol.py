"""Auction rulebook: request-for-bids, mandatory open bids, winner hand-off."""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Optional

from .money import money
from .topology import Topology

DEFAULT_WINDOW = 3.0


class ProtocolError(Exception):
    """A rule of the forwarding game was broken.

    ``rule`` is a short stable name used by traces and the audit tool.
    """

    def __init__(self, rule: str, message: str):
        super().__init__(message)
        self.rule = rule


@dataclass(frozen=True)
class Rfb:
    """A request for bids announced by ``auctioneer`` for one packet hop.

    ``hops`` is the number of hops the packet has already traversed to reach
    the auctioneer. ``forwarders`` lists every node that already held the
    packet (loop prevention). ``upstream_fine`` is the fine of the contract
    under which the auctioneer received the packet; ``None`` at the source.
    """

    auctioneer: int
    packet_id: int
    budget: Decimal
    fine: Decimal
    timeout: int
    hops: int
    destination: int
    forwarders: tuple[int, ...] = ()
    upstream_fine: Optional[Decimal] = None
    source_timeout: Optional[int] = None

    def validate(self) -> None:
        if self.budget < 0 or self.fine < 0:
            raise ProtocolError("negative amount", "budget and fine must be non-negative")
        if self.fine > self.budget:
            raise ProtocolError("fine exceeds budget", f"fine exceeds budget ({self.fine} > {self.budget})")
        if self.upstream_fine is not None and self.fine > self.upstream_fine:
            raise ProtocolError(
                "fine monotonicity",
                f"fine {self.fine} exceeds previous hop fine {self.upstream_fine}",
            )
        if self.source_timeout is not None and self.timeout != self.source_timeout:
            raise ProtocolError("timeout changed", "timeout must equal the source AP's timeout")
        if self.timeout < 1:
            raise ProtocolError("timeout", "timeout must be at least one hop")
        if self.hops < 0:
            raise ProtocolError("hops", "hop counter must be non-negative")


@dataclass(frozen=True)
class Bid:
    bidder: int
    amount: Decimal
    submit_time: float


@dataclass(frozen=True)
class HopContract:
    upstream: int
    downstream: int
    price: Decimal
    fine: Decimal
    packet_id: int


@dataclass
class Auction:
    rfb: Rfb
    window: float
    eligible: frozenset[int]
    auctioneer_is_ap: bool
    bids: list[Bid] = field(default_factory=list)
    closed: bool = False
    winner: Optional[int] = None

    @property
    def phase(self) -> str:
        return "closed" if self.closed else "open"

    def bid_of(self, node: int) -> Bid:
        for b in self.bids:
            if b.bidder == node:
                return b
        raise KeyError(node)

    def visible_bids(self, at_time: float) -> list[Bid]:
        """Bids already broadcast strictly before ``at_time``."""
        return [b for b in self.bids if b.submit_time < at_time]

    def missing_bidders(self) -> list[int]:
        have = {b.bidder for b in self.bids}
        return sorted(self.eligible - have)

    def submit(self, bid: Bid) -> "Auction":
        if self.closed:
            raise ProtocolError("auction closed", "auction already closed")
        if bid.bidder not in self.eligible:
            raise ProtocolError("ineligible bidder", f"node {bid.bidder} is not eligible to bid")
        if any(b.bidder == bid.bidder for b in self.bids):
            raise ProtocolError("duplicate bid", f"node {bid.bidder} already bid")
        amount = money(bid.amount)
        if amount < 0:
            raise ProtocolError("negative amount", "bid must be non-negative")
        if amount > self.rfb.budget:
            raise ProtocolError(
                "bid over budget",
                f"node {bid.bidder} must bid lower or equal than the announced budget",
            )
        if not 0 <= bid.submit_time <= self.window:
            raise ProtocolError("bid timing", f"submit time {bid.submit_time} outside auction window")
        bid = Bid(bid.bidder, amount, bid.submit_time)
        keys = [(b.submit_time, b.bidder) for b in self.bids]
        self.bids.insert(bisect.bisect(keys, (bid.submit_time, bid.bidder)), bid)
        return self

    def close(self, winner: int, now: Optional[float] = None) -> HopContract:
        if self.closed:
            raise ProtocolError("auction closed", "auction already closed")
        if now is not None and now < self.window:
            raise ProtocolError("auction window", "winner announced before the auction window elapsed")
        missing = self.missing_bidders()
        if missing:
            raise ProtocolError("mandatory bids", f"missing bids from {missing}")
        try:
            bid = self.bid_of(winner)
        except KeyError:
            raise ProtocolError("winner not a bidder", f"node {winner} did not bid") from None
        if self.auctioneer_is_ap and winner != lowest_bidder(self):
            raise ProtocolError("lowest bid", "an access point must select the lowest bid")
        self.closed = True
        self.winner = winner
        return HopContract(
            upstream=self.rfb.auctioneer,
            downstream=winner,
            price=bid.amount,
            fine=self.rfb.fine,
            packet_id=self.rfb.packet_id,
        )


def eligible_bidders(topo: Topology, rfb: Rfb) -> frozenset[int]:
    """Handheld neighbours of the auctioneer that never held the packet."""
    excluded = set(rfb.forwarders)
    excluded.add(rfb.auctioneer)
    return frozenset(n for n in topo.handheld_neighbors(rfb.auctioneer) if n not in excluded)


def open_auction(rfb: Rfb, topo: Topology, window: float = DEFAULT_WINDOW) -> Auction:
    if window <= 0:
        raise ValueError("auction window must be positive")
    rfb.validate()
    return Auction(
        rfb=rfb,
        window=window,
        eligible=eligible_bidders(topo, rfb),
        auctioneer_is_ap=topo.is_ap(rfb.auctioneer),
    )


def submit_bid(auction: Auction, bid: Bid) -> Auction:
    return auction.submit(bid)


def close_auction(auction: Auction, winner: int) -> tuple[Auction, HopContract]:
    contract = auction.close(winner)
    return auction, contract


def lowest_bidder(auction: Auction) -> int:
    """Minimum amount wins; equal amounts go to the lowest node id."""
    if not auction.bids:
        if not auction.eligible:
            raise ProtocolError("no eligible bidders", "no eligible bidders")
        raise ProtocolError("mandatory bids", f"missing bids from {auction.missing_bidders()}")
    return min(auction.bids, key=lambda b: (b.amount, b.bidder)).bidder


def ap_select_winner(auction: Auction) -> int:
    if not auction.auctioneer_is_ap:
        raise ProtocolError("not an access point", "auctioneer is not an access point")
    if not auction.eligible:
        raise ProtocolError("no eligible bidders", "no eligible bidders")
    missing = auction.missing_bidders()
    if missing:
        raise ProtocolError("mandatory bids", f"missing bids from {missing}")
    return lowest_bidder(auction)
