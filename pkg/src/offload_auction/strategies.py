"""Per-node agents that plug the strategy functions into the game engine."""

from __future__ import annotations

import random
from decimal import Decimal
from enum import Enum
from typing import Optional

from . import tightness as tt
from .money import money
from .protocol import Auction, HopContract, Rfb, lowest_bidder
from .tightness import BYPASS, DROP, FORWARD, StrategyParams
from .topology import Topology

__all__ = ["Strategy", "StrategyKind", "TightnessStrategy", "BYPASS", "DROP", "FORWARD"]


class StrategyKind(str, Enum):
    TIGHTNESS = "tightness"
    GREEDY_ZERO_BUDGET = "greedy_zero_budget"
    LOWEST_BID_CHOOSER = "lowest_bid_chooser"
    RANDOM_BIDDER = "random_bidder"
    ALWAYS_BYPASS = "always_bypass"


class Strategy:
    """Default behaviour: bid the budget, pick the cheapest bid, keep forwarding."""

    kind: StrategyKind

    def __init__(self, params: Optional[StrategyParams] = None):
        self.params = params or StrategyParams()

    def bid_time(self, window: float, rng: random.Random) -> float:
        return rng.uniform(0.0, window)

    def bid(self, node: int, auction: Auction, topo: Topology, now: float, rng: random.Random) -> Decimal:
        return auction.rfb.budget

    def choose_winner(self, auction: Auction, topo: Topology) -> int:
        return lowest_bidder(auction)

    def on_win(self, rfb: Rfb, contract: HopContract) -> str:
        return FORWARD

    def setup(self, won_offer: Decimal) -> tuple[Decimal, Decimal]:
        return tt.setup_auction(won_offer, self.params)

    def announce(self, contract: HopContract) -> tuple[Decimal, Decimal]:
        """Budget and fine for our own RFB, clipped to the protocol limits."""
        budget, fine = self.setup(contract.price)
        budget = max(money(budget), money(0))
        fine = min(money(fine), budget, contract.fine)
        return budget, max(fine, money(0))

    def on_stranded(self, contract: HopContract, original_budget: Decimal) -> bool:
        """Return True to deliver a stuck packet over the backbone."""
        return False


class TightnessStrategy(Strategy):
    kind = StrategyKind.TIGHTNESS

    def bid_time(self, window, rng):
        return tt.bid_time(window, rng, self.params.bid_window)

    def bid(self, node, auction, topo, now, rng):
        analysis = tt.analyze(topo, auction.rfb, node, auction.eligible, self.params)
        return tt.compute_bid(analysis, auction.rfb)

    def choose_winner(self, auction, topo):
        return tt.choose_winner(auction, topo, self.params)

    def on_win(self, rfb, contract):
        return tt.on_win(rfb, contract)

    def on_stranded(self, contract, original_budget):
        policy = self.params.bypass_policy
        if policy == "always":
            return True
        if policy == "never":
            return False
        # success via backbone nets price - B0; giving up nets -fine
        return contract.price - original_budget >= -contract.fine
