"""Control and adversarial strategies used to exercise the protocol."""

from __future__ import annotations

import random
from decimal import Decimal
from typing import Optional

from .money import ZERO, money
from .protocol import Auction, Rfb, lowest_bidder
from .strategies import BYPASS, Strategy, StrategyKind, TightnessStrategy
from .tightness import StrategyParams


def greedy_bid(rfb: Rfb, rng: Optional[random.Random] = None, mode: str = "fine") -> Decimal:
    """Cheapest bid that never undercuts the fine (or zero in ``"zero"`` mode)."""
    return ZERO if mode == "zero" else rfb.fine


def random_bid(rfb: Rfb, rng: random.Random) -> Decimal:
    lo, hi = rfb.fine, rfb.budget
    if lo == hi:
        return lo
    return min(hi, max(lo, money(rng.uniform(float(lo), float(hi)))))


def lowest_bid_choose(auction: Auction) -> int:
    return lowest_bidder(auction)


def bypass_decision(node: int, packet=None) -> str:
    return BYPASS


class GreedyStrategy(Strategy):
    """Wins cheaply, then re-auctions the packet for nothing."""

    kind = StrategyKind.GREEDY_ZERO_BUDGET

    def bid(self, node, auction, topo, now, rng):
        return greedy_bid(auction.rfb, rng, self.params.greedy_bid)

    def setup(self, won_offer):
        return ZERO, ZERO


class LowestBidChooser(TightnessStrategy):
    """Tightness bidding, but its own auctions go to the cheapest bid."""

    kind = StrategyKind.LOWEST_BID_CHOOSER

    def choose_winner(self, auction, topo):
        return lowest_bid_choose(auction)


class RandomBidder(Strategy):
    kind = StrategyKind.RANDOM_BIDDER

    def bid(self, node, auction, topo, now, rng):
        return random_bid(auction.rfb, rng)

    def setup(self, won_offer):
        budget = money(Decimal("0.5") * money(won_offer))
        return budget, money(Decimal("0.5") * budget)


class AlwaysBypass(Strategy):
    kind = StrategyKind.ALWAYS_BYPASS

    def on_win(self, rfb, contract):
        return bypass_decision(contract.downstream)

    def on_stranded(self, contract, original_budget):
        return True


STRATEGIES: dict[StrategyKind, type[Strategy]] = {
    StrategyKind.TIGHTNESS: TightnessStrategy,
    StrategyKind.GREEDY_ZERO_BUDGET: GreedyStrategy,
    StrategyKind.LOWEST_BID_CHOOSER: LowestBidChooser,
    StrategyKind.RANDOM_BIDDER: RandomBidder,
    StrategyKind.ALWAYS_BYPASS: AlwaysBypass,
}


def make_strategy(kind: StrategyKind | str, params: Optional[StrategyParams] = None) -> Strategy:
    return STRATEGIES[StrategyKind(kind)](params)
