"""Tightness-based bidding, auction setup and winner selection.

A node's tightness toward a packet is its hop surplus (or deficit) against
the packet's hop deadline if the packet followed that node's shortest path.
Every quantity derived from tightness is kept as an exact ``Fraction`` so
winner selection and bid values are reproducible bit for bit; only the
logistic bid curve needs ``exp``, which is evaluated in ``Decimal``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from decimal import Decimal, localcontext
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from .money import ZERO, money
from .protocol import Auction, HopContract, Rfb, eligible_bidders
from .topology import Topology

# |a(c-1)| beyond this leaves the logistic weight indistinguishable from 0/1.
_EXP_CLAMP = Decimal(10_000)


def _fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(str(value))
    return Fraction(value)


@dataclass(frozen=True)
class StrategyParams:
    budget_fraction: Decimal = Decimal("0.6")
    fine_fraction: Decimal = Decimal("0.9")
    k1: Fraction = Fraction(2)
    k2: Fraction = Fraction(3)
    bid_window: tuple[float, float] = (0.5, 0.75)
    c_cap: Fraction = Fraction(10**6)
    # "cost": bypass a stranded packet only when bypassing loses no more than the fine would
    bypass_policy: str = "cost"
    # greedy baseline bids the upstream fine ("fine") or literal zero ("zero")
    greedy_bid: str = "fine"

    def __post_init__(self):
        object.__setattr__(self, "budget_fraction", Decimal(str(self.budget_fraction)))
        object.__setattr__(self, "fine_fraction", Decimal(str(self.fine_fraction)))
        object.__setattr__(self, "k1", _fraction(self.k1))
        object.__setattr__(self, "k2", _fraction(self.k2))
        object.__setattr__(self, "c_cap", _fraction(self.c_cap))
        object.__setattr__(self, "bid_window", tuple(float(x) for x in self.bid_window))
        self.validate()

    def validate(self) -> None:
        if not 0 < self.k1 < self.k2:
            raise ValueError("preference weights must satisfy k2 > k1 > 0")
        if not 0 < self.budget_fraction <= 1:
            raise ValueError("budget_fraction must be in (0, 1]")
        if not 0 < self.fine_fraction <= 1:
            raise ValueError("fine_fraction must be in (0, 1]")
        lo, hi = self.bid_window
        if not 0 <= lo <= hi <= 1:
            raise ValueError("bid_window must satisfy 0 <= lo <= hi <= 1")
        if self.c_cap <= 0:
            raise ValueError("c_cap must be positive")
        if self.bypass_policy not in ("cost", "always", "never"):
            raise ValueError(f"unknown bypass_policy {self.bypass_policy!r}")
        if self.greedy_bid not in ("fine", "zero"):
            raise ValueError(f"unknown greedy_bid {self.greedy_bid!r}")


def tightness(timeout: int, hops: int, hop_count: int) -> int:
    """Hop surplus of a node one hop past an auctioneer that is ``hops`` in."""
    return (timeout - hops - 1) - hop_count


@dataclass(frozen=True)
class TightnessAnalysis:
    node: int
    upstream: int
    delta: int
    # candidates with non-negative tightness, including ``node`` itself when viable
    competitors: Mapping[int, int] = field(default_factory=dict)
    mean_delta: Optional[Fraction] = None
    max_delta: Optional[int] = None
    relative: Optional[Fraction] = None
    steepness: Optional[Fraction] = None
    no_competition: bool = False


def _ratio(num: int, den: Fraction | int, cap: Fraction) -> Fraction:
    if den <= 0:
        return cap
    return min(Fraction(num) / Fraction(den), cap)


def analyze(
    topo: Topology,
    rfb: Rfb,
    node: int,
    candidates: Optional[Iterable[int]] = None,
    params: Optional[StrategyParams] = None,
) -> TightnessAnalysis:
    """Tightness of ``node`` relative to the other candidates of ``rfb``.

    ``candidates`` defaults to the eligible bidders of the auction (handheld
    neighbours of the auctioneer that never held the packet).
    """
    params = params or StrategyParams()
    pool = set(eligible_bidders(topo, rfb) if candidates is None else candidates)
    pool.add(node)
    deltas = {
        i: tightness(rfb.timeout, rfb.hops, topo.hop_count(i, rfb.destination))
        for i in sorted(pool)
    }
    viable = {i: d for i, d in deltas.items() if d >= 0}
    own = deltas[node]
    no_competition = len(pool) == 1
    mean = max_delta = relative = steepness = None
    if viable:
        mean = Fraction(sum(viable.values()), len(viable))
        max_delta = max(viable.values())
    if own > 0 and viable:
        relative = _ratio(own, mean, params.c_cap)
        steepness = _ratio(own, max_delta, params.c_cap)
    return TightnessAnalysis(
        node=node,
        upstream=rfb.auctioneer,
        delta=own,
        competitors=viable,
        mean_delta=mean,
        max_delta=max_delta,
        relative=relative,
        steepness=steepness,
        no_competition=no_competition,
    )


def offered_bid(budget, fine, steepness, relative) -> Decimal:
    """Logistic bid between ``fine`` and ``budget``, centred on relative tightness 1.

    Evaluated as ``(B - F) / (1 + exp(a (c - 1))) + F``, which is the same
    curve written without the nested complement.
    """
    budget, fine = money(budget), money(fine)
    with localcontext() as ctx:
        ctx.prec = 40
        y = _to_decimal(steepness) * (_to_decimal(relative) - 1)
        y = max(-_EXP_CLAMP, min(_EXP_CLAMP, y))
        if y > 0:
            e = (-y).exp()
            weight = e / (1 + e)
        else:
            weight = 1 / (1 + y.exp())
        value = (budget - fine) * weight + fine
    return money(value)


def _to_decimal(x) -> Decimal:
    if isinstance(x, Fraction):
        return Decimal(x.numerator) / Decimal(x.denominator)
    if isinstance(x, float):
        return Decimal(str(x))
    return Decimal(x)


def compute_bid(analysis: TightnessAnalysis, rfb: Rfb) -> Decimal:
    if analysis.delta <= 0 or analysis.no_competition or analysis.relative is None:
        return rfb.budget
    return offered_bid(rfb.budget, rfb.fine, analysis.steepness, analysis.relative)


def bid_time(window: float, rng: random.Random, fractions: tuple[float, float] = (0.5, 0.75)) -> float:
    if window <= 0:
        raise ValueError("auction window must be positive")
    lo, hi = fractions
    return rng.uniform(lo * window, hi * window)


def setup_auction(won_offer, params: Optional[StrategyParams] = None) -> tuple[Decimal, Decimal]:
    """Budget and fine to announce after winning at price ``won_offer``."""
    params = params or StrategyParams()
    won_offer = money(won_offer)
    if won_offer < 0:
        raise ValueError("won offer must be non-negative")
    budget = money(params.budget_fraction * won_offer)
    fine = money(params.fine_fraction * budget)
    return budget, fine


def preference(op, c, budget, c_max, params: Optional[StrategyParams] = None) -> Fraction:
    """Affine preference over (offered price, relative tightness).

    Zero budget or zero ``c_max`` drop the corresponding term instead of
    dividing by zero.
    """
    params = params or StrategyParams()
    op, c, budget, c_max = (_fraction(x) for x in (op, c, budget, c_max))
    value = params.k1
    if budget > 0:
        value -= params.k1 / budget * op
    if c_max > 0:
        value += params.k2 / c_max * c
    return value


def bidder_tightness(auction: Auction, topo: Topology) -> dict[int, Fraction]:
    """Relative tightness of each bidder as seen by the auctioneer.

    Non-viable bidders (tightness <= 0) get 0 and compete on price alone.
    """
    rfb = auction.rfb
    bidders = [b.bidder for b in auction.bids]
    deltas = {
        i: tightness(rfb.timeout, rfb.hops, topo.hop_count(i, rfb.destination)) for i in bidders
    }
    viable = [d for d in deltas.values() if d >= 0]
    mean = Fraction(sum(viable), len(viable)) if viable else Fraction(0)
    return {
        i: (Fraction(d) / mean if d > 0 and mean > 0 else Fraction(0)) for i, d in deltas.items()
    }


def choose_winner(auction: Auction, topo: Topology, params: Optional[StrategyParams] = None) -> int:
    params = params or StrategyParams()
    if not auction.bids:
        raise ValueError("auction has no bids")
    cs = bidder_tightness(auction, topo)
    c_max = max(cs.values())
    budget = auction.rfb.budget

    def rank(bid):
        c = cs[bid.bidder]
        return (preference(bid.amount, c, budget, c_max, params), c, -bid.bidder)

    return max(auction.bids, key=rank).bidder


FORWARD = "forward"
DROP = "drop"
BYPASS = "bypass"


def on_win(rfb: Rfb, contract: HopContract) -> str:
    """Zero-budget packets are dropped on arrival; everything else moves on."""
    if rfb.budget == ZERO:
        return DROP
    return FORWARD
