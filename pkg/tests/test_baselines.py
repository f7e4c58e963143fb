import random
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import AP, HH
from offload_auction.baselines import (
    AlwaysBypass,
    GreedyStrategy,
    LowestBidChooser,
    RandomBidder,
    greedy_bid,
    lowest_bid_choose,
    make_strategy,
    random_bid,
)
from offload_auction.money import money
from offload_auction.protocol import Bid, HopContract, Rfb, open_auction
from offload_auction.strategies import BYPASS, StrategyKind
from offload_auction.tightness import StrategyParams
from offload_auction.topology import Topology


def rfb(budget="100", fine="10", auctioneer=0):
    return Rfb(auctioneer, 1, money(budget), money(fine), 6, 0, 9)


def hub():
    # AP 0 and AP 9 both see handhelds 1..3, which form a chain
    roles = {0: AP, 9: AP, 1: HH, 2: HH, 3: HH}
    edges = [(0, 1), (0, 2), (0, 3), (1, 9), (2, 9), (3, 9), (1, 2), (2, 3)]
    return Topology(roles, edges)


def test_greedy_bids_the_fine():
    assert greedy_bid(rfb(fine="10")) == money(10)
    assert greedy_bid(rfb(fine="10"), mode="zero") == money(0)


def test_greedy_announces_nothing():
    g = GreedyStrategy()
    contract = HopContract(0, 1, money(40), money(40), 1)
    assert g.announce(contract) == (money(0), money(0))


def test_greedy_zero_mode_from_params():
    g = GreedyStrategy(StrategyParams(greedy_bid="zero"))
    auction = open_auction(rfb(), hub())
    assert g.bid(1, auction, hub(), 1.0, random.Random(0)) == money(0)


def test_random_bid_degenerate_range():
    assert random_bid(rfb("50", "50"), random.Random(3)) == money(50)


def test_random_bid_uniform_mean():
    rng = random.Random(11)
    draws = [random_bid(rfb("100", "0"), rng) for _ in range(10_000)]
    assert all(money(0) <= d <= money(100) for d in draws)
    assert abs(sum(draws) / len(draws) - 50) <= 2


def test_random_bid_reproducible():
    a = [random_bid(rfb(), random.Random(5)) for _ in range(2)]
    assert a[0] == a[1]


def test_lowest_bid_chooser():
    topo = hub()
    auction = open_auction(Rfb(2, 1, money(100), money(10), 6, 1, 9, (0,)), topo)
    for node, amount, t in [(1, 30, 1.0), (3, 20, 1.2)]:
        auction.submit(Bid(node, money(amount), t))
    assert lowest_bid_choose(auction) == 3
    assert LowestBidChooser().choose_winner(auction, topo) == 3


def test_always_bypass_decisions():
    s = AlwaysBypass()
    contract = HopContract(0, 1, money(40), money(20), 1)
    assert s.on_win(rfb(), contract) == BYPASS
    assert s.on_stranded(contract, money(100))


def test_random_bidder_halves():
    s = RandomBidder()
    contract = HopContract(0, 1, money(40), money(40), 1)
    assert s.announce(contract) == (money(20), money(10))


def test_registry_covers_every_kind():
    for kind in StrategyKind:
        assert make_strategy(kind).kind is kind
    assert isinstance(make_strategy("always_bypass"), AlwaysBypass)
    with pytest.raises(ValueError):
        make_strategy("nonsense")


@settings(max_examples=100, deadline=None)
@given(
    st.sampled_from(list(StrategyKind)),
    st.integers(0, 10**5),
    st.integers(0, 10**5),
    st.integers(0, 2**32 - 1),
)
def test_every_baseline_bids_within_budget(kind, x, y, seed):
    fine, budget = sorted((Decimal(x) / 1000, Decimal(y) / 1000))
    topo = hub()
    r = Rfb(0, 1, money(budget), money(fine), 6, 0, 9)
    auction = open_auction(r, topo)
    amount = make_strategy(kind).bid(2, auction, topo, 1.0, random.Random(seed))
    assert money(0) <= amount <= money(budget)
