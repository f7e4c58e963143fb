from decimal import Decimal
from itertools import permutations

import pytest

from conftest import AP, HH
from offload_auction.money import money
from offload_auction.protocol import (
    Bid,
    ProtocolError,
    Rfb,
    ap_select_winner,
    close_auction,
    open_auction,
    submit_bid,
)
from offload_auction.topology import Topology


def star(n_leaves=3, center_role=HH):
    """Node 0 is the centre, 1..n are handheld leaves, n+1 and n+2 are APs on leaf 1."""
    roles = {0: center_role, **{i: HH for i in range(1, n_leaves + 1)}}
    a1, a2 = n_leaves + 1, n_leaves + 2
    roles[a1] = AP
    roles[a2] = AP
    edges = [(0, i) for i in range(1, n_leaves + 1)] + [(1, a1), (1, a2)]
    return Topology(roles, edges)


def rfb(auctioneer=0, budget="100", fine="40", **kw):
    kw.setdefault("timeout", 5)
    kw.setdefault("hops", 0)
    kw.setdefault("destination", 5)
    return Rfb(auctioneer=auctioneer, packet_id=1, budget=money(budget), fine=money(fine), **kw)


def test_fine_above_budget_rejected():
    with pytest.raises(ProtocolError, match="fine exceeds budget") as exc:
        open_auction(rfb(budget="10", fine="10.001"), star())
    assert exc.value.rule == "fine exceeds budget"


def test_fine_above_previous_hop_rejected():
    with pytest.raises(ProtocolError) as exc:
        open_auction(rfb(fine="40", upstream_fine=money("39.999")), star())
    assert exc.value.rule == "fine monotonicity"


def test_timeout_must_match_source():
    with pytest.raises(ProtocolError) as exc:
        open_auction(rfb(timeout=6, source_timeout=5), star())
    assert exc.value.rule == "timeout changed"


def test_open_auction_default_window():
    auction = open_auction(rfb(), star())
    assert auction.window == 3.0
    assert auction.phase == "open"
    assert auction.bids == []
    assert auction.eligible == {1, 2, 3}


def test_prior_forwarder_excluded():
    auction = open_auction(rfb(forwarders=(2,)), star())
    assert auction.eligible == {1, 3}


def test_access_points_never_bid():
    auction = open_auction(rfb(auctioneer=1), star())
    assert auction.eligible == {0}


def test_bid_equal_to_budget_is_legal():
    auction = open_auction(rfb(budget="100"), star())
    submit_bid(auction, Bid(1, money("100"), 1.0))
    assert auction.bids[0].amount == Decimal("100.000")


def test_bid_over_budget_rejected():
    auction = open_auction(rfb(budget="100"), star())
    with pytest.raises(ProtocolError, match="lower or equal than the announced budget"):
        auction.submit(Bid(1, money("100.001"), 1.0))


def test_duplicate_and_ineligible_bids_rejected():
    auction = open_auction(rfb(forwarders=(2,)), star())
    auction.submit(Bid(1, money(5), 1.0))
    with pytest.raises(ProtocolError) as dup:
        auction.submit(Bid(1, money(4), 1.5))
    assert dup.value.rule == "duplicate bid"
    with pytest.raises(ProtocolError) as inel:
        auction.submit(Bid(2, money(4), 1.5))
    assert inel.value.rule == "ineligible bidder"


def test_bid_outside_window_rejected():
    auction = open_auction(rfb(), star())
    with pytest.raises(ProtocolError):
        auction.submit(Bid(1, money(5), 3.5))


def test_open_bids_visible_to_later_bidders():
    auction = open_auction(rfb(), star())
    auction.submit(Bid(2, money(50), 2.0))
    auction.submit(Bid(1, money(60), 1.2))
    assert [b.bidder for b in auction.bids] == [1, 2]  # kept in submit-time order
    assert [b.bidder for b in auction.visible_bids(2.0)] == [1]
    assert [b.bidder for b in auction.visible_bids(2.5)] == [1, 2]


def test_single_bidder_must_win():
    topo = star(n_leaves=1)
    auction = open_auction(rfb(), topo)
    auction.submit(Bid(1, money(80), 2.0))
    _, contract = close_auction(auction, 1)
    assert contract.downstream == 1
    assert contract.price == money(80)
    assert contract.fine == money(40)
    assert auction.phase == "closed"


def test_close_requires_all_mandatory_bids():
    auction = open_auction(rfb(), star())
    auction.submit(Bid(1, money(80), 2.0))
    with pytest.raises(ProtocolError, match=r"\[2, 3\]") as exc:
        auction.close(1)
    assert exc.value.rule == "mandatory bids"


def test_close_rejects_non_bidder_and_early_close():
    topo = star(n_leaves=1)
    auction = open_auction(rfb(), topo)
    auction.submit(Bid(1, money(80), 2.0))
    with pytest.raises(ProtocolError):
        auction.close(1, now=2.9)
    with pytest.raises(ProtocolError):
        auction.close(2)


def ap_auction(amounts):
    """AP 0 auctions among handhelds with the given bids (node id -> amount)."""
    roles = {0: AP, 99: AP, **{n: HH for n in amounts}}
    hh = sorted(amounts)
    edges = [(0, n) for n in hh] + [(n, 99) for n in hh] + list(zip(hh, hh[1:]))
    topo = Topology(roles, edges)
    auction = open_auction(rfb(destination=99), topo)
    for k, (node, amt) in enumerate(sorted(amounts.items())):
        auction.submit(Bid(node, money(amt), 0.5 + k * 0.1))
    return auction


def test_ap_picks_lowest():
    auction = ap_auction({1: 30, 2: 25, 3: 40})
    assert ap_select_winner(auction) == 2
    _, contract = close_auction(auction, 2)
    assert contract.price == money(25)


def test_ap_must_not_pick_higher_bid():
    auction = ap_auction({1: 30, 2: 25, 3: 40})
    with pytest.raises(ProtocolError) as exc:
        auction.close(1)
    assert exc.value.rule == "lowest bid"


def test_ap_single_bid():
    assert ap_select_winner(ap_auction({4: 70})) == 4


def test_ap_tie_break_matches_pairwise_oracle():
    # oracle: the winner beats every other bidder pairwise under (amount, id)
    for amounts in [{1: 25, 2: 25}, {3: 10, 1: 10, 2: 11}, {5: 7, 4: 7, 6: 7}]:
        winner = ap_select_winner(ap_auction(amounts))
        for other in amounts:
            if other != winner:
                assert (amounts[winner], winner) < (amounts[other], other)


def test_ap_tie_break_is_order_independent():
    amounts = {1: 25, 2: 25, 3: 30}
    winners = set()
    for order in permutations(amounts):
        roles = {0: AP, 99: AP, **{n: HH for n in amounts}}
        hh = sorted(amounts)
        topo = Topology(roles, [(0, n) for n in hh] + [(n, 99) for n in hh] + list(zip(hh, hh[1:])))
        auction = open_auction(rfb(destination=99), topo)
        for k, node in enumerate(order):
            auction.submit(Bid(node, money(amounts[node]), 1.0 + k * 0.1))
        winners.add(ap_select_winner(auction))
    assert winners == {1}


def test_no_eligible_bidders():
    topo = Topology({0: AP, 1: HH, 2: AP}, [(0, 1), (1, 2)])
    auction = open_auction(rfb(auctioneer=0, forwarders=(1,), destination=2), topo)
    with pytest.raises(ProtocolError, match="no eligible bidders"):
        ap_select_winner(auction)


def test_handheld_may_pick_any_bidder():
    auction = open_auction(rfb(), star())
    for node, amt, t in [(1, 30, 1.0), (2, 25, 1.1), (3, 40, 1.2)]:
        auction.submit(Bid(node, money(amt), t))
    contract = auction.close(3)
    assert contract.price == money(40)
