import csv
import io
from decimal import Decimal

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import fold_balances
from offload_auction.accounting import (
    OPERATOR,
    ChainError,
    ContractChain,
    Ledger,
    Transfer,
    UnknownAccountError,
    balance,
    replay_balances,
    settle_bypass,
    settle_failure,
    settle_success,
    transfers_to_csv,
)
from offload_auction.money import money
from offload_auction.protocol import HopContract

AP0, A, B, C = 0, 1, 2, 3


def chain(*links, packet=7):
    """links: (upstream, downstream, price, fine)."""
    return [HopContract(u, d, money(p), money(f), packet) for u, d, p, f in links]


def test_success_pays_every_hop():
    ledger = settle_success(Ledger([AP0, A, B]), chain((AP0, A, 30, 20), (A, B, 20, 10)))
    assert balance(ledger, AP0) == money(-30)
    assert balance(ledger, A) == money(10)
    assert balance(ledger, B) == money(20)
    assert [t.reason for t in ledger] == ["success_payment"] * 2


def test_failure_cascades_fines_upstream():
    contracts = chain((AP0, A, 80, 50), (A, B, 60, 40), (B, C, 40, 30))
    ledger = settle_failure(Ledger([AP0, A, B, C]), contracts)
    assert ledger.balances() == {
        AP0: money(50), A: money(-10), B: money(-10), C: money(-30), OPERATOR: money(0),
    }
    assert [(t.payer, t.payee) for t in ledger] == [(A, AP0), (B, A), (C, B)]


def test_zero_fine_tail_still_recorded():
    ledger = settle_failure(Ledger([AP0, A, B]), chain((AP0, A, 40, 40), (A, B, 0, 0)))
    assert balance(ledger, A) == money(-40)
    assert balance(ledger, B) == money(0)
    assert len(ledger) == 2 and ledger.transfers[1].amount == money(0)


def test_bypass_charges_original_budget():
    ledger = settle_bypass(Ledger([A]), A, money(100), 3)
    assert balance(ledger, A) == money(-100)
    assert balance(ledger, OPERATOR) == money(100)
    (t,) = ledger.transfers
    assert (t.reason, t.payer, t.payee) == ("bypass_charge", A, OPERATOR)


def test_bypass_with_zero_budget_records_zero_transfer():
    ledger = settle_bypass(Ledger([A]), A, money(0), 3)
    assert len(ledger) == 1 and balance(ledger, A) == money(0)


def test_unknown_account():
    ledger = Ledger([A])
    with pytest.raises(UnknownAccountError):
        ledger.balance(42)
    with pytest.raises(UnknownAccountError):
        ledger.record(Transfer(1, "fine", A, 42, money(1)))


def test_transfer_rejects_bad_values():
    with pytest.raises(ValueError):
        Transfer(1, "tip", A, B, money(1))
    with pytest.raises(ValueError):
        Transfer(1, "fine", A, B, money(-1))


@pytest.mark.parametrize(
    "contracts, msg",
    [
        (chain((AP0, A, 10, 5), (B, C, 5, 5)), "broken"),
        (chain((AP0, A, 10, 5), (A, B, 5, 6)), "fine increases"),
        (chain((AP0, A, 10, 5), (A, AP0, 5, 5)), "twice"),
        (chain((AP0, A, 10, 5)) + chain((A, B, 5, 5), packet=8), "different packets"),
    ],
)
def test_chain_validation(contracts, msg):
    with pytest.raises(ChainError, match=msg):
        ContractChain(contracts)
    with pytest.raises(ChainError):
        settle_success(Ledger([AP0, A, B, C]), contracts)


def test_csv_columns_and_formatting():
    ledger = settle_success(Ledger([AP0, A]), chain((AP0, A, "12.5", 3)))
    settle_bypass(ledger, A, money(20), 7)
    rows = list(csv.DictReader(io.StringIO(ledger.to_csv())))
    assert rows == [
        {"packet_id": "7", "reason": "success_payment", "payer": "0", "payee": "1", "amount": "12.500"},
        {"packet_id": "7", "reason": "bypass_charge", "payer": "1", "payee": "operator", "amount": "20.000"},
    ]
    assert [Transfer.from_row(r) for r in rows] == list(ledger.transfers)


amounts = st.integers(0, 10**6).map(lambda x: Decimal(x) / 1000)


@st.composite
def random_chains(draw):
    n = draw(st.integers(1, 6))
    fines = sorted(draw(st.lists(amounts, min_size=n, max_size=n)), reverse=True)
    prices = draw(st.lists(amounts, min_size=n, max_size=n))
    nodes = list(range(n + 1))
    return chain(*[(nodes[k], nodes[k + 1], prices[k], fines[k]) for k in range(n)])


@settings(max_examples=200, deadline=None)
@given(random_chains(), st.sampled_from(["success", "failure", "bypass"]))
def test_settlement_conserves_money(contracts, outcome):
    nodes = {c.upstream for c in contracts} | {c.downstream for c in contracts}
    ledger = Ledger(nodes)
    if outcome == "failure":
        settle_failure(ledger, contracts)
    else:
        settle_success(ledger, contracts)
        if outcome == "bypass":
            settle_bypass(ledger, contracts[-1].downstream, money(100), contracts[0].packet_id)
    assert sum(ledger.balances().values()) == 0
    oracle = fold_balances((t.payer, t.payee, t.amount) for t in ledger)
    for acct, value in ledger.balances().items():
        assert value == oracle.get(acct, 0)
    assert replay_balances(ledger.transfers) == {k: v for k, v in oracle.items()}


def test_csv_helper_matches_ledger():
    ledger = settle_failure(Ledger([AP0, A]), chain((AP0, A, 10, 4)))
    assert transfers_to_csv(ledger.transfers) == ledger.to_csv()
