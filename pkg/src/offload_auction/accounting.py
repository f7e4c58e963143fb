"""Append-only ledger and the settlement rules for one packet's contract chain."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from decimal import Decimal
from typing import Iterable, Iterator, Sequence, Union

from .money import ZERO, fmt, money
from .protocol import HopContract

OPERATOR = "operator"

SUCCESS_PAYMENT = "success_payment"
FINE = "fine"
BYPASS_CHARGE = "bypass_charge"
REASONS = (SUCCESS_PAYMENT, FINE, BYPASS_CHARGE)

TRANSFER_COLUMNS = ("packet_id", "reason", "payer", "payee", "amount")

Account = Union[int, str]


class ChainError(Exception):
    pass


class UnknownAccountError(KeyError):
    def __str__(self) -> str:
        return f"unknown account {self.args[0]!r}"


@dataclass(frozen=True)
class Transfer:
    packet_id: int
    reason: str
    payer: Account
    payee: Account
    amount: Decimal

    def __post_init__(self):
        if self.reason not in REASONS:
            raise ValueError(f"unknown transfer reason {self.reason!r}")
        if self.amount < 0:
            raise ValueError("transfer amount must be non-negative")

    def to_row(self) -> dict:
        return {
            "packet_id": self.packet_id,
            "reason": self.reason,
            "payer": self.payer,
            "payee": self.payee,
            "amount": fmt(self.amount),
        }

    @classmethod
    def from_row(cls, row: dict) -> "Transfer":
        return cls(
            packet_id=int(row["packet_id"]),
            reason=row["reason"],
            payer=_account(row["payer"]),
            payee=_account(row["payee"]),
            amount=money(row["amount"]),
        )


def _account(value) -> Account:
    if isinstance(value, int):
        return value
    return OPERATOR if value == OPERATOR else int(value)


class Ledger:
    """Transfers are only ever appended; balances are a fold over them."""

    def __init__(self, accounts: Iterable[Account] = ()):
        self._accounts: set[Account] = set(accounts)
        self._accounts.add(OPERATOR)
        self._transfers: list[Transfer] = []
        self._balances: dict[Account, Decimal] = defaultdict(lambda: ZERO)

    @property
    def transfers(self) -> tuple[Transfer, ...]:
        return tuple(self._transfers)

    @property
    def accounts(self) -> list[Account]:
        return sorted(self._accounts, key=_account_key)

    def __len__(self) -> int:
        return len(self._transfers)

    def __iter__(self) -> Iterator[Transfer]:
        return iter(self._transfers)

    def record(self, transfer: Transfer) -> Transfer:
        for acct in (transfer.payer, transfer.payee):
            if acct not in self._accounts:
                raise UnknownAccountError(acct)
        amount = money(transfer.amount)
        self._balances[transfer.payer] -= amount
        self._balances[transfer.payee] += amount
        self._transfers.append(transfer)
        return transfer

    def extend(self, transfers: Iterable[Transfer]) -> None:
        for t in transfers:
            self.record(t)

    def balance(self, account: Account) -> Decimal:
        if account not in self._accounts:
            raise UnknownAccountError(account)
        return money(self._balances[account])

    def balances(self) -> dict[Account, Decimal]:
        return {a: self.balance(a) for a in self.accounts}

    def to_csv(self) -> str:
        return transfers_to_csv(self._transfers)


def _account_key(acct: Account):
    return (1, 0) if acct == OPERATOR else (0, acct)


def transfers_to_csv(transfers: Iterable[Transfer]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=TRANSFER_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for t in transfers:
        writer.writerow(t.to_row())
    return buf.getvalue()


def replay_balances(transfers: Iterable[Transfer]) -> dict[Account, Decimal]:
    out: dict[Account, Decimal] = defaultdict(lambda: ZERO)
    for t in transfers:
        out[t.payer] -= t.amount
        out[t.payee] += t.amount
    return dict(out)


class ContractChain(tuple):
    """Hop contracts of one packet, source side first."""

    def __new__(cls, contracts: Iterable[HopContract] = ()):
        chain = super().__new__(cls, tuple(contracts))
        chain.validate()
        return chain

    def validate(self) -> None:
        if not self:
            return
        packet_ids = {c.packet_id for c in self}
        if len(packet_ids) != 1:
            raise ChainError("contracts belong to different packets")
        seen = {self[0].upstream}
        for k, c in enumerate(self):
            if c.price < 0 or c.fine < 0:
                raise ChainError(f"contract {k} has a negative amount")
            if c.downstream in seen:
                raise ChainError(f"node {c.downstream} appears twice in the chain")
            seen.add(c.downstream)
            if k:
                prev = self[k - 1]
                if prev.downstream != c.upstream:
                    raise ChainError(f"chain broken between contracts {k - 1} and {k}")
                if c.fine > prev.fine:
                    raise ChainError(f"fine increases at contract {k}")

    @property
    def packet_id(self) -> int:
        return self[0].packet_id


def _chain(chain: Sequence[HopContract]) -> ContractChain:
    return chain if isinstance(chain, ContractChain) else ContractChain(chain)


def settle_success(ledger: Ledger, chain: Sequence[HopContract]) -> Ledger:
    """Every upstream pays its downstream the accepted price."""
    for c in _chain(chain):
        ledger.record(Transfer(c.packet_id, SUCCESS_PAYMENT, c.upstream, c.downstream, c.price))
    return ledger


def settle_failure(ledger: Ledger, chain: Sequence[HopContract]) -> Ledger:
    """Every downstream pays its upstream the agreed fine."""
    for c in _chain(chain):
        ledger.record(Transfer(c.packet_id, FINE, c.downstream, c.upstream, c.fine))
    return ledger


def settle_bypass(ledger: Ledger, node: int, original_budget: Decimal, packet_id: int) -> Ledger:
    ledger.record(Transfer(packet_id, BYPASS_CHARGE, node, OPERATOR, money(original_budget)))
    return ledger


def balance(ledger: Ledger, account: Account) -> Decimal:
    return ledger.balance(account)
