"""Re-verify recorded games against the forwarding rules and settlement.

Works purely from the trace file (topology header plus game records), so it
can audit traces produced by any implementation of the same format.
"""

from __future__ import annotations

import json
from collections import Counter, defaultdict
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Iterator

from .money import ZERO, money
from .topology import Topology

# Every rule name the audit can report.
RULES = (
    "format",
    "fine exceeds budget",
    "fine monotonicity",
    "timeout changed",
    "bid over budget",
    "bid timing",
    "mandatory bids",
    "loop prevention",
    "lowest bid",
    "contract mismatch",
    "hop deadline",
    "outcome",
    "conservation",
)


@dataclass(frozen=True)
class Violation:
    rule: str
    detail: str
    game: int | None = None

    def __str__(self) -> str:
        where = f"packet {self.game}: " if self.game is not None else ""
        return f"{where}{self.rule}: {self.detail}"


class AuditError(Exception):
    def __init__(self, violation: Violation):
        super().__init__(str(violation))
        self.violation = violation


def read_trace_file(path: str | Path) -> tuple[Topology, list[dict]]:
    topo = None
    games = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise AuditError(Violation("format", f"line {lineno}: {exc.msg}")) from None
            kind = rec.pop("type", None)
            if kind == "topology":
                topo = Topology.from_dict(rec)
            elif kind == "game":
                games.append(rec)
            else:
                raise AuditError(Violation("format", f"line {lineno}: unknown record type {kind!r}"))
    if topo is None:
        raise AuditError(Violation("format", "missing topology header"))
    return topo, games


def _m(x) -> Decimal:
    return money(str(x))


def check_game(topo: Topology, rec: dict) -> Iterator[Violation]:
    """Yield every rule violation found in one game record."""
    try:
        yield from _check_game(topo, rec)
    except (KeyError, TypeError, ValueError, ArithmeticError) as exc:
        yield Violation("format", f"malformed record ({exc!r})", rec.get("packet", {}).get("id"))


def _check_game(topo: Topology, rec: dict) -> Iterator[Violation]:
    pkt = rec["packet"]
    pid = pkt["id"]
    V = lambda rule, detail: Violation(rule, detail, pid)
    budget0, fine0, timeout = _m(pkt["budget"]), _m(pkt["fine"]), int(pkt["timeout"])
    source, dest = pkt["source"], pkt["destination"]
    if fine0 > budget0:
        yield V("fine exceeds budget", "source fine exceeds source budget")

    auctions = rec["auctions"]
    contracts = rec["contracts"]
    path = rec["path"]

    for k in range(1, len(contracts)):
        if _m(contracts[k]["fine"]) > _m(contracts[k - 1]["fine"]):
            yield V("fine monotonicity", f"contract {k} fine exceeds contract {k - 1} fine")
    if len(auctions) != len(contracts):
        yield V("contract mismatch", "one contract per closed auction expected")

    holders = [source]
    prev_fine = None
    for k, a in enumerate(auctions):
        rb, rf = _m(a["budget"]), _m(a["fine"])
        who = a["auctioneer"]
        if who != holders[-1]:
            yield V("contract mismatch", f"auction {k} run by {who}, packet held by {holders[-1]}")
        if rf > rb or rf < 0:
            yield V("fine exceeds budget", f"auction {k} fine {rf} > budget {rb}")
        if prev_fine is not None and rf > prev_fine:
            yield V("fine monotonicity", f"auction {k} fine {rf} exceeds previous fine {prev_fine}")
        if k == 0 and (rb != budget0 or rf != fine0):
            yield V("contract mismatch", "source auction must announce the packet budget and fine")
        if a["timeout"] != timeout:
            yield V("timeout changed", f"auction {k} timeout {a['timeout']} != {timeout}")
        if a["hops"] != k:
            yield V("hop deadline", f"auction {k} reports {a['hops']} hops traversed")
        if a["hops"] >= timeout:
            yield V("hop deadline", f"auction {k} opened with no hops left")

        expected = {n for n in topo.handheld_neighbors(who) if n not in holders}
        bidders = [b["bidder"] for b in a["bids"]]
        dupes = [n for n, c in Counter(bidders).items() if c > 1]
        if dupes:
            yield V("mandatory bids", f"auction {k}: duplicate bids from {sorted(dupes)}")
        loopers = set(bidders) & set(holders)
        if loopers:
            yield V("loop prevention", f"auction {k}: bids from prior holders {sorted(loopers)}")
        if set(bidders) != expected or set(a["eligible"]) != expected:
            missing = sorted(expected - set(bidders))
            extra = sorted(set(bidders) - expected - loopers)
            if missing or extra or set(a["eligible"]) != expected:
                yield V("mandatory bids", f"auction {k}: missing {missing}, unexpected {extra}")
        times = [float(b["time"]) for b in a["bids"]]
        if any(not 0 <= t <= float(a["window"]) for t in times) or times != sorted(times):
            yield V("bid timing", f"auction {k}: bids outside the window or out of order")
        amounts = {b["bidder"]: _m(b["amount"]) for b in a["bids"]}
        for n, amt in amounts.items():
            if amt > rb or amt < 0:
                yield V("bid over budget", f"auction {k}: node {n} bid {amt} over budget {rb}")

        winner = a["winner"]
        if winner not in amounts:
            yield V("contract mismatch", f"auction {k}: winner {winner} did not bid")
        elif topo.is_ap(who):
            best = min(amounts.items(), key=lambda kv: (kv[1], kv[0]))[0]
            if winner != best:
                yield V("lowest bid", f"auction {k}: AP chose {winner}, lowest bid was {best}")

        if k < len(contracts):
            c = contracts[k]
            if (c["upstream"], c["downstream"]) != (who, winner):
                yield V("contract mismatch", f"contract {k} parties differ from auction {k}")
            if winner in amounts and _m(c["price"]) != amounts[winner]:
                yield V("contract mismatch", f"contract {k} price differs from winning bid")
            if _m(c["fine"]) != rf:
                yield V("contract mismatch", f"contract {k} fine differs from RFB fine")
        holders.append(winner)
        prev_fine = rf

    if len(set(path)) != len(path) or source in path:
        yield V("loop prevention", "packet visited a node twice")
    handheld_path = [n for n in path if n != dest]
    if handheld_path != holders[1:]:
        yield V("contract mismatch", "path does not follow the auction winners")
    if rec["hops"] != len(path):
        yield V("hop deadline", "hop counter does not match path length")

    outcome, reason = rec["outcome"], rec["reason"]
    if outcome == "delivered":
        if len(path) > timeout:
            yield V("hop deadline", f"delivered after {len(path)} hops, timeout {timeout}")
        if reason == "ad_hoc":
            if not path or path[-1] != dest:
                yield V("outcome", "ad hoc delivery must end at the destination")
            elif len(path) >= 2 and dest not in topo.neighbors(path[-2]):
                yield V("outcome", "final hop is not a radio link")
        elif reason == "bypass":
            if rec["bypass_by"] != holders[-1]:
                yield V("outcome", "bypass must be made by the current holder")
        else:
            yield V("outcome", f"unknown delivery mode {reason!r}")
    elif outcome == "failed":
        if path and path[-1] == dest:
            yield V("outcome", "packet reached destination but is marked failed")
        if reason not in ("drop", "timeout", "stranded"):
            yield V("outcome", f"unknown failure reason {reason!r}")
        elif reason == "drop" and (not path or rec.get("dropped_by") != path[-1]):
            yield V("outcome", "drop must be made by the current holder")
    else:
        yield V("outcome", f"unknown outcome {outcome!r}")

    yield from _check_settlement(rec, contracts, budget0, V)


def _check_settlement(rec, contracts, budget0, V) -> Iterator[Violation]:
    pid = rec["packet"]["id"]
    expected = []
    if rec["outcome"] == "delivered":
        for c in contracts:
            expected.append(("success_payment", str(c["upstream"]), str(c["downstream"]), _m(c["price"])))
        if rec["reason"] == "bypass":
            expected.append(("bypass_charge", str(rec["bypass_by"]), "operator", budget0))
    else:
        for c in contracts:
            expected.append(("fine", str(c["downstream"]), str(c["upstream"]), _m(c["fine"])))

    actual = []
    totals: dict[str, Decimal] = defaultdict(lambda: ZERO)
    for t in rec["transfers"]:
        if int(t["packet_id"]) != pid:
            yield V("conservation", "transfer booked against another packet")
        amt = _m(t["amount"])
        if amt < 0:
            yield V("conservation", "negative transfer")
        actual.append((t["reason"], str(t["payer"]), str(t["payee"]), amt))
        totals[str(t["payer"])] -= amt
        totals[str(t["payee"])] += amt

    if actual != expected:
        yield V("conservation", "transfers do not settle each contract exactly once")
    recorded = {k: _m(v) for k, v in rec["deltas"].items()}
    if sum(recorded.values(), ZERO) != 0:
        yield V("conservation", "balance deltas do not sum to zero")
    nonzero = lambda d: {k: v for k, v in d.items() if v != 0}
    if nonzero(recorded) != nonzero(dict(totals)):
        yield V("conservation", "balance deltas disagree with the transfers")


def audit_records(topo: Topology, games: Iterable[dict]) -> list[Violation]:
    out = []
    for rec in games:
        out.extend(check_game(topo, rec))
    return out


def audit_file(path: str | Path) -> list[Violation]:
    topo, games = read_trace_file(path)
    return audit_records(topo, games)
