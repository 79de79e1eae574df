"""Clustering heuristics: each maps transactions (plus chain and conflict
structures) to a set of same-entity address links.

Heuristic ids:
  cs  co-spend                     ca  change, only-fresh + two outputs
  cm  change, Meiklejohn criteria  cg  cm plus the CoinJoin filter
  ce  change, value-based          ck  change along peel chains
  rc  replacement change (RBF)     oc  one-to-one dependency chains
  fc  fusiform chains              ni  repeated identical payments (new input)
  pc  peel-chain co-ownership

ni and pc are experimental and never selected implicitly.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import UnknownHeuristic
from .mempool import (
    SCOPE_CONFIRMED,
    SCOPE_MEMPOOL,
    Chain,
    ConflictGroup,
    build_dependency_graph,
    conflict_groups,
    extract_fusiform_chains,
    extract_one_to_one_chains,
    extract_peel_chains,
)
from .store import TxStore
from .txmodel import CONFIRMED, FAILED, FreshIndex, Transaction

STANDARD_HEURISTICS = ("cs", "ca", "cm", "cg", "ce", "ck")
NOVEL_HEURISTICS = ("rc", "oc", "fc")
EXPERIMENTAL_HEURISTICS = ("ni", "pc")
ALL_HEURISTICS = STANDARD_HEURISTICS + NOVEL_HEURISTICS + EXPERIMENTAL_HEURISTICS

SOURCE_SETS = ("confirmed", "unconfirmed", "failed", "all")


class LinkSet:
    """Same-entity address pairs plus the txids that witness each pair.

    Pairs are stored canonically ordered; multi-address claims (a chain, a
    co-spend input set) are represented as a star to the lexicographically
    least address, which is component-equivalent to the full clique.
    """

    def __init__(self, heuristic: str):
        self.heuristic = heuristic
        self._links: dict[tuple[str, str], set[str]] = {}

    def add(self, a: str, b: str, evidence: Iterable[str]) -> None:
        if a is None or b is None or a == b:
            return
        pair = (a, b) if a < b else (b, a)
        self._links.setdefault(pair, set()).update(evidence)

    def add_component(self, addresses: Iterable[str], evidence: Iterable[str]) -> None:
        addrs = sorted({a for a in addresses if a is not None})
        if len(addrs) < 2:
            return
        hub = addrs[0]
        ev = list(evidence)
        for other in addrs[1:]:
            self.add(hub, other, ev)

    def merge(self, other: "LinkSet") -> None:
        for pair, ev in other._links.items():
            self._links.setdefault(pair, set()).update(ev)

    def pairs(self) -> set[tuple[str, str]]:
        return set(self._links)

    def evidence(self, a: str, b: str) -> list[str]:
        pair = (a, b) if a < b else (b, a)
        return sorted(self._links.get(pair, ()))

    def links(self) -> list[tuple[str, str, list[str]]]:
        return [(a, b, sorted(ev)) for (a, b), ev in sorted(self._links.items())]

    def to_jsonl(self) -> Iterable[str]:
        import json

        for a, b, ev in self.links():
            yield json.dumps(
                {"heuristic": self.heuristic, "a": a, "b": b, "evidence": ev},
                separators=(",", ":"),
            )

    def __len__(self) -> int:
        return len(self._links)

    def __iter__(self):
        return iter(sorted(self._links))


@dataclass(frozen=True, slots=True)
class ChangeAssignment:
    txid: str
    change_address: str
    heuristic: str


# --- CoinJoin filter ---------------------------------------------------------

def detect_coinjoin(tx: Transaction, min_equal: int = 2, min_outputs: int = 3) -> bool:
    """Equal-output mixing shape: the modal output value occurs k >= min_equal
    times, with at least k inputs and at least min_outputs outputs."""
    if tx.is_coinbase or len(tx.outputs) < min_outputs:
        return False
    k = max(Counter(o.value_sat for o in tx.outputs).values())
    return k >= min_equal and len(tx.inputs) >= k


# --- co-spend ----------------------------------------------------------------

def co_spend(
    txs: Iterable[Transaction],
    min_equal: int = 2,
    min_outputs: int = 3,
) -> LinkSet:
    """All input addresses of one non-coinbase, non-CoinJoin transaction
    belong to one entity."""
    links = LinkSet("cs")
    for tx in txs:
        if tx.is_coinbase or detect_coinjoin(tx, min_equal, min_outputs):
            continue
        addrs = tx.input_addresses()
        if len(addrs) >= 2:
            links.add_component(addrs, [tx.txid])
    return links


# --- change-address heuristics -------------------------------------------------

def _fresh_output_addresses(tx: Transaction, fresh: FreshIndex) -> list[str]:
    return sorted(
        a for a in tx.output_addresses() if fresh.is_fresh(a, tx)
    )


def change_androulaki(tx: Transaction, fresh: FreshIndex) -> ChangeAssignment | None:
    """Exactly two outputs and the address is the only fresh one among them."""
    if len(tx.outputs) != 2:
        return None
    candidates = _fresh_output_addresses(tx, fresh)
    if len(candidates) != 1:
        return None
    return ChangeAssignment(tx.txid, candidates[0], "ca")


def change_meiklejohn(tx: Transaction, fresh: FreshIndex) -> ChangeAssignment | None:
    """Not coinbase, exactly one fresh output address, and no address occurs
    on both sides of the transaction."""
    if tx.is_coinbase:
        return None
    if tx.input_addresses() & tx.output_addresses():
        return None
    candidates = _fresh_output_addresses(tx, fresh)
    if len(candidates) != 1:
        return None
    return ChangeAssignment(tx.txid, candidates[0], "cm")


def change_goldfeder(
    tx: Transaction,
    fresh: FreshIndex,
    min_equal: int = 2,
    min_outputs: int = 3,
) -> ChangeAssignment | None:
    """Meiklejohn's criteria plus rejection of CoinJoin transactions."""
    if detect_coinjoin(tx, min_equal, min_outputs):
        return None
    found = change_meiklejohn(tx, fresh)
    if found is None:
        return None
    return ChangeAssignment(tx.txid, found.change_address, "cg")


def change_ermilov(tx: Transaction, fresh: FreshIndex) -> ChangeAssignment | None:
    """Value-aware rule: more or less than two inputs, exactly two outputs,
    disjoint sides, one fresh output address whose amount has significant
    digits past the fourth BTC decimal (not a multiple of 10,000 sat)."""
    if len(tx.inputs) == 2 or len(tx.outputs) != 2:
        return None
    if tx.input_addresses() & tx.output_addresses():
        return None
    candidates = _fresh_output_addresses(tx, fresh)
    if len(candidates) != 1:
        return None
    change = candidates[0]
    rows = [o for o in tx.outputs if o.address == change]
    if len(rows) != 1 or rows[0].value_sat % 10_000 == 0:
        return None
    return ChangeAssignment(tx.txid, change, "ce")


def kappos_assignments(peel_chains: Sequence[Chain], store: TxStore) -> list[ChangeAssignment]:
    """Change along peel chains: a chain member's candidate output is spent
    and its spender is a member of the same chain.

    A transaction that appears in several chains with differing linking
    outputs is ambiguous and receives no assignment.
    """
    candidates: dict[str, set[str]] = defaultdict(set)
    for chain in peel_chains:
        for parent, child in zip(chain.txids, chain.txids[1:]):
            link = store.get(child).inputs[0]
            if link.address is not None:
                candidates[parent].add(link.address)
    return [
        ChangeAssignment(txid, next(iter(addrs)), "ck")
        for txid, addrs in sorted(candidates.items())
        if len(addrs) == 1
    ]


def change_kappos(
    tx: Transaction, peel_chains: Sequence[Chain], store: TxStore
) -> ChangeAssignment | None:
    for found in kappos_assignments(peel_chains, store):
        if found.txid == tx.txid:
            return found
    return None


def assignments_to_links(
    assignments: Iterable[ChangeAssignment],
    store: TxStore,
    heuristic: str,
) -> LinkSet:
    """A change assignment entangles the change address with every input
    address of its transaction."""
    links = LinkSet(heuristic)
    for found in assignments:
        tx = store.get(found.txid)
        for addr in sorted(tx.input_addresses()):
            links.add(found.change_address, addr, [tx.txid])
    return links


# --- novel heuristics ----------------------------------------------------------

def replacement_change(
    groups: Sequence[ConflictGroup],
    store: TxStore,
    min_equal: int = 2,
    min_outputs: int = 3,
) -> LinkSet:
    """Within replaceable conflicting spends of one outpoint that share an
    input address set, an output address whose received amount varies across
    members is the sender's change; constant-amount addresses are
    counterparties and never linked."""
    links = LinkSet("rc")
    for group in groups:
        members = [
            store.get(t)
            for t in group.members
            if not detect_coinjoin(store.get(t), min_equal, min_outputs)
        ]
        members = [
            tx for tx in members
            if tx.mempool is not None and tx.mempool.replaceable
        ]
        if len(members) < 2:
            continue
        input_sets = {frozenset(tx.input_addresses()) for tx in members}
        if len(input_sets) != 1:
            continue
        input_addrs = sorted(input_sets.pop())
        if not input_addrs:
            continue
        received: dict[str, list[int]] = defaultdict(list)
        for tx in members:
            per_addr: dict[str, int] = defaultdict(int)
            for out in tx.outputs:
                if out.address is not None:
                    per_addr[out.address] += out.value_sat
            for addr, amount in per_addr.items():
                received[addr].append(amount)
        evidence = sorted(tx.txid for tx in members)
        for addr in sorted(received):
            amounts = received[addr]
            if len(amounts) >= 2 and len(set(amounts)) > 1:
                for inp in input_addrs:
                    links.add(addr, inp, evidence)
    return links


def one_to_one_links(chains: Sequence[Chain]) -> LinkSet:
    """Every address on a qualifying one-to-one chain belongs to one entity."""
    links = LinkSet("oc")
    for chain in chains:
        links.add_component(chain.addresses, chain.txids)
    return links


def fusiform_links(chains: Sequence[Chain]) -> LinkSet:
    """Every address on a fusiform chain belongs to one entity."""
    links = LinkSet("fc")
    for chain in chains:
        links.add_component(chain.addresses, chain.txids)
    return links


def new_input_links(
    txs: Iterable[Transaction],
    min_equal: int = 2,
    min_outputs: int = 3,
) -> LinkSet:
    """Observed transactions paying one address the exact same amount, where
    every payer but at most one ended up failed, share their input addresses.

    Experimental: a popular merchant address receiving a fixed price from
    unrelated buyers produces false positives, hence the failure restriction.
    """
    groups: dict[tuple[str, int], list[Transaction]] = defaultdict(list)
    for tx in txs:
        if tx.mempool is None or tx.is_coinbase:
            continue
        if detect_coinjoin(tx, min_equal, min_outputs):
            continue
        per_addr: dict[str, int] = defaultdict(int)
        for out in tx.outputs:
            if out.address is not None:
                per_addr[out.address] += out.value_sat
        for addr, amount in per_addr.items():
            groups[(addr, amount)].append(tx)
    links = LinkSet("ni")
    for key in sorted(groups):
        members = groups[key]
        if len(members) < 2:
            continue
        if sum(1 for tx in members if tx.status != FAILED) > 1:
            continue
        addrs = set()
        for tx in members:
            addrs |= tx.input_addresses()
        links.add_component(addrs, sorted(tx.txid for tx in members))
    return links


def peel_chain_links(chains: Sequence[Chain], store: TxStore) -> LinkSet:
    """All transactions of one peel chain are initiated by one entity: their
    input addresses (which subsume the linking change outputs) are linked."""
    links = LinkSet("pc")
    for chain in chains:
        addrs = set()
        for txid in chain.txids:
            addrs |= store.get(txid).input_addresses()
        links.add_component(addrs, chain.txids)
    return links


# --- pipeline -------------------------------------------------------------------

@dataclass(slots=True)
class HeuristicParams:
    min_chain_len: int = 3
    fusiform_depth: int = 4
    coinjoin_min_equal: int = 2
    coinjoin_min_outputs: int = 3
    fresh_scope: str | None = None  # default: track the source set


def parse_heuristics(spec: str) -> list[str]:
    """Expand a comma list of heuristic ids; `standard` and `novel` are
    aliases, experimental ids must be named explicitly."""
    ids: list[str] = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        if token == "standard":
            ids.extend(STANDARD_HEURISTICS)
        elif token == "novel":
            ids.extend(NOVEL_HEURISTICS)
        elif token in ALL_HEURISTICS:
            ids.append(token)
        else:
            raise UnknownHeuristic(token)
    seen = set()
    unique = []
    for h in ids:
        if h not in seen:
            seen.add(h)
            unique.append(h)
    return unique


def source_transactions(store: TxStore, source: str) -> list[Transaction]:
    if source == "all":
        return list(store.all())
    if source == "confirmed":
        return list(store.by_status(CONFIRMED))
    if source == "unconfirmed":
        return [tx for tx in store.all() if tx.status != CONFIRMED]
    if source == "failed":
        return list(store.by_status(FAILED))
    raise ValueError(f"unknown source set: {source}")


def run_heuristics(
    store: TxStore,
    ids: Sequence[str],
    source: str = "all",
    params: HeuristicParams | None = None,
) -> dict[str, LinkSet]:
    """Run the selected heuristics over one source set.

    Per-transaction heuristics (cs, ca, cm, cg, ce) see exactly the source
    set. Chain and conflict heuristics work over everything observed in the
    mempool, whatever its final status, because a replacement lineage or a
    dependency chain routinely ends in a confirmed member; on the confirmed
    source they return nothing (ck walks confirmed peel chains instead), so
    confirmed-only runs never touch mempool observations.
    """
    params = params or HeuristicParams()
    for h in ids:
        if h not in ALL_HEURISTICS:
            raise UnknownHeuristic(h)
    txs = source_transactions(store, source)
    confirmed_only = source == "confirmed"
    cj = (params.coinjoin_min_equal, params.coinjoin_min_outputs)

    fresh = None
    if any(h in ids for h in ("ca", "cm", "cg", "ce")):
        scope = params.fresh_scope or ("confirmed" if confirmed_only else "all")
        fresh = FreshIndex(store.all(), scope)

    graph = None
    peel = None

    def dep_graph():
        nonlocal graph
        if graph is None:
            graph = build_dependency_graph(store)
        return graph

    def peel_chains():
        nonlocal peel
        if peel is None:
            if confirmed_only:
                peel = extract_peel_chains(
                    store, SCOPE_CONFIRMED, params.min_chain_len
                )
            else:
                peel = extract_peel_chains(
                    store, SCOPE_MEMPOOL, params.min_chain_len, graph=dep_graph()
                )
        return peel

    results: dict[str, LinkSet] = {}
    for h in ids:
        if h == "cs":
            results[h] = co_spend(txs, *cj)
        elif h == "ca":
            found = [a for tx in txs if (a := change_androulaki(tx, fresh))]
            results[h] = assignments_to_links(found, store, "ca")
        elif h == "cm":
            found = [a for tx in txs if (a := change_meiklejohn(tx, fresh))]
            results[h] = assignments_to_links(found, store, "cm")
        elif h == "cg":
            found = [a for tx in txs if (a := change_goldfeder(tx, fresh, *cj))]
            results[h] = assignments_to_links(found, store, "cg")
        elif h == "ce":
            found = [a for tx in txs if (a := change_ermilov(tx, fresh))]
            results[h] = assignments_to_links(found, store, "ce")
        elif h == "ck":
            source_ids = {tx.txid for tx in txs}
            found = [
                a
                for a in kappos_assignments(peel_chains(), store)
                if a.txid in source_ids
            ]
            results[h] = assignments_to_links(found, store, "ck")
        elif h == "rc":
            if confirmed_only:
                results[h] = LinkSet("rc")
            else:
                results[h] = replacement_change(conflict_groups(store), store, *cj)
        elif h == "oc":
            if confirmed_only:
                results[h] = LinkSet("oc")
            else:
                chains = extract_one_to_one_chains(
                    dep_graph(), store, params.min_chain_len
                )
                results[h] = one_to_one_links(chains)
        elif h == "fc":
            if confirmed_only:
                results[h] = LinkSet("fc")
            else:
                chains = extract_fusiform_chains(
                    dep_graph(), store, params.fusiform_depth
                )
                results[h] = fusiform_links(chains)
        elif h == "ni":
            if confirmed_only:
                results[h] = LinkSet("ni")
            else:
                results[h] = new_input_links(store.observed(), *cj)
        elif h == "pc":
            if confirmed_only:
                results[h] = LinkSet("pc")
            else:
                results[h] = peel_chain_links(peel_chains(), store)
    return results
