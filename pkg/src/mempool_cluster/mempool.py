"""Mempool-state reconstruction and dependency-chain extraction.

A transaction observed in the pool occupies the half-open interval
[time, removetime): it is present at its entry second and absent at its
removal second. Dependency edges connect an unconfirmed parent to a child
that spends one of its outputs while the parent is still in the pool.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field
from heapq import heapify, heappop, heappush
from typing import Iterable

from .errors import CycleDetected
from .store import TxStore
from .txmodel import CONFIRMED, OutPoint, Transaction

ONE_TO_ONE = "one_to_one"
FUSIFORM = "fusiform"
PEEL = "peel"

SCOPE_MEMPOOL = "mempool"
SCOPE_CONFIRMED = "confirmed"

DEFAULT_MIN_CHAIN_LEN = 3
DEFAULT_FUSIFORM_DEPTH = 4


def mempool_at(store: TxStore, t: int) -> set[str]:
    """Txids present in the reconstructed mempool at unix second t."""
    return store.in_pool_at(t)


@dataclass(slots=True)
class DependencyGraph:
    """Parent -> child spends among transactions observed in the pool."""

    nodes: set[str] = field(default_factory=set)
    parents: dict[str, set[str]] = field(default_factory=dict)
    children: dict[str, set[str]] = field(default_factory=dict)
    # (parent, child) -> outpoints of the parent spent by the child; empty
    # when the edge is known only from depends/spentby metadata.
    edge_outpoints: dict[tuple[str, str], set[OutPoint]] = field(default_factory=dict)

    def add_edge(self, parent: str, child: str, outpoint: OutPoint | None = None) -> None:
        if parent == child:
            return
        self.children.setdefault(parent, set()).add(child)
        self.parents.setdefault(child, set()).add(parent)
        points = self.edge_outpoints.setdefault((parent, child), set())
        if outpoint is not None:
            points.add(outpoint)

    def edges(self) -> list[tuple[str, str]]:
        return sorted(self.edge_outpoints)

    def children_of(self, txid: str) -> set[str]:
        return self.children.get(txid, set())

    def parents_of(self, txid: str) -> set[str]:
        return self.parents.get(txid, set())


def _in_pool_when(parent: Transaction, t: int) -> bool:
    m = parent.mempool
    return m.time <= t and (m.removetime is None or t < m.removetime)


def build_dependency_graph(store: TxStore, txids: Iterable[str] | None = None) -> DependencyGraph:
    """Reconcile dependency edges from depends, spentby and outpoint analysis.

    All three sources are unioned; the paper-recorded fields are trusted as
    direct node observations, outpoint analysis additionally requires the
    parent to have been in the pool when the child entered. Rejects cyclic
    data with diagnostics.
    """
    graph = DependencyGraph()
    if txids is None:
        graph.nodes = {tx.txid for tx in store.observed()}
    else:
        graph.nodes = {
            t for t in txids
            if t in store and store.get(t).mempool is not None
        }
    nodes = graph.nodes
    for txid in sorted(nodes):
        tx = store.get(txid)
        for dep in tx.mempool.depends:
            if dep in nodes:
                graph.add_edge(dep, txid)
        for child in tx.mempool.spentby:
            if child in nodes:
                graph.add_edge(txid, child)
        for inp in tx.inputs:
            parent_id = inp.outpoint.txid
            if parent_id == txid or parent_id not in nodes:
                continue
            parent = store.get(parent_id)
            if _in_pool_when(parent, tx.mempool.time):
                graph.add_edge(parent_id, txid, inp.outpoint)

    _check_acyclic(graph)
    return graph


def _check_acyclic(graph: DependencyGraph) -> None:
    indeg = {n: len(graph.parents_of(n)) for n in graph.nodes}
    queue = [n for n, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        node = queue.pop()
        seen += 1
        for child in graph.children_of(node):
            indeg[child] -= 1
            if indeg[child] == 0:
                queue.append(child)
    if seen != len(graph.nodes):
        raise CycleDetected([n for n, d in indeg.items() if d > 0])


def _topo_sorted(txids: set[str], graph: DependencyGraph) -> list[str]:
    indeg = {t: len(graph.parents_of(t) & txids) for t in txids}
    heap = [t for t, d in indeg.items() if d == 0]
    heapify(heap)
    order = []
    while heap:
        node = heappop(heap)
        order.append(node)
        for child in graph.children_of(node):
            if child in txids:
                indeg[child] -= 1
                if indeg[child] == 0:
                    heappush(heap, child)
    return order


# --- conflict groups --------------------------------------------------------

@dataclass(slots=True)
class ConflictGroup:
    """All spenders of one outpoint; at most one of them confirmed."""

    outpoint: OutPoint
    members: list[str]
    winner: str | None


def conflict_groups(store: TxStore, txids: Iterable[str] | None = None) -> list[ConflictGroup]:
    """One group per outpoint spent by two or more transactions, members
    ordered by mempool entry time then txid."""
    scope = set(txids) if txids is not None else None
    groups = []
    for key in sorted(store.outpoint_index):
        spenders = store.outpoint_index[key]
        if scope is not None:
            spenders = [s for s in spenders if s in scope]
        if len(spenders) < 2:
            continue
        prev_txid, vout = key.rsplit(":", 1)
        members = sorted(spenders, key=lambda t: _member_order(store.get(t)))
        confirmed = [t for t in members if store.get(t).status == CONFIRMED]
        groups.append(
            ConflictGroup(
                outpoint=OutPoint(prev_txid, int(vout)),
                members=members,
                winner=confirmed[0] if confirmed else None,
            )
        )
    return groups


def _member_order(tx: Transaction) -> tuple:
    time = tx.mempool.time if tx.mempool is not None else float("inf")
    return (time, tx.txid)


# --- chains -----------------------------------------------------------------

@dataclass(slots=True)
class Chain:
    kind: str
    txids: list[str]
    addresses: list[str]
    # Largest entry-time gap between linked transactions, for analyst review.
    max_gap_s: int | None = None


def chain_to_json(chain: Chain) -> str:
    return json.dumps(
        {"kind": chain.kind, "txids": chain.txids, "addresses": chain.addresses},
        separators=(",", ":"),
    )


def _is_shape(tx: Transaction, n_in: int, n_out: int) -> bool:
    return len(tx.inputs) == n_in and len(tx.outputs) == n_out


def extract_one_to_one_chains(
    graph: DependencyGraph,
    store: TxStore,
    min_len: int = DEFAULT_MIN_CHAIN_LEN,
) -> list[Chain]:
    """Maximal dependency paths of 1-input/1-output transactions.

    Paths shorter than min_len transactions are dropped; maximal paths that
    share a transaction (double-spend forks) are merged into one chain. Chain
    addresses cover every input and output address of the member
    transactions.
    """
    eligible = {t for t in graph.nodes if _is_shape(store.get(t), 1, 1)}
    kids = {
        t: sorted(c for c in graph.children_of(t) if c in eligible)
        for t in eligible
    }
    roots = sorted(
        t for t in eligible if not (graph.parents_of(t) & eligible)
    )

    paths: list[list[str]] = []
    for root in roots:
        stack = [(root, [root])]
        while stack:
            node, path = stack.pop()
            cs = kids[node]
            if not cs:
                if len(path) >= min_len:
                    paths.append(path)
                continue
            for child in reversed(cs):
                stack.append((child, path + [child]))

    # Merge paths that share any transaction.
    owner: dict[str, int] = {}
    merged: dict[int, set[str]] = {}
    for path in paths:
        hit = sorted({owner[t] for t in path if t in owner})
        group = set(path)
        for g in hit:
            group |= merged.pop(g)
        gid = min(hit) if hit else len(owner) + len(paths)
        merged[gid] = group
        for t in group:
            owner[t] = gid

    chains = []
    for group in merged.values():
        txids = _topo_sorted(group, graph)
        addrs = set()
        for t in txids:
            addrs |= store.get(t).addresses()
        chains.append(
            Chain(
                kind=ONE_TO_ONE,
                txids=txids,
                addresses=sorted(addrs),
                max_gap_s=_max_gap(group, graph, store),
            )
        )
    chains.sort(key=lambda c: c.txids)
    return chains


def _max_gap(txids: set[str], graph: DependencyGraph, store: TxStore) -> int:
    gap = 0
    for parent in txids:
        for child in graph.children_of(parent):
            if child in txids:
                gap = max(
                    gap,
                    abs(store.get(child).mempool.time - store.get(parent).mempool.time),
                )
    return gap


def extract_fusiform_chains(
    graph: DependencyGraph,
    store: TxStore,
    max_depth: int = DEFAULT_FUSIFORM_DEPTH,
) -> list[Chain]:
    """Funds that fan out of one transaction and reconverge.

    For every source with at least two outputs, looks for two or more
    outpoint-disjoint descendant paths of at most max_depth in-pool hops that
    rejoin either at a common transaction (feeding its inputs) or at a common
    output address of distinct terminal transactions. The chain covers the
    addresses relayed along the paths, plus the shared sink address when the
    rejoin is by address.
    """
    chains = []
    for source in sorted(graph.nodes):
        if len(store.get(source).outputs) < 2:
            continue
        paths = _fusiform_paths(source, graph, store, max_depth)
        if len(paths) < 2:
            continue
        chains.extend(_reconvergences(source, paths, graph, store))
    chains.sort(key=lambda c: c.txids)
    return chains


def _fusiform_paths(source, graph, store, max_depth):
    """Every descendant path from source up to max_depth single-outpoint hops.

    A hop consumes exactly one outpoint; a child spending two outputs of its
    parent yields two alternative hops, which is what lets both prongs of a
    two-output split reach the same transaction disjointly.
    """
    paths = []
    stack = [(source, (), frozenset())]
    while stack:
        node, hops, used = stack.pop()
        if hops:
            paths.append((node, hops, used))
        if len(hops) >= max_depth:
            continue
        for child in sorted(graph.children_of(node)):
            points = graph.edge_outpoints.get((node, child), ())
            for op in sorted(points, key=lambda o: (o.txid, o.vout)):
                out = store.output_for(op)
                addr = out.address if out is not None else None
                stack.append((child, hops + ((op, addr),), used | {op}))
    return paths


def _reconvergences(source, paths, graph, store):
    sinks: dict[tuple[str, str], set[int]] = defaultdict(set)
    indexed = list(enumerate(paths))

    for i, (term_a, hops_a, used_a) in indexed:
        for j, (term_b, hops_b, used_b) in indexed[i + 1 :]:
            if used_a & used_b:
                continue
            if term_a == term_b:
                sinks[("tx", term_a)] |= {i, j}
            else:
                shared = store.get(term_a).output_addresses() & store.get(
                    term_b
                ).output_addresses()
                for addr in shared:
                    sinks[("addr", addr)] |= {i, j}

    chains = []
    for (kind, sink), members in sorted(sinks.items()):
        addrs = set()
        txids = {source}
        for idx in members:
            term, hops, _ = paths[idx]
            txids.add(term)
            for op, addr in hops:
                txids.add(op.txid)
                if addr is not None:
                    addrs.add(addr)
        if kind == "addr":
            addrs.add(sink)
        chains.append(
            Chain(
                kind=FUSIFORM,
                txids=_topo_sorted(txids, graph),
                addresses=sorted(addrs),
            )
        )
    return chains


def extract_peel_chains(
    store: TxStore,
    scope: str = SCOPE_MEMPOOL,
    min_len: int = DEFAULT_MIN_CHAIN_LEN,
    graph: DependencyGraph | None = None,
    txids: Iterable[str] | None = None,
) -> list[Chain]:
    """Threads of 1-input/2-output transactions, each spending one output of
    the previous one.

    The output a successor actually spends is the change candidate, so chain
    addresses are exactly the linking output addresses. When a transaction's
    outputs are spent by several eligible successors, the lowest-numbered
    output continues the incumbent thread and every further successor starts
    a new chain anchored at the branching transaction.
    """
    if scope == SCOPE_MEMPOOL:
        if graph is None:
            graph = build_dependency_graph(store, txids)
        eligible = {t for t in graph.nodes if _is_shape(store.get(t), 1, 2)}

        def linked(parent: str, child: str) -> bool:
            op = store.get(child).inputs[0].outpoint
            return op in graph.edge_outpoints.get((parent, child), ())

    elif scope == SCOPE_CONFIRMED:
        pool = (
            {t for t in txids if t in store}
            if txids is not None
            else set(store.txs)
        )
        eligible = {
            t
            for t in pool
            if store.get(t).status == CONFIRMED and _is_shape(store.get(t), 1, 2)
        }

        def linked(parent: str, child: str) -> bool:
            return store.get(child).inputs[0].outpoint.txid == parent

    else:
        raise ValueError(f"unknown peel scope: {scope}")

    children: dict[str, list[tuple[int, str]]] = defaultdict(list)
    has_parent: set[str] = set()
    for child in sorted(eligible):
        op = store.get(child).inputs[0].outpoint
        parent = op.txid
        if parent in eligible and parent != child and linked(parent, child):
            children[parent].append((op.vout, child))
            has_parent.add(child)
    for lst in children.values():
        lst.sort()

    threads: list[list[str]] = []
    pending = [(None, root) for root in sorted(eligible - has_parent)]
    while pending:
        anchor, start = pending.pop(0)
        thread = [anchor] if anchor is not None else []
        node = start
        seen = set(thread)
        while node is not None and node not in seen:
            thread.append(node)
            seen.add(node)
            kids = children.get(node, [])
            if not kids:
                break
            node_next = kids[0][1]
            for _, extra in kids[1:]:
                pending.append((node, extra))
            node = node_next
        threads.append(thread)

    chains = []
    for thread in threads:
        if len(thread) < min_len:
            continue
        addrs = []
        for nxt in thread[1:]:
            link = store.get(nxt).inputs[0]
            if link.address is not None:
                addrs.append(link.address)
        chains.append(
            Chain(kind=PEEL, txids=thread, addresses=sorted(set(addrs)))
        )
    chains.sort(key=lambda c: c.txids)
    return chains
