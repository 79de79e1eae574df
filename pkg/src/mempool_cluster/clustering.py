"""Entity partitioning over addresses with union-find, plus the merge
operation between clustering results and entity counting.

Cluster ids are canonical: the lexicographically least member address. That
keeps cluster files byte-stable across runs and platforms.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping

from .errors import MalformedClusterFile

CSV_HEADER = "address,cluster_id"


class UnionFind:
    """Disjoint sets over hashable items, path compression + union by size."""

    __slots__ = ("parent", "size", "n_components")

    def __init__(self):
        self.parent: dict = {}
        self.size: dict = {}
        self.n_components = 0

    def add(self, x) -> None:
        if x not in self.parent:
            self.parent[x] = x
            self.size[x] = 1
            self.n_components += 1

    def find(self, x):
        parent = self.parent
        root = x
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b) -> bool:
        self.add(a)
        self.add(b)
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]
        self.n_components -= 1
        return True

    def groups(self) -> dict:
        out: dict = defaultdict(list)
        for x in self.parent:
            out[self.find(x)].append(x)
        return out


class Clustering:
    """A partition of addresses into entities with provenance.

    `tag` names how the partition was produced (SC, SU, NU, merges thereof or
    a custom label); `heuristics` lists the contributing heuristic ids.
    """

    def __init__(
        self,
        assignment: Mapping[str, str] | None = None,
        tag: str = "",
        heuristics: Iterable[str] = (),
        universe: set[str] | None = None,
    ):
        self._cid: dict[str, str] = dict(assignment or {})
        self.tag = tag
        self.heuristics = tuple(heuristics)
        self.universe = universe

    # -- queries -------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._cid)

    def __contains__(self, address: str) -> bool:
        return address in self._cid

    def addresses(self) -> Iterable[str]:
        return self._cid.keys()

    def cluster_of(self, address: str) -> str:
        """Canonical cluster id; an unknown address is its own singleton."""
        return self._cid.get(address, address)

    def clusters(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = defaultdict(list)
        for addr, cid in self._cid.items():
            out[cid].append(addr)
        for members in out.values():
            members.sort()
        return dict(out)

    def cluster_sizes(self) -> dict[str, int]:
        sizes: dict[str, int] = defaultdict(int)
        for cid in self._cid.values():
            sizes[cid] += 1
        return sizes

    def non_singleton_clusters(self) -> list[list[str]]:
        return [m for m in self.clusters().values() if len(m) > 1]

    def partition_equal(self, other: "Clustering") -> bool:
        return self._cid == other._cid

    # -- serialization ---------------------------------------------------------

    def to_csv(self, path: str | Path, header: bool = True) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            if header:
                fh.write(CSV_HEADER + "\n")
            for addr in sorted(self._cid):
                fh.write(f"{addr},{self._cid[addr]}\n")

    @classmethod
    def from_csv(cls, path: str | Path, tag: str = "") -> "Clustering":
        labels: dict[str, str] = {}
        members: dict[str, list[str]] = defaultdict(list)
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.rstrip("\n")
                if not line:
                    continue
                if line_no == 1 and line == CSV_HEADER:
                    continue
                parts = line.split(",")
                if len(parts) != 2 or not parts[0]:
                    raise MalformedClusterFile(line_no, f"expected address,cluster_id: {line!r}")
                addr, label = parts
                if addr in labels:
                    if labels[addr] != label:
                        raise MalformedClusterFile(
                            line_no, f"address {addr} assigned to two clusters"
                        )
                    continue
                labels[addr] = label
                members[label].append(addr)
        assignment = {}
        for label, addrs in members.items():
            cid = min(addrs)
            for addr in addrs:
                assignment[addr] = cid
        return cls(assignment, tag=tag or str(path))


def build_clustering(
    link_sets: Iterable,
    universe: Iterable[str] | None = None,
    tag: str = "",
) -> Clustering:
    """Connected components of the union of all links; universe addresses
    that appear in no link become singletons."""
    uf = UnionFind()
    heuristics = []
    for ls in link_sets:
        heuristics.append(ls.heuristic)
        for a, b in ls:
            uf.union(a, b)
    universe_set = set(universe) if universe is not None else set()
    for addr in universe_set:
        uf.add(addr)
    assignment: dict[str, str] = {}
    for root, members in uf.groups().items():
        cid = min(members)
        for addr in members:
            assignment[addr] = cid
    return Clustering(
        assignment,
        tag=tag,
        heuristics=sorted(set(heuristics)),
        universe=universe_set or None,
    )


def merge(c1: Clustering, c2: Clustering) -> Clustering:
    """The finest partition coarser than both inputs: connected components of
    the union of the two same-cluster relations. Idempotent, commutative and
    associative at the partition level."""
    uf = UnionFind()
    for clustering in (c1, c2):
        for members in clustering.clusters().values():
            hub = members[0]
            uf.add(hub)
            for other in members[1:]:
                uf.union(hub, other)
    assignment: dict[str, str] = {}
    for root, members in uf.groups().items():
        cid = min(members)
        for addr in members:
            assignment[addr] = cid
    tags = [t for t in (c1.tag, c2.tag) if t]
    universe = None
    if c1.universe is not None or c2.universe is not None:
        universe = (c1.universe or set()) | (c2.universe or set())
    return Clustering(
        assignment,
        tag="+".join(tags),
        heuristics=sorted(set(c1.heuristics) | set(c2.heuristics)),
        universe=universe,
    )


class EntityCount:
    """Entity totals over a universe; isolated entities hold one address."""

    __slots__ = ("total", "isolated", "non_isolated")

    def __init__(self, total: int, isolated: int):
        self.total = total
        self.isolated = isolated
        self.non_isolated = total - isolated

    def as_dict(self) -> dict:
        return {
            "total": self.total,
            "isolated": self.isolated,
            "non_isolated": self.non_isolated,
        }

    def __repr__(self):
        return f"EntityCount(total={self.total}, isolated={self.isolated})"

    def __eq__(self, other):
        return (
            isinstance(other, EntityCount)
            and self.total == other.total
            and self.isolated == other.isolated
        )


def entity_count(clustering: Clustering, universe: Iterable[str] | None = None) -> EntityCount:
    """Count clusters that intersect the universe.

    Cluster members outside the universe never create extra entities, but a
    multi-address cluster stays non-isolated even when only one member lies
    inside the universe. Universe addresses unknown to the partition count as
    isolated singletons.
    """
    if universe is None:
        universe = clustering.universe
    if universe is None:
        universe = set(clustering.addresses())
    sizes = clustering.cluster_sizes()
    seen: set[str] = set()
    isolated = 0
    for addr in universe:
        cid = clustering.cluster_of(addr)
        if cid in seen:
            continue
        seen.add(cid)
        if sizes.get(cid, 1) == 1:
            isolated += 1
    return EntityCount(total=len(seen), isolated=isolated)
