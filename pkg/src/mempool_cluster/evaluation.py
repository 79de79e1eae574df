"""Classify how a new clustering improves on a base clustering, and validate
clusterings against ground-truth labels.

Every non-singleton cluster of the new clustering lands in exactly one of
four categories relative to the base:

  ADD     overlaps exactly one base cluster and brings new addresses to it
  MERGE   bridges two or more base clusters
  SUBSET  is contained in one base cluster
  NEW     shares no address with any base cluster
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .clustering import Clustering
from .errors import SingletonCluster

ADD = "ADD"
MERGE = "MERGE"
SUBSET = "SUBSET"
NEW = "NEW"
CATEGORIES = (ADD, MERGE, SUBSET, NEW)


def _base_membership(base: Clustering) -> dict[str, str]:
    """Address -> base cluster id over non-singleton base clusters only; an
    address known to the base solely as a singleton does not anchor a match."""
    sizes = base.cluster_sizes()
    return {
        addr: cid
        for addr, cid in ((a, base.cluster_of(a)) for a in base.addresses())
        if sizes.get(cid, 1) > 1
    }


def classify_cluster(cluster: Iterable[str], base: Clustering) -> str:
    members = set(cluster)
    if len(members) < 2:
        raise SingletonCluster()
    membership = _base_membership(base)
    return _classify(members, membership)


def _classify(members: set[str], membership: Mapping[str, str]) -> str:
    touched = set()
    unmatched = 0
    for addr in members:
        cid = membership.get(addr)
        if cid is None:
            unmatched += 1
        else:
            touched.add(cid)
    if not touched:
        return NEW
    if len(touched) >= 2:
        return MERGE
    return SUBSET if unmatched == 0 else ADD


@dataclass(slots=True)
class ImprovementReport:
    base: str
    new: str
    clusters: int
    add: int = 0
    merge: int = 0
    subset: int = 0
    new_count: int = 0
    per_cluster: list[tuple[str, str]] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "base": self.base,
            "new": self.new,
            "clusters": self.clusters,
            "add": self.add,
            "merge": self.merge,
            "subset": self.subset,
            "new_count": self.new_count,
        }


def compare(base: Clustering, new: Clustering, keep_per_cluster: bool = False) -> ImprovementReport:
    """Classify every non-singleton cluster of `new` against `base`.

    Category counts always sum to the number of classified clusters;
    singletons of the new clustering are not classified.
    """
    membership = _base_membership(base)
    counts = {ADD: 0, MERGE: 0, SUBSET: 0, NEW: 0}
    per_cluster = []
    clusters = new.non_singleton_clusters()
    for members in sorted(clusters):
        category = _classify(set(members), membership)
        counts[category] += 1
        if keep_per_cluster:
            per_cluster.append((members[0], category))
    return ImprovementReport(
        base=base.tag,
        new=new.tag,
        clusters=len(clusters),
        add=counts[ADD],
        merge=counts[MERGE],
        subset=counts[SUBSET],
        new_count=counts[NEW],
        per_cluster=per_cluster,
    )


@dataclass(slots=True)
class LabelReport:
    clusters_with_labels: int
    pure: int
    impure: int
    fragmentation: dict[str, int]

    def as_dict(self) -> dict:
        return {
            "clusters_with_labels": self.clusters_with_labels,
            "pure": self.pure,
            "impure": self.impure,
            "fragmentation": dict(sorted(self.fragmentation.items())),
        }


def validate_labels(clustering: Clustering, labels: Mapping[str, str]) -> LabelReport:
    """Purity and fragmentation of a clustering against advisory labels.

    A cluster is pure when its labeled members carry one label; fragmentation
    counts how many distinct clusters each label is scattered across. Labels
    never feed back into clustering.
    """
    cluster_labels: dict[str, set[str]] = defaultdict(set)
    label_clusters: dict[str, set[str]] = defaultdict(set)
    for addr, label in labels.items():
        cid = clustering.cluster_of(addr)
        cluster_labels[cid].add(label)
        label_clusters[label].add(cid)
    pure = sum(1 for found in cluster_labels.values() if len(found) == 1)
    return LabelReport(
        clusters_with_labels=len(cluster_labels),
        pure=pure,
        impure=len(cluster_labels) - pure,
        fragmentation={label: len(cids) for label, cids in label_clusters.items()},
    )


def read_labels(path) -> dict[str, str]:
    """CSV `address,label`; one label per address."""
    from .errors import MalformedClusterFile

    labels: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            if line_no == 1 and line == "address,label":
                continue
            parts = line.split(",")
            if len(parts) != 2 or not parts[0]:
                raise MalformedClusterFile(line_no, f"expected address,label: {line!r}")
            addr, label = parts
            if addr in labels and labels[addr] != label:
                raise MalformedClusterFile(line_no, f"address {addr} labeled twice")
            labels[addr] = label
    return labels
