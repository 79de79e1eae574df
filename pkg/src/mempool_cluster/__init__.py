"""Bitcoin address clustering from confirmed and mempool-observed
transactions: ingest, mempool-state reconstruction, clustering heuristics,
union-find entity partitions and improvement reports."""

from .clustering import Clustering, EntityCount, UnionFind, build_clustering, entity_count, merge
from .errors import DataError
from .evaluation import compare, classify_cluster, validate_labels
from .heuristics import ALL_HEURISTICS, LinkSet, run_heuristics
from .mempool import (
    build_dependency_graph,
    conflict_groups,
    extract_fusiform_chains,
    extract_one_to_one_chains,
    extract_peel_chains,
    mempool_at,
)
from .store import TxStore, build_store, build_store_from_lines
from .txmodel import Transaction, parse_transaction, serialize_transaction

__version__ = "0.1.0"

__all__ = [
    "ALL_HEURISTICS",
    "Clustering",
    "DataError",
    "EntityCount",
    "LinkSet",
    "Transaction",
    "TxStore",
    "UnionFind",
    "build_clustering",
    "build_dependency_graph",
    "build_store",
    "build_store_from_lines",
    "classify_cluster",
    "compare",
    "conflict_groups",
    "entity_count",
    "extract_fusiform_chains",
    "extract_one_to_one_chains",
    "extract_peel_chains",
    "mempool_at",
    "merge",
    "parse_transaction",
    "run_heuristics",
    "serialize_transaction",
    "validate_labels",
]
