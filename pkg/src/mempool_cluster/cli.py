"""Pipeline entry point: ingest -> cluster -> merge -> compare, plus store
inspection and the fixture generator.

Exit codes: 0 success, 1 usage error, 2 data error. Machine-readable output
goes to stdout as JSON; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, fields
from pathlib import Path

from . import clustering as cl
from . import evaluation as ev
from . import synth
from .errors import DataError, UnknownHeuristic
from .heuristics import (
    ALL_HEURISTICS,
    NOVEL_HEURISTICS,
    STANDARD_HEURISTICS,
    HeuristicParams,
    parse_heuristics,
    run_heuristics,
)
from .mempool import chain_to_json, mempool_at
from .store import TxStore


@dataclass
class RunConfig:
    """Clustering-run settings; every field has a CLI override."""

    store: str = "store"
    source: str = "all"
    heuristics: str = "cs"
    universe: str = "confirmed"
    min_chain_len: int = 3
    fusiform_depth: int = 4
    coinjoin_min_equal: int = 2
    coinjoin_min_outputs: int = 3
    fresh_scope: str = ""
    out: str = ""
    no_header: bool = False
    links_out: str = ""
    chains_out: str = ""

    def to_file(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            for f in fields(self):
                fh.write(f"{f.name}={getattr(self, f.name)}\n")

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        config = cls()
        valid = {f.name: f.type for f in fields(cls)}
        with open(path, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{line_no}: expected key=value")
                key, _, value = line.partition("=")
                key = key.strip()
                value = value.strip()
                if key not in valid:
                    raise DataError(f"{path}:{line_no}: unknown key {key!r}")
                current = getattr(config, key)
                if isinstance(current, bool):
                    setattr(config, key, value.lower() in ("1", "true", "yes"))
                elif isinstance(current, int):
                    setattr(config, key, int(value))
                else:
                    setattr(config, key, value)
        return config

    def params(self) -> HeuristicParams:
        return HeuristicParams(
            min_chain_len=self.min_chain_len,
            fusiform_depth=self.fusiform_depth,
            coinjoin_min_equal=self.coinjoin_min_equal,
            coinjoin_min_outputs=self.coinjoin_min_outputs,
            fresh_scope=self.fresh_scope or None,
        )


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad usage by default; 2 is reserved for data errors.
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj, separators=(",", ":")) + "\n")


def provenance_tag(source: str, ids: list[str]) -> str:
    kind = (
        "S"
        if all(h in STANDARD_HEURISTICS for h in ids)
        else "N"
        if all(h not in STANDARD_HEURISTICS for h in ids)
        else "SN"
    )
    scope = {"confirmed": "C", "unconfirmed": "U", "failed": "U", "all": "CU"}[source]
    return kind + scope


# --- subcommands ---------------------------------------------------------------

def cmd_ingest(args) -> int:
    store_path = Path(args.store)
    if (store_path / "records.jsonl").is_file():
        store = TxStore.open(store_path)
    else:
        store = TxStore()
    errors = 0
    n_before = len(store)
    for name in args.files:
        with open(name, encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                if not line.strip():
                    continue
                try:
                    from .txmodel import parse_transaction

                    store.add(parse_transaction(line))
                except DataError as exc:
                    errors += 1
                    print(f"{name}:{line_no}: {exc}", file=sys.stderr)
    store.finalize()
    store.save(store_path)
    stats = store.stats()
    stats["ingested"] = len(store) - n_before
    stats["parse_errors"] = errors
    _emit(stats)
    return 2 if errors else 0


def cmd_cluster(args) -> int:
    config: RunConfig = args.config
    store = TxStore.open(config.store)
    ids = parse_heuristics(config.heuristics)
    if not ids:
        raise UnknownHeuristic("(empty)")
    link_sets = run_heuristics(store, ids, config.source, config.params())
    universe = store.addresses(config.universe)
    if not any(len(ls) for ls in link_sets.values()) and not universe:
        print("warning: empty source set produced no links", file=sys.stderr)
    built = cl.build_clustering(
        link_sets.values(), universe, tag=provenance_tag(config.source, ids)
    )
    if config.out:
        built.to_csv(config.out, header=not config.no_header)
    if config.links_out:
        with open(config.links_out, "w", encoding="utf-8", newline="\n") as fh:
            for h in ids:
                for line in link_sets[h].to_jsonl():
                    fh.write(line + "\n")
    if config.chains_out:
        _write_chains(store, config, fh_path=config.chains_out)
    _emit(cl.entity_count(built, universe).as_dict())
    return 0


def _write_chains(store: TxStore, config: RunConfig, fh_path: str) -> None:
    from .mempool import (
        build_dependency_graph,
        extract_fusiform_chains,
        extract_one_to_one_chains,
        extract_peel_chains,
    )

    chains = []
    if config.source != "confirmed":
        graph = build_dependency_graph(store)
        chains += extract_one_to_one_chains(graph, store, config.min_chain_len)
        chains += extract_fusiform_chains(graph, store, config.fusiform_depth)
        chains += extract_peel_chains(store, "mempool", config.min_chain_len, graph=graph)
    else:
        chains += extract_peel_chains(store, "confirmed", config.min_chain_len)
    with open(fh_path, "w", encoding="utf-8", newline="\n") as fh:
        for chain in chains:
            fh.write(chain_to_json(chain) + "\n")


def cmd_merge(args) -> int:
    parts = [cl.Clustering.from_csv(p, tag=p) for p in args.clusters]
    merged = parts[0]
    for nxt in parts[1:]:
        merged = cl.merge(merged, nxt)
    if args.out:
        merged.to_csv(args.out, header=not args.no_header)
    _emit(cl.entity_count(merged).as_dict())
    return 0


def cmd_compare(args) -> int:
    base = cl.Clustering.from_csv(args.base, tag=args.base)
    new = cl.Clustering.from_csv(args.new, tag=args.new)
    report = ev.compare(base, new, keep_per_cluster=bool(args.per_cluster))
    if args.per_cluster:
        with open(args.per_cluster, "w", encoding="utf-8", newline="\n") as fh:
            for cid, category in report.per_cluster:
                fh.write(json.dumps({"cluster": cid, "category": category}) + "\n")
    _emit(report.as_dict())
    return 0


def cmd_validate(args) -> int:
    built = cl.Clustering.from_csv(args.clusters, tag=args.clusters)
    labels = ev.read_labels(args.labels)
    _emit(ev.validate_labels(built, labels).as_dict())
    return 0


def cmd_mempool_at(args) -> int:
    store = TxStore.open(args.store)
    for txid in sorted(mempool_at(store, args.time)):
        sys.stdout.write(txid + "\n")
    return 0


def cmd_synth(args) -> int:
    lines = synth.generate(args.scenario, seed=args.seed, n_txs=args.n_txs)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        for line in lines:
            sys.stdout.write(line + "\n")
    return 0


def cmd_stats(args) -> int:
    store = TxStore.open(args.store)
    _emit(store.stats())
    return 0


# --- argument wiring -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mempool-cluster")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse transaction files into a store")
    p.add_argument("files", nargs="+")
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("cluster", help="run heuristics and write a cluster file")
    p.add_argument("--config", help="key=value config file; flags override")
    p.add_argument("--store")
    p.add_argument("--set", dest="source", choices=("confirmed", "unconfirmed", "failed", "all"))
    p.add_argument("--heuristics", help="comma list of " + ",".join(ALL_HEURISTICS))
    p.add_argument("--universe", choices=("confirmed", "all"))
    p.add_argument("--min-chain-len", type=int, dest="min_chain_len")
    p.add_argument("--fusiform-depth", type=int, dest="fusiform_depth")
    p.add_argument("--coinjoin-min-equal", type=int, dest="coinjoin_min_equal")
    p.add_argument("--coinjoin-min-outputs", type=int, dest="coinjoin_min_outputs")
    p.add_argument("--fresh-scope", dest="fresh_scope", choices=("confirmed", "all"))
    p.add_argument("--out")
    p.add_argument("--no-header", action="store_true", default=None)
    p.add_argument("--links-out", dest="links_out")
    p.add_argument("--chains-out", dest="chains_out")
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("merge", help="merge cluster files")
    p.add_argument("clusters", nargs="+")
    p.add_argument("--out")
    p.add_argument("--no-header", action="store_true")
    p.set_defaults(func=cmd_merge)

    p = sub.add_parser("compare", help="classify a new clustering against a base")
    p.add_argument("--base", required=True)
    p.add_argument("--new", required=True)
    p.add_argument("--per-cluster", dest="per_cluster")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("validate", help="check a clustering against labels")
    p.add_argument("--clusters", required=True)
    p.add_argument("--labels", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("mempool-at", help="txids in the pool at a unix second")
    p.add_argument("--store", required=True)
    p.add_argument("--time", type=int, required=True)
    p.set_defaults(func=cmd_mempool_at)

    p = sub.add_parser("synth", help="generate a fixture or random corpus")
    p.add_argument("--scenario", required=True, choices=synth.SCENARIOS)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-txs", type=int, default=100, dest="n_txs")
    p.add_argument("--out")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stats", help="print store statistics")
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_stats)

    return parser


def _resolve_config(args) -> None:
    config = RunConfig.from_file(args.config) if args.config else RunConfig()
    for f in fields(RunConfig):
        override = getattr(args, f.name, None)
        if override is not None:
            setattr(config, f.name, override)
    args.config = config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.func is cmd_cluster:
            _resolve_config(args)
        return args.func(args)
    except UnknownHeuristic as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
