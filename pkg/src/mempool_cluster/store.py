"""On-disk transaction store: append-only records plus sidecar indexes.

The store is a plain directory (the embedded replacement for an external
database): `records.jsonl` holds one canonical record per transaction with
full resolution state, `indexes.pkl` caches the address -> txids,
outpoint -> spenders and time indexes, and `manifest.json` guards staleness.
"""

from __future__ import annotations

import json
import pickle
from bisect import bisect_right
from pathlib import Path
from sys import intern
from typing import Iterable, Iterator

from .errors import ConflictingRecord, DataError
from .txmodel import (
    CONFIRMED,
    FAILED,
    PENDING,
    MempoolMeta,
    OutPoint,
    Transaction,
    TxInput,
    TxOutput,
    parse_transaction,
    resolve_inputs,
)

RECORDS_FILE = "records.jsonl"
INDEXES_FILE = "indexes.pkl"
MANIFEST_FILE = "manifest.json"
STORE_VERSION = 1


class TxStore:
    """Immutable-after-finalize corpus of transactions with lookup indexes."""

    def __init__(self):
        self.txs: dict[str, Transaction] = {}
        self.addr_index: dict[str, list[str]] = {}
        self.outpoint_index: dict[str, list[str]] = {}
        # Sorted (time, txid) / (removetime, txid) pairs over observed txs.
        self.time_entries: list[tuple[int, str]] = []
        self.time_removals: list[tuple[int, str]] = []
        self._finalized = False

    # -- population --------------------------------------------------------

    def add(self, tx: Transaction) -> None:
        """Add one transaction, unifying repeated observations of one txid.

        Repeated ingest of identical content is idempotent. Observations from
        different mempools are merged: earliest entry time wins, depends and
        spentby are unioned, replaceable resolves to true, and removal is only
        kept once every observation reports one. Differing intrinsic content
        (inputs, outputs, coinbase flag, block position) is an error.
        """
        old = self.txs.get(tx.txid)
        if old is None:
            self.txs[tx.txid] = tx
        else:
            _unify(old, tx)
        self._finalized = False

    def add_lines(self, lines: Iterable[str]) -> None:
        for line in lines:
            if line.strip():
                self.add(parse_transaction(line))

    def finalize(self) -> None:
        """Assign final statuses, resolve all inputs and rebuild indexes.

        Unconfirmed transactions become failed when their canonical mempool
        observation carries a removetime and the txid never confirmed, pending
        otherwise. Safe to call repeatedly; the store is read-only afterwards.
        """
        for tx in self.txs.values():
            if tx.status != CONFIRMED:
                removed = tx.mempool is not None and tx.mempool.removetime is not None
                tx.status = FAILED if removed else PENDING
        self._reset_spent_links()
        for txid in sorted(self.txs):
            resolve_inputs(self.txs[txid], self.txs)
        self._rebuild_indexes()
        self._finalized = True

    def _reset_spent_links(self) -> None:
        for tx in self.txs.values():
            for out in tx.outputs:
                out.is_spent = False
                out.spent_tx.clear()

    def _rebuild_indexes(self) -> None:
        addr_index: dict[str, set[str]] = {}
        outpoint_index: dict[str, list[str]] = {}
        entries = []
        removals = []
        for txid, tx in self.txs.items():
            for addr in tx.addresses():
                addr_index.setdefault(addr, set()).add(txid)
            for out in tx.outputs:
                if out.spent_tx:
                    outpoint_index[f"{txid}:{out.n}"] = list(out.spent_tx)
            if tx.mempool is not None:
                entries.append((tx.mempool.time, txid))
                if tx.mempool.removetime is not None:
                    removals.append((tx.mempool.removetime, txid))
        self.addr_index = {a: sorted(t) for a, t in addr_index.items()}
        self.outpoint_index = outpoint_index
        entries.sort()
        removals.sort()
        self.time_entries = entries
        self.time_removals = removals

    # -- lookups ------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.txs)

    def __contains__(self, txid: str) -> bool:
        return txid in self.txs

    def get(self, txid: str) -> Transaction | None:
        return self.txs.get(txid)

    def all(self) -> Iterator[Transaction]:
        for txid in sorted(self.txs):
            yield self.txs[txid]

    def by_status(self, status: str) -> Iterator[Transaction]:
        return (tx for tx in self.all() if tx.status == status)

    def observed(self) -> Iterator[Transaction]:
        """Transactions that were seen in a mempool (carry observations)."""
        return (tx for tx in self.all() if tx.mempool is not None)

    def output_for(self, outpoint: OutPoint) -> TxOutput | None:
        tx = self.txs.get(outpoint.txid)
        return tx.output_at(outpoint.vout) if tx is not None else None

    def in_pool_at(self, t: int) -> set[str]:
        """Txids observed in the mempool at time t (entry inclusive,
        removal exclusive) via the sorted time indexes."""
        n_in = bisect_right(self.time_entries, (t, "\U0010ffff"))
        n_out = bisect_right(self.time_removals, (t, "\U0010ffff"))
        present = {txid for _, txid in self.time_entries[:n_in]}
        present.difference_update(txid for _, txid in self.time_removals[:n_out])
        return present

    def addresses(self, universe: str = "all") -> set[str]:
        """Distinct addresses; universe 'confirmed' keeps only addresses that
        appear in at least one confirmed transaction."""
        if universe == "all":
            return set(self.addr_index)
        if universe != "confirmed":
            raise ValueError(f"unknown universe: {universe}")
        out = set()
        for tx in self.txs.values():
            if tx.status == CONFIRMED:
                out.update(tx.addresses())
        return out

    def stats(self) -> dict:
        by_status = {CONFIRMED: 0, FAILED: 0, PENDING: 0}
        observed = 0
        coinbase = 0
        unresolvable = 0
        for tx in self.txs.values():
            by_status[tx.status] += 1
            if tx.mempool is not None:
                observed += 1
            if tx.is_coinbase:
                coinbase += 1
            unresolvable += sum(1 for i in tx.inputs if i.unresolvable)
        all_addrs = self.addresses("all")
        confirmed_addrs = self.addresses("confirmed")
        return {
            "transactions": len(self.txs),
            "confirmed": by_status[CONFIRMED],
            "failed": by_status[FAILED],
            "pending": by_status[PENDING],
            "coinbase": coinbase,
            "observed_in_mempool": observed,
            "addresses": len(all_addrs),
            "unconfirmed_only_addresses": len(all_addrs) - len(confirmed_addrs),
            "unresolvable_inputs": unresolvable,
        }

    # -- persistence ---------------------------------------------------------

    def save(self, path: str | Path) -> None:
        root = Path(path)
        root.mkdir(parents=True, exist_ok=True)
        with open(root / RECORDS_FILE, "w", encoding="utf-8", newline="\n") as fh:
            for txid in sorted(self.txs):
                fh.write(_record_to_json(self.txs[txid]))
                fh.write("\n")
        with open(root / INDEXES_FILE, "wb") as fh:
            pickle.dump(
                {
                    "n_txs": len(self.txs),
                    "addr_index": self.addr_index,
                    "outpoint_index": self.outpoint_index,
                    "time_entries": self.time_entries,
                    "time_removals": self.time_removals,
                },
                fh,
                protocol=pickle.HIGHEST_PROTOCOL,
            )
        manifest = {"version": STORE_VERSION, "n_txs": len(self.txs)}
        (root / MANIFEST_FILE).write_text(json.dumps(manifest), encoding="utf-8")

    @classmethod
    def open(cls, path: str | Path) -> "TxStore":
        root = Path(path)
        records = root / RECORDS_FILE
        if not records.is_file():
            raise DataError(f"not a transaction store: {root}")
        store = cls()
        with open(records, encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    tx = _record_from_json(line)
                    store.txs[tx.txid] = tx
        idx_file = root / INDEXES_FILE
        loaded = False
        if idx_file.is_file():
            try:
                with open(idx_file, "rb") as fh:
                    data = pickle.load(fh)
                if data.get("n_txs") == len(store.txs):
                    store.addr_index = data["addr_index"]
                    store.outpoint_index = data["outpoint_index"]
                    store.time_entries = data["time_entries"]
                    store.time_removals = data["time_removals"]
                    loaded = True
            except Exception:
                loaded = False
        if not loaded:
            store._rebuild_indexes()
        store._finalized = True
        return store


def _unify(old: Transaction, new: Transaction) -> None:
    if old.is_coinbase != new.is_coinbase:
        raise ConflictingRecord(old.txid, "is_coinbase")
    if [i.outpoint for i in old.inputs] != [i.outpoint for i in new.inputs]:
        raise ConflictingRecord(old.txid, "inputs")
    if [(o.n, o.address, o.value_sat) for o in old.outputs] != [
        (o.n, o.address, o.value_sat) for o in new.outputs
    ]:
        raise ConflictingRecord(old.txid, "outputs")

    if new.status == CONFIRMED:
        if old.status == CONFIRMED and (
            old.block_height != new.block_height
            or old.block_index != new.block_index
        ):
            raise ConflictingRecord(old.txid, "block_height")
        old.status = CONFIRMED
        old.block_height = new.block_height
        old.block_index = new.block_index

    if new.mempool is not None:
        if old.mempool is None:
            old.mempool = new.mempool
        else:
            a, b = old.mempool, new.mempool
            if a.fee_sat != b.fee_sat:
                raise ConflictingRecord(old.txid, "mempool.fee_sat")
            if a.vsize != b.vsize:
                raise ConflictingRecord(old.txid, "mempool.vsize")
            a.time = min(a.time, b.time)
            if a.removetime is None or b.removetime is None:
                # Still held by at least one observing node.
                a.removetime = None
            else:
                a.removetime = max(a.removetime, b.removetime)
            a.depends = sorted(set(a.depends) | set(b.depends))
            a.spentby = sorted(set(a.spentby) | set(b.spentby))
            a.replaceable = a.replaceable or b.replaceable


# --- internal record round-trip --------------------------------------------
# The on-disk record is the ingest format extended with resolution state so
# that opening a store does not re-resolve the corpus.

def _record_to_json(tx: Transaction) -> str:
    obj = {
        "txid": tx.txid,
        "is_coinbase": tx.is_coinbase,
        "inputs": [
            {
                "prev_txid": i.outpoint.txid,
                "vout": i.outpoint.vout,
                "address": i.address,
                "value_sat": i.value_sat,
                "unresolvable": i.unresolvable,
            }
            for i in tx.inputs
        ],
        "outputs": [
            {
                "n": o.n,
                "address": o.address,
                "value_sat": o.value_sat,
                "is_spent": o.is_spent,
                "spent_tx": o.spent_tx,
            }
            for o in tx.outputs
        ],
        "status": tx.status,
        "block_height": tx.block_height,
        "block_index": tx.block_index,
        "mempool": None,
    }
    if tx.mempool is not None:
        m = tx.mempool
        obj["mempool"] = {
            "fee_sat": m.fee_sat,
            "vsize": m.vsize,
            "time": m.time,
            "removetime": m.removetime,
            "depends": m.depends,
            "spentby": m.spentby,
            "replaceable": m.replaceable,
        }
    return json.dumps(obj, separators=(",", ":"))


def _record_from_json(line: str) -> Transaction:
    obj = json.loads(line)
    inputs = [
        TxInput(
            outpoint=OutPoint(intern(i["prev_txid"]), i["vout"]),
            address=intern(i["address"]) if i["address"] is not None else None,
            value_sat=i["value_sat"],
            unresolvable=i["unresolvable"],
        )
        for i in obj["inputs"]
    ]
    outputs = [
        TxOutput(
            n=o["n"],
            address=intern(o["address"]) if o["address"] is not None else None,
            value_sat=o["value_sat"],
            is_spent=o["is_spent"],
            spent_tx=[intern(t) for t in o["spent_tx"]],
        )
        for o in obj["outputs"]
    ]
    m = obj["mempool"]
    mempool = None
    if m is not None:
        mempool = MempoolMeta(
            fee_sat=m["fee_sat"],
            vsize=m["vsize"],
            time=m["time"],
            removetime=m["removetime"],
            depends=[intern(t) for t in m["depends"]],
            spentby=[intern(t) for t in m["spentby"]],
            replaceable=m["replaceable"],
        )
    return Transaction(
        txid=intern(obj["txid"]),
        is_coinbase=obj["is_coinbase"],
        inputs=inputs,
        outputs=outputs,
        status=obj["status"],
        block_height=obj["block_height"],
        block_index=obj["block_index"],
        mempool=mempool,
    )


def build_store(txs: Iterable[Transaction]) -> TxStore:
    """Assemble and finalize an in-memory store (test and library helper)."""
    store = TxStore()
    for tx in txs:
        store.add(tx)
    store.finalize()
    return store


def build_store_from_lines(lines: Iterable[str]) -> TxStore:
    store = TxStore()
    store.add_lines(lines)
    store.finalize()
    return store
