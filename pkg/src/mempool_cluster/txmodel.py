"""Canonical transaction model: parsing, ordering, input resolution, freshness.

All values are integer satoshis (1 BTC = 10^8 sat); no floats appear anywhere
in value arithmetic. Transactions are either recorded in a block (confirmed),
removed from every observing mempool without confirming (failed), or still
sitting in a mempool (pending).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from sys import intern
from typing import Iterator, Mapping, NamedTuple

from .errors import InvariantViolation, MalformedRecord, UnknownTransaction

SAT_PER_BTC = 10**8

CONFIRMED = "confirmed"
FAILED = "failed"
PENDING = "pending"
STATUSES = (CONFIRMED, FAILED, PENDING)

_TXID_RE = re.compile(r"[0-9a-f]{64}\Z")
_MAX_VOUT = 2**32


def is_txid(value) -> bool:
    """True for a 64-char lowercase hex transaction id."""
    return isinstance(value, str) and _TXID_RE.match(value) is not None


class OutPoint(NamedTuple):
    """Reference to output number `vout` of transaction `txid`."""

    txid: str
    vout: int

    def key(self) -> str:
        return f"{self.txid}:{self.vout}"


@dataclass(slots=True)
class TxInput:
    outpoint: OutPoint
    address: str | None = None
    value_sat: int | None = None
    # Set when the referenced output cannot be found in the corpus.
    unresolvable: bool = False


@dataclass(slots=True)
class TxOutput:
    n: int
    address: str | None
    value_sat: int
    is_spent: bool = False
    spent_tx: list[str] = field(default_factory=list)


@dataclass(slots=True)
class MempoolMeta:
    """Per-node observations recorded while the transaction sat in a mempool."""

    fee_sat: int
    vsize: int
    time: int
    removetime: int | None = None
    depends: list[str] = field(default_factory=list)
    spentby: list[str] = field(default_factory=list)
    replaceable: bool = False


@dataclass(slots=True)
class Transaction:
    txid: str
    is_coinbase: bool
    inputs: list[TxInput]
    outputs: list[TxOutput]
    status: str
    block_height: int | None = None
    block_index: int | None = None
    mempool: MempoolMeta | None = None

    def input_addresses(self) -> set[str]:
        return {i.address for i in self.inputs if i.address is not None}

    def output_addresses(self) -> set[str]:
        return {o.address for o in self.outputs if o.address is not None}

    def addresses(self) -> set[str]:
        return self.input_addresses() | self.output_addresses()

    def output_at(self, vout: int) -> TxOutput | None:
        for out in self.outputs:
            if out.n == vout:
                return out
        return None


def order_key(tx: Transaction) -> tuple:
    """Total-order key: confirmed by block position, then unconfirmed by
    mempool entry time, txid breaking all ties."""
    if tx.status == CONFIRMED:
        return (0, tx.block_height, tx.block_index, tx.txid)
    return (1, tx.mempool.time, 0, tx.txid)


# --- ingest parsing -------------------------------------------------------
# Validation is inlined: ingest throughput is dominated by this function, so
# the happy path avoids helper calls and builds error strings only on raise.
# type() checks double as bool/int disambiguation (JSON never subclasses).

def _txid_list(values, field_name):
    if values is None:
        return []
    if type(values) is not list:
        raise MalformedRecord(field_name, "expected a list of txids")
    out = []
    for v in values:
        if not (type(v) is str and _TXID_RE.match(v)):
            raise MalformedRecord(field_name, "entry is not a valid txid")
        out.append(intern(v))
    if len(out) > 1 and len(set(out)) != len(out):
        raise InvariantViolation(field_name, "entries must be distinct")
    return out


def parse_transaction(record: str) -> Transaction:
    """Decode one ingest line into a validated Transaction.

    Unknown keys are ignored; absent optionals may be null or missing.
    Raises MalformedRecord for undecodable text and InvariantViolation when a
    decoded record breaks the model, each naming the offending field.
    """
    try:
        obj = json.loads(record)
    except (ValueError, TypeError) as exc:
        raise MalformedRecord("json", f"invalid JSON: {exc}") from None
    if type(obj) is not dict:
        raise MalformedRecord("json", "record is not a JSON object")

    txid = obj.get("txid")
    if not (type(txid) is str and _TXID_RE.match(txid)):
        raise MalformedRecord("txid", "not a 64-char lowercase hex txid")
    txid = intern(txid)

    is_coinbase = obj.get("is_coinbase")
    if type(is_coinbase) is not bool:
        raise MalformedRecord("is_coinbase", "expected a boolean")

    status = obj.get("status")
    if status not in STATUSES:
        raise MalformedRecord("status", f"must be one of {', '.join(STATUSES)}")

    raw_inputs = obj.get("inputs")
    if raw_inputs is None:
        raw_inputs = []
    elif type(raw_inputs) is not list:
        raise MalformedRecord("inputs", "expected a list")
    inputs = []
    for idx, raw in enumerate(raw_inputs):
        if type(raw) is not dict:
            raise MalformedRecord(f"inputs[{idx}]", "expected an object")
        prev = raw.get("prev_txid")
        if not (type(prev) is str and _TXID_RE.match(prev)):
            raise MalformedRecord(
                f"inputs[{idx}].prev_txid", "not a 64-char lowercase hex txid"
            )
        vout = raw.get("vout")
        if type(vout) is not int:
            raise MalformedRecord(f"inputs[{idx}].vout", "expected an integer")
        if not 0 <= vout < _MAX_VOUT:
            raise InvariantViolation(f"inputs[{idx}].vout", "out of range")
        address = raw.get("address")
        if address is not None:
            if type(address) is not str:
                raise MalformedRecord(f"inputs[{idx}].address", "expected a string")
            address = intern(address)
        value_sat = raw.get("value_sat")
        if value_sat is not None:
            if type(value_sat) is not int:
                raise MalformedRecord(f"inputs[{idx}].value_sat", "expected an integer")
            if value_sat < 0:
                raise InvariantViolation(f"inputs[{idx}].value_sat", "negative satoshis")
        inputs.append(TxInput(OutPoint(intern(prev), vout), address, value_sat))

    raw_outputs = obj.get("outputs")
    if type(raw_outputs) is not list:
        raise MalformedRecord("outputs", "expected a list")
    outputs = []
    seen_n = set()
    for idx, raw in enumerate(raw_outputs):
        if type(raw) is not dict:
            raise MalformedRecord(f"outputs[{idx}]", "expected an object")
        n = raw.get("n")
        if type(n) is not int:
            raise MalformedRecord(f"outputs[{idx}].n", "expected an integer")
        if n < 0:
            raise InvariantViolation(f"outputs[{idx}].n", "negative output index")
        seen_n.add(n)
        address = raw.get("address")
        if address is not None:
            if type(address) is not str:
                raise MalformedRecord(f"outputs[{idx}].address", "expected a string")
            address = intern(address)
        value_sat = raw.get("value_sat")
        if type(value_sat) is not int:
            raise MalformedRecord(f"outputs[{idx}].value_sat", "expected an integer")
        if value_sat < 0:
            raise InvariantViolation(f"outputs[{idx}].value_sat", "negative satoshis")
        outputs.append(TxOutput(n, address, value_sat))
    if not outputs:
        raise InvariantViolation("outputs", "a transaction must have outputs")
    if len(seen_n) != len(outputs):
        raise InvariantViolation("outputs", "duplicate output index")

    block_height = obj.get("block_height")
    if block_height is not None and type(block_height) is not int:
        raise MalformedRecord("block_height", "expected an integer")
    block_index = obj.get("block_index")
    if block_index is not None and type(block_index) is not int:
        raise MalformedRecord("block_index", "expected an integer")

    raw_mempool = obj.get("mempool")
    mempool = None
    if raw_mempool is not None:
        if type(raw_mempool) is not dict:
            raise MalformedRecord("mempool", "expected an object")
        fee_sat = raw_mempool.get("fee_sat")
        if type(fee_sat) is not int:
            raise MalformedRecord("mempool.fee_sat", "expected an integer")
        if fee_sat < 0:
            raise InvariantViolation("mempool.fee_sat", "negative fee")
        vsize = raw_mempool.get("vsize")
        if type(vsize) is not int:
            raise MalformedRecord("mempool.vsize", "expected an integer")
        if vsize <= 0:
            raise InvariantViolation("mempool.vsize", "must be positive")
        time = raw_mempool.get("time")
        if type(time) is not int:
            raise MalformedRecord("mempool.time", "expected an integer")
        removetime = raw_mempool.get("removetime")
        if removetime is not None:
            if type(removetime) is not int:
                raise MalformedRecord("mempool.removetime", "expected an integer")
            if removetime < time:
                raise InvariantViolation("removetime", "removetime precedes entry time")
        replaceable = raw_mempool.get("replaceable")
        if replaceable is None:
            replaceable = False
        elif type(replaceable) is not bool:
            raise MalformedRecord("mempool.replaceable", "expected a boolean")
        mempool = MempoolMeta(
            fee_sat,
            vsize,
            time,
            removetime,
            _txid_list(raw_mempool.get("depends"), "mempool.depends"),
            _txid_list(raw_mempool.get("spentby"), "mempool.spentby"),
            replaceable,
        )

    if is_coinbase != (not inputs):
        raise InvariantViolation("is_coinbase", "coinbase iff inputs are empty")
    if status == CONFIRMED:
        if block_height is None or block_index is None:
            raise InvariantViolation(
                "block_height", "confirmed requires block_height and block_index"
            )
    else:
        if mempool is None:
            raise InvariantViolation("mempool", f"{status} requires mempool data")
        if status == FAILED and mempool.removetime is None:
            raise InvariantViolation("removetime", "failed requires removetime")

    return Transaction(
        txid, is_coinbase, inputs, outputs, status, block_height, block_index, mempool
    )


def serialize_transaction(tx: Transaction) -> str:
    """Emit the canonical ingest-format line for a transaction.

    parse_transaction(serialize_transaction(tx)) reproduces the canonical
    field set; resolution state (spent links, unresolvable flags) is not part
    of the ingest format.
    """
    obj = {
        "txid": tx.txid,
        "is_coinbase": tx.is_coinbase,
        "inputs": [
            {
                "prev_txid": i.outpoint.txid,
                "vout": i.outpoint.vout,
                "address": i.address,
                "value_sat": i.value_sat,
            }
            for i in tx.inputs
        ],
        "outputs": [
            {"n": o.n, "address": o.address, "value_sat": o.value_sat}
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
            "depends": list(m.depends),
            "spentby": list(m.spentby),
            "replaceable": m.replaceable,
        }
    return json.dumps(obj, separators=(",", ":"))


# --- input resolution -----------------------------------------------------

def resolve_inputs(tx: Transaction, lookup: Mapping[str, Transaction]) -> Transaction:
    """Copy address/value onto each input from the referenced output and
    register the spend on that output.

    Inputs referencing outpoints absent from `lookup` are flagged
    unresolvable instead of failing, so partial corpora stay usable. The
    operation commutes across transactions: resolving a corpus in any order
    produces the same spent links.
    """
    for inp in tx.inputs:
        prev = lookup.get(inp.outpoint.txid)
        out = prev.output_at(inp.outpoint.vout) if prev is not None else None
        if out is None:
            inp.unresolvable = True
            continue
        inp.unresolvable = False
        inp.address = out.address
        inp.value_sat = out.value_sat
        if tx.txid not in out.spent_tx:
            out.spent_tx.append(tx.txid)
            out.spent_tx.sort()
        out.is_spent = True
    return tx


# --- fresh-address predicate ----------------------------------------------

SCOPE_CONFIRMED = "confirmed"
SCOPE_ALL = "all"


class FreshIndex:
    """First-appearance index used by the fresh-address predicate.

    An address is fresh at transaction `tx` when it appears in no transaction
    strictly before `tx` under the corpus order, counting appearances only
    within the chosen scope (confirmed-only, or confirmed plus observed
    unconfirmed transactions).
    """

    def __init__(self, txs: Iterator[Transaction], scope: str = SCOPE_ALL):
        if scope not in (SCOPE_CONFIRMED, SCOPE_ALL):
            raise ValueError(f"unknown freshness scope: {scope}")
        self.scope = scope
        self._first: dict[str, tuple] = {}
        self._known: set[str] = set()
        first = self._first
        for tx in txs:
            self._known.add(tx.txid)
            if scope == SCOPE_CONFIRMED and tx.status != CONFIRMED:
                continue
            key = order_key(tx)
            for addr in tx.addresses():
                prev = first.get(addr)
                if prev is None or key < prev:
                    first[addr] = key

    def is_fresh(self, address: str, tx: Transaction) -> bool:
        if tx.txid not in self._known:
            raise UnknownTransaction(tx.txid)
        seen = self._first.get(address)
        return seen is None or seen >= order_key(tx)
