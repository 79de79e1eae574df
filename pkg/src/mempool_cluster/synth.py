"""Deterministic corpus generator: named fixtures for regression tests and a
seeded random generator for property tests and benchmarks.

Every generated corpus is valid ingest input: statuses, block positions,
mempool windows and fee arithmetic are all self-consistent. Unstated amounts
are distinct, non-round satoshi values so fixtures never trip the equal-output
mixing filter by accident.
"""

from __future__ import annotations

import hashlib
import json
import random
from typing import Iterable

from .errors import UnknownScenario

BASE_TIME = 1_651_363_200
BASE_HEIGHT = 100

SCENARIOS = (
    "fig3_binance",
    "fig4_dust",
    "fig5_rc",
    "fig6_oc",
    "fig7_fc1",
    "fig7_fc2",
    "fig7_fc3",
    "fig9_ni",
    "fig10_pc",
    "random",
)


def _txid(tag: str, prefix: str = "") -> str:
    digest = hashlib.sha256(tag.encode()).hexdigest()
    return (prefix + digest)[:64]


def _record(
    txid: str,
    inputs: Iterable[tuple[str, int]],
    outputs: Iterable[tuple[str | None, int]],
    status: str,
    height: int | None = None,
    index: int | None = None,
    meta: dict | None = None,
) -> dict:
    return {
        "txid": txid,
        "is_coinbase": not inputs,
        "inputs": [
            {"prev_txid": p, "vout": v, "address": None, "value_sat": None}
            for p, v in inputs
        ],
        "outputs": [
            {"n": n, "address": addr, "value_sat": sat}
            for n, (addr, sat) in enumerate(outputs)
        ],
        "status": status,
        "block_height": height,
        "block_index": index,
        "mempool": meta,
    }


def _meta(fee, vsize, time, removetime=None, replaceable=False) -> dict:
    return {
        "fee_sat": fee,
        "vsize": vsize,
        "time": time,
        "removetime": removetime,
        "depends": [],
        "spentby": [],
        "replaceable": replaceable,
    }


def _fill_pool_links(records: list[dict]) -> None:
    """Populate depends/spentby for spends of a parent that was still in the
    pool when the child entered."""
    by_txid = {r["txid"]: r for r in records}
    for rec in records:
        child_meta = rec["mempool"]
        if child_meta is None:
            continue
        for inp in rec["inputs"]:
            parent = by_txid.get(inp["prev_txid"])
            if parent is None or parent["mempool"] is None:
                continue
            pm = parent["mempool"]
            in_pool = pm["time"] <= child_meta["time"] and (
                pm["removetime"] is None or child_meta["time"] < pm["removetime"]
            )
            if not in_pool:
                continue
            if rec["txid"] not in pm["spentby"]:
                pm["spentby"].append(rec["txid"])
            if parent["txid"] not in child_meta["depends"]:
                child_meta["depends"].append(parent["txid"])


def _emit(records: list[dict]) -> list[str]:
    _fill_pool_links(records)
    return [json.dumps(r, separators=(",", ":")) for r in records]


# --- figure fixtures ---------------------------------------------------------

def _fig3_binance() -> list[dict]:
    """A mistaken exchange transfer replaced by a higher-fee correction, plus
    the surrounding hot-wallet sweep traffic."""
    t = BASE_TIME
    cb = _txid("fig3/cb")
    funder = _txid("fig3/cb2")
    t_disburse = _txid("fig3/disburse", prefix="66c1")
    t_mistake = _txid("fig3/mistake", prefix="dc43")
    t_replace = _txid("fig3/replace", prefix="4161")
    t_sweep = _txid("fig3/sweep", prefix="6903")

    disburse_outs = [("bc1q_wwvq", 12_345_678)]
    disburse_outs += [(f"bnb_dest{i:02d}", 13_000_000 + 1_111 * i) for i in range(1, 44)]
    sweep_ins = [(t_replace, 0)] + [(funder, i) for i in range(99)]
    sweep_total = 12_295_678 + sum(1_234_567 + 13 * i for i in range(99))

    return [
        _record(cb, [], [("bnb_mint", 600_000_000)], "confirmed", BASE_HEIGHT, 0),
        _record(t_disburse, [(cb, 0)], disburse_outs, "confirmed", BASE_HEIGHT + 1, 0),
        _record(
            t_mistake,
            [(t_disburse, 0)],
            [("bc1q_7s3h", 12_335_678)],
            "failed",
            meta=_meta(10_000, 110, t + 60, removetime=t + 600, replaceable=True),
        ),
        _record(
            t_replace,
            [(t_disburse, 0)],
            [("19Fa_Hd5X", 12_295_678)],
            "confirmed",
            BASE_HEIGHT + 2,
            0,
            meta=_meta(50_000, 110, t + 240, removetime=t + 600, replaceable=True),
        ),
        _record(
            funder,
            [],
            [("19Fa_Hd5X", 1_234_567 + 13 * i) for i in range(99)],
            "confirmed",
            BASE_HEIGHT + 2,
            1,
        ),
        _record(
            t_sweep,
            sweep_ins,
            [("bc1q_7s3h", sweep_total - 90_000)],
            "confirmed",
            BASE_HEIGHT + 3,
            0,
        ),
    ]


def _fig4_dust() -> list[dict]:
    """A failed one-to-nine fan-out sending 666 sat to eight heavyweight
    addresses, replaced by an ordinary spend of the same outpoint."""
    t = BASE_TIME
    cb = _txid("fig4/cb")
    t_fund = _txid("fig4/fund", prefix="3180")
    t_dust = _txid("fig4/dust", prefix="f125")
    t_real = _txid("fig4/real", prefix="4f6e")
    whales = [
        "bc1q_wczt",
        "bc1q_9hz6",
        "1Fee_b6uF",
        "1P5Z_DfHQ",
        "3CkU_wz5M",
        "whale_6",
        "whale_7",
        "whale_8",
    ]
    dust_outs = [(w, 666) for w in whales] + [("1KqX_JYEQ", 35_108_128)]
    return [
        _record(
            cb, [], [("dust_src_a", 40_000_000), ("dust_src_b", 30_000_000)],
            "confirmed", BASE_HEIGHT, 0,
        ),
        _record(
            t_fund,
            [(cb, 0), (cb, 1)],
            [("1KqX_JYEQ", 35_123_456), ("dust_peer", 34_866_544)],
            "confirmed",
            BASE_HEIGHT + 1,
            0,
        ),
        _record(
            t_dust,
            [(t_fund, 0)],
            dust_outs,
            "failed",
            meta=_meta(10_000, 400, t + 120, removetime=t + 420, replaceable=True),
        ),
        _record(
            t_real,
            [(t_fund, 0)],
            [("1FU6_8hKf", 35_063_456)],
            "confirmed",
            BASE_HEIGHT + 2,
            0,
            meta=_meta(60_000, 110, t + 300, removetime=t + 900, replaceable=True),
        ),
    ]


def _fig5_rc() -> list[dict]:
    """RBF ladder: three replaceable spends of one outpoint where the
    counterparty amount stays constant and the change amount shrinks as the
    fee grows."""
    t = BASE_TIME
    cb = _txid("fig5/cb")
    tx2 = _txid("fig5/tx2")
    tx3 = _txid("fig5/tx3")
    tx4 = _txid("fig5/tx4")
    return [
        _record(cb, [], [("addr1", 35_000_000)], "confirmed", BASE_HEIGHT, 0),
        _record(
            tx2,
            [(cb, 0)],
            [("addr2", 20_123_457), ("addr3", 14_871_542)],
            "failed",
            meta=_meta(5_001, 141, t + 30, removetime=t + 600, replaceable=True),
        ),
        _record(
            tx3,
            [(cb, 0)],
            [("addr2", 20_123_457), ("addr3", 14_861_542)],
            "failed",
            meta=_meta(15_001, 141, t + 120, removetime=t + 600, replaceable=True),
        ),
        _record(
            tx4,
            [(cb, 0)],
            [("addr2", 20_123_457), ("addr3", 14_851_542)],
            "confirmed",
            BASE_HEIGHT + 1,
            0,
            meta=_meta(25_001, 141, t + 210, removetime=t + 540, replaceable=True),
        ),
    ]


def _fig6_oc() -> list[dict]:
    """Four pending one-input/one-output transactions forming a dependency
    chain, batched close together in time."""
    t = BASE_TIME
    cb = _txid("fig6/cb")
    ids = [_txid(f"fig6/tx{i}") for i in range(2, 6)]
    records = [_record(cb, [], [("addr1", 9_876_543)], "confirmed", BASE_HEIGHT, 0)]
    values = [9_866_001, 9_855_123, 9_844_031, 9_832_907]
    prev, prev_value = cb, 9_876_543
    for i, (txid, value) in enumerate(zip(ids, values)):
        records.append(
            _record(
                txid,
                [(prev, 0)],
                [(f"addr{i + 2}", value)],
                "pending",
                meta=_meta(prev_value - value, 110, t + 10 + 60 * i),
            )
        )
        prev, prev_value = txid, value
    return records


def _fig7_fc1() -> list[dict]:
    """Two outputs of one pending transaction combined by the next one."""
    t = BASE_TIME
    cb = _txid("fig7c1/cb")
    tx2 = _txid("fig7c1/tx2")
    tx3 = _txid("fig7c1/tx3")
    return [
        _record(cb, [], [("addr1", 50_000_000)], "confirmed", BASE_HEIGHT, 0),
        _record(
            tx2,
            [(cb, 0)],
            [("addr2", 24_123_451), ("addr3", 25_865_432)],
            "pending",
            meta=_meta(11_117, 141, t + 10),
        ),
        _record(
            tx3,
            [(tx2, 0), (tx2, 1)],
            [("addr4", 49_975_321)],
            "pending",
            meta=_meta(13_562, 170, t + 50),
        ),
    ]


def _fig7_fc2() -> list[dict]:
    """A split whose prongs pass through one transaction each before being
    combined again."""
    t = BASE_TIME
    cb = _txid("fig7c2/cb")
    tx2 = _txid("fig7c2/tx2")
    tx3 = _txid("fig7c2/tx3")
    tx4 = _txid("fig7c2/tx4")
    tx5 = _txid("fig7c2/tx5")
    return [
        _record(cb, [], [("addr1", 80_000_000)], "confirmed", BASE_HEIGHT, 0),
        _record(
            tx2,
            [(cb, 0)],
            [("addr2", 39_987_651), ("addr3", 39_998_765)],
            "pending",
            meta=_meta(13_584, 141, t + 10),
        ),
        _record(
            tx3,
            [(tx2, 0)],
            [("addr4", 39_976_543)],
            "pending",
            meta=_meta(11_108, 110, t + 40),
        ),
        _record(
            tx4,
            [(tx2, 1)],
            [("addr5", 39_987_654)],
            "pending",
            meta=_meta(11_111, 110, t + 45),
        ),
        _record(
            tx5,
            [(tx3, 0), (tx4, 0)],
            [("addr6", 79_954_321)],
            "pending",
            meta=_meta(9_876, 170, t + 80),
        ),
    ]


def _fig7_fc3() -> list[dict]:
    """A split whose prongs end by paying the same address."""
    t = BASE_TIME
    cb = _txid("fig7c3/cb")
    tx2 = _txid("fig7c3/tx2")
    tx3 = _txid("fig7c3/tx3")
    tx4 = _txid("fig7c3/tx4")
    return [
        _record(cb, [], [("addr1", 60_000_000)], "confirmed", BASE_HEIGHT, 0),
        _record(
            tx2,
            [(cb, 0)],
            [("addr2", 29_912_345), ("addr3", 30_045_671)],
            "pending",
            meta=_meta(41_984, 141, t + 10),
        ),
        _record(
            tx3,
            [(tx2, 0)],
            [("addr4", 29_901_234)],
            "pending",
            meta=_meta(11_111, 110, t + 40),
        ),
        _record(
            tx4,
            [(tx2, 1)],
            [("addr4", 30_034_567)],
            "pending",
            meta=_meta(11_104, 110, t + 50),
        ),
    ]


def _fig9_ni() -> list[dict]:
    """Three observed payments of an identical amount to one recipient; the
    first two failed, only the last confirmed."""
    t = BASE_TIME
    cb = _txid("fig9/cb")
    tx2 = _txid("fig9/tx2")
    tx4 = _txid("fig9/tx4")
    tx6 = _txid("fig9/tx6")
    amount = 23_456_789
    return [
        _record(
            cb,
            [],
            [("addr1", 23_500_000), ("addr3", 23_600_000), ("addr5", 23_700_000)],
            "confirmed",
            BASE_HEIGHT,
            0,
        ),
        _record(
            tx2,
            [(cb, 0)],
            [("addr2", amount)],
            "failed",
            meta=_meta(43_211, 110, t + 10, removetime=t + 500, replaceable=True),
        ),
        _record(
            tx4,
            [(cb, 1)],
            [("addr2", amount)],
            "failed",
            meta=_meta(143_211, 110, t + 150, removetime=t + 600, replaceable=True),
        ),
        _record(
            tx6,
            [(cb, 2)],
            [("addr2", amount)],
            "confirmed",
            BASE_HEIGHT + 1,
            0,
            meta=_meta(243_211, 110, t + 290, removetime=t + 700, replaceable=True),
        ),
    ]


def _fig10_pc() -> list[dict]:
    """Two pending peel threads: a four-step thread and a three-step thread
    branching off its second transaction."""
    t = BASE_TIME
    cb = _txid("fig10/cb")
    tx1 = _txid("fig10/tx1")
    tx2 = _txid("fig10/tx2")
    tx3 = _txid("fig10/tx3")
    tx4 = _txid("fig10/tx4")
    tx5 = _txid("fig10/tx5")
    tx6 = _txid("fig10/tx6")

    def pend(txid, prev, outs, fee, offset):
        return _record(txid, [prev], outs, "pending", meta=_meta(fee, 141, t + offset))

    return [
        _record(cb, [], [("addr1", 90_000_000)], "confirmed", BASE_HEIGHT, 0),
        pend(tx1, (cb, 0), [("addr2", 80_123_456), ("addr3", 9_865_431)], 11_113, 10),
        pend(tx2, (tx1, 0), [("addr4", 70_234_567), ("addr9", 9_877_765)], 11_124, 70),
        pend(tx3, (tx2, 0), [("addr6", 60_345_678), ("addr7", 9_877_654)], 11_235, 130),
        pend(tx4, (tx3, 0), [("addr12", 50_456_789), ("addr13", 9_876_543)], 12_346, 190),
        pend(tx5, (tx2, 1), [("addr10", 4_938_271), ("addr11", 4_928_260)], 11_234, 250),
        pend(tx6, (tx5, 1), [("addr14", 2_463_514), ("addr15", 2_453_503)], 11_243, 310),
    ]


_FIXTURES = {
    "fig3_binance": _fig3_binance,
    "fig4_dust": _fig4_dust,
    "fig5_rc": _fig5_rc,
    "fig6_oc": _fig6_oc,
    "fig7_fc1": _fig7_fc1,
    "fig7_fc2": _fig7_fc2,
    "fig7_fc3": _fig7_fc3,
    "fig9_ni": _fig9_ni,
    "fig10_pc": _fig10_pc,
}


# --- random corpora -----------------------------------------------------------

DEFAULT_WEIGHTS = {
    "coinbase": 6,
    "spend": 30,
    "rbf": 9,
    "chain": 11,
    "peel": 11,
    "fusiform": 8,
    "ni": 7,
}

# Smallest number of transactions each motif can emit.
_MOTIF_MIN = {
    "coinbase": 1,
    "spend": 1,
    "rbf": 2,
    "chain": 2,
    "peel": 2,
    "fusiform": 3,
    "ni": 2,
}


class _RandomCorpus:
    def __init__(self, seed: int, n_txs: int, weights: dict[str, int] | None):
        self.rng = random.Random(seed)
        self.n_txs = n_txs
        self.weights = dict(weights or DEFAULT_WEIGHTS)
        self.records: list[dict] = []
        self.clock = BASE_TIME
        self.height = BASE_HEIGHT
        self.block_index = 1
        self.serial = 0
        self.addr_serial = 0
        # Random-access outpoint pool: list + position index for O(1)
        # swap-removal (the pool reaches corpus scale).
        self.spendable: list[tuple[str, int, str, int]] = []
        self._slot: dict[tuple[str, int], int] = {}
        self.known_addrs: list[str] = []

    # -- primitives --

    def next_txid(self) -> str:
        self.serial += 1
        return _txid(f"rnd/{self.serial}")

    def next_addr(self) -> str:
        # Occasionally reuse an address so freshness tests see both outcomes.
        if self.known_addrs and self.rng.random() < 0.12:
            return self.rng.choice(self.known_addrs)
        self.addr_serial += 1
        addr = f"a{self.addr_serial:06d}"
        self.known_addrs.append(addr)
        return addr

    def tick(self) -> int:
        self.clock += self.rng.randint(1, 40)
        return self.clock

    def block_slot(self) -> tuple[int, int]:
        slot = (self.height, self.block_index)
        self.block_index += 1
        return slot

    def new_block(self) -> None:
        self.height += 1
        self.block_index = 1

    def _pool_add(self, utxo: tuple[str, int, str, int]) -> None:
        self._slot[(utxo[0], utxo[1])] = len(self.spendable)
        self.spendable.append(utxo)

    def _pool_remove_at(self, idx: int) -> tuple[str, int, str, int]:
        utxo = self.spendable[idx]
        del self._slot[(utxo[0], utxo[1])]
        last = self.spendable.pop()
        if idx < len(self.spendable):
            self.spendable[idx] = last
            self._slot[(last[0], last[1])] = idx
        return utxo

    def pop_utxos(self, k: int) -> list[tuple[str, int, str, int]]:
        k = min(k, len(self.spendable))
        return [
            self._pool_remove_at(self.rng.randrange(len(self.spendable)))
            for _ in range(k)
        ]

    def consume(self, txid: str, vout: int) -> None:
        """Drop one outpoint from the pool; motifs call this before spending
        an output they created themselves, so no outpoint is ever spent by
        two motifs (deliberate replacement groups aside)."""
        idx = self._slot.get((txid, vout))
        if idx is not None:
            self._pool_remove_at(idx)

    def split_value(self, total: int, parts: int) -> list[int]:
        values = []
        rest = total
        for i in range(parts - 1):
            cut = rest // (parts - i)
            v = self.rng.randint(max(1, cut // 2), max(1, cut))
            values.append(v)
            rest -= v
        values.append(rest)
        return values

    def emit(
        self,
        inputs: list[tuple[str, int, str, int]],
        outputs: list[tuple[str, int]],
        status: str,
        meta_extra: dict | None = None,
        observed: bool | None = None,
    ) -> dict:
        """Append one record; unconfirmed records always carry observations."""
        txid = self.next_txid()
        total_in = sum(v for _, _, _, v in inputs)
        total_out = sum(v for _, v in outputs)
        fee = max(total_in - total_out, 0)
        rec = _record(
            txid,
            [(p, v) for p, v, _, _ in inputs],
            outputs,
            status,
        )
        when = self.tick()
        if status == "confirmed":
            if observed is None:
                observed = self.rng.random() < 0.3
            height, index = self.block_slot()
            rec["block_height"] = height
            rec["block_index"] = index
            if observed:
                rec["mempool"] = _meta(
                    fee, self.rng.randint(100, 400), when, removetime=when + self.rng.randint(30, 600)
                )
        else:
            removetime = None
            if status == "failed":
                removetime = when + self.rng.randint(30, 900)
            rec["mempool"] = _meta(fee, self.rng.randint(100, 400), when, removetime=removetime)
        if meta_extra and rec["mempool"] is not None:
            rec["mempool"].update(meta_extra)
        if rec["mempool"] is not None:
            rec["mempool"]["replaceable"] = (
                meta_extra.get("replaceable", False)
                if meta_extra
                else self.rng.random() < 0.4
            )
        self.records.append(rec)
        if status != "failed":
            for n, (addr, value) in enumerate(outputs):
                self._pool_add((txid, n, addr, value))
        return rec

    def link_pool_parents(self, child: dict, parents: list[dict]) -> None:
        """Record depends/spentby for in-pool parents, dropping one side at
        random so reconciliation gets exercised."""
        cm = child["mempool"]
        for parent in parents:
            pm = parent["mempool"]
            if pm is None or cm is None:
                continue
            mode = self.rng.random()
            if mode < 0.4 or mode >= 0.7:
                cm["depends"].append(parent["txid"])
            if mode >= 0.4:
                pm["spentby"].append(child["txid"])

    # -- motifs --

    def motif_coinbase(self) -> None:
        self.new_block()
        n_out = self.rng.randint(1, 3)
        total = self.rng.randint(5_000_000, 100_000_000)
        outs = [
            (self.next_addr(), v)
            for v in self.split_value(total, n_out)
        ]
        txid = self.next_txid()
        height, index = self.height, 0
        rec = _record(txid, [], outs, "confirmed", height, index)
        self.records.append(rec)
        for n, (addr, value) in enumerate(outs):
            self._pool_add((txid, n, addr, value))
        self.tick()

    def motif_spend(self) -> None:
        utxos = self.pop_utxos(self.rng.randint(1, 3))
        if not utxos:
            return self.motif_coinbase()
        total = sum(v for _, _, _, v in utxos)
        fee = min(self.rng.randint(200, 9_000), max(total - 1, 0))
        budget = total - fee
        roll = self.rng.random()
        if roll < 0.15 and budget >= 3 and len(utxos) >= 2:
            # Equal-output mixing shape to exercise the CoinJoin filter.
            k = min(len(utxos), self.rng.randint(2, 3))
            per = budget // (k + 1)
            if per >= 1:
                outs = [(self.next_addr(), per) for _ in range(k)]
                outs.append((self.next_addr(), budget - per * k))
            else:
                outs = [(self.next_addr(), budget)]
        else:
            n_out = self.rng.randint(1, 3)
            n_out = min(n_out, budget)
            outs = [(self.next_addr(), v) for v in self.split_value(budget, max(n_out, 1))]
        status = self.rng.choices(
            ["confirmed", "pending", "failed"], weights=[6, 2, 2]
        )[0]
        self.emit(utxos, outs, status)

    def motif_rbf(self) -> bool:
        utxos = self.pop_utxos(1)
        if not utxos:
            return False
        utxo = utxos[0]
        n_members = self.rng.randint(2, 3)
        total = utxo[3]
        if total < 10:
            return False
        pay_addr = self.next_addr()
        change_addr = self.next_addr()
        pay = self.rng.randint(1, max(total // 2, 1))
        varying = self.rng.random() > 0.2
        members = []
        fee = self.rng.randint(100, max(min(1_000, (total - pay) // (n_members + 1)), 101))
        for i in range(n_members):
            change = total - pay - fee * (i + 1 if varying else 1)
            if change <= 0:
                break
            last = i == n_members - 1
            if last and self.rng.random() < 0.5:
                status = "confirmed"
            else:
                status = "failed" if not last else "pending"
            members.append(
                self.emit(
                    [utxo],
                    [(pay_addr, pay), (change_addr, change)],
                    status,
                    meta_extra={"replaceable": True},
                    observed=True,
                )
            )
        return bool(members)

    def motif_chain(self) -> bool:
        utxos = self.pop_utxos(1)
        if not utxos:
            return False
        prev = utxos[0]
        length = self.rng.randint(2, 5)
        fate = self.rng.choice(["pending", "failed", "confirmed"])
        made = []
        for _ in range(length):
            value = prev[3] - self.rng.randint(100, 2_000)
            if value <= 0:
                break
            self.consume(prev[0], prev[1])
            rec = self.emit(
                [prev], [(self.next_addr(), value)], "pending", observed=True
            )
            made.append(rec)
            prev = (rec["txid"], 0, rec["outputs"][0]["address"], value)
        if not made:
            return False
        self._settle_chain(made, fate)
        for parent, child in zip(made, made[1:]):
            self.link_pool_parents(child, [parent])
        return True

    def motif_peel(self) -> bool:
        utxos = self.pop_utxos(1)
        if not utxos:
            return False
        prev_rec = None
        prev = utxos[0]
        length = self.rng.randint(2, 4)
        fate = self.rng.choice(["pending", "failed"])
        made = []
        for _ in range(length):
            total = prev[3] - self.rng.randint(100, 2_000)
            if total <= 2:
                break
            peeled = self.rng.randint(1, max(total // 3, 1))
            keep = total - peeled
            link_vout = self.rng.randint(0, 1)
            outs = (
                [(self.next_addr(), keep), (self.next_addr(), peeled)]
                if link_vout == 0
                else [(self.next_addr(), peeled), (self.next_addr(), keep)]
            )
            self.consume(prev[0], prev[1])
            rec = self.emit([prev], outs, "pending", observed=True)
            if prev_rec is not None:
                self.link_pool_parents(rec, [prev_rec])
            made.append(rec)
            out = rec["outputs"][link_vout]
            prev = (rec["txid"], link_vout, out["address"], out["value_sat"])
            prev_rec = rec
        if not made:
            return False
        # Occasional second spender branching off a middle member.
        if len(made) >= 2 and self.rng.random() < 0.35:
            branch_from = made[self.rng.randrange(len(made) - 1)]
            taken = {r["inputs"][0]["vout"] for r in made if r["inputs"][0]["prev_txid"] == branch_from["txid"]}
            free = [o for o in branch_from["outputs"] if o["n"] not in taken]
            if free:
                out = free[0]
                total = out["value_sat"] - self.rng.randint(50, 500)
                if total > 2:
                    half = total // 2
                    self.consume(branch_from["txid"], out["n"])
                    rec = self.emit(
                        [(branch_from["txid"], out["n"], out["address"], out["value_sat"])],
                        [(self.next_addr(), half), (self.next_addr(), total - half)],
                        "pending",
                        observed=True,
                    )
                    self.link_pool_parents(rec, [branch_from])
                    made.append(rec)
        self._settle_chain(made, fate)
        return True

    def motif_fusiform(self) -> bool:
        utxos = self.pop_utxos(1)
        if not utxos:
            return False
        utxo = utxos[0]
        total = utxo[3] - self.rng.randint(200, 2_000)
        if total < 10:
            return False
        left = total // 2
        split = self.emit(
            [utxo],
            [(self.next_addr(), left), (self.next_addr(), total - left)],
            "pending",
            observed=True,
        )
        variant = self.rng.choice(["combine", "deep", "same_addr", "diverge"])
        outs = split["outputs"]
        made = [split]
        if variant == "combine":
            for o in outs:
                self.consume(split["txid"], o["n"])
            rec = self.emit(
                [(split["txid"], o["n"], o["address"], o["value_sat"]) for o in outs],
                [(self.next_addr(), max(total - self.rng.randint(100, 1_000), 1))],
                "pending",
                observed=True,
            )
            self.link_pool_parents(rec, [split])
            made.append(rec)
        else:
            mids = []
            sink_addr = self.next_addr()
            for o in outs:
                value = o["value_sat"] - self.rng.randint(50, 500)
                if value <= 0:
                    continue
                addr = sink_addr if variant == "same_addr" else self.next_addr()
                self.consume(split["txid"], o["n"])
                rec = self.emit(
                    [(split["txid"], o["n"], o["address"], o["value_sat"])],
                    [(addr, value)],
                    "pending",
                    observed=True,
                )
                self.link_pool_parents(rec, [split])
                mids.append(rec)
            made.extend(mids)
            if variant == "deep" and len(mids) == 2:
                ins = [
                    (m["txid"], 0, m["outputs"][0]["address"], m["outputs"][0]["value_sat"])
                    for m in mids
                ]
                for txid, vout, _, _ in ins:
                    self.consume(txid, vout)
                value = max(sum(i[3] for i in ins) - self.rng.randint(100, 1_000), 1)
                rec = self.emit(
                    ins, [(self.next_addr(), value)], "pending", observed=True
                )
                self.link_pool_parents(rec, mids)
                made.append(rec)
        fate = self.rng.choice(["pending", "failed"])
        self._settle_chain(made, fate)
        return True

    def motif_ni(self) -> bool:
        n_members = self.rng.randint(2, 3)
        utxos = self.pop_utxos(n_members)
        if len(utxos) < 2:
            return False
        amount = min(v for _, _, _, v in utxos) - self.rng.randint(500, 3_000)
        if amount <= 0:
            return False
        recipient = self.next_addr()
        survivors = 1 if self.rng.random() < 0.7 else 2
        made = []
        for i, utxo in enumerate(utxos):
            failed = i < len(utxos) - survivors
            status = "failed" if failed else self.rng.choice(["pending", "confirmed"])
            made.append(
                self.emit(
                    [utxo],
                    [(recipient, amount)],
                    status,
                    meta_extra={"replaceable": True},
                    observed=True,
                )
            )
        return bool(made)

    def _settle_chain(self, made: list[dict], fate: str) -> None:
        """Give every member of an unconfirmed motif a consistent ending."""
        if fate == "pending":
            return
        end = self.clock + self.rng.randint(50, 400)
        for rec in made:
            rec["mempool"]["removetime"] = end
            end += self.rng.randint(1, 30)
            if fate == "failed":
                rec["status"] = "failed"
                # Their outputs are no longer spendable downstream.
                for out in rec["outputs"]:
                    self.consume(rec["txid"], out["n"])
            else:
                rec["status"] = "confirmed"
                height, index = self.block_slot()
                rec["block_height"] = height
                rec["block_index"] = index

    def build(self) -> list[dict]:
        if self.n_txs < 1:
            raise ValueError("n_txs must be >= 1")
        self.motif_coinbase()
        names = list(self.weights)
        weights = [self.weights[n] for n in names]
        while len(self.records) < self.n_txs:
            remaining = self.n_txs - len(self.records)
            name = self.rng.choices(names, weights=weights)[0]
            # No motif emits more than 5 records, so multi-transaction motifs
            # only run with slack and the corpus lands on n_txs exactly.
            if remaining < 6 or not self.spendable:
                name = "spend" if self.spendable else "coinbase"
            before = len(self.records)
            getattr(self, f"motif_{name}")()
            if len(self.records) == before:
                self.motif_coinbase()
        return self.records


def generate_random(
    seed: int, n_txs: int, weights: dict[str, int] | None = None
) -> list[str]:
    """Seeded random corpus mixing confirmed, pending and failed transactions
    with replacement groups and dependency chains; byte-identical per seed.

    depends/spentby sides are dropped at random by the generator itself, so
    no post-pass completes them here: edge reconciliation stays exercised.
    """
    records = _RandomCorpus(seed, n_txs, weights).build()
    return [json.dumps(r, separators=(",", ":")) for r in records]


def generate(scenario: str, seed: int = 0, n_txs: int = 100) -> list[str]:
    """Produce one corpus as ingest lines; see SCENARIOS for valid names."""
    if scenario == "random":
        return generate_random(seed, n_txs)
    maker = _FIXTURES.get(scenario)
    if maker is None:
        raise UnknownScenario(scenario)
    return _emit(maker())
