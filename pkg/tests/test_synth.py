import json

import pytest

from mempool_cluster import synth
from mempool_cluster.errors import UnknownScenario
from mempool_cluster.store import build_store_from_lines
from mempool_cluster.txmodel import parse_transaction

import oracles


def test_every_scenario_ingests_cleanly():
    for name in synth.SCENARIOS:
        lines = synth.generate(name, seed=2, n_txs=60)
        store = build_store_from_lines(lines)
        assert len(store) == len(lines)


def test_unknown_scenario_rejected():
    with pytest.raises(UnknownScenario):
        synth.generate("fig99_xx")


def test_fig5_shape_matches_description():
    records = oracles.load_records(synth.generate("fig5_rc"))
    spenders = [r for r in records if not r["is_coinbase"]]
    assert len(spenders) == 3
    outpoints = {(r["inputs"][0]["prev_txid"], r["inputs"][0]["vout"]) for r in spenders}
    assert len(outpoints) == 1
    funding = next(r for r in records if r["is_coinbase"])
    assert funding["outputs"][0]["value_sat"] == 35_000_000
    assert all(r["mempool"]["replaceable"] for r in spenders)
    by_time = sorted(spenders, key=lambda r: r["mempool"]["time"])
    constant = {r["outputs"][0]["value_sat"] for r in by_time}
    varying = [r["outputs"][1]["value_sat"] for r in by_time]
    fees = [r["mempool"]["fee_sat"] for r in by_time]
    assert len(constant) == 1
    assert varying == sorted(varying, reverse=True), "change amount must shrink"
    assert fees == sorted(fees), "fee must grow"


def test_fig4_dust_shape():
    records = oracles.load_records(synth.generate("fig4_dust"))
    dust = next(r for r in records if r["txid"].startswith("f125"))
    assert dust["status"] == "failed"
    assert len(dust["inputs"]) == 1
    assert len(dust["outputs"]) == 9
    assert sum(1 for o in dust["outputs"] if o["value_sat"] == 666) == 8
    # The remaining output returns to the sender address.
    funding = next(r for r in records if r["txid"].startswith("3180"))
    sender = funding["outputs"][0]["address"]
    change = [o for o in dust["outputs"] if o["value_sat"] != 666]
    assert len(change) == 1 and change[0]["address"] == sender
    assert not oracles.coinjoin(dust)  # one input, modal count 8


def test_fig3_replacement_lineage():
    records = oracles.load_records(synth.generate("fig3_binance"))
    by_prefix = {r["txid"][:4]: r for r in records}
    assert by_prefix["dc43"]["status"] == "failed"
    assert by_prefix["4161"]["status"] == "confirmed"
    assert by_prefix["66c1"]["status"] == "confirmed"
    assert len(by_prefix["66c1"]["outputs"]) == 44
    sweep = by_prefix["6903"]
    assert len(sweep["inputs"]) == 100 and len(sweep["outputs"]) == 1
    assert (
        by_prefix["dc43"]["inputs"][0]["prev_txid"]
        == by_prefix["4161"]["inputs"][0]["prev_txid"]
    )


def test_fixture_bytes_are_stable():
    assert synth.generate("fig10_pc") == synth.generate("fig10_pc")
    a = synth.generate("random", seed=8, n_txs=300)
    b = synth.generate("random", seed=8, n_txs=300)
    assert a == b
    assert synth.generate("random", seed=9, n_txs=300) != a


def test_single_transaction_corpus_is_a_coinbase():
    lines = synth.generate("random", seed=4, n_txs=1)
    assert len(lines) == 1
    tx = parse_transaction(lines[0])
    assert tx.is_coinbase and tx.status == "confirmed"


def test_random_corpus_reingests_without_errors():
    lines = synth.generate("random", seed=123, n_txs=400)
    assert len(lines) == 400
    for line in lines:
        parse_transaction(line)
    store = build_store_from_lines(lines)
    # Spends only reference generated transactions: everything resolves.
    assert store.stats()["unresolvable_inputs"] == 0


def test_random_corpus_invariants_hold():
    lines = synth.generate("random", seed=55, n_txs=300)
    records = oracles.load_records(lines)
    for r in records:
        if r["status"] == "confirmed":
            assert r["block_height"] is not None and r["block_index"] is not None
        else:
            assert r["mempool"] is not None
        if r["status"] == "failed":
            assert r["mempool"]["removetime"] is not None
        if r["status"] == "pending":
            assert r["mempool"]["removetime"] is None
        assert r["is_coinbase"] == (not r["inputs"])
        assert r["outputs"]
        for o in r["outputs"]:
            assert o["value_sat"] >= 0
        if r["mempool"]:
            assert r["mempool"]["fee_sat"] >= 0
            assert r["mempool"]["vsize"] > 0


def test_generated_conflict_groups_are_well_formed():
    from mempool_cluster.mempool import conflict_groups

    found_any = False
    for seed in range(5):
        lines = synth.generate("random", seed=seed, n_txs=250)
        store = build_store_from_lines(lines)
        for group in conflict_groups(store):
            found_any = True
            assert len(group.members) >= 2
            confirmed = [
                t for t in group.members if store.get(t).status == "confirmed"
            ]
            assert len(confirmed) <= 1
            if confirmed:
                assert group.winner == confirmed[0]
    assert found_any, "random corpora must exercise replacement groups"


def test_failed_outputs_never_feed_confirmed_spenders():
    lines = synth.generate("random", seed=77, n_txs=400)
    records = oracles.load_records(lines)
    by = {r["txid"]: r for r in records}
    for r in records:
        if r["status"] != "confirmed":
            continue
        for i in r["inputs"]:
            parent = by.get(i["prev_txid"])
            if parent is not None:
                assert parent["status"] != "failed", (r["txid"], parent["txid"])
