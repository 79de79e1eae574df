import json
import random

import pytest

from mempool_cluster import synth
from mempool_cluster.errors import UnknownHeuristic
from mempool_cluster.heuristics import (
    ALL_HEURISTICS,
    change_androulaki,
    change_ermilov,
    change_goldfeder,
    change_kappos,
    change_meiklejohn,
    co_spend,
    detect_coinjoin,
    fusiform_links,
    kappos_assignments,
    new_input_links,
    one_to_one_links,
    parse_heuristics,
    peel_chain_links,
    replacement_change,
    run_heuristics,
)
from mempool_cluster.mempool import (
    build_dependency_graph,
    conflict_groups,
    extract_fusiform_chains,
    extract_one_to_one_chains,
    extract_peel_chains,
)
from mempool_cluster.store import build_store_from_lines
from mempool_cluster.txmodel import FreshIndex, parse_transaction

import oracles


def simple_tx(txid, inputs, outputs, status="confirmed", coinbase=False, time=1_000):
    rec = {
        "txid": txid,
        "is_coinbase": coinbase,
        "inputs": [
            {"prev_txid": p, "vout": v, "address": a, "value_sat": s}
            for p, v, a, s in inputs
        ],
        "outputs": [
            {"n": n, "address": a, "value_sat": s} for n, (a, s) in enumerate(outputs)
        ],
        "status": status,
        "block_height": 10 if status == "confirmed" else None,
        "block_index": 0 if status == "confirmed" else None,
        "mempool": None
        if status == "confirmed"
        else {
            "fee_sat": 10,
            "vsize": 100,
            "time": time,
            "removetime": time + 100 if status == "failed" else None,
            "depends": [],
            "spentby": [],
            "replaceable": False,
        },
    }
    return json.dumps(rec)


def txid_n(i):
    return f"{i:064x}"


# --- CoinJoin filter --------------------------------------------------------------

def test_plain_payment_is_not_coinjoin():
    tx = parse_transaction(
        simple_tx(txid_n(1), [(txid_n(9), 0, "in0", 9_000)], [("o1", 5_000), ("o2", 3_000)])
    )
    assert not detect_coinjoin(tx)


def test_equal_output_shape_is_coinjoin():
    tx = parse_transaction(
        simple_tx(
            txid_n(1),
            [(txid_n(9), i, f"in{i}", 5_000) for i in range(4)],
            [("o1", 5_000), ("o2", 5_000), ("o3", 5_000), ("o4", 1_234), ("o5", 987)],
        )
    )
    assert detect_coinjoin(tx)
    assert oracles.coinjoin(json.loads(simple_tx(
        txid_n(1),
        [(txid_n(9), i, f"in{i}", 5_000) for i in range(4)],
        [("o1", 5_000), ("o2", 5_000), ("o3", 5_000), ("o4", 1_234), ("o5", 987)],
    )))


def test_coinbase_is_never_coinjoin():
    tx = parse_transaction(
        simple_tx(txid_n(1), [], [("o1", 50), ("o2", 50), ("o3", 50)], coinbase=True)
    )
    assert not detect_coinjoin(tx)


def test_fewer_inputs_than_modal_count_is_not_coinjoin():
    tx = parse_transaction(
        simple_tx(
            txid_n(1),
            [(txid_n(9), 0, "in0", 2_000)],
            [("o1", 666), ("o2", 666), ("o3", 666)],
        )
    )
    assert not detect_coinjoin(tx)


# --- co-spend ----------------------------------------------------------------------

def test_co_spend_star_over_inputs():
    tx = parse_transaction(
        simple_tx(
            txid_n(1),
            [(txid_n(9), 0, "a1", 10), (txid_n(9), 1, "a2", 10), (txid_n(9), 2, "a3", 10)],
            [("out", 25)],
        )
    )
    links = co_spend([tx])
    assert links.pairs() == {("a1", "a2"), ("a1", "a3")}
    assert links.evidence("a1", "a2") == [txid_n(1)]


def test_co_spend_skips_coinjoin_and_coinbase():
    mixing = parse_transaction(
        simple_tx(
            txid_n(1),
            [(txid_n(9), i, f"a{i}", 700) for i in range(3)],
            [("o1", 666), ("o2", 666), ("o3", 666)],
        )
    )
    cb = parse_transaction(
        simple_tx(txid_n(2), [], [("m1", 100)], coinbase=True)
    )
    assert co_spend([mixing, cb]).pairs() == set()


def test_co_spend_components_match_oracle(scenario_lines):
    lines = scenario_lines("random", seed=202, n_txs=100)
    store = build_store_from_lines(lines)
    got = oracles.multi_components(co_spend(store.all()).pairs())
    records = oracles.load_records(lines)
    want = oracles.co_spend_components(records, oracles.outputs_by_outpoint(records))
    assert got == want


# --- change heuristics ---------------------------------------------------------------

def two_output_corpus(second_out_fresh):
    """cb pays addr_a and addr_b; the spend pays addr_b (reused) and addr_new."""
    cb = simple_tx(
        txid_n(1), [], [("addr_a", 40_000), ("addr_b", 20_000)], coinbase=True
    )
    second = "addr_new" if second_out_fresh else "addr_b"
    spend = json.loads(
        simple_tx(
            txid_n(2),
            [(txid_n(1), 0, None, None)],
            [("addr_b", 12_345), (second, 27_000)],
        )
    )
    spend["block_height"] = 11
    return [cb, json.dumps(spend)]


def test_androulaki_assigns_the_single_fresh_output():
    store = build_store_from_lines(two_output_corpus(True))
    fresh = FreshIndex(store.all(), "confirmed")
    found = change_androulaki(store.get(txid_n(2)), fresh)
    assert found is not None and found.change_address == "addr_new"


def test_androulaki_rejects_zero_or_two_fresh():
    store = build_store_from_lines(two_output_corpus(False))
    fresh = FreshIndex(store.all(), "confirmed")
    assert change_androulaki(store.get(txid_n(2)), fresh) is None

    # Both outputs fresh: no assignment either.
    cb = simple_tx(txid_n(1), [], [("addr_a", 40_000)], coinbase=True)
    spend = simple_tx(
        txid_n(2), [(txid_n(1), 0, None, None)], [("n1", 10_000), ("n2", 29_000)]
    )
    spend = json.loads(spend)
    spend["block_height"] = 11
    store = build_store_from_lines([cb, json.dumps(spend)])
    fresh = FreshIndex(store.all(), "confirmed")
    assert change_androulaki(store.get(txid_n(2)), fresh) is None


def test_androulaki_requires_exactly_two_outputs():
    cb = simple_tx(txid_n(1), [], [("addr_a", 40_000)], coinbase=True)
    spend = json.loads(
        simple_tx(
            txid_n(2),
            [(txid_n(1), 0, None, None)],
            [("n1", 10_000), ("n2", 9_000), ("n3", 20_000)],
        )
    )
    spend["block_height"] = 11
    store = build_store_from_lines([cb, json.dumps(spend)])
    fresh = FreshIndex(store.all(), "confirmed")
    assert change_androulaki(store.get(txid_n(2)), fresh) is None


def test_meiklejohn_allows_three_outputs_but_not_self_transfer():
    cb = simple_tx(txid_n(1), [], [("addr_a", 40_000)], coinbase=True)
    spend = json.loads(
        simple_tx(
            txid_n(2),
            [(txid_n(1), 0, None, None)],
            [("n1", 10_000), ("addr_a", 9_000), ("n3", 20_000)],
        )
    )
    spend["block_height"] = 11
    store = build_store_from_lines([cb, json.dumps(spend)])
    fresh = FreshIndex(store.all(), "confirmed")
    # addr_a appears on both sides: rejected despite n1/n3 being candidates.
    assert change_meiklejohn(store.get(txid_n(2)), fresh) is None

    spend2 = json.loads(
        simple_tx(
            txid_n(3),
            [(txid_n(1), 0, None, None)],
            [("n1", 10_000), ("seen", 9_000), ("seen", 20_000)],
        )
    )
    spend2["block_height"] = 11
    cb2 = simple_tx(
        txid_n(4), [], [("seen", 5)], coinbase=True
    )
    store = build_store_from_lines([cb, cb2, json.dumps(spend2)])
    fresh = FreshIndex(store.all(), "confirmed")
    found = change_meiklejohn(store.get(txid_n(3)), fresh)
    assert found is not None and found.change_address == "n1"


def test_meiklejohn_rejects_coinbase():
    store = build_store_from_lines(
        [simple_tx(txid_n(1), [], [("m1", 10), ("m2", 20)], coinbase=True)]
    )
    fresh = FreshIndex(store.all(), "confirmed")
    assert change_meiklejohn(store.get(txid_n(1)), fresh) is None


def test_goldfeder_is_meiklejohn_plus_coinjoin_filter():
    cb = simple_tx(
        txid_n(1), [], [("a1", 700), ("a2", 700), ("a3", 700)], coinbase=True
    )
    mixing = json.loads(
        simple_tx(
            txid_n(2),
            [(txid_n(1), i, None, None) for i in range(3)],
            [("p1", 666), ("p2", 666), ("fresh1", 450)],
        )
    )
    mixing["block_height"] = 11
    cb2 = simple_tx(txid_n(3), [], [("p1", 5), ("p2", 6)], coinbase=True)
    store = build_store_from_lines([cb, cb2, json.dumps(mixing)])
    fresh = FreshIndex(store.all(), "confirmed")
    tx = store.get(txid_n(2))
    assert change_meiklejohn(tx, fresh) is not None
    assert change_goldfeder(tx, fresh) is None


def test_goldfeder_nests_in_meiklejohn_on_random_corpora(scenario_lines):
    for seed in (5, 6):
        store = build_store_from_lines(scenario_lines("random", seed=seed, n_txs=120))
        fresh = FreshIndex(store.all(), "all")
        for tx in store.all():
            g = change_goldfeder(tx, fresh)
            if g is not None:
                m = change_meiklejohn(tx, fresh)
                assert m is not None and m.change_address == g.change_address


def ermilov_corpus(value):
    cb = simple_tx(txid_n(1), [], [("addr_a", 90_000_000)], coinbase=True)
    spend = json.loads(
        simple_tx(
            txid_n(2),
            [(txid_n(1), 0, None, None)],
            [("seen", 30_000_000), ("fresh1", value)],
        )
    )
    spend["block_height"] = 11
    cb2 = simple_tx(txid_n(3), [], [("seen", 5)], coinbase=True)
    return [cb, cb2, json.dumps(spend)]


def test_ermilov_requires_non_round_value():
    store = build_store_from_lines(ermilov_corpus(12_345_678))
    fresh = FreshIndex(store.all(), "confirmed")
    found = change_ermilov(store.get(txid_n(2)), fresh)
    assert found is not None and found.change_address == "fresh1"
    assert 12_345_678 % 10_000 == 5_678

    store = build_store_from_lines(ermilov_corpus(50_000_000))
    fresh = FreshIndex(store.all(), "confirmed")
    assert change_ermilov(store.get(txid_n(2)), fresh) is None


def test_ermilov_rejects_exactly_two_inputs():
    cb = simple_tx(
        txid_n(1), [], [("addr_a", 50_000_000), ("addr_b", 40_000_000)], coinbase=True
    )
    spend = json.loads(
        simple_tx(
            txid_n(2),
            [(txid_n(1), 0, None, None), (txid_n(1), 1, None, None)],
            [("seen", 30_000_000), ("fresh1", 12_345_678)],
        )
    )
    spend["block_height"] = 11
    cb2 = simple_tx(txid_n(3), [], [("seen", 5)], coinbase=True)
    store = build_store_from_lines([cb, cb2, json.dumps(spend)])
    fresh = FreshIndex(store.all(), "confirmed")
    assert change_ermilov(store.get(txid_n(2)), fresh) is None


def test_change_assignments_match_oracle_on_random_corpora(scenario_lines):
    for seed in (14, 15):
        lines = scenario_lines("random", seed=seed, n_txs=130)
        store = build_store_from_lines(lines)
        records = oracles.load_records(lines)
        table = oracles.outputs_by_outpoint(records)
        fresh = FreshIndex(store.all(), "all")
        impl = {
            "ca": change_androulaki,
            "cm": change_meiklejohn,
            "cg": change_goldfeder,
            "ce": change_ermilov,
        }
        for rule, fn in impl.items():
            got = {
                tx.txid: found.change_address
                for tx in store.all()
                if (found := fn(tx, fresh)) is not None
            }
            assert got == oracles.change_assignments(records, table, rule, "all")


# --- kappos ------------------------------------------------------------------------

def test_kappos_on_fig10(scenario_store):
    store = scenario_store("fig10_pc")
    chains = extract_peel_chains(store, "mempool")
    tx1 = synth._txid("fig10/tx1")
    found = change_kappos(store.get(tx1), chains, store)
    assert found is not None and found.change_address == "addr2"

    # Thread tails have unspent outputs and get nothing.
    tx4 = synth._txid("fig10/tx4")
    tx6 = synth._txid("fig10/tx6")
    assigned = {a.txid for a in kappos_assignments(chains, store)}
    assert tx4 not in assigned and tx6 not in assigned

    # The branch transaction has two competing linking outputs: skipped.
    tx2 = synth._txid("fig10/tx2")
    assert tx2 not in assigned


def test_kappos_ignores_transactions_outside_chains():
    cb = simple_tx(txid_n(1), [], [("x", 10_000)], coinbase=True)
    lone = simple_tx(
        txid_n(2), [(txid_n(1), 0, None, None)], [("y", 4_000), ("z", 5_000)],
        status="pending",
    )
    store = build_store_from_lines([cb, lone])
    chains = extract_peel_chains(store, "mempool")
    assert change_kappos(store.get(txid_n(2)), chains, store) is None


# --- novel heuristics -----------------------------------------------------------------

def test_replacement_change_on_fig5(scenario_store):
    store = scenario_store("fig5_rc")
    links = replacement_change(conflict_groups(store), store)
    assert links.pairs() == {("addr1", "addr3")}


def test_replacement_change_ignores_constant_groups():
    fund = simple_tx(txid_n(1), [], [("src", 50_000)], coinbase=True)

    def member(txid, time, fee):
        rec = json.loads(
            simple_tx(
                txid_n(txid),
                [(txid_n(1), 0, None, None)],
                [("pay", 30_000), ("back", 15_000)],
                status="failed",
                time=time,
            )
        )
        rec["mempool"]["fee_sat"] = fee
        rec["mempool"]["replaceable"] = True
        return json.dumps(rec)

    store = build_store_from_lines([fund, member(2, 100, 10), member(3, 200, 20)])
    links = replacement_change(conflict_groups(store), store)
    assert links.pairs() == set()


def test_replacement_change_needs_two_members():
    fund = simple_tx(txid_n(1), [], [("src", 50_000)], coinbase=True)
    only = json.loads(
        simple_tx(
            txid_n(2),
            [(txid_n(1), 0, None, None)],
            [("pay", 30_000), ("back", 15_000)],
            status="pending",
        )
    )
    only["mempool"]["replaceable"] = True
    store = build_store_from_lines([fund, json.dumps(only)])
    assert replacement_change(conflict_groups(store), store).pairs() == set()


def test_replacement_links_match_oracle(scenario_lines):
    for seed in (44, 45, 46):
        lines = scenario_lines("random", seed=seed, n_txs=130)
        store = build_store_from_lines(lines)
        got = replacement_change(conflict_groups(store), store).pairs()
        records = oracles.load_records(lines)
        want = oracles.replacement_links(records, oracles.outputs_by_outpoint(records))
        assert got == want


def test_one_to_one_links_on_fig6(scenario_store):
    store = scenario_store("fig6_oc")
    chains = extract_one_to_one_chains(build_dependency_graph(store), store)
    links = one_to_one_links(chains)
    comps = oracles.multi_components(links.pairs())
    assert comps == {frozenset({"addr1", "addr2", "addr3", "addr4", "addr5"})}


def test_two_disjoint_chains_make_two_components():
    lines = []
    for base, offset in ((10, 0), (30, 1_000)):
        prev = txid_n(base)
        lines.append(simple_tx(prev, [], [(f"c{base}_0", 9_000)], coinbase=True))
        for step in range(1, 4):
            txid = txid_n(base + step)
            lines.append(
                simple_tx(
                    txid,
                    [(prev, 0, None, None)],
                    [(f"c{base}_{step}", 9_000 - step * 100)],
                    status="pending",
                    time=1_000 + offset + step * 10,
                )
            )
            prev = txid
    store = build_store_from_lines(lines)
    chains = extract_one_to_one_chains(build_dependency_graph(store), store)
    comps = oracles.multi_components(one_to_one_links(chains).pairs())
    assert len(comps) == 2


def test_fusiform_links_cover_paper_cases(scenario_store):
    for scenario, want in [
        ("fig7_fc2", {"addr2", "addr3", "addr4", "addr5"}),
        ("fig7_fc3", {"addr2", "addr3", "addr4"}),
    ]:
        store = scenario_store(scenario)
        chains = extract_fusiform_chains(build_dependency_graph(store), store)
        comps = oracles.multi_components(fusiform_links(chains).pairs())
        assert comps == {frozenset(want)}


def test_diverging_split_produces_no_links():
    cb = simple_tx(txid_n(1), [], [("a", 10_000)], coinbase=True)
    split = simple_tx(
        txid_n(2), [(txid_n(1), 0, None, None)], [("l", 4_000), ("r", 5_000)],
        status="pending", time=1_000,
    )
    left = simple_tx(
        txid_n(3), [(txid_n(2), 0, None, None)], [("lx", 3_500)],
        status="pending", time=1_010,
    )
    right = simple_tx(
        txid_n(4), [(txid_n(2), 1, None, None)], [("rx", 4_500)],
        status="pending", time=1_020,
    )
    store = build_store_from_lines([cb, split, left, right])
    chains = extract_fusiform_chains(build_dependency_graph(store), store)
    assert fusiform_links(chains).pairs() == set()


def test_new_input_links_on_fig9(scenario_store):
    store = scenario_store("fig9_ni")
    links = new_input_links(store.observed())
    assert links.pairs() == {("addr1", "addr3"), ("addr1", "addr5")}


def test_new_input_rejects_two_survivors():
    cb = simple_tx(
        txid_n(1), [], [("s1", 30_000), ("s2", 31_000)], coinbase=True
    )

    def payer(i, vout, status, time):
        rec = json.loads(
            simple_tx(
                txid_n(i),
                [(txid_n(1), vout, None, None)],
                [("shop", 25_000)],
                status=status,
                time=time,
            )
        )
        if status == "confirmed":
            rec["mempool"] = {
                "fee_sat": 10, "vsize": 100, "time": time, "removetime": time + 50,
                "depends": [], "spentby": [], "replaceable": False,
            }
        return json.dumps(rec)

    both_confirmed = build_store_from_lines(
        [cb, payer(2, 0, "confirmed", 1_000), payer(3, 1, "confirmed", 1_100)]
    )
    assert new_input_links(both_confirmed.observed()).pairs() == set()


def test_new_input_requires_exact_amounts():
    cb = simple_tx(
        txid_n(1), [], [("s1", 30_000), ("s2", 31_000)], coinbase=True
    )
    a = simple_tx(
        txid_n(2), [(txid_n(1), 0, None, None)], [("shop", 25_000)],
        status="failed", time=1_000,
    )
    b = simple_tx(
        txid_n(3), [(txid_n(1), 1, None, None)], [("shop", 25_001)],
        status="pending", time=1_100,
    )
    store = build_store_from_lines([cb, a, b])
    assert new_input_links(store.observed()).pairs() == set()


def test_peel_chain_links_on_fig10(scenario_store):
    store = scenario_store("fig10_pc")
    chains = extract_peel_chains(store, "mempool")
    per_chain = {
        frozenset().union(*oracles.multi_components(peel_chain_links([c], store).pairs()))
        for c in chains
    }
    assert per_chain == {
        frozenset({"addr1", "addr2", "addr4", "addr6"}),
        frozenset({"addr2", "addr9", "addr11"}),
    }
    # The chains share addr2, so the union of all pc links is one entity.
    merged = oracles.multi_components(peel_chain_links(chains, store).pairs())
    assert merged == {
        frozenset({"addr1", "addr2", "addr4", "addr6", "addr9", "addr11"})
    }


def test_chain_heuristics_empty_without_chains():
    store = build_store_from_lines(
        [simple_tx(txid_n(1), [], [("a", 10)], coinbase=True)]
    )
    assert one_to_one_links([]).pairs() == set()
    assert fusiform_links([]).pairs() == set()
    assert peel_chain_links([], store).pairs() == set()


# --- pipeline-level properties ----------------------------------------------------------

def test_every_heuristic_is_permutation_invariant(scenario_lines):
    lines = scenario_lines("random", seed=808, n_txs=150)
    shuffled = list(lines)
    random.Random(3).shuffle(shuffled)

    def snapshot(ls):
        store = build_store_from_lines(ls)
        out = {}
        for h, linkset in run_heuristics(store, ALL_HEURISTICS, "all").items():
            out[h] = linkset.links()
        return out

    assert snapshot(lines) == snapshot(shuffled)


def test_evidence_txids_exist_and_witness_roles(scenario_lines):
    lines = scenario_lines("random", seed=909, n_txs=150)
    store = build_store_from_lines(lines)
    for h, linkset in run_heuristics(store, ALL_HEURISTICS, "all").items():
        for a, b, evidence in linkset.links():
            assert evidence, (h, a, b)
            for txid in evidence:
                assert store.get(txid) is not None


def test_confirmed_runs_never_touch_mempool_metadata(scenario_lines):
    # Dropping metadata from confirmed records and scrambling it everywhere
    # else must not change a confirmed-source run at all.
    lines = scenario_lines("random", seed=321, n_txs=150)
    scrambled = []
    for line in lines:
        rec = json.loads(line)
        meta = rec["mempool"]
        if rec["status"] == "confirmed":
            rec["mempool"] = None
        elif meta is not None:
            meta["time"] += 977
            if meta["removetime"] is not None:
                meta["removetime"] += 1_977
            meta["fee_sat"] += 3
            meta["replaceable"] = not meta["replaceable"]
            meta["depends"] = []
            meta["spentby"] = []
        scrambled.append(json.dumps(rec))
    got_full = run_heuristics(build_store_from_lines(lines), ALL_HEURISTICS, "confirmed")
    got_bare = run_heuristics(build_store_from_lines(scrambled), ALL_HEURISTICS, "confirmed")
    for h in ALL_HEURISTICS:
        assert got_full[h].links() == got_bare[h].links(), h


def test_parse_heuristics_aliases_and_errors():
    assert parse_heuristics("cs,ca") == ["cs", "ca"]
    assert parse_heuristics("standard") == list(("cs", "ca", "cm", "cg", "ce", "ck"))
    assert parse_heuristics("novel") == ["rc", "oc", "fc"]
    assert "ni" not in parse_heuristics("standard,novel")
    assert parse_heuristics("cs,cs") == ["cs"]
    with pytest.raises(UnknownHeuristic):
        parse_heuristics("cs,xx")
