import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mempool_cluster import synth
from mempool_cluster.store import build_store_from_lines


@pytest.fixture(scope="session")
def scenario_lines():
    cache = {}

    def get(name, seed=0, n_txs=100):
        key = (name, seed, n_txs)
        if key not in cache:
            cache[key] = synth.generate(name, seed=seed, n_txs=n_txs)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def scenario_store(scenario_lines):
    cache = {}

    def get(name, seed=0, n_txs=100):
        key = (name, seed, n_txs)
        if key not in cache:
            cache[key] = build_store_from_lines(scenario_lines(name, seed, n_txs))
        return cache[key]

    return get
