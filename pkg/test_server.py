#!/usr/bin/env python3
"""
Tests for the federated round loop
Client sampling, the no-conflict identity, the convexity check and the
constructed conflict fixture
"""

import json
import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.core.exceptions import ContractError, DivergenceError
from src.services.server import FederatedServer, build_datasets, sample_clients
from src.utils.config import parse_config

QUADRATIC_DATA = {
    "kind": "antipodal_pair", "per_class": 20, "dim": 4, "separation": 2.0,
    "noise_scale": 0.0, "test_fraction": 0.25,
}


def create_config(**sections):
    document = {
        "model": {"kind": "logistic"},
        "data": {"num_classes": 4, "per_class": 20, "dim": 6},
        "partition": {"scheme": "iid", "num_clients": 4},
        "local": {"epochs": 1, "batch_size": 16, "learning_rate": 0.05, "momentum": 0.0},
        "strategy": {"rounds": 2},
        "seeds": [0],
    }
    if "strategies" in sections:
        document.pop("strategy")
    document.update(sections)
    return parse_config(json.dumps(document))


def run_strategy(config, index=0, seed=0, **kwargs):
    server = FederatedServer.from_config(config, config.strategies[index], seed)
    for key, value in kwargs.items():
        setattr(server, key, value)
    history = server.run()
    return server, history


def test_sample_clients():
    assert sample_clients(7, 1.0, 0, 1) == list(range(7))
    chosen = sample_clients(100, 0.2, 3, 5)
    assert len(chosen) == len(set(chosen)) == 20
    assert chosen == sorted(chosen)
    assert chosen == sample_clients(100, 0.2, 3, 5)
    assert sample_clients(10, 0.01, 0, 0) == sample_clients(10, 0.01, 0, 0)
    assert len(sample_clients(10, 0.01, 0, 0)) == 1
    assert len(sample_clients(100, 0.285, 0, 0)) == 29
    with pytest.raises(ContractError):
        sample_clients(10, 0.0, 0, 0)


def test_no_conflict_identity():
    """Every client holds the same class mix, so no pair ever conflicts and FedGH equals FedAvg bit for bit"""
    config = create_config(
        model={"kind": "quadratic", "quadratic_target": [5.0, 5.0, 5.0, 5.0]},
        data=QUADRATIC_DATA,
        partition={"scheme": "dirichlet", "num_clients": 3, "alpha": "inf"},
        local={"epochs": 2, "batch_size": 64, "learning_rate": 0.1, "momentum": 0.0},
        strategies=[
            {"name": "plain", "aggregator": "fedavg", "rounds": 3},
            {"name": "harmonized", "aggregator": "fedavg", "harmonize": True, "rounds": 3},
        ],
    )
    plain, plain_history = run_strategy(config, 0)
    harmonized, harmonized_history = run_strategy(config, 1)
    assert all(r.conflict_ratio == 0.0 and r.projections_applied == 0 for r in harmonized_history)
    np.testing.assert_array_equal(plain.state.global_w, harmonized.state.global_w)
    assert [r.global_test_loss for r in plain_history] == [r.global_test_loss for r in harmonized_history]


def test_convexity_oracle():
    target = np.full(4, 5.0)
    config = create_config(
        model={"kind": "quadratic", "quadratic_target": target.tolist()},
        data=QUADRATIC_DATA,
        partition={"scheme": "iid", "num_clients": 3},
        local={"epochs": 5, "batch_size": 64, "learning_rate": 0.1, "momentum": 0.0},
        strategy={"aggregator": "fedavg", "rounds": 10},
    )
    server = FederatedServer.from_config(config, config.strategy, 0)
    initial_distance = np.linalg.norm(server.state.global_w - target)
    history = server.run()
    losses = [r.global_test_loss for r in history]
    assert all(b < a for a, b in zip(losses, losses[1:]))
    assert np.linalg.norm(server.state.global_w - target) < 0.1 * initial_distance
    assert all(np.isnan(r.global_test_accuracy) for r in history)


def test_antipodal_clients_are_projected():
    config = create_config(
        model={"kind": "quadratic", "quadratic_target": [0.0, 0.0, 0.0, 0.0]},
        data=QUADRATIC_DATA,
        partition={"scheme": "class_shard", "num_clients": 2},
        local={"epochs": 1, "batch_size": 64, "learning_rate": 0.1, "momentum": 0.0},
        strategies=[
            {"name": "fedavg", "rounds": 3},
            {"name": "fedavg_gh", "harmonize": True, "rounds": 3},
        ],
    )
    _, plain = run_strategy(config, 0)
    _, harmonized = run_strategy(config, 1)
    assert harmonized[0].projections_applied >= 1
    assert harmonized[0].conflict_ratio == 1.0
    assert harmonized[0].min_similarity == pytest.approx(-1.0)
    assert plain[0].conflict_ratio == 1.0
    assert all(r.projections_applied == 0 for r in plain)


def test_heterogeneity_raises_conflicts():
    base = dict(
        data={"num_classes": 10, "per_class": 40, "dim": 20},
        local={"epochs": 1, "batch_size": 64, "learning_rate": 0.05, "momentum": 0.0},
        strategy={"rounds": 2},
    )
    _, sharded = run_strategy(create_config(partition={"scheme": "class_shard", "num_clients": 10}, **base))
    _, iid = run_strategy(create_config(partition={"scheme": "iid", "num_clients": 10}, **base))
    assert np.mean([r.conflict_ratio for r in sharded]) > np.mean([r.conflict_ratio for r in iid])
    assert min(r.min_similarity for r in sharded) < min(r.min_similarity for r in iid)


def test_parallel_clients_match_sequential():
    config = create_config(strategy={"aggregator": "fednova", "harmonize": True, "rounds": 2})
    sequential, _ = run_strategy(config)
    parallel, _ = run_strategy(config, max_workers=3)
    np.testing.assert_array_equal(sequential.state.global_w, parallel.state.global_w)


def test_partial_participation_records():
    config = create_config(
        partition={"scheme": "iid", "num_clients": 6},
        strategy={"harmonize": True, "client_fraction": 0.5, "rounds": 3},
    )
    server, history = run_strategy(config)
    assert [r.round for r in history] == [1, 2, 3]
    assert all(len(r.sampled_clients) == 3 for r in history)
    assert all(len(r.sorted_similarities) == 3 for r in history)
    status = server.get_status()
    assert status['completed_rounds'] == 3
    assert status['recorder']['rounds'] == 3


def test_divergence_carries_round_context():
    config = create_config(
        model={"kind": "quadratic", "quadratic_diag": [1e6] * 4},
        data=QUADRATIC_DATA,
        local={"epochs": 100, "batch_size": 64, "learning_rate": 1.0, "momentum": 0.0},
    )
    with np.errstate(over='ignore', invalid='ignore'):
        with pytest.raises(DivergenceError) as info:
            run_strategy(config)
    assert info.value.round_index == 1
    assert "round 1" in str(info.value)


def test_strategies_share_data_and_start():
    config = create_config(strategies=[{"name": "a", "rounds": 1}, {"name": "b", "harmonize": True, "rounds": 1}])
    train_a, test_a, part_a = build_datasets(config, 4)
    train_b, test_b, part_b = build_datasets(config, 4)
    np.testing.assert_array_equal(train_a.features, train_b.features)
    for a, b in zip(part_a.assignments, part_b.assignments):
        np.testing.assert_array_equal(a, b)
    first = FederatedServer.from_config(config, config.strategies[0], 4)
    second = FederatedServer.from_config(config, config.strategies[1], 4)
    np.testing.assert_array_equal(first.state.global_w, second.state.global_w)


def test_strategy_prox_mu_reaches_local_training():
    config = create_config(strategies=[
        {"name": "fedavg", "rounds": 2},
        {"name": "fedprox", "prox_mu": 1.0, "rounds": 2},
    ])
    plain, plain_history = run_strategy(config, 0)
    prox, prox_history = run_strategy(config, 1)
    assert plain.local.prox_mu == 0.0
    assert prox.local.prox_mu == 1.0
    assert prox.local.learning_rate == plain.local.learning_rate
    assert not np.array_equal(plain.state.global_w, prox.state.global_w)
    assert [r.sampled_clients for r in plain_history] == [r.sampled_clients for r in prox_history]


def main():
    """Run all tests"""
    print("🚀 Testing the federated round loop")
    print("=" * 60)
    tests = [
        test_sample_clients,
        test_no_conflict_identity,
        test_convexity_oracle,
        test_antipodal_clients_are_projected,
        test_heterogeneity_raises_conflicts,
        test_parallel_clients_match_sequential,
        test_partial_participation_records,
        test_divergence_carries_round_context,
        test_strategies_share_data_and_start,
        test_strategy_prox_mu_reaches_local_training,
    ]
    failed = 0
    for test in tests:
        try:
            test()
            print(f"  ✅ {test.__name__}")
        except Exception as e:
            failed += 1
            print(f"  ❌ {test.__name__}: {e}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
