#!/usr/bin/env python3
"""
Tests for experiment config parsing and validation
"""

import json
import math
import os
import sys
import tempfile

import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.core.exceptions import ConfigError
from src.utils.config import load_config, parse_config, sample_size
from src.utils.validators import ConfigValidator


def create_minimal_document():
    return {
        "model": {"kind": "logistic"},
        "partition": {"scheme": "iid", "num_clients": 5},
        "strategy": {"rounds": 3},
        "seeds": [0],
    }


def parse(document):
    return parse_config(json.dumps(document))


def assert_config_error(document, field_path):
    with pytest.raises(ConfigError) as info:
        parse(document)
    assert info.value.field_path == field_path, str(info.value)
    assert str(info.value).startswith(field_path + ":")


def test_minimal_document_defaults():
    config = parse(create_minimal_document())
    assert config.local.learning_rate == 0.01
    assert config.local.batch_size == 64
    assert config.local.momentum == 0.9
    assert config.local.epochs == 5
    assert config.local.prox_mu == 0.0
    assert config.strategy.client_fraction == 1.0
    assert config.strategy.aggregator == 'fedavg'
    assert config.strategy.harmonize is False
    assert config.strategy.name == 'fedavg'
    assert config.model.input_dim == 20
    assert config.model.num_classes == 10
    assert config.data.seed is None
    assert config.output.dir == 'runs'
    assert config.seeds == (0,)


def test_alpha_must_be_positive():
    document = create_minimal_document()
    document["partition"] = {"scheme": "dirichlet", "num_clients": 5, "alpha": 0}
    assert_config_error(document, 'partition.alpha')
    document["partition"]["alpha"] = -1.5
    assert_config_error(document, 'partition.alpha')
    del document["partition"]["alpha"]
    assert_config_error(document, 'partition.alpha')


def test_alpha_infinity_marker():
    document = create_minimal_document()
    document["partition"] = {"scheme": "dirichlet", "num_clients": 5, "alpha": "inf"}
    config = parse(document)
    assert math.isinf(config.partition.alpha)
    assert config.to_dict()['partition']['alpha'] == 'inf'


def test_duplicate_strategy_names():
    document = create_minimal_document()
    del document["strategy"]
    document["strategies"] = [
        {"aggregator": "fedavg", "rounds": 3},
        {"name": "fedavg", "aggregator": "fednova", "rounds": 3},
    ]
    assert_config_error(document, 'strategies[1].name')


def test_derived_strategy_names():
    document = create_minimal_document()
    del document["strategy"]
    document["strategies"] = [
        {"aggregator": "fedavg", "rounds": 3},
        {"aggregator": "fedavg", "harmonize": True, "rounds": 3},
        {"aggregator": "fednova", "harmonize": True, "rounds": 3},
    ]
    assert [s.name for s in parse(document).strategies] == ['fedavg', 'fedavg_gh', 'fednova_gh']


def test_per_strategy_prox_mu():
    document = create_minimal_document()
    del document["strategy"]
    document["local"] = {"prox_mu": 0.01}
    document["strategies"] = [
        {"aggregator": "fedavg", "rounds": 3},
        {"aggregator": "fedavg", "prox_mu": 0.1, "rounds": 3},
        {"aggregator": "fedavg", "prox_mu": 0.1, "harmonize": True, "rounds": 3},
        {"aggregator": "fednova", "prox_mu": 0.1, "rounds": 3},
    ]
    config = parse(document)
    assert [s.name for s in config.strategies] == ['fedavg', 'fedprox', 'fedprox_gh', 'fednova_prox']
    assert config.strategies[0].local_config(config.local).prox_mu == 0.01
    assert config.strategies[1].local_config(config.local).prox_mu == 0.1
    assert config.strategies[1].local_config(config.local).learning_rate == config.local.learning_rate

    document["strategies"][1]["prox_mu"] = -0.5
    assert_config_error(document, 'strategies[1].prox_mu')


def test_unknown_keys_are_errors():
    document = create_minimal_document()
    document["local"] = {"learnig_rate": 0.1}
    assert_config_error(document, 'local.learnig_rate')

    document = create_minimal_document()
    document["extra"] = True
    assert_config_error(document, 'extra')


def test_missing_required_fields():
    document = create_minimal_document()
    del document["seeds"]
    assert_config_error(document, 'seeds')

    document = create_minimal_document()
    del document["strategy"]["rounds"]
    assert_config_error(document, 'strategy.rounds')

    document = create_minimal_document()
    document["seeds"] = [1, 1]
    assert_config_error(document, 'seeds')


def test_cross_field_checks():
    document = create_minimal_document()
    document["partition"] = {"scheme": "class_shard", "num_clients": 3}
    assert_config_error(document, 'partition.num_clients')

    document = create_minimal_document()
    document["strategy"] = {"harmonize": True, "client_fraction": 0.1, "rounds": 1}
    assert_config_error(document, 'strategy.client_fraction')

    document = create_minimal_document()
    document["model"] = {"kind": "quadratic", "quadratic_target": [1.0, 2.0]}
    assert_config_error(document, 'model.quadratic_target')

    document = create_minimal_document()
    document["local"] = {"learning_rate": 0.0}
    assert_config_error(document, 'local.learning_rate')


def test_malformed_input():
    with pytest.raises(ConfigError) as info:
        parse_config("{not json")
    assert info.value.field_path == '<document>'
    with pytest.raises(ConfigError) as info:
        load_config('/nonexistent/config.json')
    assert info.value.field_path == '<file>'


def test_load_config_and_overrides():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, 'config.json')
        with open(path, 'w', encoding='utf-8') as f:
            json.dump(create_minimal_document(), f)
        config = load_config(path)
    replaced = config.with_seeds([4, 5]).with_output_dir('elsewhere')
    assert replaced.seeds == (4, 5)
    assert replaced.output.dir == 'elsewhere'
    assert config.seeds == (0,)


def test_sample_size_rounding():
    assert sample_size(100, 0.2) == 20
    assert sample_size(10, 0.25) == 3
    assert sample_size(10, 0.01) == 1
    assert sample_size(7, 1.0) == 7
    assert sample_size(100, 0.285) == 29
    assert sample_size(100, 0.145) == 15


def test_validation_summary():
    validator = ConfigValidator()
    good = validator.validate_document(create_minimal_document())
    assert "✅ VALID" in validator.get_validation_summary(good)
    bad = validator.validate_document({"model": {"kind": "svm"}})
    summary = validator.get_validation_summary(bad)
    assert "❌ INVALID" in summary
    assert "model.kind" in summary


def main():
    """Run all tests"""
    print("🚀 Testing config parsing")
    print("=" * 60)
    tests = [
        test_minimal_document_defaults,
        test_alpha_must_be_positive,
        test_alpha_infinity_marker,
        test_duplicate_strategy_names,
        test_derived_strategy_names,
        test_per_strategy_prox_mu,
        test_unknown_keys_are_errors,
        test_missing_required_fields,
        test_cross_field_checks,
        test_malformed_input,
        test_load_config_and_overrides,
        test_sample_size_rounding,
        test_validation_summary,
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
