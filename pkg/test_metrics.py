#!/usr/bin/env python3
"""
Tests for round metrics export and similarity snapshots
"""

import json
import math
import os
import sys
import tempfile

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

from src.core.exceptions import ContractError
from src.core.harmonizer import measure_conflicts, recover_gradients
from src.services.metrics import (
    CSV_COLUMNS, MetricsRecorder, RoundRecord, export_csv, export_similarity_snapshot, load_csv,
    rounds_to_target,
)


def create_record(round_index=1, loss=math.log(2), acc=0.5, ratio=0.25, min_sim=-0.5, projections=2, wall=12.3):
    return RoundRecord(round_index, loss, acc, ratio, min_sim, projections, wall)


def create_report(*gradients):
    params = [np.array(g, dtype=np.float64) for g in gradients]
    return measure_conflicts(recover_gradients(np.zeros(len(params[0])), params, 1.0))


def test_single_round_csv():
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, 'metrics.csv')
        export_csv([create_record()], path, include_wall_time=False)
        with open(path, 'rb') as f:
            content = f.read()
    assert content == (
        b"round,test_loss,test_acc,conflict_ratio,min_similarity,projections,wall_ms\n"
        b"1,0.693147,0.5,0.25,-0.5,2,0\n"
    )


def test_csv_parse_back():
    rng = np.random.default_rng(0)
    history = [
        create_record(t + 1, float(rng.uniform(0, 3)), float(rng.uniform()), float(rng.uniform()),
                      float(rng.uniform(-1, 1)), int(rng.integers(0, 10)), float(rng.uniform(0, 100)))
        for t in range(5)
    ]
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, 'metrics.csv')
        export_csv(history, path)
        df = load_csv(path)
    assert list(df.columns) == CSV_COLUMNS
    assert df['round'].tolist() == [1, 2, 3, 4, 5]
    np.testing.assert_allclose(df['test_loss'], [r.global_test_loss for r in history], rtol=1e-5)
    np.testing.assert_allclose(df['min_similarity'], [r.min_similarity for r in history], rtol=1e-5)
    np.testing.assert_allclose(df['wall_ms'], [r.wall_time_ms for r in history], rtol=1e-5)
    assert df['projections'].tolist() == [r.projections_applied for r in history]


def test_csv_is_byte_stable_and_writes_nan():
    history = [create_record(1, acc=float('nan')), create_record(2, acc=float('nan'))]
    with tempfile.TemporaryDirectory() as tmp:
        first = os.path.join(tmp, 'a.csv')
        second = os.path.join(tmp, 'b.csv')
        export_csv(history, first, include_wall_time=False)
        export_csv(history, second, include_wall_time=False)
        with open(first, 'rb') as a, open(second, 'rb') as b:
            content = a.read()
            assert content == b.read()
    assert b",nan," in content
    assert b"\r" not in content


def test_csv_errors():
    with pytest.raises(ContractError):
        export_csv([], 'unused.csv')
    with pytest.raises(ContractError):
        export_csv([create_record(2), create_record(1)], 'unused.csv')
    with tempfile.TemporaryDirectory() as tmp:
        blocker = os.path.join(tmp, 'blocker')
        with open(blocker, 'w') as f:
            f.write('not a directory')
        target = os.path.join(blocker, 'metrics.csv')
        with pytest.raises(OSError) as info:
            export_csv([create_record()], target)
    assert target in str(info.value)


def test_record_validation():
    with pytest.raises(ContractError):
        create_record(ratio=1.5)
    with pytest.raises(ContractError):
        create_record(min_sim=-1.2)


def test_similarity_snapshot():
    report = create_report([1, 0], [-1, 0.2], [0.3, 1])
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, 'sim_round3.json')
        export_similarity_snapshot(report, 3, path)
        with open(path, encoding='utf-8') as f:
            document = json.load(f)
    similarities = [pair['similarity'] for pair in document['pairs']]
    assert document['round'] == 3
    assert len(similarities) == 3
    assert similarities == sorted(similarities)
    assert similarities[0] == report.min_similarity

    with pytest.raises(ContractError):
        export_similarity_snapshot(create_report([1, 0]), 1, 'unused.json')


def test_recorder_run_directory():
    report = create_report([1, 0], [0, 1])
    with tempfile.TemporaryDirectory() as tmp:
        recorder = MetricsRecorder(run_dir=os.path.join(tmp, 'run_0'), snapshot_every=2)
        recorder.write_config({'seeds': [0], 'model': {'kind': 'logistic'}})
        for t in range(1, 4):
            recorder.record(create_record(t), report, final=(t == 3))
        recorder.write_metrics()
        files = sorted(os.listdir(os.path.join(tmp, 'run_0')))
        with open(os.path.join(tmp, 'run_0', 'metrics.csv'), encoding='utf-8') as f:
            lines = f.read().splitlines()
    assert files == ['config.json', 'metrics.csv', 'sim_round2.json', 'sim_round3.json']
    assert len(lines) == 4
    assert lines[1].endswith(',0')
    assert recorder.summary()['total_projections'] == 6

    with pytest.raises(ContractError):
        recorder.record(create_record(2))


def test_rounds_to_target():
    history = [create_record(1, acc=0.3), create_record(2, acc=0.65), create_record(3, acc=0.7)]
    assert rounds_to_target(history, 0.6) == 2
    assert rounds_to_target(history, 0.9) is None
    assert rounds_to_target([create_record(1, acc=float('nan'))], 0.1) is None


def main():
    """Run all tests"""
    print("🚀 Testing metrics export")
    print("=" * 60)
    tests = [
        test_single_round_csv,
        test_csv_parse_back,
        test_csv_is_byte_stable_and_writes_nan,
        test_csv_errors,
        test_record_validation,
        test_similarity_snapshot,
        test_recorder_run_directory,
        test_rounds_to_target,
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
