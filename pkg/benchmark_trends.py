#!/usr/bin/env python3
"""
Heterogeneity trend benchmark
Multi-seed checks that label skew raises gradient conflicts, that conflicts grow
during training, and that harmonization helps most under strong skew.

The conflict checks use the well-separated 10-class mixture. The accuracy
comparison uses overlapping classes and a small plain-SGD step so that neither
strategy has converged after the round budget.
"""

import argparse
import json
import logging
import sys
import time
from typing import Any, Dict, List, Optional

import numpy as np
import pandas as pd

from src.services.server import FederatedServer
from src.utils.config import ExperimentConfig, parse_config

SEEDS = [0, 1, 2, 3, 4]
REQUIRED_WINS = 4
SKEWED_ALPHA = 0.05
NEAR_IID_ALPHA = 100.0


def build_conflict_config(alpha: float, rounds: int) -> ExperimentConfig:
    document: Dict[str, Any] = {
        "model": {"kind": "mlp", "hidden_dim": 32},
        "data": {"num_classes": 10, "per_class": 200, "dim": 20, "separation": 3.0},
        "partition": {"scheme": "dirichlet", "num_clients": 10, "alpha": alpha},
        "local": {"epochs": 5, "batch_size": 64, "learning_rate": 0.01, "momentum": 0.9},
        "strategy": {"aggregator": "fedavg", "rounds": rounds},
        "seeds": SEEDS,
    }
    return parse_config(json.dumps(document))


def build_gain_config(alpha: float, rounds: int, harmonize: bool) -> ExperimentConfig:
    document: Dict[str, Any] = {
        "model": {"kind": "mlp", "hidden_dim": 32},
        "data": {"num_classes": 10, "per_class": 100, "dim": 20, "separation": 2.0},
        "partition": {"scheme": "dirichlet", "num_clients": 20, "alpha": alpha},
        "local": {"epochs": 2, "batch_size": 32, "learning_rate": 0.005, "momentum": 0.0},
        "strategy": {"aggregator": "fedavg", "harmonize": harmonize, "rounds": rounds},
        "seeds": SEEDS,
    }
    return parse_config(json.dumps(document))


def run_history(config: ExperimentConfig, seed: int):
    server = FederatedServer.from_config(config, config.strategy, seed)
    return server.run()


def quartile_means(values: List[float]):
    quarter = max(1, len(values) // 4)
    return float(np.mean(values[:quarter])), float(np.mean(values[-quarter:]))


def late_conflict_severity(history) -> float:
    """Mean of max(0, -min similarity) over the last quarter of rounds"""
    _, late = quartile_means([max(0.0, -r.min_similarity) for r in history])
    return late


def check_heterogeneity_and_escalation(rounds: int, rows: List[Dict[str, Any]]) -> Dict[str, bool]:
    """Conflict ratio and late conflict severity at strong skew vs near IID, and early vs late conflicts"""
    print(f"📊 Heterogeneity ⇒ conflict (K=10, alpha {SKEWED_ALPHA} vs {NEAR_IID_ALPHA})")
    ratio_wins = severity_wins = escalation_wins = 0
    for seed in SEEDS:
        skewed = run_history(build_conflict_config(SKEWED_ALPHA, rounds), seed)
        near_iid = run_history(build_conflict_config(NEAR_IID_ALPHA, rounds), seed)

        skewed_ratio = float(np.mean([r.conflict_ratio for r in skewed]))
        iid_ratio = float(np.mean([r.conflict_ratio for r in near_iid]))
        skewed_severity = late_conflict_severity(skewed)
        iid_severity = late_conflict_severity(near_iid)
        first, last = quartile_means([r.conflict_ratio for r in skewed])

        ratio_wins += skewed_ratio > iid_ratio
        severity_wins += skewed_severity > iid_severity
        escalation_wins += last > first
        print(f"  seed {seed}: ratio {skewed_ratio:.3f} vs {iid_ratio:.3f}, "
              f"late severity {skewed_severity:.3f} vs {iid_severity:.3f}, quartiles {first:.3f} -> {last:.3f}")
        rows.append({
            'check': 'conflict', 'seed': seed,
            'skewed_ratio': skewed_ratio, 'iid_ratio': iid_ratio,
            'skewed_severity': skewed_severity, 'iid_severity': iid_severity,
            'first_quartile_ratio': first, 'last_quartile_ratio': last,
        })

    return {
        'conflict ratio higher under skew': ratio_wins >= REQUIRED_WINS,
        'late conflict severity higher under skew': severity_wins >= REQUIRED_WINS,
        'conflicts escalate during training': escalation_wins >= REQUIRED_WINS,
    }


def check_harmonization_gain(rounds: int, rows: List[Dict[str, Any]]) -> Dict[str, bool]:
    """FedAvg+FedGH vs FedAvg final accuracy at strong skew and near IID (K=20, MLP)"""
    print("📊 Harmonization gain (K=20, MLP, overlapping classes)")
    gaps: Dict[float, List[float]] = {SKEWED_ALPHA: [], NEAR_IID_ALPHA: []}
    wins = 0
    for alpha in gaps:
        for seed in SEEDS:
            plain = run_history(build_gain_config(alpha, rounds, harmonize=False), seed)[-1].global_test_accuracy
            harmonized = run_history(build_gain_config(alpha, rounds, harmonize=True), seed)[-1].global_test_accuracy
            gaps[alpha].append(harmonized - plain)
            if alpha == SKEWED_ALPHA:
                wins += harmonized > plain
            print(f"  alpha={alpha} seed {seed}: fedavg {plain:.4f}, fedavg_gh {harmonized:.4f}")
            rows.append({
                'check': 'gain', 'seed': seed, 'alpha': alpha,
                'fedavg_acc': plain, 'fedavg_gh_acc': harmonized,
            })

    skew_gap = float(np.mean(gaps[SKEWED_ALPHA]))
    iid_gap = float(np.mean(gaps[NEAR_IID_ALPHA]))
    print(f"  mean gap: alpha={SKEWED_ALPHA} {skew_gap:+.4f}, alpha={NEAR_IID_ALPHA} {iid_gap:+.4f}")
    return {
        'harmonization wins under skew': wins >= REQUIRED_WINS,
        'gain larger under skew than near IID': skew_gap > iid_gap,
    }


def write_results(path: Optional[str], rows: List[Dict[str, Any]]) -> None:
    if not path or not rows:
        return
    pd.DataFrame(rows).to_csv(path, index=False, float_format='%.6g', lineterminator='\n')
    print(f"📁 Per-seed results written to {path}")


def main() -> int:
    parser = argparse.ArgumentParser(description="Multi-seed heterogeneity trend checks")
    parser.add_argument("--conflict-rounds", type=int, default=30)
    parser.add_argument("--benchmark-rounds", type=int, default=100)
    parser.add_argument("--skip-gain", action="store_true", help="skip the slower accuracy comparison")
    parser.add_argument("--results", help="write per-seed numbers to this CSV file")
    args = parser.parse_args()
    logging.basicConfig(level=logging.WARNING, format="%(asctime)s %(levelname)s %(message)s")

    started = time.perf_counter()
    rows: List[Dict[str, Any]] = []
    checks = check_heterogeneity_and_escalation(args.conflict_rounds, rows)
    if not args.skip_gain:
        checks.update(check_harmonization_gain(args.benchmark_rounds, rows))
    write_results(args.results, rows)

    print()
    for name, passed in checks.items():
        print(f"{'✅' if passed else '❌'} {name}")
    print(f"⏱️ {time.perf_counter() - started:.1f}s")
    return 0 if all(checks.values()) else 1


if __name__ == "__main__":
    sys.exit(main())
