"""
Experiment Runner
Executes every (strategy, seed) cell of a config, writes the run directories and
builds the cross-seed comparison table.
"""

import logging
import math
import traceback
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Any, Tuple
import numpy as np
import pandas as pd
from ..core.exceptions import SimulationError
from ..utils.config import ExperimentConfig, StrategyConfig
from .metrics import MetricsRecorder, RoundRecord, rounds_to_target
from .server import FederatedServer

EXIT_OK = 0
EXIT_ALL_FAILED = 1
EXIT_CONFIG_ERROR = 2


@dataclass
class ExperimentOutcome:
    """What a sweep produced"""
    exit_status: int
    histories: Dict[Tuple[str, int], List[RoundRecord]] = field(default_factory=dict)
    failures: List[Tuple[str, int, str]] = field(default_factory=list)
    summary: Optional[pd.DataFrame] = None


def run_directory(config: ExperimentConfig, strategy: StrategyConfig, seed: int) -> Path:
    return Path(config.output.dir) / strategy.name / f"run_{seed}"


def run_cell(config: ExperimentConfig, strategy: StrategyConfig, seed: int,
             write_metrics: bool = True, snapshot_every: Optional[int] = None) -> List[RoundRecord]:
    """Run one (strategy, seed) cell and write its artifacts"""
    recorder = MetricsRecorder(
        run_dir=str(run_directory(config, strategy, seed)),
        include_wall_time=config.output.record_wall_time,
        snapshot_every=config.output.snapshot_every if snapshot_every is None else snapshot_every,
    )
    recorder.write_config({
        **config.to_dict(), 'local': strategy.local_config(config.local).to_dict(),
        'strategy': strategy.to_dict(), 'seed': seed,
    })
    server = FederatedServer.from_config(config, strategy, seed, recorder=recorder)
    history = server.run()
    if write_metrics:
        recorder.write_metrics()
    return history


def _write_failures(config: ExperimentConfig, failures: List[Tuple[str, int, str]]) -> bool:
    """Write failures.log; False when the output directory is not writable"""
    target = Path(config.output.dir) / "failures.log"
    lines = [f"{name}\tseed={seed}\t{message}" for name, seed, message in failures]
    try:
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    except OSError as e:
        logging.error(f"Cannot write {target}: {e}")
        return False
    return True


def _write_summary(config: ExperimentConfig, summary: pd.DataFrame) -> bool:
    target = Path(config.output.dir) / "summary.csv"
    try:
        summary.to_csv(target, index=False, float_format='%.6g', lineterminator='\n')
    except OSError as e:
        logging.error(f"Cannot write {target}: {e}")
        return False
    return True


def summarize(config: ExperimentConfig, histories: Dict[Tuple[str, int], List[RoundRecord]]) -> pd.DataFrame:
    """Final-round accuracy mean ± std across seeds and mean conflict ratio per strategy"""
    rows = []
    for (name, seed), history in histories.items():
        if not history:
            continue
        reached = None
        if config.output.target_accuracy is not None:
            reached = rounds_to_target(history, config.output.target_accuracy)
        rows.append({
            'strategy': name,
            'seed': seed,
            'final_acc': history[-1].global_test_accuracy,
            'final_loss': history[-1].global_test_loss,
            'conflict_ratio': float(np.mean([r.conflict_ratio for r in history])),
            'rounds_to_target': float(reached) if reached is not None else math.nan,
        })
    columns = ['strategy', 'runs', 'acc_mean', 'acc_std', 'loss_mean', 'conflict_ratio_mean', 'rounds_to_target']
    if not rows:
        return pd.DataFrame(columns=columns)

    df = pd.DataFrame(rows)
    order = [s.name for s in config.strategies if s.name in set(df['strategy'])]
    grouped = df.groupby('strategy', sort=False)
    summary = pd.DataFrame({
        'runs': grouped['seed'].count(),
        'acc_mean': grouped['final_acc'].mean(),
        'acc_std': grouped['final_acc'].std(ddof=1).fillna(0.0),
        'loss_mean': grouped['final_loss'].mean(),
        'conflict_ratio_mean': grouped['conflict_ratio'].mean(),
        'rounds_to_target': grouped['rounds_to_target'].mean(),
    }).reindex(order)
    summary.index.name = 'strategy'
    return summary.reset_index()[columns]


def format_summary(summary: pd.DataFrame) -> str:
    """Human-readable comparison table"""
    if summary.empty:
        return "No completed runs."
    table = pd.DataFrame({
        'strategy': summary['strategy'],
        'runs': summary['runs'],
        'final test acc': [
            "n/a" if math.isnan(m) else f"{m:.4f} ± {s:.4f}"
            for m, s in zip(summary['acc_mean'], summary['acc_std'])
        ],
        'final test loss': [f"{v:.4f}" for v in summary['loss_mean']],
        'conflict ratio': [f"{v:.4f}" for v in summary['conflict_ratio_mean']],
    })
    if summary['rounds_to_target'].notna().any():
        table['rounds to target'] = ["-" if math.isnan(v) else f"{v:.1f}" for v in summary['rounds_to_target']]
    return table.to_string(index=False)


def run_experiment(config: ExperimentConfig) -> ExperimentOutcome:
    """Execute every (strategy, seed) cell; a failing cell is logged and skipped"""
    outcome = ExperimentOutcome(exit_status=EXIT_OK)
    cells = [(strategy, seed) for strategy in config.strategies for seed in config.seeds]
    logging.info(f"Starting experiment: {len(config.strategies)} strategy(ies) x {len(config.seeds)} seed(s)")

    for strategy, seed in cells:
        try:
            outcome.histories[(strategy.name, seed)] = run_cell(config, strategy, seed)
        except (SimulationError, OSError) as e:
            logging.error(f"Cell {strategy.name}/seed {seed} failed: {e}")
            logging.debug(traceback.format_exc())
            outcome.failures.append((strategy.name, seed, str(e)))

    written = _write_failures(config, outcome.failures)
    outcome.summary = summarize(config, outcome.histories)
    written = _write_summary(config, outcome.summary) and written

    if len(outcome.failures) == len(cells) or not written:
        outcome.exit_status = EXIT_ALL_FAILED
    logging.info(f"Experiment finished: {len(outcome.histories)} cell(s) completed, {len(outcome.failures)} failed")
    return outcome


def run_conflict_probe(config: ExperimentConfig) -> ExperimentOutcome:
    """Train the first strategy for every seed and write a similarity snapshot each round"""
    outcome = ExperimentOutcome(exit_status=EXIT_OK)
    strategy = config.strategy
    for seed in config.seeds:
        try:
            outcome.histories[(strategy.name, seed)] = run_cell(
                config, strategy, seed, write_metrics=False, snapshot_every=1,
            )
        except (SimulationError, OSError) as e:
            logging.error(f"Conflict probe {strategy.name}/seed {seed} failed: {e}")
            outcome.failures.append((strategy.name, seed, str(e)))
    written = _write_failures(config, outcome.failures)
    if len(outcome.failures) == len(config.seeds) or not written:
        outcome.exit_status = EXIT_ALL_FAILED
    return outcome
