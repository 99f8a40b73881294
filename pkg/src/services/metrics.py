"""
Round Metrics
Per-round records, CSV time series, sorted pairwise-similarity snapshots and the
per-run directory layout.
"""

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Any, Tuple
import pandas as pd
from ..core.exceptions import ContractError
from ..core.harmonizer import ConflictReport

CSV_COLUMNS = ['round', 'test_loss', 'test_acc', 'conflict_ratio', 'min_similarity', 'projections', 'wall_ms']


@dataclass
class RoundRecord:
    """Metrics for one completed communication round"""
    round: int
    global_test_loss: float
    global_test_accuracy: float
    conflict_ratio: float
    min_similarity: float
    projections_applied: int
    wall_time_ms: float
    sampled_clients: List[int] = field(default_factory=list)
    sorted_similarities: Optional[List[Tuple[int, int, float]]] = None

    def __post_init__(self):
        if not 0.0 <= self.conflict_ratio <= 1.0:
            raise ContractError(f"conflict_ratio {self.conflict_ratio} outside [0, 1]")
        if not -1.0 <= self.min_similarity <= 1.0:
            raise ContractError(f"min_similarity {self.min_similarity} outside [-1, 1]")

    def to_row(self, include_wall_time: bool = True) -> Dict[str, Any]:
        return {
            'round': int(self.round),
            'test_loss': float(self.global_test_loss),
            'test_acc': float(self.global_test_accuracy),
            'conflict_ratio': float(self.conflict_ratio),
            'min_similarity': float(self.min_similarity),
            'projections': int(self.projections_applied),
            'wall_ms': float(self.wall_time_ms) if include_wall_time else 0.0,
        }


def _ensure_parent(path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)


def export_csv(history: List[RoundRecord], path: str, include_wall_time: bool = True) -> None:
    """Write the round time series with a fixed header, 6 significant digits and LF endings"""
    if not history:
        raise ContractError("cannot export an empty round history")
    rounds = [r.round for r in history]
    if any(b <= a for a, b in zip(rounds, rounds[1:])):
        raise ContractError("round indices must be strictly increasing")

    df = pd.DataFrame([r.to_row(include_wall_time) for r in history], columns=CSV_COLUMNS)
    target = Path(path)
    try:
        _ensure_parent(target)
        df.to_csv(target, index=False, float_format='%.6g', na_rep='nan', lineterminator='\n')
    except OSError as e:
        logging.error(f"Failed to write metrics CSV {target}: {e}")
        raise OSError(f"cannot write metrics CSV to '{target}': {e}") from e


def load_csv(path: str) -> pd.DataFrame:
    """Parse a metrics CSV back into a DataFrame"""
    return pd.read_csv(path)


def similarity_snapshot(report: ConflictReport, round_index: int) -> Dict[str, Any]:
    pairs = report.sorted_pairs()
    if not pairs:
        raise ContractError("similarity snapshot needs a report with at least one client pair")
    return {
        'round': int(round_index),
        'client_ids': [int(c) for c in report.client_ids],
        'conflict_ratio': report.conflict_ratio,
        'min_similarity': report.min_similarity,
        'projections_applied': report.projections_applied,
        'pairs': [{'i': int(i), 'j': int(j), 'similarity': s} for i, j, s in pairs],
    }


def export_similarity_snapshot(report: ConflictReport, round_index: int, path: str) -> None:
    """JSON list of client pairs sorted ascending by gradient cosine similarity"""
    document = similarity_snapshot(report, round_index)
    target = Path(path)
    try:
        _ensure_parent(target)
        target.write_text(json.dumps(document, indent=2) + "\n", encoding="utf-8")
    except OSError as e:
        logging.error(f"Failed to write similarity snapshot {target}: {e}")
        raise OSError(f"cannot write similarity snapshot to '{target}': {e}") from e


def rounds_to_target(history: List[RoundRecord], target_accuracy: float) -> Optional[int]:
    """First round whose test accuracy reaches the target, or None"""
    for record in history:
        if not math.isnan(record.global_test_accuracy) and record.global_test_accuracy >= target_accuracy:
            return record.round
    return None


class MetricsRecorder:
    """Accumulates round records and owns one run directory"""

    def __init__(self, run_dir: Optional[str] = None, include_wall_time: bool = False,
                 snapshot_every: int = 0):
        self.run_dir = Path(run_dir) if run_dir is not None else None
        self.include_wall_time = include_wall_time
        self.snapshot_every = snapshot_every
        self.history: List[RoundRecord] = []
        self.snapshots_written = 0

    def record(self, record: RoundRecord, report: Optional[ConflictReport] = None, final: bool = False) -> None:
        if self.history and record.round <= self.history[-1].round:
            raise ContractError(f"round {record.round} recorded after round {self.history[-1].round}")
        self.history.append(record)
        if report is not None and self.run_dir is not None and self._wants_snapshot(record.round, final):
            if report.num_pairs >= 1:
                export_similarity_snapshot(report, record.round, str(self.snapshot_path(record.round)))
                self.snapshots_written += 1

    def _wants_snapshot(self, round_index: int, final: bool) -> bool:
        if self.snapshot_every > 0:
            return round_index % self.snapshot_every == 0 or final
        return final

    def snapshot_path(self, round_index: int) -> Path:
        return self.run_dir / f"sim_round{round_index}.json"

    def write_config(self, config: Dict[str, Any]) -> None:
        if self.run_dir is None:
            return
        target = self.run_dir / "config.json"
        try:
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(json.dumps(config, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        except OSError as e:
            logging.error(f"Failed to write config echo {target}: {e}")
            raise OSError(f"cannot write config echo to '{target}': {e}") from e

    def write_metrics(self) -> None:
        if self.run_dir is None:
            return
        export_csv(self.history, str(self.run_dir / "metrics.csv"), include_wall_time=self.include_wall_time)
        logging.info(f"Wrote {len(self.history)} round(s) to {self.run_dir / 'metrics.csv'}")

    def summary(self) -> Dict[str, Any]:
        if not self.history:
            return {}
        last = self.history[-1]
        return {
            'rounds': len(self.history),
            'final_test_accuracy': last.global_test_accuracy,
            'final_test_loss': last.global_test_loss,
            'mean_conflict_ratio': float(sum(r.conflict_ratio for r in self.history) / len(self.history)),
            'min_similarity': float(min(r.min_similarity for r in self.history)),
            'total_projections': int(sum(r.projections_applied for r in self.history)),
        }
