"""
Federated Server
Runs the communication-round loop: client sampling, local training, optional
gradient harmonization, aggregation and evaluation on the held-out split.
"""

import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Any
import numpy as np
from ..core.exceptions import ContractError, DivergenceError
from ..core.harmonizer import harmonize, measure_conflicts, rebuild_models, recover_gradients
from ..core.models import ModelSpec, build_model, init_params
from ..utils.config import ExperimentConfig, StrategyConfig, sample_size
from ..utils.seeding import make_rng, STREAM_SAMPLING
from .aggregation import build_aggregator
from .datagen import (
    Partition, SyntheticDataset, build_partitioner, generate_antipodal_pair,
    generate_gaussian_mixture, split_holdout,
)
from .metrics import MetricsRecorder, RoundRecord
from .trainer import ClientResult, LocalConfig, client_update


@dataclass(eq=False)
class GlobalState:
    """Server state between rounds"""
    seed: int
    global_w: np.ndarray
    round_index: int = 0
    history: List[RoundRecord] = field(default_factory=list)


def sample_clients(num_clients: int, client_fraction: float, round_index: int, seed: int) -> List[int]:
    """Uniform sample without replacement of max(1, round_half_up(C*K)) ids, sorted"""
    if not 0.0 < client_fraction <= 1.0:
        raise ContractError(f"client_fraction must lie in (0, 1], got {client_fraction}")
    m = sample_size(num_clients, client_fraction)
    rng = make_rng(seed, STREAM_SAMPLING, round_index)
    chosen = rng.choice(num_clients, size=m, replace=False)
    return sorted(int(c) for c in chosen)


def build_datasets(config: ExperimentConfig, seed: int):
    """Generate the synthetic data, split off the test set and partition the rest"""
    data_cfg = config.data
    data_seed = data_cfg.seed if data_cfg.seed is not None else seed
    if data_cfg.kind == 'antipodal_pair':
        full = generate_antipodal_pair(data_cfg.per_class, data_cfg.dim, data_cfg.separation, data_seed,
                                       noise_scale=data_cfg.noise_scale)
    else:
        full = generate_gaussian_mixture(data_cfg.num_classes, data_cfg.per_class, data_cfg.dim,
                                         data_cfg.separation, data_seed, noise_scale=data_cfg.noise_scale)
    train, test = split_holdout(full, data_cfg.test_fraction, data_seed)
    partitioner = build_partitioner(config.partition.scheme, config.partition.alpha)
    partition = partitioner.partition(train, config.partition.num_clients, seed)
    partition.validate(train.num_samples)
    return train, test, partition


class FederatedServer:
    """Simulated server for one (strategy, seed) cell"""

    def __init__(self, spec: ModelSpec, train: SyntheticDataset, test: SyntheticDataset, partition: Partition,
                 local: LocalConfig, strategy: StrategyConfig, seed: int,
                 recorder: Optional[MetricsRecorder] = None, max_workers: int = 1,
                 initial_params: Optional[np.ndarray] = None):
        if test.num_samples == 0:
            raise ContractError("held-out test split is empty")
        if strategy.harmonize and sample_size(partition.num_clients, strategy.client_fraction) < 2:
            raise ContractError("harmonization needs at least 2 sampled clients per round")
        if not local.learning_rate > 0:
            raise ContractError("gradient recovery needs a positive learning rate")
        self.spec = spec
        self.model = build_model(spec)
        self.train = train
        self.test = test
        self.partition = partition
        self.local = local
        self.strategy = strategy
        self.aggregator = build_aggregator(strategy.aggregator)
        self.recorder = recorder if recorder is not None else MetricsRecorder()
        self.max_workers = max_workers
        start_w = initial_params.copy() if initial_params is not None else init_params(spec, seed)
        self.state = GlobalState(seed=seed, global_w=start_w)
        self._test_batch = test.batch()

    @classmethod
    def from_config(cls, config: ExperimentConfig, strategy: StrategyConfig, seed: int,
                    recorder: Optional[MetricsRecorder] = None) -> "FederatedServer":
        train, test, partition = build_datasets(config, seed)
        logging.info(
            f"[{strategy.name}/seed {seed}] {partition.num_clients} clients, sizes "
            f"{partition.client_sizes().min()}..{partition.client_sizes().max()}, "
            f"label entropy {partition.mean_label_entropy(train):.3f}"
        )
        return cls(config.model, train, test, partition, strategy.local_config(config.local), strategy, seed,
                   recorder=recorder, max_workers=config.execution.max_workers)

    @property
    def history(self) -> List[RoundRecord]:
        return self.state.history

    def _train_one(self, client_id: int, round_index: int) -> ClientResult:
        return client_update(
            self.spec, self.state.global_w, self.partition.assignments[client_id], self.train,
            self.local, self.state.seed, round_index=round_index, client_id=client_id,
        )

    def _train_clients(self, sampled: List[int], round_index: int) -> List[ClientResult]:
        """Local updates for the sampled clients, returned in client-id order"""
        if self.max_workers > 1 and len(sampled) > 1:
            with ThreadPoolExecutor(max_workers=self.max_workers) as pool:
                futures = [pool.submit(self._train_one, cid, round_index) for cid in sampled]
                return [f.result() for f in futures]
        return [self._train_one(cid, round_index) for cid in sampled]

    def evaluate(self, w: np.ndarray) -> Dict[str, float]:
        """Loss and accuracy of a global model on the held-out split"""
        loss, _ = self.model.loss_and_grad(w, self._test_batch)
        if self.model.is_classifier:
            predictions = np.argmax(self.model.predict_logits(w, self._test_batch.features), axis=1)
            acc = float(np.mean(predictions == self._test_batch.labels))
        else:
            acc = math.nan
        return {'loss': float(loss), 'accuracy': acc}

    def run_round(self) -> RoundRecord:
        """
        One round of the algorithm against the current state.

        Conflicts are measured every round; with harmonization on the recovered
        gradients are projected and the client models rebuilt before aggregation.
        Aggregation weights always use the original n_k.
        """
        t = self.state.round_index
        global_w = self.state.global_w
        eta = self.local.learning_rate
        started = time.perf_counter()

        sampled = sample_clients(self.partition.num_clients, self.strategy.client_fraction, t, self.state.seed)
        try:
            results = self._train_clients(sampled, t)
        except DivergenceError as e:
            logging.error(f"[{self.strategy.name}/seed {self.state.seed}] round {t + 1}: {e}")
            raise e.with_round(t + 1) from e

        gradients = recover_gradients(global_w, [r.final_params for r in results], eta, sampled)
        if self.strategy.harmonize:
            harmonized, report = harmonize(gradients, self.state.seed, t)
            rebuilt = rebuild_models(harmonized, global_w)
            results = [r.with_params(w_k) for r, w_k in zip(results, rebuilt)]
        else:
            report = measure_conflicts(gradients)

        new_w = self.aggregator.aggregate(results, global_w, eta)
        if not np.all(np.isfinite(new_w)):
            raise ContractError(f"global model became non-finite in round {t + 1}")

        metrics = self.evaluate(new_w)
        elapsed_ms = (time.perf_counter() - started) * 1000.0
        record = RoundRecord(
            round=t + 1,
            global_test_loss=metrics['loss'],
            global_test_accuracy=metrics['accuracy'],
            conflict_ratio=report.conflict_ratio,
            min_similarity=report.min_similarity,
            projections_applied=report.projections_applied,
            wall_time_ms=elapsed_ms,
            sampled_clients=sampled,
            sorted_similarities=report.sorted_pairs(),
        )

        self.state.global_w = new_w
        self.state.round_index = t + 1
        self.state.history.append(record)
        self.recorder.record(record, report, final=(t + 1 == self.strategy.rounds))

        logging.info(
            f"[{self.strategy.name}/seed {self.state.seed}] round {t + 1}/{self.strategy.rounds}: "
            f"loss={metrics['loss']:.4f} acc={metrics['accuracy']:.4f} "
            f"conflicts={report.conflict_ratio:.3f} min_sim={report.min_similarity:.3f} "
            f"projections={report.projections_applied}"
        )
        return record

    def run(self) -> List[RoundRecord]:
        """Run all configured rounds"""
        logging.info(f"Starting {self.strategy.name} (seed {self.state.seed}) for {self.strategy.rounds} rounds")
        while self.state.round_index < self.strategy.rounds:
            self.run_round()
        logging.info(f"{self.strategy.name} (seed {self.state.seed}) completed")
        return self.state.history

    def get_status(self) -> Dict[str, Any]:
        """Current server status"""
        return {
            'strategy': self.strategy.name,
            'seed': self.state.seed,
            'completed_rounds': self.state.round_index,
            'param_count': int(self.state.global_w.shape[0]),
            'recorder': self.recorder.summary(),
        }
