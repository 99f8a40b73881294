"""
Client Update
Local minibatch SGD with optional momentum and an optional FedProx proximal term
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List
import numpy as np
from ..core.exceptions import ContractError, DivergenceError
from ..core.models import ModelSpec, build_model
from ..utils.seeding import make_rng, STREAM_LOCAL_SHUFFLE
from .datagen import SyntheticDataset


@dataclass(frozen=True)
class LocalConfig:
    """Local training hyperparameters"""
    epochs: int = 5
    batch_size: int = 64
    learning_rate: float = 0.01
    momentum: float = 0.9
    prox_mu: float = 0.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate >= 0 or not math.isfinite(self.learning_rate):
            raise ContractError(f"learning_rate must be a finite non-negative number, got {self.learning_rate}")
        if not 0.0 <= self.momentum < 1.0:
            raise ContractError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.prox_mu < 0:
            raise ContractError(f"prox_mu must be >= 0, got {self.prox_mu}")

    def to_dict(self) -> dict:
        return {
            'epochs': self.epochs,
            'batch_size': self.batch_size,
            'learning_rate': self.learning_rate,
            'momentum': self.momentum,
            'prox_mu': self.prox_mu,
        }


@dataclass(eq=False)
class ClientResult:
    """Outcome of one client's local training"""
    client_id: int
    final_params: np.ndarray
    n_k: int
    tau_k: int
    local_loss_trace: List[float] = field(default_factory=list)

    def with_params(self, params: np.ndarray) -> "ClientResult":
        """Same client, replaced parameters (used after harmonization)"""
        return ClientResult(self.client_id, params, self.n_k, self.tau_k, list(self.local_loss_trace))


def local_steps(n_k: int, cfg: LocalConfig) -> int:
    """tau_k = E * ceil(n_k / B); the last partial minibatch counts"""
    return cfg.epochs * int(math.ceil(n_k / cfg.batch_size))


def client_update(spec: ModelSpec, global_w: np.ndarray, indices: np.ndarray, dataset: SyntheticDataset,
                  cfg: LocalConfig, seed: int, round_index: int = 0, client_id: int = 0) -> ClientResult:
    """
    Train a copy of the global model on one client's samples.

    Minibatch order is reshuffled every epoch from the stream
    (seed, round_index, client_id). The momentum buffer starts at zero on
    every call; with prox_mu > 0 the gradient gains mu * (w - global_w).
    """
    indices = np.asarray(indices, dtype=np.int64)
    n_k = int(indices.shape[0])
    if n_k < 1:
        raise ContractError(f"client {client_id} has no samples")

    model = build_model(spec)
    if global_w.shape != (model.param_count,):
        raise ContractError(f"global model has shape {global_w.shape}, expected ({model.param_count},)")

    rng = make_rng(seed, STREAM_LOCAL_SHUFFLE, round_index, client_id)
    w = global_w.copy()
    velocity = np.zeros_like(w)
    eta = cfg.learning_rate
    step = 0
    loss_trace: List[float] = []

    for epoch in range(cfg.epochs):
        order = indices[rng.permutation(n_k)]
        epoch_losses = []
        for start in range(0, n_k, cfg.batch_size):
            batch = dataset.batch(order[start:start + cfg.batch_size])
            loss, grad = model.loss_and_grad(w, batch)
            if not math.isfinite(loss) or not np.all(np.isfinite(grad)):
                raise DivergenceError(client_id, step, loss)
            if cfg.prox_mu > 0:
                grad = grad + cfg.prox_mu * (w - global_w)
            if cfg.momentum > 0:
                velocity = cfg.momentum * velocity - eta * grad
                w = w + velocity
            else:
                w = w - eta * grad
            epoch_losses.append(loss)
            step += 1
        loss_trace.append(float(np.mean(epoch_losses)))
        logging.debug(f"Client {client_id} epoch {epoch}: mean loss {loss_trace[-1]:.6f}")

    if not np.all(np.isfinite(w)):
        raise DivergenceError(client_id, step, float('nan'))

    return ClientResult(client_id, w, n_k, step, loss_trace)
