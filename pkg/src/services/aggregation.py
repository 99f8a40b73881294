"""
Server Aggregation Rules
FedAvg sample-weighted averaging and FedNova step-normalized averaging
"""

import logging
from typing import List
import numpy as np
from ..core.exceptions import ContractError
from ..core.interfaces import Aggregator
from ..core import paramvec as pv
from .trainer import ClientResult

AGGREGATORS = ("fedavg", "fednova")


def _sample_weights(results: List[ClientResult]) -> np.ndarray:
    if not results:
        raise ContractError("aggregation needs at least one client result")
    counts = np.array([r.n_k for r in results], dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ContractError("aggregation needs a positive total sample count")
    return counts / total


def aggregate_fedavg(results: List[ClientResult], global_w: np.ndarray) -> np.ndarray:
    """sum_k (n_k / n) w_k with n summed over the sampled clients only"""
    weights = _sample_weights(results)
    aggregate = np.zeros_like(global_w, dtype=np.float64)
    for weight, result in zip(weights, results):
        aggregate = pv.axpy(float(weight), result.final_params, aggregate)
    return aggregate


def aggregate_fednova(results: List[ClientResult], global_w: np.ndarray, eta: float) -> np.ndarray:
    """
    w + tau_eff * sum_k p_k d_k with d_k = (w_k - w) / tau_k and tau_eff = sum_k p_k tau_k.

    ``eta`` only scales the logged normalized-gradient norm; the update itself
    is expressed in parameter units.
    """
    weights = _sample_weights(results)
    if any(r.tau_k < 1 for r in results):
        raise ContractError("FedNova requires tau_k >= 1 for every client")
    tau_eff = float(sum(float(p) * r.tau_k for p, r in zip(weights, results)))
    direction = np.zeros_like(global_w, dtype=np.float64)
    for weight, result in zip(weights, results):
        normalized = pv.scale(1.0 / result.tau_k, pv.sub(result.final_params, global_w))
        direction = pv.axpy(float(weight), normalized, direction)
    if eta > 0:
        logging.debug(f"FedNova: tau_eff={tau_eff:.3f}, normalized gradient norm={pv.norm(direction) / eta:.6f}")
    return pv.axpy(tau_eff, direction, global_w)


class FedAvgAggregator(Aggregator):
    name = "fedavg"

    def aggregate(self, results: List[ClientResult], global_w: np.ndarray, learning_rate: float) -> np.ndarray:
        return aggregate_fedavg(results, global_w)


class FedNovaAggregator(Aggregator):
    name = "fednova"

    def aggregate(self, results: List[ClientResult], global_w: np.ndarray, learning_rate: float) -> np.ndarray:
        return aggregate_fednova(results, global_w, learning_rate)


def build_aggregator(name: str) -> Aggregator:
    if name == "fedavg":
        return FedAvgAggregator()
    if name == "fednova":
        return FedNovaAggregator()
    raise ContractError(f"unknown aggregator '{name}', expected one of {AGGREGATORS}")
