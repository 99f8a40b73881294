"""
Differentiable objectives with hand-derived gradients
Multinomial logistic regression, a one-hidden-layer tanh MLP and an analytic
quadratic used as a convergence oracle.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple
import numpy as np
from scipy.special import logsumexp, softmax
from .exceptions import ContractError
from .interfaces import ObjectiveModel
from .paramvec import ParamLayout
from ..utils.seeding import make_rng, STREAM_INIT

MODEL_KINDS = ("logistic", "mlp", "quadratic")
MIN_CURVATURE = 1e-6


@dataclass(frozen=True)
class ModelSpec:
    """Architecture description; param_count is a pure function of these fields"""
    kind: str
    input_dim: int
    num_classes: int = 2
    hidden_dim: Optional[int] = None
    quadratic_diag: Optional[Tuple[float, ...]] = None
    quadratic_target: Optional[Tuple[float, ...]] = None

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ContractError(f"unknown model kind '{self.kind}', expected one of {MODEL_KINDS}")
        if self.input_dim < 1:
            raise ContractError(f"input_dim must be positive, got {self.input_dim}")
        if self.kind in ("logistic", "mlp") and self.num_classes < 2:
            raise ContractError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.kind == "mlp" and (self.hidden_dim is None or self.hidden_dim < 1):
            raise ContractError(f"mlp requires a positive hidden_dim, got {self.hidden_dim}")
        if self.kind == "quadratic":
            if self.quadratic_diag is None or self.quadratic_target is None:
                raise ContractError("quadratic model requires quadratic_diag and quadratic_target")
            if len(self.quadratic_diag) != self.input_dim or len(self.quadratic_target) != self.input_dim:
                raise ContractError(
                    f"quadratic_diag/quadratic_target must have length input_dim={self.input_dim}"
                )
            if min(self.quadratic_diag) < MIN_CURVATURE:
                raise ContractError(f"quadratic_diag entries must be >= {MIN_CURVATURE}")
            if not np.all(np.isfinite(self.quadratic_target)):
                raise ContractError("quadratic_target must be finite")

    @property
    def param_count(self) -> int:
        return build_model(self).param_count

    def to_dict(self) -> dict:
        return {
            'kind': self.kind,
            'input_dim': self.input_dim,
            'num_classes': self.num_classes,
            'hidden_dim': self.hidden_dim,
            'quadratic_diag': list(self.quadratic_diag) if self.quadratic_diag is not None else None,
            'quadratic_target': list(self.quadratic_target) if self.quadratic_target is not None else None,
        }


@dataclass(frozen=True, eq=False)
class Batch:
    """Feature rows with integer class labels"""
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2 or self.features.shape[0] == 0:
            raise ContractError(f"batch features must be a non-empty matrix, got shape {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise ContractError(
                f"batch has {self.features.shape[0]} rows but labels of shape {self.labels.shape}"
            )
        if not np.all(np.isfinite(self.features)):
            raise ContractError("batch features contain non-finite values")

    @property
    def size(self) -> int:
        return int(self.features.shape[0])


def _glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _cross_entropy(logits: np.ndarray, labels: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy and its gradient with respect to the logits"""
    rows = np.arange(logits.shape[0])
    log_norm = logsumexp(logits, axis=1)
    loss = float(np.mean(log_norm - logits[rows, labels]))
    dlogits = softmax(logits, axis=1)
    dlogits[rows, labels] -= 1.0
    dlogits /= logits.shape[0]
    return loss, dlogits


class LogisticModel(ObjectiveModel):
    """Multinomial logistic regression; layout W[input_dim x num_classes] then b[num_classes]"""

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        self.layout = ParamLayout.from_shapes([
            ('W', (spec.input_dim, spec.num_classes)),
            ('b', (spec.num_classes,)),
        ])

    @property
    def param_count(self) -> int:
        return self.layout.size

    def init_params(self, seed: int) -> np.ndarray:
        rng = make_rng(seed, STREAM_INIT)
        return self.layout.flatten({
            'W': _glorot_uniform(rng, self.spec.input_dim, self.spec.num_classes),
            'b': np.zeros(self.spec.num_classes),
        })

    def predict_logits(self, w: np.ndarray, features: np.ndarray) -> np.ndarray:
        p = self.layout.unflatten(w)
        return features @ p['W'] + p['b']

    def loss_and_grad(self, w: np.ndarray, batch: Batch) -> Tuple[float, np.ndarray]:
        p = self.layout.unflatten(w)
        logits = batch.features @ p['W'] + p['b']
        loss, dlogits = _cross_entropy(logits, batch.labels)
        grad = self.layout.flatten({
            'W': batch.features.T @ dlogits,
            'b': dlogits.sum(axis=0),
        })
        return loss, grad


class MLPModel(ObjectiveModel):
    """One tanh hidden layer; layout W1, b1, W2, b2"""

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        self.layout = ParamLayout.from_shapes([
            ('W1', (spec.input_dim, spec.hidden_dim)),
            ('b1', (spec.hidden_dim,)),
            ('W2', (spec.hidden_dim, spec.num_classes)),
            ('b2', (spec.num_classes,)),
        ])

    @property
    def param_count(self) -> int:
        return self.layout.size

    def init_params(self, seed: int) -> np.ndarray:
        rng = make_rng(seed, STREAM_INIT)
        return self.layout.flatten({
            'W1': _glorot_uniform(rng, self.spec.input_dim, self.spec.hidden_dim),
            'b1': np.zeros(self.spec.hidden_dim),
            'W2': _glorot_uniform(rng, self.spec.hidden_dim, self.spec.num_classes),
            'b2': np.zeros(self.spec.num_classes),
        })

    def _forward(self, p, features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        hidden = np.tanh(features @ p['W1'] + p['b1'])
        return hidden, hidden @ p['W2'] + p['b2']

    def predict_logits(self, w: np.ndarray, features: np.ndarray) -> np.ndarray:
        _, logits = self._forward(self.layout.unflatten(w), features)
        return logits

    def loss_and_grad(self, w: np.ndarray, batch: Batch) -> Tuple[float, np.ndarray]:
        p = self.layout.unflatten(w)
        hidden, logits = self._forward(p, batch.features)
        loss, dlogits = _cross_entropy(logits, batch.labels)
        dpre = (dlogits @ p['W2'].T) * (1.0 - hidden ** 2)
        grad = self.layout.flatten({
            'W1': batch.features.T @ dpre,
            'b1': dpre.sum(axis=0),
            'W2': hidden.T @ dlogits,
            'b2': dlogits.sum(axis=0),
        })
        return loss, grad


class QuadraticModel(ObjectiveModel):
    """
    Separable quadratic 0.5 * sum_i A_i (w_i - w*_i - x_i)^2, averaged over batch rows.

    Sample features shift the target, so clients holding different data have
    different minimizers; an all-zero batch gives exactly 0.5 * sum A_i (w_i - w*_i)^2.
    """

    def __init__(self, spec: ModelSpec):
        super().__init__(spec)
        self.diag = np.asarray(spec.quadratic_diag, dtype=np.float64)
        self.target = np.asarray(spec.quadratic_target, dtype=np.float64)

    @property
    def param_count(self) -> int:
        return int(self.diag.shape[0])

    @property
    def is_classifier(self) -> bool:
        return False

    def init_params(self, seed: int) -> np.ndarray:
        return np.zeros(self.param_count)

    def predict_logits(self, w: np.ndarray, features: np.ndarray) -> np.ndarray:
        raise ContractError("quadratic objective has no class predictions")

    def loss_and_grad(self, w: np.ndarray, batch: Optional[Batch] = None) -> Tuple[float, np.ndarray]:
        if batch is None:
            residual = (w - self.target)[np.newaxis, :]
        else:
            residual = w - self.target - batch.features
        loss = float(0.5 * np.mean(np.sum(self.diag * residual ** 2, axis=1)))
        grad = self.diag * residual.mean(axis=0)
        return loss, grad


_MODEL_CLASSES = {
    'logistic': LogisticModel,
    'mlp': MLPModel,
    'quadratic': QuadraticModel,
}


def build_model(spec: ModelSpec) -> ObjectiveModel:
    """Instantiate the objective for a spec"""
    return _MODEL_CLASSES[spec.kind](spec)


def _check_inputs(model: ObjectiveModel, w: np.ndarray, batch: Optional[Batch]) -> None:
    if w.ndim != 1 or w.shape[0] != model.param_count:
        raise ContractError(f"parameter vector has shape {w.shape}, model expects ({model.param_count},)")
    if batch is not None and batch.features.shape[1] != model.spec.input_dim:
        raise ContractError(
            f"batch has {batch.features.shape[1]} features, model expects {model.spec.input_dim}"
        )
    if batch is not None and model.is_classifier:
        labels = batch.labels
        if labels.min() < 0 or labels.max() >= model.spec.num_classes:
            raise ContractError(f"labels must lie in [0, {model.spec.num_classes})")


def init_params(spec: ModelSpec, seed: int) -> np.ndarray:
    """Deterministic initial parameters for (spec, seed)"""
    params = build_model(spec).init_params(seed)
    logging.debug(f"Initialized {spec.kind} parameters: {params.shape[0]} entries (seed={seed})")
    return params


def loss_and_grad(spec: ModelSpec, w: np.ndarray, batch: Optional[Batch]) -> Tuple[float, np.ndarray]:
    """Loss and exact gradient of the ModelSpec objective on a batch"""
    model = build_model(spec)
    _check_inputs(model, w, batch)
    if batch is None and model.is_classifier:
        raise ContractError("classification objectives require a batch")
    return model.loss_and_grad(w, batch)


def accuracy(spec: ModelSpec, w: np.ndarray, data: Batch) -> float:
    """Fraction of rows whose argmax class (ties to the lowest index) equals the label"""
    model = build_model(spec)
    if not model.is_classifier:
        raise ContractError("accuracy is undefined for the quadratic objective")
    _check_inputs(model, w, data)
    predictions = np.argmax(model.predict_logits(w, data.features), axis=1)
    return float(np.mean(predictions == data.labels))
