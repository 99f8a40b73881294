"""
Abstract interfaces and base classes for FedGH Simulator
Defines contracts for models, partitioners and aggregators
"""

from abc import ABC, abstractmethod
from typing import List, Tuple, TYPE_CHECKING
import numpy as np

if TYPE_CHECKING:
    from .models import Batch, ModelSpec
    from ..services.datagen import Partition, SyntheticDataset
    from ..services.trainer import ClientResult


class ObjectiveModel(ABC):
    """Abstract base class for differentiable objectives with exact gradients"""

    def __init__(self, spec: "ModelSpec"):
        self.spec = spec

    @property
    @abstractmethod
    def param_count(self) -> int:
        """Length of the flat parameter vector"""
        pass

    @abstractmethod
    def init_params(self, seed: int) -> np.ndarray:
        """Deterministic initial parameters"""
        pass

    @abstractmethod
    def loss_and_grad(self, w: np.ndarray, batch: "Batch") -> Tuple[float, np.ndarray]:
        """Loss on the batch and its exact gradient"""
        pass

    @abstractmethod
    def predict_logits(self, w: np.ndarray, features: np.ndarray) -> np.ndarray:
        """Class scores for each row of features"""
        pass

    @property
    def is_classifier(self) -> bool:
        return True


class Partitioner(ABC):
    """Abstract base class for splitting a dataset across clients"""

    @abstractmethod
    def partition(self, ds: "SyntheticDataset", num_clients: int, seed: int) -> "Partition":
        """Assign sample indices to clients"""
        pass


class Aggregator(ABC):
    """Abstract base class for server aggregation rules"""

    name: str = "aggregator"

    @abstractmethod
    def aggregate(self, results: List["ClientResult"], global_w: np.ndarray, learning_rate: float) -> np.ndarray:
        """Combine client results into the next global model"""
        pass
