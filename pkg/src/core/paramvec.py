"""
Flat parameter-vector arithmetic
Every model is handled as one float64 vector in a fixed layout; gradient recovery,
conflict detection and projection are all expressed with the functions below.
"""

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple
import numpy as np
from .exceptions import ContractError

ParamVector = np.ndarray


def as_param_vector(values) -> ParamVector:
    """Build a validated 1-D float64 copy of ``values``"""
    vec = np.array(values, dtype=np.float64).reshape(-1)
    if vec.size == 0:
        raise ContractError("ParamVector must have positive length")
    _require_finite(vec, "input")
    return vec


def zeros_like(a: ParamVector) -> ParamVector:
    return np.zeros_like(a, dtype=np.float64)


def _require_finite(vec: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(vec)):
        raise ContractError(f"ParamVector {what} contains non-finite entries")


def _require_same_length(a: ParamVector, b: ParamVector) -> None:
    if a.ndim != 1 or b.ndim != 1:
        raise ContractError(f"ParamVector operands must be 1-D, got shapes {a.shape} and {b.shape}")
    if a.shape[0] != b.shape[0]:
        raise ContractError(f"ParamVector length mismatch: {a.shape[0]} vs {b.shape[0]}")


def dot(a: ParamVector, b: ParamVector) -> float:
    """Inner product accumulated in index order (sequential double-precision sum)"""
    _require_same_length(a, b)
    products = np.multiply(a, b)
    # cumsum is a strictly sequential left-to-right accumulation
    total = float(np.cumsum(products)[-1]) if products.size else 0.0
    if not np.isfinite(total):
        raise ContractError("dot product is not finite")
    return total


def norm(a: ParamVector) -> float:
    return float(np.sqrt(dot(a, a)))


def cosine_similarity(a: ParamVector, b: ParamVector) -> float:
    """Cosine of the angle between a and b; 0 when either vector has zero norm"""
    _require_same_length(a, b)
    norm_a = norm(a)
    norm_b = norm(b)
    if norm_a == 0.0 or norm_b == 0.0:
        return 0.0
    similarity = dot(a, b) / (norm_a * norm_b)
    return float(min(1.0, max(-1.0, similarity)))


def project_out(g: ParamVector, frozen: ParamVector) -> ParamVector:
    """Remove from g its component along frozen: g - (g.f / |f|^2) f"""
    _require_same_length(g, frozen)
    frozen_sq = dot(frozen, frozen)
    if frozen_sq == 0.0:
        raise ContractError("cannot project onto the orthogonal plane of a zero-norm vector")
    coefficient = dot(g, frozen) / frozen_sq
    result = g - coefficient * frozen
    _require_finite(result, "projection result")
    return result


def axpy(alpha: float, x: ParamVector, y: ParamVector) -> ParamVector:
    """Return y + alpha * x"""
    _require_same_length(x, y)
    result = y + alpha * x
    _require_finite(result, "axpy result")
    return result


def scale(alpha: float, x: ParamVector) -> ParamVector:
    result = alpha * np.asarray(x, dtype=np.float64)
    _require_finite(result, "scale result")
    return result


def add(a: ParamVector, b: ParamVector) -> ParamVector:
    _require_same_length(a, b)
    result = a + b
    _require_finite(result, "add result")
    return result


def sub(a: ParamVector, b: ParamVector) -> ParamVector:
    _require_same_length(a, b)
    result = a - b
    _require_finite(result, "sub result")
    return result


@dataclass(frozen=True)
class ParamLayout:
    """
    Fixed flattening order for a model's parameter blocks.

    Blocks are concatenated in declaration order, each block row-major
    (numpy C order). Models declare weights before biases, layer by layer.
    """
    blocks: Tuple[Tuple[str, Tuple[int, ...]], ...]

    @classmethod
    def from_shapes(cls, shapes: Sequence[Tuple[str, Tuple[int, ...]]]) -> "ParamLayout":
        return cls(tuple((name, tuple(int(s) for s in shape)) for name, shape in shapes))

    @property
    def size(self) -> int:
        return int(sum(int(np.prod(shape)) for _, shape in self.blocks))

    def offsets(self) -> List[Tuple[str, int, int, Tuple[int, ...]]]:
        spans = []
        start = 0
        for name, shape in self.blocks:
            stop = start + int(np.prod(shape))
            spans.append((name, start, stop, shape))
            start = stop
        return spans

    def flatten(self, arrays: Dict[str, np.ndarray]) -> ParamVector:
        pieces = []
        for name, shape in self.blocks:
            block = np.asarray(arrays[name], dtype=np.float64)
            if block.shape != shape:
                raise ContractError(f"block '{name}' has shape {block.shape}, layout expects {shape}")
            pieces.append(block.reshape(-1))
        return np.concatenate(pieces)

    def unflatten(self, vector: ParamVector) -> Dict[str, np.ndarray]:
        if vector.ndim != 1 or vector.shape[0] != self.size:
            raise ContractError(f"vector of shape {vector.shape} does not match layout size {self.size}")
        return {name: vector[start:stop].reshape(shape) for name, start, stop, shape in self.offsets()}
