"""
Gradient Harmonization
Recovers per-client gradients from uploaded models, measures pairwise conflicts and
projects each conflicting gradient onto the orthogonal plane of the other client's
frozen gradient before the models are rebuilt for aggregation.
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, List, Optional, Sequence, Tuple
import numpy as np
from .exceptions import ContractError
from . import paramvec as pv
from ..utils.seeding import make_rng, STREAM_HARMONIZE

ProjectionObserver = Callable[[int, int, np.ndarray, np.ndarray], None]


def _freeze(vectors: Sequence[np.ndarray]) -> Tuple[np.ndarray, ...]:
    frozen = []
    for vec in vectors:
        snapshot = np.array(vec, dtype=np.float64, copy=True)
        snapshot.setflags(write=False)
        frozen.append(snapshot)
    return tuple(frozen)


@dataclass(eq=False)
class GradientSet:
    """
    Recovered gradients for the sampled clients.

    ``frozen`` is captured once, at recovery, and is read-only; every projection
    target comes from it. ``client_params`` keeps the uploaded models so clients
    whose gradient was never projected are rebuilt bit-exactly.
    """
    client_ids: List[int]
    gradients: List[np.ndarray]
    frozen: Tuple[np.ndarray, ...]
    eta: float
    client_params: List[np.ndarray] = field(default_factory=list)
    projected: List[bool] = field(default_factory=list)

    def __post_init__(self):
        if len(self.client_ids) != len(self.gradients) or len(self.frozen) != len(self.gradients):
            raise ContractError("client_ids, gradients and frozen copies must have equal counts")
        lengths = {g.shape[0] for g in self.gradients}
        if len(lengths) > 1:
            raise ContractError(f"gradients have mismatched lengths {sorted(lengths)}")
        if not self.projected:
            self.projected = [False] * len(self.gradients)

    @property
    def size(self) -> int:
        return len(self.gradients)


@dataclass
class ConflictReport:
    """Pre-harmonization similarity statistics for one round"""
    client_ids: List[int]
    pair_similarities: np.ndarray
    conflict_pairs: List[Tuple[int, int, float]]
    conflict_ratio: float
    min_similarity: float
    projections_applied: int = 0

    @property
    def num_pairs(self) -> int:
        n = len(self.client_ids)
        return n * (n - 1) // 2

    def sorted_pairs(self) -> List[Tuple[int, int, float]]:
        """All unordered client pairs with their similarity, ascending by similarity"""
        pairs = [
            (self.client_ids[a], self.client_ids[b], float(self.pair_similarities[a, b]))
            for a, b in combinations(range(len(self.client_ids)), 2)
        ]
        return sorted(pairs, key=lambda item: (item[2], item[0], item[1]))


def recover_gradients(global_w: np.ndarray, client_params: Sequence[np.ndarray], eta: float,
                      client_ids: Optional[Sequence[int]] = None) -> GradientSet:
    """g_k = (w_k - w) / eta for every client, with the frozen copy taken immediately"""
    if not eta > 0:
        raise ContractError(f"recovery learning rate must be positive, got {eta}")
    ids = list(client_ids) if client_ids is not None else list(range(len(client_params)))
    if len(ids) != len(client_params):
        raise ContractError("client_ids and client_params must have equal counts")
    params = [pv.as_param_vector(w_k) for w_k in client_params]
    gradients = [pv.scale(1.0 / eta, pv.sub(w_k, global_w)) for w_k in params]
    return GradientSet(
        client_ids=ids,
        gradients=gradients,
        frozen=_freeze(gradients),
        eta=float(eta),
        client_params=params,
    )


def measure_conflicts(gs: GradientSet) -> ConflictReport:
    """Cosine-similarity matrix and conflict statistics over all client pairs"""
    n = gs.size
    similarities = np.eye(n)
    if n < 2:
        return ConflictReport(list(gs.client_ids), similarities, [], 0.0, 0.0)

    norms = [pv.norm(g) for g in gs.frozen]
    conflicts: List[Tuple[int, int, float]] = []
    for a, b in combinations(range(n), 2):
        product = pv.dot(gs.frozen[a], gs.frozen[b])
        if norms[a] > 0 and norms[b] > 0:
            similarity = min(1.0, max(-1.0, product / (norms[a] * norms[b])))
        else:
            similarity = 0.0
        similarities[a, b] = similarities[b, a] = similarity
        if product < 0:
            conflicts.append((gs.client_ids[a], gs.client_ids[b], product))
    for a in range(n):
        if norms[a] == 0:
            similarities[a, a] = 0.0

    upper = similarities[np.triu_indices(n, k=1)]
    ratio = len(conflicts) / (n * (n - 1) / 2)
    return ConflictReport(list(gs.client_ids), similarities, conflicts, float(ratio), float(upper.min()))


def harmonize(gs: GradientSet, order_seed: int, round_index: int = 0,
              observer: Optional[ProjectionObserver] = None) -> Tuple[GradientSet, ConflictReport]:
    """
    Project conflicting gradients onto each other's orthogonal planes.

    Clients are visited in client-id order; for client k the others are visited
    in a permutation drawn from (order_seed, round_index, k). Whenever the
    current g_k has a negative dot with the frozen g_j (and g_j is non-zero),
    g_k is replaced by its projection. Updates accumulate on g_k while every
    test and target uses the frozen copy.
    """
    report = measure_conflicts(gs)
    positions = sorted(range(gs.size), key=lambda p: gs.client_ids[p])
    frozen_norm_sq = [pv.dot(f, f) for f in gs.frozen]
    new_gradients = [g.copy() for g in gs.gradients]
    projected = list(gs.projected)
    applied = 0

    for k in positions:
        client_k = gs.client_ids[k]
        others = [p for p in positions if p != k]
        rng = make_rng(order_seed, STREAM_HARMONIZE, round_index, client_k)
        g_k = new_gradients[k]
        for j in (others[i] for i in rng.permutation(len(others))):
            target = gs.frozen[j]
            if frozen_norm_sq[j] == 0.0:
                continue
            if pv.dot(g_k, target) < 0:
                if observer is not None:
                    observer(client_k, gs.client_ids[j], g_k, target)
                g_k = pv.project_out(g_k, target)
                projected[k] = True
                applied += 1
        new_gradients[k] = g_k

    report.projections_applied = applied
    if applied:
        logging.debug(f"Harmonization applied {applied} projection(s) over {report.num_pairs} pairs")

    harmonized = GradientSet(
        client_ids=list(gs.client_ids),
        gradients=new_gradients,
        frozen=gs.frozen,
        eta=gs.eta,
        client_params=gs.client_params,
        projected=projected,
    )
    return harmonized, report


def rebuild_models(gs: GradientSet, global_w: np.ndarray) -> List[np.ndarray]:
    """w_k = w + eta * g_k; untouched clients return their uploaded model unchanged"""
    rebuilt = []
    for k, g_k in enumerate(gs.gradients):
        if not gs.projected[k] and k < len(gs.client_params):
            rebuilt.append(gs.client_params[k].copy())
        else:
            rebuilt.append(pv.axpy(gs.eta, g_k, global_w))
    return rebuilt
