"""
Experiment configuration
Typed, validated view of a JSON experiment document with all defaults resolved
"""

import dataclasses
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Any, Tuple
from ..core.exceptions import ConfigError, ContractError
from ..core.models import ModelSpec
from ..services.trainer import LocalConfig
from .validators import ConfigValidator


def sample_size(num_clients: int, client_fraction: float) -> int:
    """max(1, round_half_up(C * K)); the product is rounded first so 0.285 * 100 counts as 28.5"""
    return max(1, int(math.floor(round(client_fraction * num_clients, 9) + 0.5)))


@dataclass(frozen=True)
class DataConfig:
    kind: str = 'gaussian_mixture'
    num_classes: int = 10
    per_class: int = 100
    dim: int = 20
    separation: float = 3.0
    noise_scale: float = 1.0
    test_fraction: float = 0.1
    seed: Optional[int] = None

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class PartitionConfig:
    scheme: str
    num_clients: int
    alpha: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        alpha = self.alpha
        if alpha is not None and math.isinf(alpha):
            alpha = "inf"
        return {'scheme': self.scheme, 'num_clients': self.num_clients, 'alpha': alpha}


@dataclass(frozen=True)
class StrategyConfig:
    """Server-side strategy: aggregation rule, FedGH on/off, participation and horizon"""
    name: str
    aggregator: str = 'fedavg'
    harmonize: bool = False
    client_fraction: float = 1.0
    rounds: int = 1
    prox_mu: Optional[float] = None

    def __post_init__(self):
        if self.aggregator not in ('fedavg', 'fednova'):
            raise ContractError(f"unknown aggregator '{self.aggregator}'")
        if not 0.0 < self.client_fraction <= 1.0:
            raise ContractError(f"client_fraction must lie in (0, 1], got {self.client_fraction}")
        if self.rounds < 1:
            raise ContractError(f"rounds must be >= 1, got {self.rounds}")
        if self.prox_mu is not None and not self.prox_mu >= 0:
            raise ContractError(f"prox_mu must be >= 0, got {self.prox_mu}")

    def local_config(self, shared: LocalConfig) -> LocalConfig:
        """Local hyperparameters for this strategy; prox_mu overrides the shared value when set"""
        if self.prox_mu is None:
            return shared
        return dataclasses.replace(shared, prox_mu=self.prox_mu)

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class OutputConfig:
    dir: str = 'runs'
    snapshot_every: int = 0
    record_wall_time: bool = False
    target_accuracy: Optional[float] = None

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ExecutionConfig:
    max_workers: int = 1

    def to_dict(self) -> Dict[str, Any]:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class ExperimentConfig:
    """Full declarative description of a (strategy x seed) sweep"""
    model: ModelSpec
    data: DataConfig
    partition: PartitionConfig
    local: LocalConfig
    strategies: Tuple[StrategyConfig, ...]
    seeds: Tuple[int, ...]
    output: OutputConfig = OutputConfig()
    execution: ExecutionConfig = ExecutionConfig()
    description: str = ''

    @property
    def strategy(self) -> StrategyConfig:
        return self.strategies[0]

    def with_seeds(self, seeds: List[int]) -> "ExperimentConfig":
        return dataclasses.replace(self, seeds=tuple(seeds))

    def with_output_dir(self, directory: str) -> "ExperimentConfig":
        return dataclasses.replace(self, output=dataclasses.replace(self.output, dir=directory))

    def to_dict(self) -> Dict[str, Any]:
        return {
            'description': self.description,
            'model': self.model.to_dict(),
            'data': self.data.to_dict(),
            'partition': self.partition.to_dict(),
            'local': self.local.to_dict(),
            'strategies': [s.to_dict() for s in self.strategies],
            'seeds': list(self.seeds),
            'output': self.output.to_dict(),
            'execution': self.execution.to_dict(),
        }


def _build_model_spec(model: Dict[str, Any], data: DataConfig) -> ModelSpec:
    data_classes = 2 if data.kind == 'antipodal_pair' else data.num_classes
    input_dim = model['input_dim'] if model['input_dim'] is not None else data.dim
    num_classes = model['num_classes'] if model['num_classes'] is not None else data_classes
    if input_dim != data.dim:
        raise ConfigError('model.input_dim', f"{input_dim} does not match data.dim={data.dim}")
    if num_classes != data_classes:
        raise ConfigError('model.num_classes', f"{num_classes} does not match the data's {data_classes} classes")

    diag = target = None
    if model['kind'] == 'quadratic':
        diag = tuple(float(v) for v in (model['quadratic_diag'] or [1.0] * data.dim))
        target = tuple(float(v) for v in (model['quadratic_target'] or [1.0] * data.dim))
        if len(diag) != data.dim:
            raise ConfigError('model.quadratic_diag', f"needs {data.dim} entries (data.dim), got {len(diag)}")
        if len(target) != data.dim:
            raise ConfigError('model.quadratic_target', f"needs {data.dim} entries (data.dim), got {len(target)}")
    try:
        return ModelSpec(
            kind=model['kind'],
            input_dim=input_dim,
            num_classes=num_classes,
            hidden_dim=model['hidden_dim'] if model['kind'] == 'mlp' else None,
            quadratic_diag=diag,
            quadratic_target=target,
        )
    except ContractError as e:
        raise ConfigError('model', str(e)) from e


def _check_partition(partition: PartitionConfig, data: DataConfig) -> None:
    if partition.scheme == 'dirichlet' and partition.alpha is None:
        raise ConfigError('partition.alpha', 'required for the dirichlet scheme')
    num_classes = 2 if data.kind == 'antipodal_pair' else data.num_classes
    if partition.scheme == 'class_shard' and num_classes % partition.num_clients != 0:
        raise ConfigError(
            'partition.num_clients',
            f"class_shard needs num_classes ({num_classes}) divisible by num_clients ({partition.num_clients})",
        )
    train_per_class = data.per_class - int(math.floor(data.test_fraction * data.per_class))
    if train_per_class * num_classes < partition.num_clients:
        raise ConfigError(
            'partition.num_clients',
            f"{train_per_class * num_classes} training samples cannot cover {partition.num_clients} clients",
        )
    if int(math.floor(data.test_fraction * data.per_class)) < 1:
        raise ConfigError('data.test_fraction', 'held-out split would be empty; raise test_fraction or per_class')


def parse_config(text: str) -> ExperimentConfig:
    """Parse and fully validate a JSON experiment document"""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError('<document>', f"invalid JSON: {e}") from e

    validator = ConfigValidator()
    results = validator.validate_document(document)
    if not results['is_valid']:
        path, message = results['errors'][0]
        extra = len(results['errors']) - 1
        raise ConfigError(path, message + (f" (and {extra} more error(s))" if extra else ""))

    resolved = results['resolved']
    data = DataConfig(**resolved['data'])
    partition = PartitionConfig(**resolved['partition'])
    _check_partition(partition, data)
    model = _build_model_spec(resolved['model'], data)

    try:
        local = LocalConfig(**resolved['local'])
    except ContractError as e:
        raise ConfigError('local', str(e)) from e

    strategies = []
    for i, entry in enumerate(resolved['strategies']):
        path = f"strategies[{i}]" if len(resolved['strategies']) > 1 or 'strategies' in document else 'strategy'
        try:
            strategy = StrategyConfig(**entry)
        except ContractError as e:
            raise ConfigError(path, str(e)) from e
        if strategy.harmonize and sample_size(partition.num_clients, strategy.client_fraction) < 2:
            raise ConfigError(
                f"{path}.client_fraction",
                'harmonization needs at least 2 sampled clients per round',
            )
        strategies.append(strategy)

    config = ExperimentConfig(
        model=model,
        data=data,
        partition=partition,
        local=local,
        strategies=tuple(strategies),
        seeds=tuple(resolved['seeds']),
        output=OutputConfig(**resolved['output']),
        execution=ExecutionConfig(**resolved['execution']),
        description=resolved['description'],
    )
    logging.debug(f"Parsed config with {len(config.strategies)} strategy(ies) and {len(config.seeds)} seed(s)")
    return config


def load_config(path: str) -> ExperimentConfig:
    """Read and parse a config file"""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigError('<file>', f"cannot read '{path}': {e}") from e
    return parse_config(text)
