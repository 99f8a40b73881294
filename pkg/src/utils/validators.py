"""
Configuration validation utilities for FedGH Simulator
Rule tables per config section; every error is reported with its field path
"""

import math
import re
import logging
from typing import Dict, List, Optional, Any, Tuple

INFINITY_MARKERS = ("inf", "infinity", "∞")
STRATEGY_NAME_PATTERN = re.compile(r'^[A-Za-z0-9_.+-]+$')

_MISSING = object()


class ConfigValidator:
    """Rule-driven validation and default resolution for experiment documents"""

    def __init__(self):
        self.validation_rules = self._initialize_validation_rules()
        self.top_level_keys = {
            'description', 'model', 'data', 'partition', 'local',
            'strategy', 'strategies', 'seeds', 'output', 'execution',
        }

    def _initialize_validation_rules(self) -> Dict[str, Dict[str, Dict[str, Any]]]:
        """Initialize validation rules for every config section"""
        return {
            'model': {
                'kind': {'required': True, 'type': 'str', 'allowed_values': ['logistic', 'mlp', 'quadratic']},
                'input_dim': {'type': 'int', 'min_value': 1, 'default': None},
                'num_classes': {'type': 'int', 'min_value': 2, 'default': None},
                'hidden_dim': {'type': 'int', 'min_value': 1, 'default': 32},
                'quadratic_diag': {'type': 'list', 'default': None, 'validator': self._validate_curvatures},
                'quadratic_target': {'type': 'list', 'default': None, 'validator': self._validate_finite_list},
            },
            'data': {
                'kind': {'type': 'str', 'default': 'gaussian_mixture',
                         'allowed_values': ['gaussian_mixture', 'antipodal_pair']},
                'num_classes': {'type': 'int', 'min_value': 2, 'default': 10},
                'per_class': {'type': 'int', 'min_value': 1, 'default': 100},
                'dim': {'type': 'int', 'min_value': 1, 'default': 20},
                'separation': {'type': 'float', 'min_value': 0.0, 'exclusive_min': True, 'default': 3.0},
                'noise_scale': {'type': 'float', 'min_value': 0.0, 'default': 1.0},
                'test_fraction': {'type': 'float', 'min_value': 0.0, 'max_value': 0.9, 'default': 0.1},
                'seed': {'type': 'int', 'min_value': 0, 'default': None},
            },
            'partition': {
                'scheme': {'required': True, 'type': 'str', 'allowed_values': ['dirichlet', 'class_shard', 'iid']},
                'num_clients': {'required': True, 'type': 'int', 'min_value': 1},
                'alpha': {'type': 'alpha', 'default': None},
            },
            'local': {
                'epochs': {'type': 'int', 'min_value': 1, 'default': 5},
                'batch_size': {'type': 'int', 'min_value': 1, 'default': 64},
                'learning_rate': {'type': 'float', 'min_value': 0.0, 'exclusive_min': True, 'default': 0.01},
                'momentum': {'type': 'float', 'min_value': 0.0, 'max_value': 1.0, 'exclusive_max': True,
                             'default': 0.9},
                'prox_mu': {'type': 'float', 'min_value': 0.0, 'default': 0.0},
            },
            'strategy': {
                'name': {'type': 'str', 'default': None, 'validator': self._validate_strategy_name},
                'aggregator': {'type': 'str', 'default': 'fedavg', 'allowed_values': ['fedavg', 'fednova']},
                'harmonize': {'type': 'bool', 'default': False},
                'client_fraction': {'type': 'float', 'min_value': 0.0, 'exclusive_min': True,
                                    'max_value': 1.0, 'default': 1.0},
                'rounds': {'required': True, 'type': 'int', 'min_value': 1},
                'prox_mu': {'type': 'float', 'min_value': 0.0, 'default': None},
            },
            'output': {
                'dir': {'type': 'str', 'default': 'runs'},
                'snapshot_every': {'type': 'int', 'min_value': 0, 'default': 0},
                'record_wall_time': {'type': 'bool', 'default': False},
                'target_accuracy': {'type': 'float', 'min_value': 0.0, 'max_value': 1.0, 'default': None},
            },
            'execution': {
                'max_workers': {'type': 'int', 'min_value': 1, 'default': 1},
            },
        }

    def validate_document(self, document: Any) -> Dict[str, Any]:
        """Validate a parsed config document and resolve defaults"""
        results = {
            'is_valid': True,
            'errors': [],
            'resolved': {},
        }
        errors: List[Tuple[str, str]] = results['errors']

        if not isinstance(document, dict):
            errors.append(('<document>', 'top level must be an object'))
            results['is_valid'] = False
            return results

        for key in document:
            if key not in self.top_level_keys:
                errors.append((key, 'unknown key'))

        resolved = results['resolved']
        resolved['description'] = document.get('description', '')
        if not isinstance(resolved['description'], str):
            errors.append(('description', 'must be a string'))

        for section in ('model', 'partition'):
            if section not in document:
                errors.append((section, 'missing required section'))
        for section in ('model', 'data', 'partition', 'local', 'output', 'execution'):
            resolved[section] = self._validate_section(section, document.get(section, {}), section, errors)

        resolved['strategies'] = self._validate_strategies(document, errors)
        resolved['seeds'] = self._validate_seeds(document, errors)

        results['is_valid'] = len(errors) == 0
        if errors:
            logging.debug(f"Config validation found {len(errors)} error(s): {errors}")
        return results

    def _validate_section(self, section: str, values: Any, path: str,
                          errors: List[Tuple[str, str]]) -> Dict[str, Any]:
        """Validate one section against its rule table"""
        rules = self.validation_rules[section]
        resolved: Dict[str, Any] = {}
        if not isinstance(values, dict):
            errors.append((path, 'must be an object'))
            return resolved

        for key in values:
            if key not in rules:
                errors.append((f"{path}.{key}", 'unknown key'))

        for field_name, rule in rules.items():
            field_path = f"{path}.{field_name}"
            raw = values.get(field_name, _MISSING)
            if raw is _MISSING or raw is None:
                if rule.get('required', False):
                    errors.append((field_path, 'missing required field'))
                resolved[field_name] = rule.get('default')
                continue
            value, error = self._coerce(raw, rule['type'])
            if error:
                errors.append((field_path, error))
                continue
            range_error = self._check_range(value, rule)
            if range_error:
                errors.append((field_path, range_error))
                continue
            validator = rule.get('validator')
            if validator:
                for message in validator(value):
                    errors.append((field_path, message))
            resolved[field_name] = value
        return resolved

    def _validate_strategies(self, document: Dict[str, Any], errors: List[Tuple[str, str]]) -> List[Dict[str, Any]]:
        if 'strategy' in document and 'strategies' in document:
            errors.append(('strategies', "give either 'strategy' or 'strategies', not both"))
            return []
        if 'strategies' in document:
            entries = document['strategies']
            if not isinstance(entries, list) or not entries:
                errors.append(('strategies', 'must be a non-empty list'))
                return []
            paths = [f"strategies[{i}]" for i in range(len(entries))]
        elif 'strategy' in document:
            entries = [document['strategy']]
            paths = ['strategy']
        else:
            errors.append(('strategy', 'missing required section'))
            return []

        strategies = []
        seen: Dict[str, str] = {}
        for entry, path in zip(entries, paths):
            resolved = self._validate_section('strategy', entry, path, errors)
            if not resolved:
                continue
            if resolved.get('name') is None and resolved.get('aggregator'):
                resolved['name'] = self._derive_strategy_name(resolved)
            name = resolved.get('name')
            if name in seen:
                errors.append((f"{path}.name", f"duplicate strategy name '{name}' (also used by {seen[name]})"))
            elif name is not None:
                seen[name] = path
            strategies.append(resolved)
        return strategies

    def _derive_strategy_name(self, strategy: Dict[str, Any]) -> str:
        """fedavg, fedprox, fednova_prox, ... with a _gh suffix when harmonizing"""
        base = strategy['aggregator']
        if (strategy.get('prox_mu') or 0.0) > 0:
            base = 'fedprox' if base == 'fedavg' else f"{base}_prox"
        return base + ('_gh' if strategy.get('harmonize') else '')

    def _validate_seeds(self, document: Dict[str, Any], errors: List[Tuple[str, str]]) -> List[int]:
        if 'seeds' not in document:
            errors.append(('seeds', 'missing required field'))
            return []
        seeds = document['seeds']
        if not isinstance(seeds, list) or not seeds:
            errors.append(('seeds', 'must be a non-empty list of integers'))
            return []
        resolved = []
        for i, seed in enumerate(seeds):
            if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
                errors.append((f"seeds[{i}]", 'must be a non-negative integer'))
            else:
                resolved.append(seed)
        if len(set(resolved)) != len(resolved):
            errors.append(('seeds', 'seeds must be distinct'))
        return resolved

    def _coerce(self, value: Any, type_name: str) -> Tuple[Any, Optional[str]]:
        """Check a raw JSON value against a rule type"""
        if type_name == 'str':
            return (value, None) if isinstance(value, str) else (None, 'must be a string')
        if type_name == 'bool':
            return (value, None) if isinstance(value, bool) else (None, 'must be true or false')
        if type_name == 'int':
            if isinstance(value, bool) or not isinstance(value, int):
                return None, 'must be an integer'
            return value, None
        if type_name == 'float':
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return None, 'must be a number'
            if not math.isfinite(value):
                return None, 'must be finite'
            return float(value), None
        if type_name == 'list':
            return (value, None) if isinstance(value, list) else (None, 'must be a list')
        if type_name == 'alpha':
            if isinstance(value, str) and value.strip().lower() in INFINITY_MARKERS:
                return math.inf, None
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                return None, "must be a positive number or \"inf\""
            if not value > 0:
                return None, 'must be > 0'
            return float(value), None
        return None, f"unsupported rule type '{type_name}'"

    def _check_range(self, value: Any, rule: Dict[str, Any]) -> Optional[str]:
        allowed = rule.get('allowed_values')
        if allowed is not None and value not in allowed:
            return f"'{value}' is not one of {allowed}"
        if isinstance(value, (int, float)) and not isinstance(value, bool):
            low = rule.get('min_value')
            high = rule.get('max_value')
            if low is not None:
                if rule.get('exclusive_min') and not value > low:
                    return f"must be > {low}"
                if value < low:
                    return f"must be >= {low}"
            if high is not None:
                if rule.get('exclusive_max') and not value < high:
                    return f"must be < {high}"
                if value > high:
                    return f"must be <= {high}"
        return None

    def _validate_curvatures(self, values: List[Any]) -> List[str]:
        """Quadratic curvature entries must be numbers >= 1e-6"""
        errors = self._validate_finite_list(values)
        if not errors and any(v < 1e-6 for v in values):
            errors.append('entries must be >= 1e-06')
        return errors

    def _validate_finite_list(self, values: List[Any]) -> List[str]:
        if not values:
            return ['must be a non-empty list']
        for v in values:
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                return ['entries must be finite numbers']
        return []

    def _validate_strategy_name(self, name: str) -> List[str]:
        if not STRATEGY_NAME_PATTERN.match(name):
            return [f"'{name}' may only contain letters, digits and _ . + -"]
        return []

    def get_validation_summary(self, results: Dict[str, Any]) -> str:
        """Generate human-readable validation summary"""
        summary = [f"Config validation: {'✅ VALID' if results['is_valid'] else '❌ INVALID'}"]
        for path, message in results['errors'][:10]:
            summary.append(f"  • {path}: {message}")
        if len(results['errors']) > 10:
            summary.append(f"  ... and {len(results['errors']) - 10} more errors")
        return "\n".join(summary)
