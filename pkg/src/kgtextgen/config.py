"""Pipeline configuration: defaults, YAML files and command-line overrides."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping, Optional

import yaml

from .decoding import DecodeConfig
from .extraction import DEFAULT_EXCLUDED_RELATIONS, SelectionConfig

SELECTION_STRATEGIES = {"none": "none", "random": "random_subset", "prior": "prior_subset"}


class ConfigError(ValueError):
    pass


@dataclass
class PipelineConfig:
    """Every knob a run can set. Nested YAML sections map onto these flat keys."""

    # paths
    dump: Optional[str] = None
    dataset: Optional[str] = None
    paths: Optional[str] = None
    expansions: Optional[str] = None
    checkpoint: Optional[str] = None
    outputs: Optional[str] = None
    out: Optional[str] = None
    # knowledge
    language: str = "en"
    selection: str = "none"
    random_p: float = 0.5
    prior_threshold: float = 0.9
    pos_constrained: bool = True
    at_least_one_per_concept: bool = True
    excluded_relations: list = field(default_factory=lambda: sorted(DEFAULT_EXCLUDED_RELATIONS))
    k_fallback: int = 5
    expansion_max: Optional[int] = None
    # model and training
    mode: str = "inject"
    d_model: int = 64
    n_layers: int = 2
    n_heads: int = 4
    cs_encoder_hidden: int = 32
    injection_layer_index: int = 1
    mask_lm_prob: float = 0.7
    epochs: int = 30
    batch_size: int = 32
    lr: float = 2e-3
    # decoding
    beam_width: int = 4
    best_n: int = 4
    max_len: int = 20
    length_normalize: bool = False
    # execution
    seed: int = 0
    jobs: int = 1

    def __post_init__(self):
        if self.selection not in SELECTION_STRATEGIES:
            raise ConfigError(f"selection must be one of {sorted(SELECTION_STRATEGIES)}, got {self.selection!r}")
        if self.mode not in ("baseline", "concat", "inject"):
            raise ConfigError(f"mode must be baseline, concat or inject, got {self.mode!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        if self.expansion_max is not None and self.expansion_max < 0:
            raise ConfigError("expansion_max must be >= 0")
        try:
            self.selection_config()
            self.decode_config()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def selection_config(self) -> SelectionConfig:
        return SelectionConfig(
            excluded_relation_types=frozenset(self.excluded_relations),
            pos_constrained=self.pos_constrained,
            strategy=SELECTION_STRATEGIES[self.selection],
            random_p=self.random_p,
            prior_threshold=self.prior_threshold,
            seed=self.seed,
            at_least_one_per_concept=self.at_least_one_per_concept,
        )

    def decode_config(self) -> DecodeConfig:
        return DecodeConfig(self.beam_width, self.best_n, self.max_len, self.length_normalize)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        return config_hash(self.to_dict())


def config_hash(data: Mapping) -> str:
    blob = json.dumps(data, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


_KNOWN = {f.name for f in fields(PipelineConfig)}
_ALIASES = {"strategy": "selection", "max_expansions": "expansion_max"}


def flatten(data: Mapping, prefix: str = "") -> dict[str, Any]:
    """Collapse nested sections; leaf keys must be unique config names."""
    flat: dict[str, Any] = {}
    for key, value in data.items():
        key = _ALIASES.get(str(key).replace("-", "_"), str(key).replace("-", "_"))
        if isinstance(value, Mapping):
            for k, v in flatten(value, f"{prefix}{key}.").items():
                if k in flat:
                    raise ConfigError(f"config key {k!r} set twice")
                flat[k] = v
        elif key not in _KNOWN:
            raise ConfigError(f"unknown config key {prefix}{key!r}")
        else:
            flat[key] = value
    return flat


def load_config_file(path) -> dict[str, Any]:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"config file not found: {path}")
    data = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    if not isinstance(data, Mapping):
        raise ConfigError(f"{path}: top level must be a mapping")
    return flatten(data)


def resolve(config_file: Optional[str], overrides: Mapping[str, Any]) -> PipelineConfig:
    """Defaults, then the file, then explicit flags (``None`` means unset)."""
    values = load_config_file(config_file) if config_file else {}
    values.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
