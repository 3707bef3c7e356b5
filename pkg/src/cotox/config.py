"""Pipeline configuration: a TOML file with strict key checking.

Secrets never live in the file; the provider section names an
environment variable and the key is read from the process environment at
gateway construction time.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .gsea import GseaParams
from .ingest import TermKind
from .prompts import PromptStrategy, StructureFormat


@dataclass(frozen=True)
class PathsConfig:
    labels: str = ""
    ctd_pathways: str = ""
    ctd_go_bp: str = ""
    ctd_go_mf: str = ""
    ctd_go_cc: str = ""
    gmt: str = ""
    rank_files: Mapping[str, str] = field(default_factory=dict, hash=False)
    context_store: str = "store/context_store.json"
    cache_dir: str = "cache"
    fixtures_dir: str = ""
    resolver_fixtures_dir: str = ""
    template_dir: str = ""
    output_dir: str = "runs"


@dataclass(frozen=True)
class ProviderConfig:
    kind: str = "replay"
    base_url: str = ""
    model_id: str = ""
    api_key_env: str = "COTOX_API_KEY"
    max_in_flight: int = 2
    requests_per_minute: int = 0
    retries: int = 3
    timeout_seconds: float = 120.0
    max_output_tokens: int = 4096


@dataclass(frozen=True)
class RunConfig:
    strategy: str = "cotox"
    format: str = "iupac"
    seed: int = 0
    temperature: float = 0.0


@dataclass(frozen=True)
class FilterConfig:
    mode: str = "keyword"
    lexicon: str = ""
    model_id: str = ""


@dataclass(frozen=True)
class ResolverConfig:
    base_url: str = ""
    not_found_ttl_days: float = 30.0
    max_in_flight: int = 4


@dataclass(frozen=True)
class GseaConfig:
    weight_exponent: float = 1.0
    permutations: int = 1000
    seed: int = 0
    min_set_size: int = 3
    max_set_size: int = 500
    p_max: float = 0.01
    q_max: float = 0.25
    kind_map: Mapping[str, str] = field(default_factory=dict, hash=False)

    def params(self) -> GseaParams:
        return GseaParams(
            weight_exponent=self.weight_exponent,
            permutations=self.permutations,
            seed=self.seed,
            min_set_size=self.min_set_size,
            max_set_size=self.max_set_size,
        )

    def term_kind_map(self) -> dict[str, TermKind] | None:
        if not self.kind_map:
            return None
        try:
            return {prefix: TermKind(token) for prefix, token in self.kind_map.items()}
        except ValueError as exc:
            raise ConfigError(f"gsea.kind_map: {exc}") from None


@dataclass(frozen=True)
class EvalConfig:
    k: int = 5
    seed: int = 0


@dataclass(frozen=True)
class PipelineConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    run: RunConfig = field(default_factory=RunConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    resolver: ResolverConfig = field(default_factory=ResolverConfig)
    gsea: GseaConfig = field(default_factory=GseaConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    config_dir: str = "."

    def resolve_path(self, value: str) -> Path:
        """Paths in the file are taken relative to the file's directory."""
        p = Path(value)
        return p if p.is_absolute() else Path(self.config_dir) / p

    def strategy(self) -> PromptStrategy:
        try:
            return PromptStrategy(self.run.strategy)
        except ValueError:
            raise ConfigError(f"run.strategy: unknown strategy {self.run.strategy!r}") from None

    def structure_format(self) -> StructureFormat:
        try:
            return StructureFormat(self.run.format)
        except ValueError:
            raise ConfigError(f"run.format: unknown format {self.run.format!r}") from None


_FREE_TABLES = {("paths", "rank_files"), ("gsea", "kind_map")}


def _build_section(name: str, cls, raw: Mapping[str, Any]):
    known = {f.name: f for f in fields(cls)}
    values: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in known:
            raise ConfigError(f"unknown key {name}.{key}")
        if (name, key) in _FREE_TABLES:
            if not isinstance(value, dict) or any(
                not isinstance(v, str) for v in value.values()
            ):
                raise ConfigError(f"{name}.{key} must be a table of strings")
            values[key] = dict(value)
            continue
        default = getattr(cls, key, None)
        if isinstance(value, (dict, bool)):
            raise ConfigError(f"{name}.{key}: unexpected value type")
        if isinstance(default, float) and isinstance(value, int):
            value = float(value)
        if default is not None and not isinstance(value, type(default)):
            raise ConfigError(
                f"{name}.{key}: expected {type(default).__name__},"
                f" got {type(value).__name__}"
            )
        values[key] = value
    return cls(**values)


_SECTIONS = {
    "paths": PathsConfig,
    "provider": ProviderConfig,
    "run": RunConfig,
    "filter": FilterConfig,
    "resolver": ResolverConfig,
    "gsea": GseaConfig,
    "eval": EvalConfig,
}


def load_config(path: str | Path) -> PipelineConfig:
    """Parse and validate the TOML config; unknown keys are rejected."""
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    sections: dict[str, Any] = {}
    for key, value in raw.items():
        if key not in _SECTIONS:
            raise ConfigError(f"unknown section [{key}]")
        if not isinstance(value, dict):
            raise ConfigError(f"[{key}] must be a table")
        sections[key] = _build_section(key, _SECTIONS[key], value)
    config = PipelineConfig(config_dir=str(path.parent), **sections)
    _validate(config)
    return config


def _validate(config: PipelineConfig) -> None:
    config.strategy()
    config.structure_format()
    if config.provider.kind not in ("replay", "live"):
        raise ConfigError(
            f"provider.kind must be 'replay' or 'live', got {config.provider.kind!r}"
        )
    if config.filter.mode not in ("keyword", "llm"):
        raise ConfigError(
            f"filter.mode must be 'keyword' or 'llm', got {config.filter.mode!r}"
        )
    if config.provider.kind == "live" and not config.provider.base_url:
        raise ConfigError("provider.base_url is required when provider.kind = 'live'")
    if config.provider.kind == "replay" and not config.paths.fixtures_dir:
        raise ConfigError(
            "paths.fixtures_dir is required when provider.kind = 'replay'"
        )
    if not 0.0 <= config.run.temperature <= 1.0:
        raise ConfigError("run.temperature must be within [0, 1]")
    if config.eval.k < 2:
        raise ConfigError("eval.k must be >= 2")
    try:
        config.gsea.params()
    except ValueError as exc:
        raise ConfigError(f"gsea: {exc}") from None
    config.gsea.term_kind_map()


def require_path(config: PipelineConfig, section_key: str, value: str) -> Path:
    """Resolve a configured path, failing with the config field name."""
    if not value:
        raise ConfigError(f"{section_key} is not set")
    resolved = config.resolve_path(value)
    if not resolved.exists():
        raise ConfigError(f"{section_key}: no such path {resolved}")
    return resolved


def with_overrides(
    config: PipelineConfig,
    strategy: str | None = None,
    structure_format: str | None = None,
    output_dir: str | None = None,
) -> PipelineConfig:
    """Apply command-line overrides on top of the file values."""
    run = config.run
    if strategy is not None:
        run = replace(run, strategy=strategy)
    if structure_format is not None:
        run = replace(run, format=structure_format)
    paths = config.paths
    if output_dir is not None:
        paths = replace(paths, output_dir=output_dir)
    updated = replace(config, run=run, paths=paths)
    _validate(updated)
    return updated
