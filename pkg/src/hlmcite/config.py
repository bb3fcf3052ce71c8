"""Run configuration: declarative INI file with CLI-flag overrides."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .corpus import SOCIAL_SCIENCE_FIELDS

ABLATIONS = ("no-analyzer", "no-guider")


class ConfigError(Exception):
    """Invalid or inconsistent configuration; maps to exit code 2."""


@dataclass(frozen=True)
class PipelineConfig:
    # paths
    corpus: str = ""
    edges: str = ""
    outdir: str = "out"
    vectors_in: str = ""          # precomputed HLMV file for embed --backend file
    cache_dir: str = ""           # defaults to <outdir>/cache
    oneshot_dir: str = ""         # defaults to the bundled assets
    external_scores: str = ""     # optional baseline score JSONL for eval
    # run
    t1: int = 5
    t2: int = 5
    t_q: int = 10000
    r_q: int = 8
    r_q_social: int = 7
    query_count: int = 100
    split_ratio: float = 0.8
    seed: int = 2024
    bootstrap_resamples: int = 1000
    graded_gains: bool = False
    # backends
    embed_backend: str = "mock"   # mock | http | file
    embed_dim: int = 768
    embed_model: str = "text-embedding-3-small"
    chat_backend: str = "mock-identity"  # mock-identity | mock-oracle | http
    chat_model: str = ""
    temperature: float = 0.0
    workers: int = 4
    rate_limit_interval: float = 0.0
    # ablations
    no_analyzer: bool = False
    no_guider: bool = False
    few_shot: bool = False

    def validate(self) -> "PipelineConfig":
        if self.r_q < self.t1:
            raise ConfigError(f"r_q={self.r_q} must be >= t1={self.t1}")
        if self.r_q_social < self.t1:
            raise ConfigError(f"r_q_social={self.r_q_social} must be >= t1={self.t1}")
        if self.t_q < self.t1 + self.t2:
            raise ConfigError(f"t_q={self.t_q} must be >= t1+t2={self.t1 + self.t2}")
        if not (0.0 < self.split_ratio < 1.0):
            raise ConfigError(f"split_ratio={self.split_ratio} must lie in (0, 1)")
        if self.t1 < 1 or self.t2 < 1:
            raise ConfigError("t1 and t2 must be >= 1")
        if self.embed_backend not in ("mock", "http", "file"):
            raise ConfigError(f"unknown embed backend {self.embed_backend!r}")
        if self.chat_backend not in ("mock-identity", "mock-oracle", "http"):
            raise ConfigError(f"unknown chat backend {self.chat_backend!r}")
        if self.embed_backend == "file" and not self.vectors_in:
            raise ConfigError("embed backend 'file' requires vectors_in")
        return self

    def effective_rq(self, field_name: str) -> int:
        return self.r_q_social if field_name in SOCIAL_SCIENCE_FIELDS else self.r_q

    @property
    def out_path(self) -> Path:
        return Path(self.outdir)

    @property
    def cache_path(self) -> Path:
        return Path(self.cache_dir) if self.cache_dir else self.out_path / "cache"

    def snapshot(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


_SECTION_OF = {
    "corpus": "paths", "edges": "paths", "outdir": "paths", "vectors_in": "paths",
    "cache_dir": "paths", "oneshot_dir": "paths", "external_scores": "paths",
    "t1": "run", "t2": "run", "t_q": "run", "r_q": "run", "r_q_social": "run",
    "query_count": "run", "split_ratio": "run", "seed": "run",
    "bootstrap_resamples": "run", "graded_gains": "run",
    "embed_backend": "backends", "embed_dim": "backends", "embed_model": "backends",
    "chat_backend": "backends", "chat_model": "backends", "temperature": "backends",
    "workers": "backends", "rate_limit_interval": "backends",
    "no_analyzer": "ablation", "no_guider": "ablation", "few_shot": "ablation",
}


def load_config(path: str | Path) -> PipelineConfig:
    """Parse the sectioned key/value config file; unknown keys are errors."""
    parser = configparser.ConfigParser()
    read = parser.read(path, encoding="utf-8")
    if not read:
        raise ConfigError(f"cannot read config file {path}")
    values: dict[str, object] = {}
    defaults = PipelineConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            if key not in _SECTION_OF:
                raise ConfigError(f"{path}: unknown config key {key!r} in [{section}]")
            if _SECTION_OF[key] != section:
                raise ConfigError(
                    f"{path}: key {key!r} belongs in [{_SECTION_OF[key]}], found in [{section}]"
                )
            current = getattr(defaults, key)
            try:
                if isinstance(current, bool):
                    values[key] = raw.strip().lower() in ("1", "true", "yes", "on")
                elif isinstance(current, int):
                    values[key] = int(raw)
                elif isinstance(current, float):
                    values[key] = float(raw)
                else:
                    values[key] = raw
            except ValueError as exc:
                raise ConfigError(f"{path}: bad value for {key!r}: {exc}") from exc
    return replace(defaults, **values)  # type: ignore[arg-type]


def apply_overrides(config: PipelineConfig, **overrides: object) -> PipelineConfig:
    """CLI flags win over file values; None means not supplied."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(updates) - {f.name for f in fields(PipelineConfig)}
    if unknown:
        raise ConfigError(f"unknown override(s): {sorted(unknown)}")
    return replace(config, **updates)  # type: ignore[arg-type]


def write_config(config: PipelineConfig, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    for key, section in _SECTION_OF.items():
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, key, str(getattr(config, key)))
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)
