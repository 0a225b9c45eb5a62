"""Configuration dataclasses and the file < env < flags merge."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any


class ConfigError(ValueError):
    pass


@dataclass
class EmbeddingProviderConfig:
    provider: str = "deterministic"  # "deterministic" | "remote"
    endpoint_url: str = ""
    model_name: str = "BAAI/bge-small-en"
    dim: int = 256
    batch_size: int = 64
    timeout_ms: int = 30_000
    cache_path: str | None = None
    max_attempts: int = 3
    backoff_s: float = 0.5
    # bge-style instruction prefix for task requests; empty embeds raw text
    query_prefix: str = ""

    def validate(self) -> None:
        if self.provider not in ("deterministic", "remote"):
            raise ConfigError(f"unknown embedding provider {self.provider!r}")
        if self.dim <= 0:
            raise ConfigError("embedding dim must be > 0")
        if self.provider == "deterministic" and self.dim < 8:
            raise ConfigError("deterministic embedder needs dim >= 8")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.provider == "remote" and not self.endpoint_url:
            raise ConfigError("remote provider requires endpoint_url")


@dataclass
class SubunitConfig:
    min_tokens: int = 3
    max_tokens: int = 32
    max_constraint_tokens: int = 24
    # None means the bundled lexicon files
    imperative_verbs: list[str] | None = None
    requirement_keywords: list[str] | None = None


@dataclass
class GraphConfig:
    repr_top_r: int = 8
    label_terms: int = 5
    n_representatives: int = 3
    desc_truncate_chars: int = 160
    kmeans_seed: int = 42
    kmeans_n_init: int = 10
    kmeans_max_iter: int = 300
    kmeans_tol: float = 1e-4


@dataclass
class RetrievalConfig:
    top_k: int = 5
    n_subunits: int = 30
    n_communities: int = 2
    max_highlights: int = 3
    alpha: float = 0.5
    beta: float = 0.3
    gamma: float = 0.2
    lam: float = 0.25
    pool_floor: int = 10
    pool_per_k: int = 4
    llm_pool_size: int = 32


@dataclass
class CompileConfig:
    budget: int = 384
    parent_threshold: float = 0.35
    subunit_threshold: float = 0.12
    global_rescue_cap: int = 3
    per_parent_cap: int = 1
    redundancy_jaccard: float = 0.6
    affiliate_weights: tuple[float, float, float, float, float] = (0.15, 0.45, 0.10, 0.15, 0.15)
    affiliation_threshold: float = 0.30
    exclusivity_gap: float = 0.10
    exclusivity_bonus: float = 0.05
    inactive_penalty: float = 0.10
    token_mode: str = "tokens"  # "tokens" | "chars4"
    task_digest_tokens: int = 96
    skill_desc_tokens: int = 40


@dataclass
class Config:
    embedding: EmbeddingProviderConfig = field(default_factory=EmbeddingProviderConfig)
    subunits: SubunitConfig = field(default_factory=SubunitConfig)
    graph: GraphConfig = field(default_factory=GraphConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    compile: CompileConfig = field(default_factory=CompileConfig)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def index_hash(self) -> str:
        """Hash of the settings that shape the index (not retrieval/compile knobs)."""
        d = self.to_dict()
        emb = {k: v for k, v in d["embedding"].items() if k in ("provider", "model_name", "dim", "query_prefix")}
        payload = json.dumps({"embedding": emb, "subunits": d["subunits"], "graph": d["graph"]}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Config":
        cfg = merge(cls(), data)
        cfg.embedding.validate()
        return cfg


def merge(cfg: Config, overrides: dict[str, Any]) -> Config:
    """Return a copy of ``cfg`` with a nested ``{section: {key: value}}`` dict applied."""
    sections = {}
    for f in dataclasses.fields(cfg):
        section = getattr(cfg, f.name)
        patch = overrides.get(f.name) or {}
        if not isinstance(patch, dict):
            raise ConfigError(f"config section {f.name!r} must be an object")
        known = {sf.name for sf in dataclasses.fields(section)}
        unknown = set(patch) - known
        if unknown:
            raise ConfigError(f"unknown keys in {f.name!r}: {sorted(unknown)}")
        if "affiliate_weights" in patch:
            patch = dict(patch, affiliate_weights=tuple(patch["affiliate_weights"]))
        sections[f.name] = dataclasses.replace(section, **patch)
    extra = set(overrides) - set(sections)
    if extra:
        raise ConfigError(f"unknown config sections: {sorted(extra)}")
    return Config(**sections)


ENV_OVERRIDES = {
    "SKILLFORGE_EMBED_ENDPOINT": ("embedding", "endpoint_url"),
    "SKILLFORGE_EMBED_PROVIDER": ("embedding", "provider"),
}


def resolve(config_path: str | Path | None = None, flags: dict[str, dict[str, Any]] | None = None,
            env: dict[str, str] | None = None) -> Config:
    """Merge defaults, the JSON config file, environment, then flags (highest wins)."""
    cfg = Config()
    if config_path:
        try:
            data = json.loads(Path(config_path).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {config_path}: {exc}") from exc
        cfg = merge(cfg, data)
    env = os.environ if env is None else env
    env_patch: dict[str, dict[str, Any]] = {}
    for var, (section, key) in ENV_OVERRIDES.items():
        if env.get(var):
            env_patch.setdefault(section, {})[key] = env[var]
    cfg = merge(cfg, env_patch)
    if flags:
        cfg = merge(cfg, {s: {k: v for k, v in kv.items() if v is not None} for s, kv in flags.items()})
    cfg.embedding.validate()
    return cfg
