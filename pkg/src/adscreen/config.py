"""Run configuration: a ``key = value`` text file, overridable from the command line."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional, get_type_hints

from .ingest import DEFAULT_FILLERS


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    # paths; empty means "use the bundled default"
    keywords_path: str = ""
    references_path: str = ""
    out_dir: str = "out"

    # ingest / tokens
    speakers: str = "PAR"
    filler_lexicon: str = ",".join(sorted(DEFAULT_FILLERS))

    # tfidf
    tfidf_use_stems: bool = False
    tfidf_stopwords: bool = False

    # features
    topic_mapping: str = "union"
    bleu_smoothing: bool = True
    bleu_mode: str = "cumulative"
    wer_strip_fillers: bool = False
    strict: bool = False

    # forest
    n_trees: int = 300
    max_features: int = 0  # 0 -> ceil(sqrt(n_features))
    min_samples_leaf: int = 1
    max_depth: int = 0  # 0 -> unlimited
    n_jobs: int = 1
    seed: int = 0

    # llm generation
    endpoint_url: str = "https://api.openai.com/v1/chat/completions"
    model_name: str = "gpt-4o-2024-05-13"
    temperature: float = 1.0
    api_key_env: str = "OPENAI_API_KEY"
    max_retries: int = 3
    retry_backoff: float = 1.0
    parallelism: int = 1
    min_frequency: float = 0.1

    def validate(self) -> None:
        if self.topic_mapping not in ("union", "literal"):
            raise ConfigError(f"topic_mapping must be union or literal, got {self.topic_mapping!r}")
        if self.bleu_mode not in ("cumulative", "individual"):
            raise ConfigError(f"bleu_mode must be cumulative or individual, got {self.bleu_mode!r}")
        for name in ("keywords_path", "references_path"):
            value = getattr(self, name)
            if value and not Path(value).is_file():
                raise ConfigError(f"{name}: file not found: {value}")
        if self.n_trees < 1:
            raise ConfigError("n_trees must be >= 1")
        if not 0 < self.min_frequency <= 1:
            raise ConfigError("min_frequency must be in (0, 1]")

    @property
    def speaker_codes(self) -> tuple[str, ...]:
        return tuple(s.strip() for s in self.speakers.split(",") if s.strip())

    @property
    def fillers(self) -> frozenset:
        return frozenset(s.strip().lower() for s in self.filler_lexicon.split(",") if s.strip())

    def forest_config(self):
        from .model import ForestConfig

        return ForestConfig(
            n_trees=self.n_trees,
            max_features=self.max_features or None,
            min_samples_leaf=self.min_samples_leaf,
            max_depth=self.max_depth or None,
            seed=self.seed,
            n_jobs=self.n_jobs,
        )

    def dumps(self) -> str:
        lines = ["# resolved run configuration"]
        for f in fields(self):
            value = getattr(self, f.name)
            if isinstance(value, bool):
                value = "true" if value else "false"
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _coerce(name: str, raw: str, typ):
    raw = raw.strip()
    try:
        if typ is bool:
            if raw.lower() in _TRUE:
                return True
            if raw.lower() in _FALSE:
                return False
            raise ValueError(raw)
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text: str) -> dict:
    hints = get_type_hints(RunConfig)
    values = {}
    for n, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected key = value")
        key, raw = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in hints:
            raise ConfigError(f"line {n}: unknown config key {key!r}")
        values[key] = _coerce(key, raw, hints[key])
    return values


def load_config(path: Optional[str] = None, overrides: Optional[dict] = None) -> RunConfig:
    values = {}
    if path:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    cfg = dataclasses.replace(RunConfig(), **values)
    cfg.validate()
    return cfg
