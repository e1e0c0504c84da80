"""Run configuration: ``key = value`` files, precedence and run manifests."""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

from . import __version__
from .errors import ConfigError
from .evaluation import TASKS
from .graph_data import SPLITS
from .hypercomplex import Algebra
from .training import TrainConfig

logger = logging.getLogger(__name__)

SEED_ENV = "NESTE_SEED"
MANIFEST_NAME = "manifest.json"

DATA_KEYS: tuple[str, ...] = (
    "atomic_train",
    "atomic_valid",
    "atomic_test",
    "nested_train",
    "nested_valid",
    "nested_test",
)


def parse_bool(value: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: '{value}'")


def parse_hits(value: str) -> tuple[int, ...]:
    hits = tuple(int(v) for v in value.split(",") if v.strip())
    if not hits or min(hits) < 1:
        raise ValueError(f"hits must be positive integers, got '{value}'")
    return hits


_CONVERTERS: dict[str, Callable[[str], Any]] = {
    "int": int,
    "float": float,
    "bool": parse_bool,
    "str": str,
    "Algebra": Algebra.parse,
}


@dataclass
class RunConfig:
    """Everything one CLI run needs: hyperparameters, inputs and outputs."""

    train: TrainConfig = field(default_factory=TrainConfig)
    atomic_train: Optional[str] = None
    atomic_valid: Optional[str] = None
    atomic_test: Optional[str] = None
    nested_train: Optional[str] = None
    nested_valid: Optional[str] = None
    nested_test: Optional[str] = None
    augmented: Optional[str] = None
    strict_names: bool = False
    output_dir: str = "neste-out"
    task: str = "triple"
    split: str = "test"
    hits: tuple[int, ...] = (1, 3, 10)
    filtered: bool = True
    checkpoint: Optional[str] = None

    @property
    def atomic_paths(self) -> list[str]:
        return [self.atomic_train, self.atomic_valid, self.atomic_test]

    @property
    def nested_paths(self) -> list[str]:
        return [self.nested_train, self.nested_valid, self.nested_test]

    def missing_data_keys(self) -> list[str]:
        return [key for key in DATA_KEYS if getattr(self, key) is None]

    def input_paths(self) -> list[str]:
        paths = [p for p in self.atomic_paths + self.nested_paths if p is not None]
        if self.augmented is not None:
            paths.append(self.augmented)
        return paths

    def to_dict(self) -> dict:
        out = {"train": self.train.to_dict()}
        for f in fields(self):
            if f.name != "train":
                out[f.name] = getattr(self, f.name)
        out["hits"] = list(self.hits)
        return out


RUN_CONVERTERS: dict[str, Callable[[str], Any]] = {
    **{key: str for key in DATA_KEYS},
    "augmented": str,
    "strict_names": parse_bool,
    "output_dir": str,
    "task": str,
    "split": str,
    "hits": parse_hits,
    "filtered": parse_bool,
    "checkpoint": str,
}


def _train_converters() -> dict[str, Callable[[str], Any]]:
    return {f.name: _CONVERTERS[str(f.type)] for f in fields(TrainConfig)}


def known_keys() -> frozenset[str]:
    return frozenset(_train_converters()) | frozenset(RUN_CONVERTERS)


def convert_value(key: str, raw: str, line: Optional[int] = None) -> Any:
    """Convert one textual setting to its typed value."""
    converter = _train_converters().get(key) or RUN_CONVERTERS.get(key)
    if converter is None:
        raise ConfigError(f"unknown key '{key}'", line)
    try:
        return converter(raw)
    except ValueError as e:
        raise ConfigError(f"invalid value for '{key}': {e}", line) from None


def load_config_file(path: str | Path) -> dict[str, Any]:
    """Parse a flat ``key = value`` file; ``#`` starts a comment.

    Raises:
        ConfigError: unknown key, malformed line or invalid value (with its
            line number)
        OSError: the file cannot be read
    """
    values: dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            if not sep:
                raise ConfigError(f"expected 'key = value', got '{line}'", line_no)
            key = key.strip().replace("-", "_")
            values[key] = convert_value(key, value.strip(), line_no)
    return values


def resolve_run_config(
    file_values: Optional[Mapping[str, Any]] = None,
    overrides: Optional[Mapping[str, Any]] = None,
    environ: Optional[Mapping[str, str]] = None,
) -> RunConfig:
    """Merge settings with precedence overrides > file > NESTE_SEED > defaults.

    ``overrides`` holds already-typed values (e.g. parsed CLI flags); keys
    whose value is None are ignored.
    """
    environ = os.environ if environ is None else environ
    merged: dict[str, Any] = {}
    if SEED_ENV in environ:
        merged["seed"] = convert_value("seed", environ[SEED_ENV])
    merged.update(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})

    unknown = sorted(set(merged) - known_keys())
    if unknown:
        raise ConfigError(f"unknown key '{unknown[0]}'")
    train_keys = set(TrainConfig.keys())
    train = TrainConfig(**{k: v for k, v in merged.items() if k in train_keys})
    task = merged.get("task", "triple")
    if task not in (*TASKS, "all"):
        raise ConfigError(f"task must be one of {', '.join(TASKS)} or all, got '{task}'")
    split = merged.get("split", "test")
    if split not in SPLITS:
        raise ConfigError(f"split must be one of {', '.join(SPLITS)}, got '{split}'")
    if train.threads == 1 and train.mode != "deterministic":
        train = replace(train, mode="deterministic")
    return RunConfig(train=train, **{k: v for k, v in merged.items() if k not in train_keys})


def git_blob_sha1(path: str | Path) -> str:
    """Content hash as computed by ``git hash-object``."""
    data = Path(path).read_bytes()
    header = f"blob {len(data)}\0".encode("ascii")
    return hashlib.sha1(header + data).hexdigest()


def write_manifest(
    output_dir: str | Path,
    config: RunConfig,
    subcommand: str,
    inputs: Optional[list[str]] = None,
) -> Path:
    """Record the resolved config and input hashes next to a run's outputs."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    inputs = config.input_paths() if inputs is None else inputs
    manifest = {
        "version": __version__,
        "subcommand": subcommand,
        "config": config.to_dict(),
        "inputs": {str(p): git_blob_sha1(p) for p in inputs},
    }
    path = out / MANIFEST_NAME
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("wrote manifest %s", path)
    return path
