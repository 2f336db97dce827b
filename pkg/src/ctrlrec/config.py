"""Flat key = value configuration shared by the CLI, service and evaluation."""

from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import DataError


@dataclass
class Config:
    # scorer / training
    scorer: str = "attention"
    embedding_dim: int = 100
    max_len: int = 100
    batch_size: int = 128
    dropout: float = 0.2
    learning_rate: float = 0.001
    epochs: int = 100
    eval_every: int = 5
    seed: int = 0
    readout_window: int = 1
    # recommendation lists
    k: int = 10
    exclude_history: bool = True
    # greedy search
    greedy_retention_weight: float = 1.0
    # continuous relaxation
    relax_constraint_weight: float = 10.0
    relax_retention_weight: float = 1.0
    relax_margin: float = 0.1
    relax_learning_rate: float = 0.01
    relax_steps: int = 500
    relax_threshold: float = 0.5
    relax_check_every: int = 0
    relax_retention_penalty: bool = False
    # evaluation protocols
    sample_size: int = 1000
    sim_set_size: int = 20
    # ingestion
    data_format: str = "tsv"
    min_user_interactions: int = 20
    min_item_interactions: int = 10
    # orchestration
    jobs: int = 1
    # service
    host: str = "127.0.0.1"
    port: int = 8765
    session_ttl_minutes: int = 30
    method: str = "search"
    model_path: str = ""
    data_path: str = ""
    names_path: str = ""
    static_dir: str = ""
    snapshot_path: str = ""
    verb: str = "interacted with"


_FIELDS = {f.name: f.type for f in fields(Config)}


def _coerce(name: str, raw: str):
    kind = _FIELDS[name]
    raw = raw.strip()
    if kind == "bool":
        if raw.lower() in ("true", "1", "yes", "on"):
            return True
        if raw.lower() in ("false", "0", "no", "off"):
            return False
        raise DataError(f"config key {name}: expected a boolean, got {raw!r}")
    if kind == "int":
        try:
            return int(raw)
        except ValueError as exc:
            raise DataError(f"config key {name}: expected an integer, got {raw!r}") from exc
    if kind == "float":
        try:
            return float(raw)
        except ValueError as exc:
            raise DataError(f"config key {name}: expected a number, got {raw!r}") from exc
    return raw


def apply_overrides(config: Config, overrides: dict) -> Config:
    for key, raw in overrides.items():
        key = key.strip()
        if key not in _FIELDS:
            raise DataError(f"unknown config key {key!r}")
        setattr(config, key, _coerce(key, str(raw)))
    return config


def load_config(path) -> Config:
    config = Config()
    overrides = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DataError(f"{path} line {lineno}: expected key = value")
            key, value = line.split("=", 1)
            overrides[key.strip()] = value
    return apply_overrides(config, overrides)


def save_config(config: Config, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(Config):
            fh.write(f"{f.name} = {getattr(config, f.name)}\n")


def retro_request_kwargs(config: Config) -> dict:
    """RetroRequest hyperparameters drawn from a config."""
    return {
        "k": config.k,
        "exclude_history": config.exclude_history,
        "greedy_retention_weight": config.greedy_retention_weight,
        "relax_constraint_weight": config.relax_constraint_weight,
        "relax_retention_weight": config.relax_retention_weight,
        "relax_margin": config.relax_margin,
        "relax_learning_rate": config.relax_learning_rate,
        "relax_steps": config.relax_steps,
        "relax_threshold": config.relax_threshold,
        "relax_check_every": config.relax_check_every,
        "relax_retention_penalty": config.relax_retention_penalty,
    }
