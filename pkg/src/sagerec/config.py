"""Experiment configuration: strict structured-text loading.

One file describes a whole experiment: the synthetic world, the training run,
the gradient bounds, the evaluation metrics, the output directory and the seed
list. YAML is the primary format; JSON files (by extension) are accepted too.
Unknown keys are errors with file and line, not warnings: sweep correctness
depends on configs meaning exactly what they say.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import yaml

from .bounds import BoundConfig
from .simenv import FeedbackConfig, WorldConfig
from .trainer import TrainConfig


class ConfigError(ValueError):
    """Any configuration problem; the message starts with path[:line]."""


@dataclass(frozen=True)
class MetricConfig:
    """Evaluation settings: ranking depth and entropy units."""

    k: int = 10
    entropy_base: float | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.entropy_base is not None and (
            self.entropy_base <= 0 or self.entropy_base == 1.0
        ):
            raise ValueError("entropy_base must be positive and not 1")


@dataclass(frozen=True)
class ExperimentConfig:
    """Fully validated experiment description; invalid states are unrepresentable."""

    out_dir: str
    seeds: tuple[int, ...]
    world: WorldConfig = field(default_factory=WorldConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    metrics: MetricConfig = field(default_factory=MetricConfig)

    def __post_init__(self) -> None:
        if not self.out_dir:
            raise ValueError("out_dir must be a nonempty path")
        if not self.seeds:
            raise ValueError("seeds must be a nonempty list")
        if len(set(self.seeds)) != len(self.seeds):
            raise ValueError("seeds must be distinct")
        if self.train.users_per_step > self.world.n_users:
            raise ValueError(
                f"train.users_per_step ({self.train.users_per_step}) exceeds "
                f"world.n_users ({self.world.n_users})"
            )
        if self.train.slate_length > self.world.n_items:
            raise ValueError("train.slate_length exceeds world.n_items")
        for name, k in (("metrics.k", self.metrics.k), ("train.eval_k", self.train.eval_k)):
            if k > self.world.n_items:
                raise ValueError(f"{name} ({k}) exceeds world.n_items")

    def train_for_seed(self, seed: int) -> TrainConfig:
        return replace(self.train, seed=int(seed))


_TOP_KEYS = {"out_dir", "seeds", "world", "train", "bounds", "metrics"}
_WORLD_KEYS = {f.name for f in fields(WorldConfig)}
_FEEDBACK_KEYS = {f.name for f in fields(FeedbackConfig)}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"bounds", "seed"}
_BOUND_KEYS = {f.name for f in fields(BoundConfig)}
_METRIC_KEYS = {f.name for f in fields(MetricConfig)}


def _parse(text: str, where: str):
    if where.endswith(".json"):
        try:
            return json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{where}:{exc.lineno}: {exc.msg}") from exc
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{where}:{mark.line + 1}" if mark is not None else where
        raise ConfigError(f"{loc}: {exc}") from exc


def _key_lines(text: str) -> dict[tuple[str, ...], int]:
    """Map nested key paths to 1-based line numbers for diagnostics."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    lines: dict[tuple[str, ...], int] = {}

    def walk(node, prefix: tuple[str, ...]) -> None:
        if not isinstance(node, yaml.MappingNode):
            return
        for key_node, value_node in node.value:
            if isinstance(key_node, yaml.ScalarNode):
                path = prefix + (str(key_node.value),)
                lines[path] = key_node.start_mark.line + 1
                walk(value_node, path)

    walk(root, ())
    return lines


def _locate(where: str, lines: dict, path: tuple[str, ...]) -> str:
    line = lines.get(path)
    return f"{where}:{line}" if line is not None else where


def _check_keys(
    section: dict,
    allowed: set[str],
    prefix: tuple[str, ...],
    lines: dict,
    where: str,
) -> None:
    for key in section:
        if not isinstance(key, str) or key not in allowed:
            path = prefix + (str(key),)
            raise ConfigError(
                f"{_locate(where, lines, path)}: unknown config key "
                f"{'.'.join(path)!r} (allowed: {', '.join(sorted(allowed))})"
            )


def _section(data: dict, name: str, lines: dict, where: str) -> dict:
    raw = data.get(name)
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(
            f"{_locate(where, lines, (name,))}: section {name!r} must be a mapping"
        )
    return dict(raw)


def _build(cls, kwargs: dict, prefix: tuple[str, ...], lines: dict, where: str):
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        label = ".".join(prefix) if prefix else "config"
        raise ConfigError(
            f"{_locate(where, lines, prefix)}: invalid {label}: {exc}"
        ) from exc


def _parse_seeds(data: dict, lines: dict, where: str) -> tuple[int, ...]:
    raw = data.get("seeds")
    if raw is None:
        raise ConfigError(f"{where}: missing required key 'seeds'")
    if isinstance(raw, int) and not isinstance(raw, bool):
        raw = [raw]
    if not isinstance(raw, list) or any(
        not isinstance(s, int) or isinstance(s, bool) for s in raw
    ):
        raise ConfigError(
            f"{_locate(where, lines, ('seeds',))}: seeds must be an integer list"
        )
    return tuple(int(s) for s in raw)


def load_experiment_config(
    path: str | Path,
    out_override: str | None = None,
    seed_override: int | None = None,
) -> ExperimentConfig:
    """Load and fully validate one experiment file.

    ``out_override`` and ``seed_override`` apply before validation, so a config
    with no ``out_dir`` is still usable with an explicit output flag.
    Raises :class:`ConfigError` for anything wrong with the content; I/O
    failures propagate as ``OSError``.
    """
    where = str(path)
    text = Path(path).read_text()
    data = _parse(text, where)
    lines = _key_lines(text)
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: top level must be a mapping")
    _check_keys(data, _TOP_KEYS, (), lines, where)

    world_raw = _section(data, "world", lines, where)
    _check_keys(world_raw, _WORLD_KEYS, ("world",), lines, where)
    feedback_raw = world_raw.pop("feedback", None)
    if feedback_raw is not None:
        if not isinstance(feedback_raw, dict):
            raise ConfigError(
                f"{_locate(where, lines, ('world', 'feedback'))}: "
                "section world.feedback must be a mapping"
            )
        _check_keys(feedback_raw, _FEEDBACK_KEYS, ("world", "feedback"), lines, where)
        world_raw["feedback"] = _build(
            FeedbackConfig, dict(feedback_raw), ("world", "feedback"), lines, where
        )
    world = _build(WorldConfig, world_raw, ("world",), lines, where)

    bounds_raw = _section(data, "bounds", lines, where)
    _check_keys(bounds_raw, _BOUND_KEYS, ("bounds",), lines, where)
    bounds = _build(BoundConfig, bounds_raw, ("bounds",), lines, where)

    train_raw = _section(data, "train", lines, where)
    _check_keys(train_raw, _TRAIN_KEYS, ("train",), lines, where)
    if "reward_weights" in train_raw:
        weights = train_raw["reward_weights"]
        if not isinstance(weights, (list, tuple)):
            raise ConfigError(
                f"{_locate(where, lines, ('train', 'reward_weights'))}: "
                "train.reward_weights must be a list"
            )
        train_raw["reward_weights"] = tuple(float(w) for w in weights)
    train_raw["bounds"] = bounds
    train = _build(TrainConfig, train_raw, ("train",), lines, where)

    metrics_raw = _section(data, "metrics", lines, where)
    _check_keys(metrics_raw, _METRIC_KEYS, ("metrics",), lines, where)
    metrics = _build(MetricConfig, metrics_raw, ("metrics",), lines, where)

    out_dir = out_override if out_override is not None else data.get("out_dir")
    if out_dir is not None and not isinstance(out_dir, str):
        raise ConfigError(f"{_locate(where, lines, ('out_dir',))}: out_dir must be a string")
    if not out_dir:
        raise ConfigError(f"{where}: no output directory (set out_dir or pass --out)")

    seeds = (
        (int(seed_override),)
        if seed_override is not None
        else _parse_seeds(data, lines, where)
    )
    return _build(
        ExperimentConfig,
        dict(out_dir=out_dir, seeds=seeds, world=world, train=train, metrics=metrics),
        (),
        lines,
        where,
    )
