"""Line-oriented ``key = value`` experiment configuration."""

from __future__ import annotations

from dataclasses import replace
from importlib import resources

from .pipeline import ExperimentConfig, ExperimentError

_GENERATOR = {
    "n_students": int,
    "response_rate": float,
    "effect_delta": float,
    "noise_sigma": float,
    "seed": int,
    "min_sentences": int,
    "max_sentences": int,
}
_FOREST = {
    "num_trees": int,
    "max_depth": int,
    "max_bins": int,
    "feature_subset_strategy": str,
    "forest_seed": int,
}
_TOP = {"train_fraction": float, "join": str, "seeds": int, "partitions": int, "workers": int}


def _probs(text: str) -> tuple[float, float, float]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if len(parts) != 3:
        raise ExperimentError("attitude_probs needs three numbers (negative, neutral, positive)")
    return tuple(float(p) for p in parts)


def parse_config(text: str, base: ExperimentConfig | None = None, **overrides) -> ExperimentConfig:
    """Build an ``ExperimentConfig``; unknown keys and malformed lines are errors.

    Keyword ``overrides`` use the same keys and win over the text.
    """
    values: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            raise ExperimentError(f"line {lineno}: expected 'key = value', got {raw!r}")
        values[key] = value
    values.update({k: str(v) for k, v in overrides.items() if v is not None})

    base = base or ExperimentConfig()
    gen, forest, top = {}, {}, {}
    for key, value in values.items():
        try:
            if key == "attitude_probs":
                gen[key] = _probs(value)
            elif key in _GENERATOR:
                gen[key] = _GENERATOR[key](value)
            elif key in _FOREST:
                forest["seed" if key == "forest_seed" else key] = _FOREST[key](value)
            elif key in _TOP:
                top[key] = _TOP[key](value)
            else:
                raise ExperimentError(f"unknown configuration key {key!r}")
        except ValueError as exc:
            if isinstance(exc, ExperimentError):
                raise
            raise ExperimentError(f"{key}: bad value {value!r}") from None
    return replace(
        base,
        generator=replace(base.generator, **gen),
        forest=replace(base.forest, **forest),
        **top,
    )


def load_config(path=None, **overrides) -> ExperimentConfig:
    """Read a config file; ``None`` loads the bundled planted-effect configuration."""
    if path is None:
        text = resources.files("learnlab").joinpath("data/experiment.conf").read_text(encoding="utf-8")
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return parse_config(text, **overrides)


def default_config() -> ExperimentConfig:
    return load_config()

