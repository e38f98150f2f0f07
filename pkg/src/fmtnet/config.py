"""JSON run-configuration files.

A configuration file holds a single JSON object with two sections:

    {"model": {...}, "train": {...}}

``model`` describes an FmtConfig or a BaselineConfig, selected by ``kind``
("fmt" is the default).  ``train`` fills a TrainConfig and may be omitted.
Every omitted field takes the documented dataclass default; runs echo the
fully resolved values into their manifest so nothing depends on implicit
state.
"""

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .model import (
    BaselineConfig,
    FmtConfig,
    ModelConfigError,
    SummarizerConfig,
    config_from_dict,
)
from .train import TrainConfig, TrainConfigError

_FMT_KEYS = {
    "kind", "modalities", "d_y", "label_kind", "factor_masks", "mtl_layers",
    "fms_units", "s1", "s2", "h_gru", "h_ff", "dropout", "positions",
    "mask_padding", "summarize_add", "seed",
}
_BASELINE_KEYS = {
    "kind", "modalities", "d_y", "label_kind", "heads", "layers", "h_gru",
    "h_ff", "dropout", "positions", "mask_padding", "seed",
}
_TRAIN_KEYS = {
    "learning_rate", "max_epochs", "batch_size", "seed", "patience",
    "loss_kind",
}


class ConfigError(ValueError):
    """A malformed run-configuration file; the message names the field."""


def _label(where, key):
    return f"{where}.{key}" if where else key


def _require(section, key, where=""):
    if key not in section:
        raise ConfigError(f"missing required field {_label(where, key)}")
    return section[key]


def _check_keys(section, allowed, where=""):
    unknown = sorted(set(section) - allowed)
    if unknown:
        raise ConfigError(f"unknown field {_label(where, unknown[0])}")


@dataclass(frozen=True)
class RunConfig:
    model: FmtConfig | BaselineConfig
    train: TrainConfig

    def to_dict(self):
        return {"model": self.model.to_dict(), "train": self.train.to_dict()}

    def with_seed(self, seed):
        """Copy with both the model and training seeds overridden."""
        if seed is None:
            return self
        model = config_from_dict({**self.model.to_dict(), "seed": seed})
        return RunConfig(model, dataclasses.replace(self.train, seed=seed))


def model_config_from_json(section):
    if not isinstance(section, dict):
        raise ConfigError("model section must be a JSON object")
    kind = section.get("kind", "fmt")
    if kind not in ("fmt", "baseline"):
        raise ConfigError(f"model.kind must be 'fmt' or 'baseline', got {kind!r}")
    _check_keys(section, _FMT_KEYS if kind == "fmt" else _BASELINE_KEYS, "model")

    raw_mods = _require(section, "modalities", "model")
    if not isinstance(raw_mods, list) or not raw_mods:
        raise ConfigError("model.modalities must be a nonempty list")
    mods = []
    for i, m in enumerate(raw_mods):
        where = f"model.modalities[{i}]"
        if not isinstance(m, dict):
            raise ConfigError(f"{where} must be a JSON object")
        _check_keys(m, {"name", "input_dim", "embed_dim"}, where)
        name = _require(m, "name", where)
        input_dim = _require(m, "input_dim", where)
        mods.append({"name": name, "input_dim": input_dim,
                     "embed_dim": m.get("embed_dim", input_dim)})
    _require(section, "d_y", "model")

    for sk in ("s1", "s2"):
        if sk in section:
            sub = section[sk]
            if not isinstance(sub, dict):
                raise ConfigError(f"model.{sk} must be a JSON object")
            _check_keys(sub, {"channels", "kernels"}, f"model.{sk}")
            _require(sub, "channels", f"model.{sk}")
            _require(sub, "kernels", f"model.{sk}")

    full = dict(section)
    full["kind"] = kind
    full["modalities"] = mods
    if kind == "fmt":
        full.setdefault("mtl_layers", 2)
        full.setdefault("fms_units", 2)
        full.setdefault("s1", SummarizerConfig().to_dict())
        full.setdefault("s2", SummarizerConfig().to_dict())
    else:
        full.setdefault("heads", 1)
        full.setdefault("layers", 2)
    try:
        return config_from_dict(full)
    except ModelConfigError as e:
        raise ConfigError(f"model: {e}") from None


def train_config_from_json(section):
    if section is None:
        section = {}
    if not isinstance(section, dict):
        raise ConfigError("train section must be a JSON object")
    _check_keys(section, _TRAIN_KEYS, "train")
    try:
        return TrainConfig(**section)
    except (TrainConfigError, TypeError) as e:
        raise ConfigError(f"train: {e}") from None


def load_run_config(path):
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path} is not valid JSON: {e}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object")
    _check_keys(doc, {"model", "train"})
    model = model_config_from_json(_require(doc, "model"))
    train = train_config_from_json(doc.get("train"))
    return RunConfig(model, train)
