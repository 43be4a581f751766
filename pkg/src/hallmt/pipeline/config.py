"""Flat key=value configuration and the training recipe.

Config files are UTF-8 text, one ``key = value`` per line, ``#``
comments. Command-line flags override file values. Unknown keys are a
configuration error that lists the valid keys.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Tuple

from ..engine.optim import LrSchedule
from ..errors import ConfigurationError
from ..halluc.gumbel import GumbelConfig
from ..translator.model import ModelConfig
from ..vq.model import VqConfig


def _parse_int(v): return int(v)
def _parse_float(v): return float(v)
def _parse_str(v): return v


def _parse_ints(v):
    return tuple(int(x) for x in v.split(",") if x.strip())


# key -> (parser, default)
CONFIG_KEYS: Dict[str, Tuple] = {
    "seed": (_parse_int, 0),
    "work_dir": (_parse_str, "runs/default"),
    # corpus
    "corpus_n": (_parse_int, 10000),
    "corpus_seed": (_parse_int, 1234),
    "bpe_merges": (_parse_int, 200),
    # discrete visual encoder (stage 1)
    "vq_k": (_parse_int, 64),
    "vq_d": (_parse_int, 16),
    "vq_stages": (_parse_int, 3),
    "vq_channels": (_parse_ints, (16, 32, 32)),
    "vq_batch": (_parse_int, 32),
    "vq_lr": (_parse_float, 0.003),
    "vq_steps": (_parse_int, 1500),
    "vq_images": (_parse_int, 2000),
    "image_size": (_parse_int, 32),
    # transformer dimensions
    "model_dim": (_parse_int, 64),
    "model_ffn": (_parse_int, 128),
    "model_heads": (_parse_int, 4),
    "model_enc_layers": (_parse_int, 2),
    "model_dec_layers": (_parse_int, 2),
    "model_dropout": (_parse_float, 0.1),
    "halluc_layers": (_parse_int, 2),
    # loss weights and temperature annealing
    "gamma_h": (_parse_float, 0.5),
    "lambda_c": (_parse_float, 0.5),
    "tau0": (_parse_float, 5.0),
    "tau_min": (_parse_float, 0.1),
    "tau_rate": (_parse_float, 0.003),
    # optimization
    "base_lr": (_parse_float, 0.003),
    "warmup": (_parse_int, 200),
    "iters": (_parse_int, 1500),
    "halluc_iters": (_parse_int, 400),
    "token_budget": (_parse_int, 1024),
    "checkpoint_interval": (_parse_int, 500),
    # source-degradation protocol
    "mask_mode": (_parse_str, "none"),
    "mask_p": (_parse_float, 0.5),
    "mask_k": (_parse_int, 4),
    # inference
    "beam": (_parse_int, 5),
    "alpha": (_parse_float, 1.0),
    "max_len": (_parse_int, 24),
}

_MASK_MODES = ("none", "entity", "progressive")


@dataclass(frozen=True)
class Config:
    values: Tuple[Tuple[str, object], ...]

    def __getitem__(self, key: str):
        return dict(self.values)[key]

    def as_dict(self) -> Dict[str, object]:
        return dict(self.values)

    def digest(self) -> bytes:
        text = "\n".join(f"{k} = {v}" for k, v in self.values)
        return hashlib.sha256(text.encode("utf-8")).digest()

    def model_config(self) -> ModelConfig:
        return ModelConfig(
            enc_layers=self["model_enc_layers"],
            dec_layers=self["model_dec_layers"],
            dim=self["model_dim"], ffn_dim=self["model_ffn"],
            heads=self["model_heads"], dropout=self["model_dropout"])

    def vq_config(self) -> VqConfig:
        return VqConfig(k=self["vq_k"], d=self["vq_d"],
                        stages=self["vq_stages"],
                        channels=tuple(self["vq_channels"]),
                        image_size=self["image_size"])

    def gumbel_config(self) -> GumbelConfig:
        return GumbelConfig(tau0=self["tau0"], tau_min=self["tau_min"],
                            rate=self["tau_rate"])

    def lr_schedule(self) -> LrSchedule:
        return LrSchedule(base_lr=self["base_lr"],
                          warmup_steps=self["warmup"])

    def work_dir(self) -> Path:
        return Path(self["work_dir"])


def _coerce(key: str, raw) -> object:
    if key not in CONFIG_KEYS:
        raise ConfigurationError(
            f"unknown config key {key!r}; valid keys: "
            f"{', '.join(sorted(CONFIG_KEYS))}")
    parser, _ = CONFIG_KEYS[key]
    if isinstance(raw, str):
        try:
            return parser(raw)
        except ValueError as exc:
            raise ConfigurationError(
                f"bad value for {key!r}: {raw!r}") from exc
    return raw


def build_config(file_values: Dict[str, str],
                 overrides: Optional[Dict[str, object]] = None) -> Config:
    merged = {k: default for k, (_, default) in CONFIG_KEYS.items()}
    for k, v in file_values.items():
        merged[k] = _coerce(k, v)
    for k, v in (overrides or {}).items():
        if v is not None:
            merged[k] = _coerce(k, v)
    if merged["mask_mode"] not in _MASK_MODES:
        raise ConfigurationError(
            f"mask_mode must be one of {_MASK_MODES}, got "
            f"{merged['mask_mode']!r}")
    ordered = tuple(sorted(merged.items(), key=lambda kv: kv[0]))
    return Config(ordered)


def parse_config_file(path) -> Dict[str, str]:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file not found: {path}")
    values: Dict[str, str] = {}
    for lineno, line in enumerate(
            path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigurationError(
                f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = stripped.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def load_config(path, overrides: Optional[Dict[str, object]] = None
                ) -> Config:
    return build_config(parse_config_file(path), overrides)
