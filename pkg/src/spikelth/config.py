"""INI-style experiment configuration with strict key checking.

Each subcommand accepts a fixed set of ``[section]`` blocks; every key has
a type and a default. Unknown sections or keys are errors, so a typo never
silently falls back to a default.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field


class ConfigError(ValueError):
    """Invalid or unreadable configuration. ``reason`` is a short machine tag."""

    def __init__(self, reason: str, message: str):
        super().__init__(message)
        self.reason = reason


def _int_list(text: str) -> tuple[int, ...]:
    text = text.strip()
    return tuple(int(v) for v in text.split(",")) if text else ()


def _opt_float(text: str):
    text = text.strip()
    return None if text in ("", "auto", "none") else float(text)


def _opt_int(text: str):
    text = text.strip()
    return None if text in ("", "auto", "none") else int(text)


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


SECTIONS: dict[str, dict[str, tuple]] = {
    "run": {"seed": (int, 0), "out": (str, "out")},
    "data": {
        "kind": (str, "synthetic"),
        "path": (str, ""),
        "n_classes": (int, 2),
        "N": (int, 16),
        "T": (int, 4),
        "flip_noise": (float, 0.1),
        "count_per_class": (int, 200),
        "train_fraction": (float, 0.75),
    },
    "network": {"hidden": (_int_list, (32,)), "gain": (float, 1.0), "norm_layers": (_int_list, ())},
    "lif": {"beta": (float, 0.5), "u_th": (float, 0.5), "v_reset": (float, 0.0)},
    "train": {
        "learning_rate": (float, 0.5),
        "epochs": (int, 30),
        "batch_size": (int, 16),
        "momentum": (float, 0.0),
        "surrogate_width": (float, 1.0),
    },
    "search": {"k_percent": (float, 50.0), "baseline_masks": (int, 20)},
    "prune": {
        "p": (float, 20.0),
        "K": (int, 10),
        "R": (int, 2),
        "n_epochs": (int, 50),
        "criterion": (str, "magnitude"),
        "scope": (str, "global"),
        "save_masks": (_bool, True),
    },
    "lth": {
        "N": (int, 4),
        "L": (int, 2),
        "T": (int, 3),
        "delta": (float, 0.2),
        "eps": (_opt_float, None),
        "eps_fraction": (float, 0.5),
        "C": (_opt_float, None),
        "k": (_opt_int, None),
        "n_trials": (int, 500),
        "rate": (float, 0.5),
    },
    "prob": {"checkpoint": (str, ""), "hist_bin_width": (float, 0.01)},
    "plot": {"input": (str, ""), "x": (str, "sparsity"), "y": (str, "eval_acc"), "title": (str, "")},
}

SUBCOMMAND_SECTIONS = {
    "train": ("run", "data", "network", "lif", "train"),
    "search": ("run", "data", "network", "lif", "train", "search"),
    "prune": ("run", "data", "network", "lif", "train", "prune"),
    "verify-lth": ("run", "lif", "lth"),
    "prob-report": ("run", "data", "network", "lif", "train", "prob"),
    "plot": ("run", "plot"),
}


@dataclass
class ExperimentConfig:
    subcommand: str
    values: dict = field(default_factory=dict)

    def section(self, name: str) -> dict:
        return self.values[name]

    def __getitem__(self, key: str):
        sec, _, name = key.partition(".")
        return self.values[sec][name]

    @property
    def seed(self) -> int:
        return self.values["run"]["seed"]


def defaults(subcommand: str) -> ExperimentConfig:
    if subcommand not in SUBCOMMAND_SECTIONS:
        raise ConfigError("invalid-subcommand", f"unknown subcommand {subcommand!r}")
    vals = {sec: {k: d for k, (_, d) in SECTIONS[sec].items()} for sec in SUBCOMMAND_SECTIONS[subcommand]}
    return ExperimentConfig(subcommand, vals)


def parse_config(text: str, subcommand: str, source: str = "<config>") -> ExperimentConfig:
    cfg = defaults(subcommand)
    parser = configparser.ConfigParser(interpolation=None, default_section="\x00unused")
    parser.optionxform = str  # keys are case-sensitive (N, K, ...)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("parse-error", str(exc).replace("\n", " ")) from exc
    allowed = SUBCOMMAND_SECTIONS[subcommand]
    for sec in parser.sections():
        if sec not in allowed:
            raise ConfigError("invalid-key", f"section [{sec}] is not accepted by {subcommand}")
        for key, raw in parser.items(sec):
            if key not in SECTIONS[sec]:
                raise ConfigError("invalid-key", f"unknown key {sec}.{key}")
            conv = SECTIONS[sec][key][0]
            try:
                cfg.values[sec][key] = conv(raw)
            except ValueError as exc:
                raise ConfigError("invalid-value", f"{sec}.{key}: {exc}") from exc
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError("invalid-value", "run.seed must be an unsigned 64-bit integer")
    return cfg


def load_config(path, subcommand: str) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except FileNotFoundError as exc:
        raise ConfigError("missing-file", f"config not found: {path}") from exc
    except OSError as exc:
        raise ConfigError("missing-file", f"cannot read config {path}: {exc.strerror}") from exc
    return parse_config(text, subcommand, source=str(path))
