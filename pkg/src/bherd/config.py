"""Experiment configuration: defaults, validation, key=value parsing."""
from __future__ import annotations

from dataclasses import dataclass, fields

from .errors import ConfigError

STRATEGIES = (
    "fedavg",
    "bherd",
    "grab",
    "fednova",
    "fednova-bherd",
    "scaffold",
    "scaffold-bherd",
    "centralized",
)


@dataclass
class ExperimentConfig:
    strategy: str = "bherd"
    model: str = "svm"
    dataset: str = "mnist"
    case: int = 1
    clients: int = 5
    batch: int = 100
    epochs: float = 1.0
    rounds: int = 500
    alpha: float = 0.5
    lr: float = 1e-4
    rr: bool = False
    lam: float = 0.0
    seed: int = 0
    runs: int = 1
    out: str = "out"
    mnist_dir: str = "mnist"
    synth_classes: int = 10
    synth_per_class: int = 1000
    synth_features: int = 20
    synth_spread: float = 1.0
    workers: int = 1
    probes: bool = False
    dump_selection: bool = True

    def validate(self) -> "ExperimentConfig":
        def require(ok, key, value, allowed):
            if not ok:
                raise ConfigError(f"{key}={value!r} invalid; allowed: {allowed}")

        require(self.strategy in STRATEGIES, "strategy", self.strategy, STRATEGIES)
        require(self.model == "svm", "model", self.model, "svm")
        require(self.dataset in ("mnist", "synth"), "dataset", self.dataset, "mnist|synth")
        require(self.case in (1, 2, 3), "case", self.case, "{1,2,3}")
        require(self.clients >= 1, "clients", self.clients, ">= 1")
        require(self.batch >= 1, "batch", self.batch, ">= 1")
        require(self.epochs > 0, "epochs", self.epochs, "> 0")
        require(self.rounds >= 0, "rounds", self.rounds, ">= 0")
        require(0.0 < self.alpha <= 1.0, "alpha", self.alpha, "(0, 1]")
        require(self.lr > 0, "lr", self.lr, "> 0")
        require(self.lam >= 0, "lam", self.lam, ">= 0")
        require(self.runs >= 1, "runs", self.runs, ">= 1")
        require(self.workers >= 1, "workers", self.workers, ">= 1")
        require(self.synth_classes >= 2, "synth_classes", self.synth_classes, ">= 2")
        require(self.synth_per_class >= 1, "synth_per_class", self.synth_per_class, ">= 1")
        require(self.synth_spread > 0, "synth_spread", self.synth_spread, "> 0")
        if self.strategy == "centralized" and self.clients != 1:
            raise ConfigError(
                f"clients={self.clients} invalid; strategy=centralized forces clients=1"
            )
        return self

    def items(self):
        for f in fields(self):
            yield f.name, getattr(self, f.name)


_BOOL = {"on": True, "off": False, "true": True, "false": False, "1": True, "0": False}


def _convert(key: str, raw, target_type):
    if isinstance(raw, target_type) and not (target_type is int and isinstance(raw, bool)):
        return raw
    text = str(raw).strip()
    try:
        if target_type is bool:
            return _BOOL[text.lower()]
        if target_type is int:
            return int(text)
        if target_type is float:
            return float(text)
        return text
    except (KeyError, ValueError):
        raise ConfigError(f"{key}={raw!r} invalid; expected {target_type.__name__}") from None


def parse_config(path=None, overrides=None) -> ExperimentConfig:
    """Build a validated config from a key=value file plus overrides.

    Overrides (command-line flags) win over file values; unknown keys in
    either source are rejected.
    """
    known = {f.name: f.type for f in fields(ExperimentConfig)}
    types = {
        name: {"str": str, "int": int, "float": float, "bool": bool}[t]
        for name, t in known.items()
    }
    values = {}
    if path is not None:
        with open(path) as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, raw = (part.strip() for part in line.split("=", 1))
                if key not in known:
                    raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = _convert(key, raw, types[key])
    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
        values[key] = _convert(key, raw, types[key])
    return ExperimentConfig(**values).validate()
