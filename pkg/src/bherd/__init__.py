"""Deterministic federated-learning simulator with beneficial-gradient
(herding) selection and the FedAvg / GraB / FedNova / SCAFFOLD baselines."""

from .config import ExperimentConfig, parse_config
from .federation import run_experiment

__all__ = ["ExperimentConfig", "parse_config", "run_experiment"]
__version__ = "0.1.0"
