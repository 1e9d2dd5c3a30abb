"""Training and evaluation harness for statistical-trigger poisoning experiments."""

from .config import ExperimentConfig, Scenario
from .distill import distill
from .evaluate import accuracy, attack_success_rate, evaluate, write_table
from .serve import ModelOracle, serve_oracle
from .tensordump import TensorDump, read_dump, write_dump
from .train import load_artifact, train

__all__ = [
    "ExperimentConfig",
    "ModelOracle",
    "Scenario",
    "TensorDump",
    "accuracy",
    "attack_success_rate",
    "distill",
    "evaluate",
    "load_artifact",
    "read_dump",
    "serve_oracle",
    "train",
    "write_dump",
    "write_table",
]
