"""Mixture-of-experts fusion: experts, gating, sparse routing, checkpoints."""

from .checkpoint import Checkpoint, CheckpointFormatError, load_checkpoint, save_checkpoint
from .layers import MLP, Linear
from .model import (
    GateDecision,
    MoEConfig,
    MoEModel,
    RoutingError,
    modality_gate_mass,
    top_n_mask,
)

__all__ = [
    "Checkpoint",
    "CheckpointFormatError",
    "GateDecision",
    "Linear",
    "MLP",
    "MoEConfig",
    "MoEModel",
    "RoutingError",
    "load_checkpoint",
    "modality_gate_mass",
    "save_checkpoint",
    "top_n_mask",
]
