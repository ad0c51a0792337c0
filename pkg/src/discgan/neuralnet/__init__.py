from .checkpoint import load_checkpoint, params_from_dict, params_to_dict, save_checkpoint
from .mlp import (
    GradBuffer,
    Layer,
    MlpParams,
    Tape,
    backward,
    clip_weights,
    forward,
    init_embedding,
    init_generator,
    init_mlp,
)
from .optimizers import OptimizerState, apply_update

__all__ = (
    "GradBuffer",
    "Layer",
    "MlpParams",
    "OptimizerState",
    "Tape",
    "apply_update",
    "backward",
    "clip_weights",
    "forward",
    "init_embedding",
    "init_generator",
    "init_mlp",
    "load_checkpoint",
    "params_from_dict",
    "params_to_dict",
    "save_checkpoint",
)
