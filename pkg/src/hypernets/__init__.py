"""Hypernetworks whose weights are gated by a softmax over control-dependent logits."""

from .models import Model, ModelSpec, build_model, forward, load_model, save_model
from .trainer import OptimConfig, evaluate, train

__version__ = "0.1.0"

__all__ = ["Model", "ModelSpec", "OptimConfig", "build_model", "evaluate", "forward", "load_model", "save_model",
           "train", "__version__"]
