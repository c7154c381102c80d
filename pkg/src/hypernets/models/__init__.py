"""Hypernetwork architectures and the baseline autoencoder."""

from .io import HYPN_MAGIC, HYPN_VERSION, ModelFormatError, load_model, model_from_bytes, model_to_bytes, save_model
from .spec import (
    ARCHITECTURES,
    CONTROL,
    CORE,
    PLAIN,
    BudgetMatch,
    ModelSpec,
    ParamDecl,
    SpecError,
    match_latent_budget,
    param_decls,
    parameter_count,
)
from .zoo import (
    HyperDenseLayer,
    Model,
    build_model,
    decode,
    dense,
    encode,
    forward,
    hyper_dense,
    init_params,
    model_graph,
    modulation,
    modulation_gates,
    trace,
)

__all__ = [
    "ARCHITECTURES",
    "CONTROL",
    "CORE",
    "HYPN_MAGIC",
    "HYPN_VERSION",
    "PLAIN",
    "BudgetMatch",
    "HyperDenseLayer",
    "Model",
    "ModelFormatError",
    "ModelSpec",
    "ParamDecl",
    "SpecError",
    "build_model",
    "decode",
    "dense",
    "encode",
    "forward",
    "hyper_dense",
    "init_params",
    "load_model",
    "match_latent_budget",
    "model_from_bytes",
    "model_graph",
    "model_to_bytes",
    "modulation",
    "modulation_gates",
    "param_decls",
    "parameter_count",
    "save_model",
    "trace",
]
