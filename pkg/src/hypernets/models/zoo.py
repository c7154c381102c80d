"""Model construction and the forward graph shared by training and inference."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

from .. import autodiff as ad
from ..autodiff import ContractError, DimensionError, Tape, Tensor
from .spec import CONTROL, CORE, PLAIN, ModelSpec, ParamDecl, param_decls

_SOFTMAX_AXES = {"row": -1, "column": -2}


def modulation(logits: Tensor, out: int, inn: int, axis: str = "row") -> Tensor:
    """Softmax of per-sample logits (N x out*in) into N x out x in gates."""
    n = logits.shape[0]
    if logits.shape[1:] != (out * inn,):
        raise DimensionError(f"modulation: expected {out * inn} logits, got {logits.shape[1:]}")
    if axis == "flat":
        return ad.reshape(ad.softmax(logits, axis=-1), (n, out, inn))
    if axis not in _SOFTMAX_AXES:
        raise ContractError(f"unknown softmax axis {axis!r}")
    return ad.softmax(ad.reshape(logits, (n, out, inn)), axis=_SOFTMAX_AXES[axis])


def hyper_dense(x: Tensor, W: Tensor, b: Tensor, logits: Tensor, axis: str = "row") -> Tensor:
    """z_n = (softmax(logits_n) * W) x_n + b for a batch x of shape N x in."""
    out, inn = W.shape
    if x.data.ndim != 2 or x.shape[1] != inn:
        raise DimensionError(f"hyper_dense: input {x.shape} does not match weight {W.shape}")
    gates = modulation(logits, out, inn, axis)
    w_eff = ad.hadamard(gates, W)
    z = ad.matmul(w_eff, ad.reshape(x, (x.shape[0], inn, 1)))
    return ad.add(ad.reshape(z, (x.shape[0], out)), b)


def dense(x: Tensor, W: Tensor, b: Tensor) -> Tensor:
    return ad.add(ad.matmul(x, ad.transpose(W)), b)


@dataclass
class HyperDenseLayer:
    """A standalone modulated dense layer with its own dense control branch."""

    W: np.ndarray
    b: np.ndarray
    control: list[tuple[np.ndarray, np.ndarray]]
    softmax_axis: str = "row"
    control_activation: str = "tanh"

    @classmethod
    def init(cls, n_in: int, n_out: int, control_dim: int, hidden: Sequence[int] = (16,), seed: int = 0,
             softmax_axis: str = "row", control_activation: str = "tanh") -> "HyperDenseLayer":
        rng = np.random.default_rng(seed)
        slice_len = {"row": n_in, "column": n_out, "flat": n_in * n_out}[softmax_axis]
        W = _glorot(rng, (n_out, n_in), n_in, n_out) * slice_len
        layers, prev = [], control_dim
        for i, h in enumerate(list(hidden) + [n_out * n_in]):
            scale = 0.1 if i == len(hidden) else 1.0
            layers.append((_glorot(rng, (h, prev), prev, h) * scale, np.zeros(h)))
            prev = h
        return cls(W, np.zeros(n_out), layers, softmax_axis, control_activation)

    def logits(self, phi: Tensor, params: Optional[Sequence[tuple[Tensor, Tensor]]] = None) -> Tensor:
        layers = params if params is not None else [(Tensor(w), Tensor(c)) for w, c in self.control]
        h = phi
        for i, (w, c) in enumerate(layers):
            h = dense(h, w, c)
            if i < len(layers) - 1:
                h = ad.apply_activation(h, self.control_activation)
        return h

    def __call__(self, x, phi) -> np.ndarray:
        x2, phi2 = np.atleast_2d(x), np.atleast_2d(phi)
        z = hyper_dense(Tensor(x2), Tensor(self.W), Tensor(self.b), self.logits(Tensor(phi2)), self.softmax_axis)
        return z.data if np.ndim(x) == 2 else z.data[0]

    def gates(self, phi) -> np.ndarray:
        out, inn = self.W.shape
        return modulation(self.logits(Tensor(np.atleast_2d(phi))), out, inn, self.softmax_axis).data


def _glorot(rng: np.random.Generator, shape, fan_in: int, fan_out: int) -> np.ndarray:
    lim = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-lim, lim, size=shape)


def init_params(spec: ModelSpec) -> dict[str, np.ndarray]:
    rng = np.random.default_rng(spec.init_seed)
    params = {}
    for d in param_decls(spec):
        if d.bias:
            params[d.name] = np.zeros(d.shape)
        else:
            params[d.name] = _glorot(rng, d.shape, d.fan_in, d.fan_out) * d.scale
    return params


@dataclass
class Model:
    spec: ModelSpec
    params: dict[str, np.ndarray]
    decls: list[ParamDecl] = field(init=False, repr=False)

    def __post_init__(self):
        self.decls = param_decls(self.spec)
        expected = {d.name: d.shape for d in self.decls}
        if set(self.params) != set(expected):
            raise ContractError(f"parameter names {sorted(self.params)} do not match spec")
        for name, shape in expected.items():
            if self.params[name].shape != shape:
                raise DimensionError(f"{name}: expected {shape}, got {self.params[name].shape}")

    @property
    def tags(self) -> dict[str, str]:
        return {d.name: d.tag for d in self.decls}

    def names(self, tag: Optional[str] = None) -> list[str]:
        return [d.name for d in self.decls if tag is None or d.tag == tag]

    @property
    def parameter_count(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def copy(self) -> "Model":
        return Model(self.spec, {k: v.copy() for k, v in self.params.items()})

    def bind(self, tape: Optional[Tape]) -> dict[str, Tensor]:
        if tape is None:
            return {k: Tensor(v) for k, v in self.params.items()}
        return {d.name: tape.variable(self.params[d.name]) for d in self.decls}


def build_model(spec: ModelSpec) -> Model:
    return Model(spec, init_params(spec))


# -- forward graph --------------------------------------------------------------


def _conv_block(h, P, prefix, act, stride=2):
    return ad.apply_activation(ad.add(ad.conv2d(h, P[f"{prefix}.K"], stride=stride), P[f"{prefix}.b"]), act)


def _deconv_block(h, P, prefix, act):
    return ad.apply_activation(ad.add(ad.conv2d_transpose(h, P[f"{prefix}.K"], stride=2), P[f"{prefix}.b"]), act)


def _control_logits(spec: ModelSpec, P, u: Tensor) -> Tensor:
    if spec.architecture == "compensation_hypernet":
        n = u.shape[0]
        h = _conv_block(u, P, "ctrl.conv1", spec.control_activation)
        h = _conv_block(h, P, "ctrl.conv2", spec.control_activation)
        u = ad.reshape(h, (n, h.size // n))
    h = u
    for i in range(len(spec.control_hidden)):
        h = ad.apply_activation(dense(h, P[f"ctrl.d{i}.W"], P[f"ctrl.d{i}.b"]), spec.control_activation)
    return dense(h, P["ctrl.out.W"], P["ctrl.out.b"])


def encode(spec: ModelSpec, P: Mapping[str, Tensor], x4: Tensor, acts: Optional[dict] = None) -> Tensor:
    """Encoder of the convolutional architectures: N x 1 x S x S to the latent code."""
    acts = {} if acts is None else acts
    n, act = x4.shape[0], spec.activation
    h = acts["enc.conv1"] = _conv_block(x4, P, "enc.conv1", act)
    h = acts["enc.conv2"] = _conv_block(h, P, "enc.conv2", act)
    h = ad.reshape(h, (n, spec.features))
    acts["enc.dense"] = ad.apply_activation(dense(h, P["enc.dense.W"], P["enc.dense.b"]), act)
    return acts["enc.dense"]


def decode(spec: ModelSpec, P: Mapping[str, Tensor], code: Tensor, control: Optional[Tensor],
           acts: Optional[dict] = None) -> Tensor:
    """Latent code plus control input (phi, or the N x 1 x S x S image for
    compensation) to the N x S x S prediction."""
    acts = {} if acts is None else acts
    n, s, act = code.shape[0], spec.image_side, spec.activation
    if spec.architecture == "conditioned_ae":
        z = dense(ad.concat([code, control], axis=-1), P["dec.dense.W"], P["dec.dense.b"])
    else:
        logits = acts["logits"] = _control_logits(spec, P, control)
        z = hyper_dense(code, P["hyper.W"], P["hyper.b"], logits, spec.softmax_axis)
    h = acts["dec.dense"] = ad.apply_activation(z, act)
    h = ad.reshape(h, (n,) + spec.feature_shape)
    h = acts["dec.deconv1"] = _deconv_block(h, P, "dec.deconv1", act)
    h = _deconv_block(h, P, "dec.deconv2", "sigmoid")
    acts["out"] = ad.reshape(h, (n, s, s))
    return acts["out"]


def trace(spec: ModelSpec, P: Mapping[str, Tensor], x: Tensor, phi: Optional[Tensor]) -> dict[str, Tensor]:
    """Run the graph on a batch (N x S x S) and return every named activation;
    ``out`` holds the prediction."""
    n, s = x.shape[0], spec.image_side
    acts: dict[str, Tensor] = {}
    if spec.architecture == "simple_hypernet":
        logits = acts["logits"] = _control_logits(spec, P, phi)
        z = hyper_dense(ad.reshape(x, (n, s * s)), P["core.W"], P["core.b"], logits, spec.softmax_axis)
        acts["out"] = ad.reshape(ad.apply_activation(z, "sigmoid"), (n, s, s))
        return acts
    x4 = ad.reshape(x, (n, 1, s, s))
    code = encode(spec, P, x4, acts)
    decode(spec, P, code, x4 if spec.architecture == "compensation_hypernet" else phi, acts)
    return acts


def _check_inputs(spec: ModelSpec, x: np.ndarray, phi) -> tuple[np.ndarray, Optional[np.ndarray], bool]:
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 2
    if single:
        x = x[None]
    s = spec.image_side
    if x.ndim != 3 or x.shape[1:] != (s, s):
        raise DimensionError(f"input must be {s}x{s} or Nx{s}x{s}, got {x.shape}")
    if spec.control_dim == 0:
        if phi is not None and np.size(phi) != 0:
            raise ContractError(f"{spec.architecture} takes no control vector")
        return x, None, single
    if phi is None:
        raise ContractError(f"{spec.architecture} needs a control vector of length {spec.control_dim}")
    phi = np.asarray(phi, dtype=np.float64).reshape(len(x), -1) if np.ndim(phi) > 1 else \
        np.broadcast_to(np.asarray(phi, dtype=np.float64), (len(x), np.size(phi)))
    if phi.shape[1] != spec.control_dim:
        raise DimensionError(f"control vector must have length {spec.control_dim}, got {phi.shape[1]}")
    return x, np.ascontiguousarray(phi), single


def model_graph(model: Model, P: Mapping[str, Tensor], x: np.ndarray, phi=None) -> dict[str, Tensor]:
    x, phi, _ = _check_inputs(model.spec, x, phi)
    return trace(model.spec, P, Tensor(x), None if phi is None else Tensor(phi))


def forward(model: Model, x, phi=None) -> np.ndarray:
    """Predict one image (S x S) or a batch (N x S x S)."""
    xb, phib, single = _check_inputs(model.spec, x, phi)
    out = trace(model.spec, model.bind(None), Tensor(xb), None if phib is None else Tensor(phib))["out"].data
    return out[0] if single else out


def modulation_gates(model: Model, x=None, phi=None) -> np.ndarray:
    """The N x out x in softmax gates the control branch produces."""
    spec = model.spec
    if spec.architecture == "conditioned_ae":
        raise ContractError("conditioned_ae has no modulated layer")
    P = model.bind(None)
    if spec.architecture == "compensation_hypernet":
        xb, _, _ = _check_inputs(spec, x, None)
        u = Tensor(xb.reshape(len(xb), 1, spec.image_side, spec.image_side))
    else:
        if phi is None:
            raise ContractError("control vector required")
        u = Tensor(np.atleast_2d(np.asarray(phi, dtype=np.float64)))
    out, inn = spec.modulated_shape()
    return modulation(_control_logits(spec, P, u), out, inn, spec.softmax_axis).data


__all__ = [
    "CONTROL",
    "CORE",
    "PLAIN",
    "HyperDenseLayer",
    "Model",
    "build_model",
    "decode",
    "dense",
    "encode",
    "forward",
    "hyper_dense",
    "init_params",
    "model_graph",
    "modulation",
    "modulation_gates",
    "trace",
]
