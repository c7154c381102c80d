"""Declarative model description and its parameter layout."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, replace
from typing import Literal

ARCHITECTURES = ("simple_hypernet", "deep_hypernet", "conditioned_ae", "compensation_hypernet")
Architecture = Literal["simple_hypernet", "deep_hypernet", "conditioned_ae", "compensation_hypernet"]
SoftmaxAxis = Literal["row", "column", "flat"]

CORE, CONTROL, PLAIN = "core", "control", "plain"


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    architecture: Architecture
    image_side: int = 16
    control_dim: int = 2
    conv_channels: tuple[int, int] = (8, 16)
    kernel_size: int = 3
    latent: int = 32
    control_hidden: tuple[int, ...] = (16,)
    control_conv_channels: tuple[int, int] = (8, 16)
    softmax_axis: SoftmaxAxis = "row"
    activation: str = "relu"
    control_activation: str = "tanh"
    init_seed: int = 0

    def __post_init__(self):
        # tolerate lists coming from JSON / YAML
        for name in ("conv_channels", "control_hidden", "control_conv_channels"):
            object.__setattr__(self, name, tuple(int(v) for v in getattr(self, name)))
        self.validate()

    def validate(self) -> None:
        if self.architecture not in ARCHITECTURES:
            raise SpecError(f"architecture: unknown {self.architecture!r}")
        if (self.control_dim == 0) != (self.architecture == "compensation_hypernet"):
            raise SpecError(f"control_dim: must be 0 exactly for compensation_hypernet, "
                            f"got {self.control_dim} for {self.architecture}")
        if self.control_dim < 0:
            raise SpecError("control_dim: must be non-negative")
        if self.softmax_axis not in ("row", "column", "flat"):
            raise SpecError(f"softmax_axis: unknown {self.softmax_axis!r}")
        for act_name in ("activation", "control_activation"):
            if getattr(self, act_name) not in ("relu", "tanh", "sigmoid"):
                raise SpecError(f"{act_name}: unknown {getattr(self, act_name)!r}")
        if self.image_side < 4:
            raise SpecError("image_side: must be >= 4")
        widths = {"latent": (self.latent,), "conv_channels": self.conv_channels,
                  "control_hidden": self.control_hidden, "control_conv_channels": self.control_conv_channels,
                  "kernel_size": (self.kernel_size,)}
        for name, vals in widths.items():
            if any(v <= 0 for v in vals):
                raise SpecError(f"{name}: all widths must be positive, got {vals}")
        if self.architecture != "simple_hypernet":
            if self.image_side % 4:
                raise SpecError(f"deconv2: image_side {self.image_side} must be divisible by 4 so two "
                                f"stride-2 stages invert two stride-2 convolutions")
            if self.kernel_size > self.image_side // 2:
                raise SpecError(f"conv2: kernel {self.kernel_size} larger than its {self.image_side // 2}px input")

    @property
    def feature_shape(self) -> tuple[int, int, int]:
        """Encoder output (channels, h, w) after the two stride-2 convolutions."""
        q = self.image_side // 4
        return (self.conv_channels[1], q, q)

    @property
    def features(self) -> int:
        return math.prod(self.feature_shape)

    def modulated_shape(self) -> tuple[int, int]:
        """(out, in) of the weight matrix the control branch modulates."""
        if self.architecture == "simple_hypernet":
            n = self.image_side ** 2
            return (n, n)
        if self.architecture == "conditioned_ae":
            return (0, 0)
        return (self.features, self.latent)

    def to_text(self) -> str:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_text(cls, text: str) -> "ModelSpec":
        try:
            return cls(**json.loads(text))
        except (TypeError, json.JSONDecodeError) as exc:
            raise SpecError(f"unreadable model spec: {exc}") from None

    def with_(self, **changes) -> "ModelSpec":
        return replace(self, **changes)


@dataclass(frozen=True)
class ParamDecl:
    name: str
    shape: tuple[int, ...]
    tag: str
    fan_in: int = 0
    fan_out: int = 0
    bias: bool = False
    scale: float = 1.0


def _dense(prefix, n_in, n_out, tag, scale=1.0, bias_tag=None):
    return [ParamDecl(f"{prefix}.W", (n_out, n_in), tag, n_in, n_out, scale=scale),
            ParamDecl(f"{prefix}.b", (n_out,), bias_tag or tag, bias=True)]


def _conv(prefix, c_in, c_out, k, tag):
    return [ParamDecl(f"{prefix}.K", (c_out, c_in, k, k), tag, c_in * k * k, c_out * k * k),
            ParamDecl(f"{prefix}.b", (c_out, 1, 1), tag, bias=True)]


def _deconv(prefix, c_in, c_out, k, tag):
    # kernels stored F x C x k x k with F = input channels of the transpose
    return [ParamDecl(f"{prefix}.K", (c_in, c_out, k, k), tag, c_in * k * k, c_out * k * k),
            ParamDecl(f"{prefix}.b", (c_out, 1, 1), tag, bias=True)]


def _control_dense(spec: ModelSpec, n_in: int, n_logits: int) -> list[ParamDecl]:
    decls, prev = [], n_in
    for i, h in enumerate(spec.control_hidden):
        decls += _dense(f"ctrl.d{i}", prev, h, CONTROL)
        prev = h
    decls += _dense("ctrl.out", prev, n_logits, CONTROL, scale=0.1)
    return decls


def _slice_len(spec: ModelSpec) -> int:
    out, inn = spec.modulated_shape()
    return {"row": inn, "column": out, "flat": out * inn}[spec.softmax_axis]


def param_decls(spec: ModelSpec) -> list[ParamDecl]:
    """Every trainable parameter in serialization order."""
    k = spec.kernel_size
    c1, c2 = spec.conv_channels
    arch = spec.architecture
    if arch == "simple_hypernet":
        n = spec.image_side ** 2
        core = [ParamDecl("core.W", (n, n), CORE, n, n, scale=float(_slice_len(spec))),
                ParamDecl("core.b", (n,), PLAIN, bias=True)]
        return core + _control_dense(spec, spec.control_dim, n * n)

    encoder = _conv("enc.conv1", 1, c1, k, PLAIN) + _conv("enc.conv2", c1, c2, k, PLAIN)
    decoder = _deconv("dec.deconv1", c2, c1, k, PLAIN) + _deconv("dec.deconv2", c1, 1, k, PLAIN)
    f, lat = spec.features, spec.latent
    if arch == "conditioned_ae":
        return (encoder + _dense("enc.dense", f, lat, PLAIN)
                + _dense("dec.dense", lat + spec.control_dim, f, PLAIN) + decoder)

    core = (encoder + _dense("enc.dense", f, lat, PLAIN)
            + [ParamDecl("hyper.W", (f, lat), CORE, lat, f, scale=float(_slice_len(spec))),
               ParamDecl("hyper.b", (f,), PLAIN, bias=True)]
            + decoder)
    if arch == "deep_hypernet":
        return core + _control_dense(spec, spec.control_dim, f * lat)
    cc1, cc2 = spec.control_conv_channels
    q = spec.image_side // 4
    ctrl = _conv("ctrl.conv1", 1, cc1, k, CONTROL) + _conv("ctrl.conv2", cc1, cc2, k, CONTROL)
    return core + ctrl + _control_dense(spec, cc2 * q * q, f * lat)


def parameter_count(spec: ModelSpec) -> int:
    return sum(math.prod(d.shape) for d in param_decls(spec))


@dataclass
class BudgetMatch:
    spec: ModelSpec
    count: int
    target: int

    @property
    def relative_gap(self) -> float:
        return abs(self.count - self.target) / self.target


def match_latent_budget(spec: ModelSpec, target: int, max_latent: int = 4096) -> BudgetMatch:
    """Pick the latent width whose parameter count is closest to ``target``."""
    best = None
    for lat in range(1, max_latent + 1):
        cand = spec.with_(latent=lat)
        n = parameter_count(cand)
        if best is None or abs(n - target) < abs(best.count - target):
            best = BudgetMatch(cand, n, target)
        if n > target:
            break
    return best


__all__ = [
    "ARCHITECTURES",
    "CONTROL",
    "CORE",
    "PLAIN",
    "BudgetMatch",
    "ModelSpec",
    "ParamDecl",
    "SpecError",
    "match_latent_budget",
    "param_decls",
    "parameter_count",
]
