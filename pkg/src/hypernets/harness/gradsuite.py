"""The registered finite-difference checks behind ``hypernets gradcheck``."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor, grad_check
from ..models import ModelSpec, build_model, trace

Case = tuple[Callable[..., Tensor], list[tuple[int, ...]]]

OP_CASES: dict[str, Case] = {
    "add": (lambda a, b: ad.sum(ad.hadamard(ad.add(a, b), ad.add(a, b))), [(3, 4), (4,)]),
    "hadamard": (lambda a, b: ad.sum(ad.hadamard(ad.hadamard(a, b), a)), [(3, 4), (3, 4)]),
    "matmul": (lambda a, b: ad.sum(ad.hadamard(ad.matmul(a, b), ad.matmul(a, b))), [(2, 3, 4), (4, 2)]),
    "transpose": (lambda a, b: ad.sum(ad.matmul(ad.transpose(a), b)), [(3, 2), (3, 4)]),
    "reshape": (lambda a: ad.sum(ad.hadamard(ad.reshape(a, (3, 2)), ad.reshape(a, (3, 2)))), [(2, 3)]),
    "concat": (lambda a, b: ad.sum(ad.hadamard(ad.concat([a, b]), ad.concat([a, b]))), [(2, 3), (2, 2)]),
    "sum": (lambda a: ad.sum(ad.hadamard(a, a)), [(3, 3)]),
    "softmax": (lambda a: ad.mse_loss(ad.softmax(a, axis=-1), Tensor(np.full((3, 4), 0.3))), [(3, 4)]),
    "conv2d": (lambda x, k: ad.sum(ad.hadamard(ad.conv2d(x, k, stride=2), ad.conv2d(x, k, stride=2))),
               [(2, 5, 5), (3, 2, 3, 3)]),
    "conv2d_transpose": (lambda y, k: ad.mse_loss(ad.conv2d_transpose(y, k, stride=2), Tensor(np.zeros((2, 6, 6)))),
                         [(3, 3, 3), (3, 2, 3, 3)]),
    "relu": (lambda x: ad.sum(ad.hadamard(ad.apply_activation(x, "relu"), x)), [(4, 4)]),
    "tanh": (lambda x: ad.sum(ad.apply_activation(x, "tanh")), [(4, 4)]),
    "sigmoid": (lambda x: ad.sum(ad.apply_activation(x, "sigmoid")), [(4, 4)]),
    "mse_loss": (lambda p, t: ad.mse_loss(p, t), [(3, 3), (3, 3)]),
}

COMPOSITE = "deep_hypernet_loss"
SEEDS = (0, 1, 2)


def _composite_case(seed: int) -> tuple[Callable[..., Tensor], list[np.ndarray]]:
    # tanh hidden units keep the loss smooth so central differences are trustworthy
    spec = ModelSpec("deep_hypernet", image_side=8, control_dim=2, latent=4, control_hidden=(3,),
                     conv_channels=(2, 3), activation="tanh", init_seed=seed)
    model = build_model(spec)
    rng = np.random.default_rng(100 + seed)
    for name in model.names("control"):
        model.params[name] = model.params[name] + 0.3 * rng.normal(size=model.params[name].shape)
    x, target, phi = rng.random((2, 8, 8)), rng.random((2, 8, 8)), rng.normal(size=(2, 2))
    names = model.names()

    def loss(*tensors):
        P = dict(zip(names, tensors))
        return ad.mse_loss(trace(spec, P, Tensor(x), Tensor(phi))["out"], Tensor(target))

    return loss, [model.params[n] for n in names]


@dataclass
class CheckResult:
    name: str
    max_error: float
    seconds: float

    def passed(self, tol: float) -> bool:
        return self.max_error < tol


def registered_checks() -> list[str]:
    return sorted(OP_CASES) + [COMPOSITE]


def run_check(name: str, eps: float = 1e-5, seeds=SEEDS) -> CheckResult:
    t0 = time.perf_counter()
    worst = 0.0
    for seed in seeds:
        if name == COMPOSITE:
            f, inputs = _composite_case(seed)
            err = grad_check(f, inputs, eps=eps)
        else:
            f, shapes = OP_CASES[name]
            rng = np.random.default_rng(seed)
            inputs = [rng.uniform(-1.0, 1.0, size=s) for s in shapes]
            err = grad_check(f, inputs, eps=eps)
        worst = max(worst, err)
    return CheckResult(name, worst, time.perf_counter() - t0)


def run_suite(eps: float = 1e-5, seeds=SEEDS) -> list[CheckResult]:
    return [run_check(name, eps, seeds) for name in registered_checks()]
