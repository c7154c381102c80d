"""Minibatch Adam over every parameter of a model, plus evaluation."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Optional

import numpy as np

from . import autodiff as ad
from .autodiff import ContractError, Tape
from .data import CONTROL_DIM, Dataset
from .models import Model, model_graph

NUM_CLASSES = 10


class DivergenceError(RuntimeError):
    """Raised when a training loss becomes NaN or infinite."""

    def __init__(self, epoch: int, step: int, value: float):
        super().__init__(f"loss became {value} at epoch {epoch}, step {step}")
        self.epoch, self.step, self.value = epoch, step, value


@dataclass(frozen=True)
class OptimConfig:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    batch_size: int = 32
    epochs: int = 10
    shuffle_seed: int = 0

    def __post_init__(self):
        # lr 0 is allowed: it freezes the model and is useful as a control run
        if not self.learning_rate >= 0 or not math.isfinite(self.learning_rate):
            raise ContractError(f"learning_rate must be finite and >= 0, got {self.learning_rate}")
        for name in ("beta1", "beta2"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ContractError(f"{name} must lie in (0, 1), got {v}")
        if self.epsilon <= 0:
            raise ContractError(f"epsilon must be > 0, got {self.epsilon}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")


@dataclass
class OptimState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, params: Mapping[str, np.ndarray]) -> "OptimState":
        return cls({k: np.zeros_like(p) for k, p in params.items()}, {k: np.zeros_like(p) for k, p in params.items()})


def adam_step(params: dict[str, np.ndarray], grads: Mapping[str, np.ndarray], state: OptimState,
              cfg: OptimConfig) -> None:
    """Update ``params`` and ``state`` in place."""
    if set(grads) != set(params) or set(state.m) != set(params):
        raise ContractError("params, grads and optimizer state must share the same keys")
    for k, p in params.items():
        if grads[k].shape != p.shape or state.m[k].shape != p.shape:
            raise ContractError(f"{k}: shape mismatch {p.shape} vs grad {grads[k].shape}")
    state.t += 1
    b1, b2 = cfg.beta1, cfg.beta2
    c1, c2 = 1.0 - b1 ** state.t, 1.0 - b2 ** state.t
    for k, p in params.items():
        g, m, v = grads[k], state.m[k], state.v[k]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if cfg.learning_rate:
            denom = np.sqrt(v / c2)
            denom += cfg.epsilon
            step = m / c1
            step *= cfg.learning_rate
            step /= denom
            p -= step


@dataclass
class EvalResult:
    mean: float
    per_class: dict[int, float]
    counts: dict[int, int]
    per_sample: np.ndarray = field(repr=False)


@dataclass
class LossHistory:
    train: list[float] = field(default_factory=list)
    test: list[float] = field(default_factory=list)
    per_class: dict[int, list[float]] = field(default_factory=dict)

    def append(self, train_loss: float, result: EvalResult) -> None:
        epoch = len(self.train)
        self.train.append(train_loss)
        self.test.append(result.mean)
        for c, v in result.per_class.items():
            self.per_class.setdefault(c, [math.nan] * epoch).append(v)
        for c, series in self.per_class.items():
            if len(series) == epoch:
                series.append(math.nan)

    @property
    def epochs(self) -> int:
        return len(self.train)

    def to_csv(self) -> str:
        buf = io.StringIO()
        header = ["epoch", "train_loss", "test_loss"] + [f"class_{c}" for c in range(NUM_CLASSES)]
        buf.write(",".join(header) + "\n")
        for e in range(self.epochs):
            row = [str(e + 1), _fmt(self.train[e]), _fmt(self.test[e])]
            for c in range(NUM_CLASSES):
                series = self.per_class.get(c)
                row.append("" if series is None or math.isnan(series[e]) else _fmt(series[e]))
            buf.write(",".join(row) + "\n")
        return buf.getvalue()

    def write_csv(self, path) -> None:
        Path(path).write_text(self.to_csv())

    @classmethod
    def from_csv(cls, text: str) -> "LossHistory":
        lines = text.strip().splitlines()
        hist = cls()
        for line in lines[1:]:
            cells = line.split(",")
            hist.train.append(float(cells[1]))
            hist.test.append(float(cells[2]))
            for c, cell in enumerate(cells[3:]):
                hist.per_class.setdefault(c, []).append(float(cell) if cell else math.nan)
        hist.per_class = {c: s for c, s in hist.per_class.items() if not all(math.isnan(v) for v in s)}
        return hist


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def check_compatible(model: Model, data: Dataset) -> None:
    spec = model.spec
    want = CONTROL_DIM.get(data.task)
    if want is None:
        raise ContractError(f"unknown task {data.task!r}")
    comp_arch = spec.architecture == "compensation_hypernet"
    if comp_arch != (data.task == "compensation"):
        raise ContractError(f"{spec.architecture} cannot be trained on the {data.task} task")
    if spec.control_dim != want:
        raise ContractError(f"{data.task} needs control_dim {want}, model has {spec.control_dim}")
    if data.side != spec.image_side:
        raise ContractError(f"dataset side {data.side} differs from model side {spec.image_side}")


def _phi(data: Dataset, idx) -> Optional[np.ndarray]:
    return data.phi[idx] if data.control_dim else None


def evaluate(model: Model, data: Dataset, batch_size: int = 64) -> EvalResult:
    """Mean per-sample MSE and per-class means; the model is not touched."""
    if len(data) == 0:
        raise ContractError("cannot evaluate on an empty dataset")
    check_compatible(model, data)
    P = model.bind(None)
    per_sample = np.empty(len(data))
    for lo in range(0, len(data), batch_size):
        sl = slice(lo, lo + batch_size)
        pred = model_graph(model, P, data.inputs[sl], _phi(data, sl))["out"].data
        per_sample[sl] = ((pred - data.targets[sl]) ** 2).mean(axis=(1, 2))
    per_class, counts = {}, {}
    for c in np.unique(data.labels):
        sel = per_sample[data.labels == c]
        per_class[int(c)] = float(sel.mean())
        counts[int(c)] = int(sel.size)
    return EvalResult(float(per_sample.mean()), per_class, counts, per_sample)


def train_step(model: Model, x: np.ndarray, target: np.ndarray, phi: Optional[np.ndarray], state: OptimState,
               cfg: OptimConfig) -> float:
    tape = Tape()
    P = model.bind(tape)
    pred = model_graph(model, P, x, phi)["out"]
    loss = ad.mse_loss(pred, ad.const(target))
    tape.backward(loss)
    grads = {k: tape.grad(t) for k, t in P.items()}
    adam_step(model.params, grads, state, cfg)
    return float(loss.data)


EpochCallback = Callable[[int, float, EvalResult], None]


def train(model: Model, train_set: Dataset, test_set: Dataset, cfg: OptimConfig,
          on_epoch: Optional[EpochCallback] = None, state: Optional[OptimState] = None) -> tuple[Model, LossHistory]:
    """Train ``model`` in place; returns it with the per-epoch history."""
    check_compatible(model, train_set)
    check_compatible(model, test_set)
    if len(train_set) == 0:
        raise ContractError("training set is empty")
    state = state or OptimState.zeros_like(model.params)
    history = LossHistory()
    n = len(train_set)
    for epoch in range(cfg.epochs):
        order = np.random.default_rng([cfg.shuffle_seed, epoch]).permutation(n)
        total = 0.0
        for step, lo in enumerate(range(0, n, cfg.batch_size)):
            idx = order[lo:lo + cfg.batch_size]
            loss = train_step(model, train_set.inputs[idx], train_set.targets[idx], _phi(train_set, idx), state, cfg)
            if not math.isfinite(loss):
                raise DivergenceError(epoch + 1, step, loss)
            total += loss * len(idx)
        result = evaluate(model, test_set)
        if not math.isfinite(result.mean):
            raise DivergenceError(epoch + 1, -1, result.mean)
        history.append(total / n, result)
        if on_epoch is not None:
            on_epoch(epoch + 1, total / n, result)
    return model, history


__all__ = [
    "NUM_CLASSES",
    "DivergenceError",
    "EvalResult",
    "LossHistory",
    "OptimConfig",
    "OptimState",
    "adam_step",
    "check_compatible",
    "evaluate",
    "train",
    "train_step",
]
