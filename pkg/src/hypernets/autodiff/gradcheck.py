"""Central-difference gradient checking."""

from __future__ import annotations

from typing import Callable, Optional, Sequence

import numpy as np

from .tape import Tape, Tensor


def analytic_grads(f: Callable[..., Tensor], inputs: Sequence[np.ndarray]) -> list[np.ndarray]:
    tape = Tape()
    xs = [tape.variable(x) for x in inputs]
    out = f(*xs)
    tape.backward(out)
    return [tape.grad(x) for x in xs]


def sample_coords(inputs: Sequence[np.ndarray], max_coords: Optional[int], seed: int = 0) -> list[np.ndarray]:
    """Flat indices to probe per input: all of them, or at most ``max_coords``."""
    rng = np.random.default_rng(seed)
    out = []
    for x in inputs:
        n = int(np.size(x))
        if max_coords is None or n <= max_coords:
            out.append(np.arange(n))
        else:
            out.append(np.sort(rng.choice(n, size=max_coords, replace=False)))
    return out


def numeric_grads(f: Callable[..., Tensor], inputs: Sequence[np.ndarray], eps: float,
                  coords: Optional[Sequence[np.ndarray]] = None) -> list[np.ndarray]:
    """Central differences; coordinates outside ``coords`` are left at zero."""
    base = [np.array(x, dtype=np.float64) for x in inputs]
    coords = coords if coords is not None else sample_coords(base, None)
    result = []
    for i, x in enumerate(base):
        g = np.zeros_like(x)
        flat = x.reshape(-1)
        for j in coords[i]:
            orig = flat[j]
            flat[j] = orig + eps
            hi = f(*[Tensor(b) for b in base]).data.item()
            flat[j] = orig - eps
            lo = f(*[Tensor(b) for b in base]).data.item()
            flat[j] = orig
            g.reshape(-1)[j] = (hi - lo) / (2.0 * eps)
        result.append(g)
    return result


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    if a.size == 0:
        return 0.0
    return float(np.max(np.abs(a - b) / np.maximum(1e-8, np.abs(a) + np.abs(b))))


def grad_check(f: Callable[..., Tensor], inputs: Sequence[np.ndarray], eps: float = 1e-5,
               max_coords: Optional[int] = None, seed: int = 0) -> float:
    """Max relative error between tape gradients of scalar ``f`` and central
    differences, over every coordinate of every input (or a seeded sample of
    ``max_coords`` per input).

    Never raises on a mismatch; a non-finite comparison reports ``inf``.
    """
    coords = sample_coords(inputs, max_coords, seed)
    try:
        ana = analytic_grads(f, inputs)
        num = numeric_grads(f, inputs, eps, coords)
    except FloatingPointError:
        return float("inf")
    errs = [relative_error(a.reshape(-1)[c], n.reshape(-1)[c]) for a, n, c in zip(ana, num, coords)]
    worst = max(errs, default=0.0)
    return worst if np.isfinite(worst) else float("inf")
