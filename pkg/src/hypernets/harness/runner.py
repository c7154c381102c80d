"""Dataset assembly, training runs and their on-disk artifacts."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from ..data import Dataset, GlyphSource, idx_source, load_dataset, make_dataset, synthetic_source
from ..models import Model, build_model, forward, save_model
from ..trainer import EvalResult, LossHistory, NUM_CLASSES, evaluate, train
from .config import ConfigError, ExperimentConfig
from .render import ComparisonGrid, paired_grid

log = logging.getLogger(__name__)

ARTIFACTS = {
    "model": "model.hypn",
    "losses": "losses.csv",
    "grid_train": "grid_train.pgm",
    "grid_test": "grid_test.pgm",
    "summary": "summary.txt",
}


def _sources(cfg: ExperimentConfig) -> tuple[GlyphSource, GlyphSource]:
    d = cfg.data
    if d.source == "synthetic":
        return (synthetic_source(d.image_side, d.glyphs_per_class, seed=2 * d.seed),
                synthetic_source(d.image_side, d.test_glyphs_per_class, seed=2 * d.seed + 1))
    train_src = idx_source(d.idx_images, d.idx_labels, side=d.image_side)
    if d.idx_test_images is None:
        return train_src, train_src
    return train_src, idx_source(d.idx_test_images, d.idx_test_labels, side=d.image_side)


def _policies(cfg: ExperimentConfig):
    if cfg.task == "affine":
        ranges = cfg.data.affine.build(cfg.data.image_side)
        return ranges, ranges
    return cfg.data.angles.train_policy(), cfg.data.angles.test_policy()


def build_split(cfg: ExperimentConfig, split: str, count: Optional[int] = None) -> Dataset:
    """Generate (or load from the configured cache) the train or test split."""
    d = cfg.data
    cache = d.train_cache if split == "train" else d.test_cache
    if cache is not None:
        ds = load_dataset(cache)
        if ds.task != cfg.task or ds.side != d.image_side:
            raise ConfigError(f"data.{split}_cache: holds a {ds.task} set at side {ds.side}, "
                              f"expected {cfg.task} at side {d.image_side}")
        return ds
    train_src, test_src = _sources(cfg)
    train_pol, test_pol = _policies(cfg)
    if split == "train":
        keep = [c for c in range(NUM_CLASSES) if c not in d.held_out_classes]
        n = d.train_size if count is None else count
        return make_dataset(train_src, cfg.task, train_pol, n, seed=2 * d.seed, classes=keep)
    if split == "test":
        n = d.test_size if count is None else count
        return make_dataset(test_src, cfg.task, test_pol, n, seed=2 * d.seed + 1)
    raise ConfigError(f"split: expected train or test, got {split!r}")


def predictions(model: Model, ds: Dataset, limit: int) -> np.ndarray:
    sl = slice(0, min(limit, len(ds)))
    return forward(model, ds.inputs[sl], ds.phi[sl] if ds.control_dim else None)


def comparison_grid(model: Model, ds: Dataset, rows: int, pairs: int) -> ComparisonGrid:
    """Odd columns: ground truth (rotated input for compensation); even: model output."""
    pred = predictions(model, ds, rows * pairs)
    if ds.task == "compensation":
        return paired_grid([ds.inputs, pred], ("rotated input", "model output"), rows, pairs)
    return paired_grid([ds.targets, pred], ("ground truth", "model output"), rows, pairs)


def copy_input_loss(ds: Dataset) -> float:
    return float(np.mean((ds.inputs - ds.targets) ** 2))


def summary_text(cfg: ExperimentConfig, model: Model, history: LossHistory, final: EvalResult,
                 test: Dataset) -> str:
    lines = [
        f"experiment: {cfg.experiment}",
        f"architecture: {model.spec.architecture}",
        f"parameters: {model.parameter_count}",
        f"seed: {cfg.seed}",
        f"epochs: {history.epochs}",
        f"final_train_loss: {history.train[-1]!r}" if history.epochs else "final_train_loss: nan",
        f"final_test_loss: {final.mean!r}",
        f"copy_input_loss: {copy_input_loss(test)!r}",
    ]
    lines += [f"test_class_{c}: {final.per_class[c]!r}" for c in sorted(final.per_class)]
    return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    model: Model
    history: LossHistory
    final: EvalResult
    train_set: Dataset
    test_set: Dataset
    paths: dict[str, Path]


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> RunResult:
    out = Path(cfg.output.dir)
    train_set = build_split(cfg, "train")
    test_set = build_split(cfg, "test")
    model = build_model(cfg.model_spec())
    log.info("training %s (%d parameters) for %d epochs", model.spec.architecture, model.parameter_count,
             cfg.optim.epochs)

    def report(epoch, train_loss, result):
        log.info("epoch %d train %.6g test %.6g", epoch, train_loss, result.mean)

    model, history = train(model, train_set, test_set, cfg.optim_config(), on_epoch=report)
    final = evaluate(model, test_set)
    paths = {k: out / v for k, v in ARTIFACTS.items()}
    if write:
        out.mkdir(parents=True, exist_ok=True)
        save_model(model, paths["model"])
        history.write_csv(paths["losses"])
        rows, pairs = cfg.output.grid_rows, cfg.output.grid_pairs
        comparison_grid(model, train_set, rows, pairs).write(paths["grid_train"])
        comparison_grid(model, test_set, rows, pairs).write(paths["grid_test"])
        paths["summary"].write_text(summary_text(cfg, model, history, final, test_set))
    return RunResult(model, history, final, train_set, test_set, paths)


def eval_csv(result: EvalResult) -> str:
    header = ["test_loss"] + [f"class_{c}" for c in range(NUM_CLASSES)]
    row = [f"{result.mean:.9g}"] + [f"{result.per_class[c]:.9g}" if c in result.per_class else ""
                                    for c in range(NUM_CLASSES)]
    return ",".join(header) + "\n" + ",".join(row) + "\n"
