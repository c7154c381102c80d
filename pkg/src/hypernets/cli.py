"""Command-line entry point.

Exit codes: 0 success, 1 check failure, 2 input or configuration error,
3 numerical divergence during training.
"""

from __future__ import annotations

import logging
import sys
from pathlib import Path
from typing import Optional

import click

from .autodiff import ContractError, DimensionError
from .data import DatasetFormatError, IdxFormatError, load_dataset, save_dataset
from .harness.config import PRESETS, ConfigError, ExperimentConfig, config_key_docs, load_config
from .harness.gradsuite import run_suite
from .harness.runner import build_split, comparison_grid, eval_csv, run_experiment
from .models import ModelFormatError, SpecError, load_model
from .trainer import DivergenceError, check_compatible, evaluate

EXIT_OK, EXIT_CHECK, EXIT_INPUT, EXIT_DIVERGED = 0, 1, 2, 3

INPUT_ERRORS = (ConfigError, ContractError, DimensionError, SpecError, ModelFormatError, DatasetFormatError,
                IdxFormatError, FileNotFoundError, IsADirectoryError, PermissionError)


class _Fail(click.ClickException):
    def __init__(self, message: str, code: int):
        super().__init__(message)
        self.exit_code = code


def _guard(fn):
    """Translate library errors into the documented exit codes."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except DivergenceError as exc:
            raise _Fail(f"diverged: {exc}", EXIT_DIVERGED) from None
        except INPUT_ERRORS as exc:
            raise _Fail(str(exc), EXIT_INPUT) from None

    return wrapper


def _key_help() -> str:
    lines = ["\b", "Config keys (YAML):"] + [f"  {line}" for line in config_key_docs()]
    lines += ["", "\b", "Bundled presets (pass the name to --config):"] + [f"  {p}" for p in PRESETS]
    return "\n".join(lines)


def _load(config: str, seed: Optional[int] = None, out: Optional[Path] = None) -> ExperimentConfig:
    return load_config(config).with_overrides(seed=seed, out=out)


def _dataset(data: Optional[Path], config: Optional[str], split: str):
    if (data is None) == (config is None):
        raise ConfigError("data: pass exactly one of --data (HYPD file) or --config (regenerate a split)")
    if data is not None:
        return load_dataset(data)
    return build_split(_load(config), split)


@click.group(epilog=_key_help())
@click.option("-v", "--verbose", is_flag=True, help="Log per-epoch progress to stderr.")
def main(verbose: bool):
    """Hypernetworks with softmax-gated weight modulation: data, training and checks."""
    logging.basicConfig(level=logging.INFO if verbose else logging.WARNING, format="%(message)s",
                        stream=sys.stderr)


@main.command()
@click.option("--eps", default=1e-5, show_default=True, help="Central-difference step.")
@click.option("--tolerance", "--tol", default=1e-4, show_default=True, help="Max allowed relative error.")
@click.option("--seed", default=None, type=int, help="Run a single seed instead of 0, 1 and 2.")
def gradcheck(eps: float, tolerance: float, seed: Optional[int]):
    """Finite-difference check of every autodiff op and a full model loss."""
    seeds = (seed,) if seed is not None else (0, 1, 2)
    results = run_suite(eps, seeds)
    for r in results:
        status = "ok" if r.passed(tolerance) else "FAIL"
        click.echo(f"{r.name:20s} max_rel_err={r.max_error:.3e}  {status}")
    worst = max(results, key=lambda r: r.max_error)
    if not worst.passed(tolerance):
        raise _Fail(f"gradient check failed; worst offender {worst.name} ({worst.max_error:.3e} >= {tolerance:g})",
                    EXIT_CHECK)
    click.echo(f"all {len(results)} checks below {tolerance:g}")


@main.command("gen-data", epilog=_key_help())
@click.option("--config", required=True, help="YAML config file or preset name.")
@click.option("--out", type=click.Path(path_type=Path), required=True, help="HYPD file to write.")
@click.option("--split", type=click.Choice(["train", "test"]), default="train", show_default=True)
@click.option("--seed", default=None, type=int, help="Override data.seed.")
@click.option("--count", default=None, type=int, help="Override the split size.")
@_guard
def gen_data(config: str, out: Path, split: str, seed: Optional[int], count: Optional[int]):
    """Generate a dataset split and cache it as a HYPD file."""
    cfg = load_config(config)
    if seed is not None:
        cfg = cfg.model_copy(update={"data": cfg.data.model_copy(update={"seed": seed})})
    if count is not None and count < 1:
        raise ConfigError(f"count: must be >= 1, got {count}")
    ds = build_split(cfg, split, count)
    save_dataset(ds, out)
    click.echo(f"samples: {len(ds)}")
    click.echo(f"provenance_hash: {ds.provenance_hash()}")
    click.echo(f"pixel_hash: {ds.pixel_hash()}")


@main.command(epilog=_key_help())
@click.option("--config", required=True, help="YAML config file or preset name.")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="Override output.dir.")
@click.option("--seed", default=None, type=int, help="Override the master seed.")
@_guard
def run(config: str, out: Optional[Path], seed: Optional[int]):
    """Train one configured experiment and write its artifacts."""
    cfg = _load(config, seed, out)
    result = run_experiment(cfg)
    click.echo(result.paths["summary"].read_text(), nl=False)
    click.echo(f"artifacts: {cfg.output.dir}")


@main.command("eval")
@click.option("--model", "model_path", type=click.Path(path_type=Path), required=True, help="HYPN model file.")
@click.option("--data", type=click.Path(path_type=Path), default=None, help="HYPD dataset file.")
@click.option("--config", default=None, help="Regenerate the test split of this config instead of --data.")
@click.option("--out", type=click.Path(path_type=Path), default=None, help="CSV file for the losses.")
@_guard
def eval_cmd(model_path: Path, data: Optional[Path], config: Optional[str], out: Optional[Path]):
    """Mean and per-class reconstruction loss of a saved model."""
    model = load_model(model_path)
    ds = _dataset(data, config, "test")
    check_compatible(model, ds)
    res = evaluate(model, ds)
    click.echo(f"samples: {len(ds)}")
    click.echo(f"test_loss: {res.mean!r}")
    for c in sorted(res.per_class):
        click.echo(f"class_{c}: {res.per_class[c]!r}")
    if out is not None:
        out.write_text(eval_csv(res))


@main.command()
@click.option("--model", "model_path", type=click.Path(path_type=Path), required=True, help="HYPN model file.")
@click.option("--data", type=click.Path(path_type=Path), default=None, help="HYPD dataset file.")
@click.option("--config", default=None, help="Regenerate the test split of this config instead of --data.")
@click.option("--out", type=click.Path(path_type=Path), required=True, help="PGM file to write.")
@click.option("--rows", default=8, show_default=True, help="Grid rows.")
@click.option("--pairs", default=4, show_default=True, help="Image pairs per row.")
@_guard
def render(model_path: Path, data: Optional[Path], config: Optional[str], out: Path, rows: int, pairs: int):
    """Write a comparison grid: ground truth (or rotated input) beside model output."""
    if rows < 1 or pairs < 1:
        raise ConfigError("rows: --rows and --pairs must be >= 1")
    model = load_model(model_path)
    ds = _dataset(data, config, "test")
    check_compatible(model, ds)
    if rows * pairs > len(ds):
        click.echo(f"warning: only {len(ds)} samples; grid clamped", err=True)
    grid = comparison_grid(model, ds, rows, pairs)
    grid.write(out)
    h, w = grid.pixels().shape
    click.echo(f"wrote {out} ({w}x{h})")


if __name__ == "__main__":  # pragma: no cover
    main()
