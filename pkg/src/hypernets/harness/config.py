"""Experiment configuration: one YAML file fully determines a run."""

from __future__ import annotations

from importlib import resources
from pathlib import Path
from typing import Literal, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from ..data import AffineRanges, AnglePolicy, AngleRule
from ..models import ModelSpec, SpecError, match_latent_budget, parameter_count
from ..trainer import OptimConfig

EXPERIMENTS = ("rotation_discrete", "rotation_continuous", "affine", "compensation")
TASK_OF = {"rotation_discrete": "rotation", "rotation_continuous": "rotation", "affine": "affine",
           "compensation": "compensation"}


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class AngleRuleConfig(_Strict):
    mode: Literal["discrete_set", "continuous_range"] = Field(description="discrete_set or continuous_range")
    values: list[float] = Field(default_factory=list, description="angles in degrees for discrete_set")
    range: tuple[float, float] = Field((0.0, 360.0), description="[lo, hi] degrees for continuous_range")

    def build(self) -> AngleRule:
        return AngleRule(self.mode, tuple(self.values), tuple(self.range))


class AnglesConfig(_Strict):
    train: AngleRuleConfig = Field(description="angle rule for training samples")
    test: AngleRuleConfig = Field(AngleRuleConfig(mode="continuous_range"),
                                  description="angle rule for test samples")
    overrides: dict[int, AngleRuleConfig] = Field(default_factory=dict,
                                                  description="per-class training rule, keyed by class label")

    @field_validator("overrides")
    @classmethod
    def _labels(cls, v):
        bad = [k for k in v if not 0 <= k <= 9]
        if bad:
            raise ValueError(f"override class labels must lie in 0..9, got {bad}")
        return v

    def train_policy(self) -> AnglePolicy:
        return AnglePolicy(self.train.build(), {k: r.build() for k, r in sorted(self.overrides.items())})

    def test_policy(self) -> AnglePolicy:
        return AnglePolicy(self.test.build())


class AffineConfig(_Strict):
    rotation_deg: tuple[float, float] = Field((-30.0, 30.0), description="rotation range, degrees")
    scale: tuple[float, float] = Field((0.8, 1.2), description="per-axis scale range")
    shear: tuple[float, float] = Field((-0.2, 0.2), description="shear range")
    translation: Optional[tuple[float, float]] = Field(None, description="pixels; default +-side/9")

    def build(self, side: int) -> AffineRanges:
        t = self.translation if self.translation is not None else (-side / 9.0, side / 9.0)
        r = AffineRanges(tuple(self.rotation_deg), tuple(self.scale), tuple(self.shear), tuple(t))
        r.validate()
        return r


class DataConfig(_Strict):
    source: Literal["synthetic", "idx"] = Field("synthetic", description="synthetic glyphs or IDX files")
    idx_images: Optional[Path] = Field(None, description="IDX image file (source: idx)")
    idx_labels: Optional[Path] = Field(None, description="IDX label file (source: idx)")
    idx_test_images: Optional[Path] = Field(None, description="IDX images for the test split; default idx_images")
    idx_test_labels: Optional[Path] = Field(None, description="IDX labels for the test split")
    image_side: int = Field(16, ge=4, description="image side in pixels")
    glyphs_per_class: int = Field(200, ge=1, description="synthetic training glyphs per class")
    test_glyphs_per_class: int = Field(20, ge=1, description="synthetic test glyphs per class")
    train_size: int = Field(2000, ge=1, description="training samples")
    test_size: int = Field(500, ge=1, description="test samples")
    seed: int = Field(0, ge=0, description="glyph and sample seed (independent of the master seed)")
    held_out_classes: list[int] = Field(default_factory=list, description="classes excluded from training")
    angles: Optional[AnglesConfig] = Field(None, description="rotation/compensation angle policy")
    affine: AffineConfig = Field(AffineConfig(), description="affine parameter ranges")
    train_cache: Optional[Path] = Field(None, description="HYPD file to load instead of generating train data")
    test_cache: Optional[Path] = Field(None, description="HYPD file to load instead of generating test data")

    @field_validator("held_out_classes")
    @classmethod
    def _held(cls, v):
        bad = [c for c in v if not 0 <= c <= 9]
        if bad:
            raise ValueError(f"class labels must lie in 0..9, got {bad}")
        if len(set(v)) >= 10:
            raise ValueError("cannot hold out every class")
        return sorted(set(v))

    @model_validator(mode="after")
    def _idx_paths(self):
        if self.source == "idx" and (self.idx_images is None or self.idx_labels is None):
            raise ValueError("source idx needs idx_images and idx_labels")
        return self


class ModelConfig(_Strict):
    architecture: Literal["simple_hypernet", "deep_hypernet", "conditioned_ae", "compensation_hypernet"] = \
        Field(description="network family")
    latent: Union[int, Literal["match"]] = Field(16, description="latent width; 'match' solves it so a "
                                                 "conditioned_ae matches the reference deep_hypernet budget")
    reference_latent: int = Field(16, ge=1, description="deep_hypernet latent used by latent: match")
    conv_channels: tuple[int, int] = Field((8, 16), description="encoder conv channels")
    kernel_size: int = Field(3, ge=1, description="conv kernel side")
    control_hidden: list[int] = Field([16], description="hidden widths of the control branch")
    control_conv_channels: tuple[int, int] = Field((8, 16), description="compensation control conv channels")
    softmax_axis: Literal["row", "column", "flat"] = Field("row", description="modulation softmax axis")
    activation: Literal["relu", "tanh", "sigmoid"] = Field("relu", description="hidden activation")
    control_activation: Literal["relu", "tanh", "sigmoid"] = Field("tanh", description="control branch activation")


class OptimSection(_Strict):
    learning_rate: float = Field(1e-3, ge=0, description="Adam step size")
    beta1: float = Field(0.9, gt=0, lt=1, description="Adam first-moment decay")
    beta2: float = Field(0.999, gt=0, lt=1, description="Adam second-moment decay")
    epsilon: float = Field(1e-8, gt=0, description="Adam denominator guard")
    batch_size: int = Field(32, ge=1, description="minibatch size")
    epochs: int = Field(30, ge=0, description="passes over the training set")


class OutputConfig(_Strict):
    dir: Path = Field(Path("runs/out"), description="directory receiving every artifact")
    grid_rows: int = Field(8, ge=1, description="rows per comparison grid")
    grid_pairs: int = Field(4, ge=1, description="image pairs per grid row")


class ExperimentConfig(_Strict):
    experiment: Literal["rotation_discrete", "rotation_continuous", "affine", "compensation"] = \
        Field(description="experiment family")
    seed: int = Field(0, ge=0, description="master seed: model init and shuffling")
    model: ModelConfig
    data: DataConfig = DataConfig()
    optim: OptimSection = OptimSection()
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _compatible(self):
        comp_arch = self.model.architecture == "compensation_hypernet"
        if comp_arch != (self.experiment == "compensation"):
            raise ValueError(f"model.architecture {self.model.architecture} is incompatible with "
                             f"experiment {self.experiment}")
        if self.experiment != "affine" and self.data.angles is None:
            raise ValueError(f"data.angles is required for {self.experiment}")
        if self.model.latent == "match" and self.model.architecture != "conditioned_ae":
            raise ValueError("model.latent 'match' only applies to conditioned_ae")
        return self

    @property
    def task(self) -> str:
        return TASK_OF[self.experiment]

    @property
    def control_dim(self) -> int:
        return {"rotation": 2, "affine": 6, "compensation": 0}[self.task]

    def reference_spec(self) -> ModelSpec:
        m = self.model
        return ModelSpec("deep_hypernet", image_side=self.data.image_side, control_dim=self.control_dim,
                         conv_channels=m.conv_channels, kernel_size=m.kernel_size, latent=m.reference_latent,
                         control_hidden=tuple(m.control_hidden), softmax_axis=m.softmax_axis,
                         activation=m.activation, control_activation=m.control_activation, init_seed=self.seed)

    def model_spec(self) -> ModelSpec:
        m = self.model
        base = dict(image_side=self.data.image_side, control_dim=self.control_dim, conv_channels=m.conv_channels,
                    kernel_size=m.kernel_size, control_hidden=tuple(m.control_hidden),
                    control_conv_channels=m.control_conv_channels, softmax_axis=m.softmax_axis,
                    activation=m.activation, control_activation=m.control_activation, init_seed=self.seed)
        try:
            if m.latent == "match":
                target = parameter_count(self.reference_spec())
                return match_latent_budget(ModelSpec(m.architecture, latent=1, **base), target).spec
            return ModelSpec(m.architecture, latent=m.latent, **base)
        except SpecError as exc:
            raise ConfigError(f"model: {exc}") from None

    def optim_config(self) -> OptimConfig:
        o = self.optim
        return OptimConfig(o.learning_rate, o.beta1, o.beta2, o.epsilon, o.batch_size, o.epochs, self.seed)

    def with_overrides(self, seed: Optional[int] = None, out: Optional[Path] = None) -> "ExperimentConfig":
        cfg = self
        if seed is not None:
            cfg = cfg.model_copy(update={"seed": seed})
        if out is not None:
            cfg = cfg.model_copy(update={"output": cfg.output.model_copy(update={"dir": Path(out)})})
        return cfg


def _format_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "; ".join(lines)


def parse_config(raw: dict) -> ExperimentConfig:
    if not isinstance(raw, dict):
        raise ConfigError("<root>: config must be a mapping")
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


PRESETS = ("rotation_discrete_hypernet", "rotation_discrete_ae", "rotation_continuous_hypernet",
           "rotation_continuous_ae", "affine_hypernet", "affine_ae", "compensation_hypernet")


def preset_text(name: str) -> str:
    if name not in PRESETS:
        raise ConfigError(f"config: no preset named {name!r}; known: {', '.join(PRESETS)}")
    return resources.files("hypernets.harness").joinpath("presets", f"{name}.yaml").read_text()


def load_config(ref: Union[str, Path]) -> ExperimentConfig:
    """Load a YAML file, or a bundled preset by name."""
    path = Path(ref)
    if path.is_file():
        text = path.read_text()
    elif str(ref) in PRESETS:
        text = preset_text(str(ref))
    else:
        raise ConfigError(f"config: {ref} is neither a file nor a preset name")
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config: YAML parse error: {exc}") from None
    return parse_config(raw)


def config_key_docs() -> list[str]:
    """Flattened ``key: description`` lines for every config field."""
    out = []

    def walk(model: type[BaseModel], prefix: str):
        for name, f in model.model_fields.items():
            key = f"{prefix}{name}"
            ann = f.annotation
            sub = ann if isinstance(ann, type) and issubclass(ann, BaseModel) else None
            if sub is None:
                for arg in getattr(ann, "__args__", ()):
                    if isinstance(arg, type) and issubclass(arg, BaseModel):
                        sub = arg
            if sub is not None and f.description is None:
                walk(sub, key + ".")
                continue
            out.append(f"{key}: {f.description or ''}")
            if sub is not None:
                walk(sub, key + ".")

    walk(ExperimentConfig, "")
    return out


__all__ = [
    "EXPERIMENTS",
    "PRESETS",
    "ConfigError",
    "ExperimentConfig",
    "config_key_docs",
    "load_config",
    "parse_config",
    "preset_text",
]
