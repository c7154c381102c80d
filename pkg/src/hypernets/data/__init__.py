"""Ground-truth warps, glyph sources and dataset construction."""

from .datasets import (
    CONTROL_DIM,
    EIGHT_DIRECTIONS,
    TASKS,
    AnglePolicy,
    AngleRule,
    Dataset,
    DatasetFormatError,
    GlyphSource,
    Sample,
    dataset_from_bytes,
    dataset_to_bytes,
    ground_truth,
    idx_source,
    load_dataset,
    make_dataset,
    range_rule,
    save_dataset,
    synthetic_source,
)
from .glyphs import N_CLASSES, render_glyph, synth_glyphs
from .idx import IdxFormatError, load_idx, read_idx_images, read_idx_labels
from .warp import (
    Affine,
    AffineRanges,
    Rotation,
    TransformParams,
    affine_transform,
    apply_transform,
    encode_angle,
    rotate_image,
    sample_affine_params,
)
