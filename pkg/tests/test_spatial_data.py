import gzip
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypernets.autodiff import ContractError
from hypernets.data import (
    EIGHT_DIRECTIONS,
    Affine,
    AffineRanges,
    AnglePolicy,
    DatasetFormatError,
    IdxFormatError,
    affine_transform,
    dataset_from_bytes,
    dataset_to_bytes,
    encode_angle,
    ground_truth,
    load_idx,
    make_dataset,
    range_rule,
    read_idx_images,
    read_idx_labels,
    render_glyph,
    rotate_image,
    sample_affine_params,
    synth_glyphs,
    synthetic_source,
)


@pytest.fixture(scope="module")
def glyphs():
    return synth_glyphs(16, per_class=3, seed=5)


def shift_oracle(img, tx, ty):
    """Translate by whole pixels: right by tx, up by ty, zero fill."""
    side = img.shape[0]
    out = np.zeros_like(img)
    for r in range(side):
        for c in range(side):
            sr, sc = r + ty, c - tx
            if 0 <= sr < side and 0 <= sc < side:
                out[r, c] = img[sr, sc]
    return out


def disc_mask(side):
    c = (side - 1) / 2
    rr, cc = np.mgrid[0:side, 0:side]
    return np.hypot(rr - c, cc - c) <= side / 2 - 1


# -- rotation ----------------------------------------------------------------


def test_rotate_zero_is_bit_exact(glyphs):
    for img in glyphs[0][:5]:
        assert np.array_equal(rotate_image(img, 0.0), img)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("side", [9, 16])
def test_rotate_right_angles_are_permutations(k, side):
    rng = np.random.default_rng(side + k)
    img = rng.uniform(0, 1, (side, side))
    np.testing.assert_allclose(rotate_image(img, 90.0 * k), np.rot90(img, k), atol=1e-12, rtol=0)


def test_rotate_round_trip_on_glyphs():
    # strokes need a few pixels of soft edge for bilinear blur to stay small,
    # so the budget is checked on full-size 28px glyphs
    images, _ = synth_glyphs(28, per_class=5, seed=5)
    mask = disc_mask(28)
    errs = [np.mean(np.abs(rotate_image(rotate_image(g, 33.0), -33.0) - g)[mask]) for g in images]
    assert np.mean(errs) < 0.02
    assert max(errs) < 0.03


def test_rotate_counterclockwise_convention():
    img = np.zeros((9, 9))
    img[4, 8] = 1.0  # right of centre
    out = rotate_image(img, 90.0)
    assert out[0, 4] == pytest.approx(1.0)  # now above centre


@given(st.floats(-720, 720, allow_nan=False))
@settings(max_examples=50, deadline=None)
def test_rotate_preserves_range(angle):
    rng = np.random.default_rng(0)
    out = rotate_image(rng.uniform(0, 1, (12, 12)), angle)
    assert np.all(np.isfinite(out)) and out.min() >= 0 and out.max() <= 1


# -- affine ------------------------------------------------------------------


def test_affine_identity_bit_exact(glyphs):
    ident = Affine(1, 0, 0, 0, 1, 0)
    for img in glyphs[0][:5]:
        assert np.array_equal(affine_transform(img, ident), img)


@pytest.mark.parametrize("tx,ty", [(1, 0), (0, 1), (-2, 3), (3, -1), (0, 0)])
def test_affine_integer_translation_matches_shift(tx, ty):
    rng = np.random.default_rng(abs(tx * 7 + ty))
    img = rng.uniform(0, 1, (10, 10))
    np.testing.assert_allclose(affine_transform(img, Affine(1, 0, tx, 0, 1, ty)), shift_oracle(img, tx, ty),
                               atol=1e-12, rtol=0)


def test_affine_rotation_consistency_100_angles():
    rng = np.random.default_rng(42)
    img = rng.uniform(0, 1, (16, 16))
    for a in rng.uniform(-360, 360, 100):
        np.testing.assert_allclose(affine_transform(img, Affine.from_rotation(a)), rotate_image(img, a),
                                   atol=1e-12, rtol=0)


def test_affine_degenerate_rejected():
    with pytest.raises(ContractError):
        affine_transform(np.zeros((8, 8)), Affine(0.2, 0, 0, 0, 0.2, 0))


# -- encode_angle ------------------------------------------------------------


def test_encode_angle_values():
    r0, r90 = encode_angle(0.0), encode_angle(90.0)
    assert (r0.sin_a, r0.cos_a) == (0.0, 1.0)
    assert r90.sin_a == 1.0 and abs(r90.cos_a) < 1e-16


@given(st.floats(-1e4, 1e4, allow_nan=False))
def test_encode_angle_unit_norm(a):
    r = encode_angle(a)
    assert abs(r.sin_a ** 2 + r.cos_a ** 2 - 1) < 1e-12


# -- affine sampler ----------------------------------------------------------


def test_affine_sampler_identity_ranges():
    p = sample_affine_params(3, AffineRanges.identity())
    assert p == Affine(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)


def test_affine_sampler_deterministic():
    r = AffineRanges.default(16)
    assert sample_affine_params(11, r) == sample_affine_params(11, r)
    assert sample_affine_params(11, r) != sample_affine_params(12, r)


def test_affine_sampler_monte_carlo_determinant():
    r = AffineRanges.default(16)
    rng = np.random.default_rng(0)
    dets = np.array([sample_affine_params(rng, r).determinant for _ in range(10_000)])
    assert np.all(dets > 0.1)


def test_affine_ranges_reject_degenerate_scale():
    with pytest.raises(ContractError):
        sample_affine_params(0, AffineRanges(scale=(0.3, 1.0)))


# -- glyphs ------------------------------------------------------------------


def test_glyphs_deterministic():
    a, la = synth_glyphs(16, per_class=4, seed=9)
    b, lb = synth_glyphs(16, per_class=4, seed=9)
    assert np.array_equal(a, b) and np.array_equal(la, lb)
    c, _ = synth_glyphs(16, per_class=4, seed=10)
    assert not np.array_equal(a, c)


@pytest.mark.parametrize("side", [8, 16, 28])
def test_nine_is_six_rotated_half_turn(side):
    np.testing.assert_allclose(render_glyph(9, side), rotate_image(render_glyph(6, side), 180.0), atol=1e-12, rtol=0)


def test_glyph_intensities_in_unit_range(glyphs):
    images, labels = glyphs
    assert images.min() >= 0 and images.max() <= 1
    assert sorted(set(labels.tolist())) == list(range(10))


def test_glyph_min_side():
    with pytest.raises(ValueError):
        synth_glyphs(7)


# -- datasets ----------------------------------------------------------------


@pytest.fixture(scope="module")
def source():
    return synthetic_source(16, per_class=6, seed=2)


def test_dataset_count_and_ground_truth(source):
    for task, policy in (("rotation", AnglePolicy.continuous()), ("affine", AffineRanges.default(16)),
                         ("compensation", AnglePolicy.continuous())):
        ds = make_dataset(source, task, policy, 37, seed=4)
        assert len(ds) == 37
        for s in ds:
            if task == "compensation":
                assert s.phi.size == 0
                assert np.array_equal(s.x, ground_truth(task, s.target, s.angle, s.phi))
            else:
                assert np.array_equal(s.target, ground_truth(task, s.x, s.angle, s.phi))


def test_discrete_policy_angles_in_set(source):
    ds = make_dataset(source, "rotation", AnglePolicy.discrete(EIGHT_DIRECTIONS), 200, seed=1)
    assert set(ds.angles.tolist()) <= set(EIGHT_DIRECTIONS)
    assert 360.0 not in EIGHT_DIRECTIONS and len(EIGHT_DIRECTIONS) == 8


def test_per_class_override(source):
    policy = AnglePolicy.continuous(overrides={4: range_rule(0, 90), 9: range_rule(0, 90)})
    ds = make_dataset(source, "rotation", policy, 600, seed=3)
    special = np.isin(ds.labels, [4, 9])
    assert np.all((ds.angles[special] >= 0) & (ds.angles[special] <= 90))
    others = ds.angles[~special]
    assert others.min() >= 0 and others.max() < 360 and others.max() > 270


def test_rotation_phi_encodes_angle(source):
    ds = make_dataset(source, "rotation", AnglePolicy.continuous(), 20, seed=0)
    for s in ds:
        np.testing.assert_array_equal(s.phi, encode_angle(s.angle).as_vector())


def test_class_filter(source):
    ds = make_dataset(source, "rotation", AnglePolicy.continuous(), 100, seed=0, classes=[0, 2, 3])
    assert set(ds.labels.tolist()) <= {0, 2, 3}


def test_dataset_regeneration_bit_identical(source):
    a = make_dataset(source, "affine", AffineRanges.default(16), 50, seed=7)
    b = make_dataset(source, "affine", AffineRanges.default(16), 50, seed=7)
    assert a.pixel_hash() == b.pixel_hash() and a.provenance == b.provenance


def test_dataset_contract_errors(source):
    with pytest.raises(ContractError):
        make_dataset(source, "rotation", AnglePolicy.continuous(), 0, seed=0)
    with pytest.raises(ContractError):
        make_dataset(source, "affine", AnglePolicy.continuous(), 5, seed=0)
    empty = type(source)(source.images[:0], source.labels[:0], "empty")
    with pytest.raises(ContractError):
        make_dataset(empty, "rotation", AnglePolicy.continuous(), 5, seed=0)


def test_angle_policy_rejects_out_of_range():
    with pytest.raises(ContractError):
        AnglePolicy.discrete([0.0, 360.0])


def test_hypd_round_trip(source):
    ds = make_dataset(source, "affine", AffineRanges.default(16), 25, seed=8)
    raw = dataset_to_bytes(ds)
    assert raw[:4] == b"HYPD" and struct.unpack_from("<H", raw, 4)[0] == 1
    back = dataset_from_bytes(raw)
    assert back.pixel_hash() == ds.pixel_hash()
    assert back.provenance == ds.provenance and back.task == ds.task
    assert dataset_to_bytes(back) == raw


def test_hypd_rejects_corruption(source):
    raw = dataset_to_bytes(make_dataset(source, "rotation", AnglePolicy.continuous(), 3, seed=0))
    with pytest.raises(DatasetFormatError, match="bad magic"):
        dataset_from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(DatasetFormatError):
        dataset_from_bytes(raw[:-5])


# -- IDX ---------------------------------------------------------------------


def idx_bytes(magic, dims, payload):
    return struct.pack(">I", magic) + struct.pack(f">{len(dims)}I", *dims) + np.asarray(payload, dtype=np.uint8).tobytes()


def test_idx_images(tmp_path):
    payload = np.arange(7840) % 256
    p = tmp_path / "img.idx"
    p.write_bytes(idx_bytes(0x00000803, (10, 28, 28), payload))
    images = read_idx_images(p)
    assert images.shape == (10, 28, 28)
    assert images.min() >= 0 and images.max() <= 1
    assert images[0, 0, 1] == pytest.approx(1 / 255)


def test_idx_gzip_and_downsample(tmp_path):
    payload = np.full(2 * 28 * 28, 255)
    p = tmp_path / "img.idx.gz"
    p.write_bytes(gzip.compress(idx_bytes(0x00000803, (2, 28, 28), payload)))
    images = read_idx_images(p, side=16)
    assert images.shape == (2, 16, 16)
    np.testing.assert_allclose(images, 1.0, atol=1e-12)


def test_idx_area_downsample_preserves_mean(tmp_path):
    rng = np.random.default_rng(0)
    payload = rng.integers(0, 256, 28 * 28)
    p = tmp_path / "img.idx"
    p.write_bytes(idx_bytes(0x00000803, (1, 28, 28), payload))
    full = read_idx_images(p)
    small = read_idx_images(p, side=14)
    np.testing.assert_allclose(small.mean(), full.mean(), atol=1e-12)
    np.testing.assert_allclose(small[0, 0, 0], full[0, :2, :2].mean(), atol=1e-12)


def test_idx_labels_vs_images(tmp_path):
    p = tmp_path / "lab.idx"
    p.write_bytes(idx_bytes(0x00000801, (5,), [1, 2, 3, 4, 5]))
    assert read_idx_labels(p).tolist() == [1, 2, 3, 4, 5]
    with pytest.raises(IdxFormatError, match="bad magic"):
        read_idx_images(p)


def test_idx_truncated_payload(tmp_path):
    p = tmp_path / "img.idx"
    p.write_bytes(idx_bytes(0x00000803, (10, 28, 28), np.zeros(7000, dtype=int)))
    with pytest.raises(IdxFormatError, match="offset"):
        read_idx_images(p)


def test_load_idx_pairs(tmp_path):
    ip, lp = tmp_path / "i", tmp_path / "l"
    ip.write_bytes(idx_bytes(0x00000803, (3, 8, 8), np.zeros(192, dtype=int)))
    lp.write_bytes(idx_bytes(0x00000801, (3,), [7, 8, 9]))
    images, labels = load_idx(ip, lp)
    assert images.shape == (3, 8, 8) and labels.tolist() == [7, 8, 9]
