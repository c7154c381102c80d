import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from hypernets import autodiff as ad
from hypernets.autodiff import ContractError, DimensionError, Tensor, grad_check
from hypernets.models import (
    CONTROL,
    CORE,
    PLAIN,
    HyperDenseLayer,
    ModelFormatError,
    ModelSpec,
    SpecError,
    build_model,
    decode,
    encode,
    forward,
    hyper_dense,
    match_latent_budget,
    model_from_bytes,
    model_to_bytes,
    modulation,
    modulation_gates,
    parameter_count,
    trace,
)

ALL = [("simple_hypernet", 2), ("deep_hypernet", 2), ("deep_hypernet", 6), ("conditioned_ae", 2),
       ("compensation_hypernet", 0)]


def small(arch, k, **kw):
    base = dict(image_side=8, control_dim=k, latent=4, control_hidden=(3,), conv_channels=(2, 3),
                control_conv_channels=(2, 2))
    base.update(kw)
    return ModelSpec(arch, **base)


def np_softmax(a, axis):
    e = np.exp(a - a.max(axis=axis, keepdims=True))
    return e / e.sum(axis=axis, keepdims=True)


# -- counting -----------------------------------------------------------------


def test_simple_count_closed_form():
    spec = ModelSpec("simple_hypernet", image_side=8, control_dim=2, control_hidden=(16,))
    expected = 64 * 64 + 64 + (2 * 16 + 16) + (16 * 4096 + 4096)
    assert parameter_count(spec) == expected
    m = build_model(spec)
    assert m.params["core.W"].shape == (64, 64)
    assert m.parameter_count == expected


@pytest.mark.parametrize("arch,k", ALL)
def test_count_equals_enumeration(arch, k):
    spec = ModelSpec(arch, control_dim=k)
    assert parameter_count(spec) == sum(p.size for p in build_model(spec).params.values())


def test_deep_count_closed_form():
    spec = ModelSpec("deep_hypernet", control_dim=2, latent=16, control_hidden=(16,))
    f = 16 * 4 * 4
    enc = (8 * 9 + 8) + (16 * 8 * 9 + 16) + (f * 16 + 16)
    core = f * 16 + f
    dec = (16 * 8 * 9 + 8) + (8 * 9 + 1)
    ctrl = (2 * 16 + 16) + (16 * f * 16 + f * 16)
    assert parameter_count(spec) == enc + core + dec + ctrl


def test_budget_match_within_five_percent():
    deep = ModelSpec("deep_hypernet", control_dim=2, latent=16)
    target = parameter_count(deep)
    match = match_latent_budget(ModelSpec("conditioned_ae", control_dim=2), target)
    assert match.relative_gap < 0.05
    assert abs(parameter_count(match.spec) - target) / target < 0.05


# -- spec validation ------------------------------------------------------------


def test_compensation_requires_zero_control():
    with pytest.raises(SpecError, match="control_dim"):
        ModelSpec("compensation_hypernet", control_dim=2)
    with pytest.raises(SpecError, match="control_dim"):
        ModelSpec("deep_hypernet", control_dim=0)


def test_bad_shape_chain_names_stage():
    with pytest.raises(SpecError, match="deconv2"):
        ModelSpec("deep_hypernet", image_side=10)


def test_nonpositive_width_rejected():
    with pytest.raises(SpecError, match="latent"):
        ModelSpec("deep_hypernet", latent=0)


def test_ae_ignores_softmax_axis():
    a = build_model(ModelSpec("conditioned_ae", softmax_axis="row"))
    b = build_model(ModelSpec("conditioned_ae", softmax_axis="flat"))
    assert a.parameter_count == b.parameter_count
    for k in a.params:
        assert np.array_equal(a.params[k], b.params[k])


def test_spec_text_round_trip():
    spec = ModelSpec("deep_hypernet", control_dim=6, control_hidden=(4, 5), init_seed=9)
    assert ModelSpec.from_text(spec.to_text()) == spec


# -- init -------------------------------------------------------------------------


def test_init_deterministic_and_seed_sensitive():
    spec = ModelSpec("deep_hypernet")
    a, b = build_model(spec), build_model(spec)
    c = build_model(spec.with_(init_seed=1))
    assert all(np.array_equal(a.params[k], b.params[k]) for k in a.params)
    assert not np.array_equal(a.params["enc.dense.W"], c.params["enc.dense.W"])


def test_init_ranges():
    m = build_model(ModelSpec("deep_hypernet", latent=16))
    for d in m.decls:
        p = m.params[d.name]
        if d.bias:
            assert not p.any()
            continue
        lim = math.sqrt(6.0 / (d.fan_in + d.fan_out)) * d.scale
        assert np.abs(p).max() <= lim
    s = math.sqrt(6.0 / (16 + 256 * 16))
    assert np.abs(m.params["ctrl.out.W"]).max() <= 0.1 * s


def test_initial_modulation_near_uniform():
    m = build_model(ModelSpec("deep_hypernet", latent=16))
    gates = modulation_gates(m, phi=np.array([0.3, -0.9]))
    assert np.allclose(gates, 1.0 / 16, rtol=0.05)


# -- hyper dense layer ---------------------------------------------------------


def test_zero_logits_collapse_to_scaled_dense():
    rng = np.random.default_rng(0)
    layer = HyperDenseLayer.init(5, 3, control_dim=2, seed=1)
    layer.control[-1] = (np.zeros_like(layer.control[-1][0]), np.zeros_like(layer.control[-1][1]))
    layer.b = rng.normal(size=3)
    x = rng.normal(size=5)
    np.testing.assert_allclose(layer(x, [0.4, -0.2]), layer.W @ x / 5 + layer.b, atol=1e-14)


def test_softmax_saturation_selects_single_weight():
    out, inn = 3, 4
    logits = np.zeros((out, inn))
    picks = [2, 0, 3]
    for r, c in enumerate(picks):
        logits[r, c] = 50.0
    W = np.arange(1.0, 13.0).reshape(out, inn)
    gates = modulation(Tensor(logits.reshape(1, -1)), out, inn).data[0]
    w_eff = gates * W
    for r, c in enumerate(picks):
        assert w_eff[r, c] == pytest.approx(W[r, c], rel=1e-15)
        others = np.delete(w_eff[r], c)
        assert np.all(np.abs(others) < 1e-15 * np.abs(W[r, c]))


@pytest.mark.parametrize("axis,np_axis", [("row", -1), ("column", -2), ("flat", None)])
def test_hyper_dense_matches_direct_formula(axis, np_axis):
    rng = np.random.default_rng(3)
    n, out, inn = 4, 3, 5
    x, W, b = rng.normal(size=(n, inn)), rng.normal(size=(out, inn)), rng.normal(size=out)
    a = rng.normal(size=(n, out * inn))
    z = hyper_dense(Tensor(x), Tensor(W), Tensor(b), Tensor(a), axis).data
    for i in range(n):
        if np_axis is None:
            g = np_softmax(a[i], 0).reshape(out, inn)
        else:
            g = np_softmax(a[i].reshape(out, inn), np_axis)
        np.testing.assert_allclose(z[i], (g * W) @ x[i] + b, atol=1e-12)


def test_hyper_dense_layer_composes_from_primitives():
    rng = np.random.default_rng(4)
    layer = HyperDenseLayer.init(6, 4, control_dim=2, hidden=(5,), seed=2)
    layer.control[-1] = (rng.normal(size=layer.control[-1][0].shape), rng.normal(size=24))
    x, phi = rng.normal(size=6), rng.normal(size=2)
    (w0, b0), (w1, b1) = layer.control
    a = w1 @ np.tanh(w0 @ phi + b0) + b1
    expected = (np_softmax(a.reshape(4, 6), -1) * layer.W) @ x + layer.b
    np.testing.assert_allclose(layer(x, phi), expected, atol=1e-12)


def test_hyper_dense_rejects_bad_sizes():
    with pytest.raises(DimensionError):
        hyper_dense(Tensor(np.ones((1, 4))), Tensor(np.ones((3, 5))), Tensor(np.ones(3)), Tensor(np.ones((1, 15))))
    with pytest.raises(DimensionError):
        modulation(Tensor(np.ones((1, 14))), 3, 5)
    layer = HyperDenseLayer.init(3, 2, control_dim=2)
    with pytest.raises(DimensionError):
        layer(np.ones(3), np.ones(3))


@pytest.mark.parametrize("axis", ["row", "column", "flat"])
@given(phi=arrays(np.float64, (2,), elements=st.floats(-5, 5)), scale=st.floats(0.1, 30))
@settings(max_examples=25, deadline=None)
def test_modulation_slices_sum_to_one(axis, phi, scale):
    m = build_model(ModelSpec("deep_hypernet", latent=8, softmax_axis=axis))
    m.params["ctrl.out.W"] = m.params["ctrl.out.W"] * scale
    g = modulation_gates(m, phi=phi)[0]
    sums = {"row": g.sum(axis=1), "column": g.sum(axis=0), "flat": np.array([g.sum()])}[axis]
    np.testing.assert_allclose(sums, 1.0, atol=1e-12)
    assert np.all(g >= 0)


# -- forward --------------------------------------------------------------------


@pytest.mark.parametrize("arch,k", ALL)
def test_forward_shapes_and_finiteness(arch, k):
    m = build_model(ModelSpec(arch, control_dim=k))
    rng = np.random.default_rng(0)
    phi = rng.normal(size=k) if k else None
    single = forward(m, rng.random((16, 16)), phi)
    assert single.shape == (16, 16) and np.all(np.isfinite(single))
    batch = forward(m, rng.random((3, 16, 16)), rng.normal(size=(3, k)) if k else None)
    assert batch.shape == (3, 16, 16)
    assert np.all((batch >= 0) & (batch <= 1))


def test_batch_equals_per_sample():
    m = build_model(ModelSpec("deep_hypernet", control_dim=6))
    rng = np.random.default_rng(1)
    x, phi = rng.random((4, 16, 16)), rng.normal(size=(4, 6))
    batch = forward(m, x, phi)
    for i in range(4):
        np.testing.assert_allclose(batch[i], forward(m, x[i], phi[i]), atol=1e-13)


def test_phi_contract():
    deep = build_model(ModelSpec("deep_hypernet"))
    comp = build_model(ModelSpec("compensation_hypernet", control_dim=0))
    x = np.zeros((16, 16))
    with pytest.raises(ContractError):
        forward(deep, x)
    with pytest.raises(ContractError):
        forward(comp, x, np.ones(2))
    with pytest.raises(DimensionError):
        forward(deep, x, np.ones(3))
    with pytest.raises(DimensionError):
        forward(deep, np.zeros((8, 8)), np.ones(2))


def test_phi_changes_only_post_modulation_activations():
    m = build_model(ModelSpec("deep_hypernet", latent=8))
    m.params["ctrl.out.W"] *= 40  # make the modulation clearly phi-dependent
    rng = np.random.default_rng(2)
    x = Tensor(rng.random((2, 16, 16)))
    P = m.bind(None)
    a1 = trace(m.spec, P, x, Tensor(np.array([[0.0, 1.0]] * 2)))
    a2 = trace(m.spec, P, x, Tensor(np.array([[1.0, 0.0]] * 2)))
    for name in ("enc.conv1", "enc.conv2", "enc.dense"):
        assert np.array_equal(a1[name].data, a2[name].data)
    for name in ("logits", "dec.dense", "dec.deconv1", "out"):
        assert not np.array_equal(a1[name].data, a2[name].data)
    # the cached code reproduces the full forward for a new phi
    code = encode(m.spec, P, ad.reshape(x, (2, 1, 16, 16)))
    phi3 = Tensor(np.array([[0.6, 0.8], [-0.6, 0.8]]))
    again = decode(m.spec, P, code, phi3).data
    assert np.array_equal(again, trace(m.spec, P, x, phi3)["out"].data)


def test_compensation_output_depends_on_control_branch():
    m = build_model(ModelSpec("compensation_hypernet", control_dim=0, latent=8))
    x = np.random.default_rng(5).random((1, 16, 16))
    before = forward(m, x)
    m.params["ctrl.out.b"] = m.params["ctrl.out.b"] + np.random.default_rng(6).normal(size=m.params["ctrl.out.b"].shape)
    assert not np.allclose(before, forward(m, x))


# -- end-to-end gradients -------------------------------------------------------


@pytest.mark.parametrize("arch,k", ALL)
def test_end_to_end_grad_check(arch, k):
    spec = small(arch, k, activation="tanh")
    m = build_model(spec)
    rng = np.random.default_rng(7)
    # move the control branch off its near-uniform start so every path is exercised
    for name in m.names(CONTROL):
        m.params[name] = m.params[name] + 0.3 * rng.normal(size=m.params[name].shape)
    x = rng.random((2, 8, 8))
    target = rng.random((2, 8, 8))
    phi = Tensor(rng.normal(size=(2, k))) if k else None
    names = m.names()

    def loss(*tensors):
        P = dict(zip(names, tensors))
        return ad.mse_loss(trace(spec, P, Tensor(x), phi)["out"], Tensor(target))

    err = grad_check(loss, [m.params[n] for n in names], eps=1e-5, max_coords=40, seed=1)
    assert err < 1e-4


# -- tags & serialization ----------------------------------------------------------


@pytest.mark.parametrize("arch,k", ALL)
def test_tag_partition(arch, k):
    m = build_model(ModelSpec(arch, control_dim=k))
    tags = m.tags
    assert set(tags) == set(m.params)
    assert set(tags.values()) <= {CORE, CONTROL, PLAIN}
    core = m.names(CORE)
    control = m.names(CONTROL)
    if arch == "conditioned_ae":
        assert core == [] and control == []
    else:
        assert len(core) == 1 and core[0].endswith(".W")
        assert control and all(n.startswith("ctrl.") for n in control)
    assert not any(n.startswith("ctrl.") for n in m.names(PLAIN))


@pytest.mark.parametrize("arch,k", ALL)
def test_round_trip_bit_identical(arch, k):
    m = build_model(ModelSpec(arch, control_dim=k, init_seed=3))
    raw = model_to_bytes(m)
    back = model_from_bytes(raw)
    assert back.spec == m.spec
    assert back.tags == m.tags
    assert model_to_bytes(back) == raw
    for name in m.params:
        assert back.params[name].tobytes() == m.params[name].tobytes()


def test_file_layout_header():
    m = build_model(small("deep_hypernet", 2))
    raw = model_to_bytes(m)
    text = m.spec.to_text().encode()
    assert raw[:4] == b"HYPN"
    assert int.from_bytes(raw[4:6], "little") == 1
    assert int.from_bytes(raw[6:10], "little") == len(text)
    assert raw[10:10 + len(text)] == text
    first = m.decls[0]
    head = np.frombuffer(raw, "<f8", count=1, offset=10 + len(text))[0]
    assert head == m.params[first.name].reshape(-1)[0]
    assert len(raw) == 10 + len(text) + 8 * m.parameter_count


def test_corrupt_files_rejected():
    raw = model_to_bytes(build_model(small("deep_hypernet", 2)))
    with pytest.raises(ModelFormatError, match="bad magic"):
        model_from_bytes(b"XXXX" + raw[4:])
    with pytest.raises(ModelFormatError):
        model_from_bytes(raw[:-8])
    with pytest.raises(ModelFormatError):
        model_from_bytes(raw[:8])
