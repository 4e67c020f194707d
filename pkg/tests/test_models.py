import numpy as np
import pytest
from numpy.testing import assert_allclose
from udakit.errors import ConfigError, ParseError, ShapeError
from udakit.models import GrlCoefficient, LayerSpec, classify, discriminate, ef_forward, extract_features, grl, init_bundle, load_checkpoint, mlp_forward, predict_logits, ramp, save_checkpoint
from udakit.ndgraph import Tape, Tensor, ops


EF = LayerSpec((2, 5, 4))
H = LayerSpec((4, 3))
D = LayerSpec((4, 3, 1))


def test_layer_spec_validation():
    with pytest.raises(ConfigError):
        LayerSpec((3,))
    with pytest.raises(ConfigError):
        LayerSpec((3, 0, 2))
    spec = LayerSpec((2, 8, 4))
    assert spec.depth == 2 and spec.in_features == 2 and spec.out_features == 4
    assert LayerSpec.from_dict(spec.to_dict()) == spec


def test_init_bundle_names_and_shapes():
    m = init_bundle(EF, H, D, seed = 3)
    assert m.names("ef") == ["ef.0.weight", "ef.0.bias", "ef.1.weight", "ef.1.bias"]
    assert m.params["ef.0.weight"].shape == (2, 5)
    assert m.params["ef.0.bias"].shape == (1, 5)
    assert np.all(m.params["d.1.bias"].data == 0.0)
    bound = np.sqrt(6.0 / (2 + 5))
    assert np.all(np.abs(m.params["ef.0.weight"].data) <= bound)


def test_init_bundle_is_deterministic():
    a = init_bundle(EF, H, D, seed = 9)
    b = init_bundle(EF, H, D, seed = 9)
    assert all(a.params[k] == b.params[k] for k in a.names())
    c = init_bundle(EF, H, D, seed = 10)
    assert not all(a.params[k] == c.params[k] for k in a.names())


def test_bundle_rejects_mismatched_widths():
    with pytest.raises(ConfigError):
        init_bundle(EF, LayerSpec((5, 3)), D, seed = 0)
    with pytest.raises(ConfigError):
        init_bundle(EF, H, LayerSpec((4, 2)), seed = 0)


def test_tape_forward_matches_numpy_forward(rng):
    m = init_bundle(EF, H, D, seed = 1)
    x = rng.normal(size = (7, 2))
    tape = Tape()
    feats = ef_forward(m, tape.constant(x))
    logits = classify(m, feats.features)
    assert_allclose(logits.value.data, predict_logits(m, x), rtol = 1e-12, atol = 1e-12)
    assert_allclose(feats.features.value.data, extract_features(m, x), rtol = 1e-12, atol = 1e-12)
    assert len(feats.hidden) == EF.depth - 1


def test_forward_rejects_wrong_width(rng):
    m = init_bundle(EF, H, D, seed = 1)
    tape = Tape()
    with pytest.raises(ShapeError):
        ef_forward(m, tape.constant(rng.normal(size = (3, 4))))


def test_discriminator_output_is_clipped(rng):
    m = init_bundle(EF, H, D, seed = 2)
    params = dict(m.params)
    params["d.1.bias"] = Tensor([[500.0]])
    m.params = params
    tape = Tape()
    out = discriminate(m, tape.constant(rng.normal(size = (4, 4)))).value.data
    assert np.all(out <= 1.0 - 1e-7)
    assert np.all(out > 0.0)


def test_perturb_hook_sees_pre_activations(rng):
    m = init_bundle(EF, H, D, seed = 4)
    x = rng.normal(size = (3, 2))
    seen = []


    def perturb(layer, pre):
        seen.append(layer)
        return ops.scale(pre, 0.0)

    tape = Tape()
    out = mlp_forward("ef", m.ef, m.params, tape.constant(x), perturb)
    assert seen == [0]
    last_bias = m.params["ef.1.bias"].data
    assert_allclose(out.output.value.data, np.repeat(last_bias, 3, axis = 0))


def test_ramp_endpoints():
    assert ramp(0.0) == 0.0
    assert ramp(1.0) == pytest.approx(2.0 / (1.0 + np.exp(-10.0)) - 1.0)
    assert 0.0 < ramp(0.1) < ramp(0.5) < 1.0


def test_grl_coefficient_schedules():
    assert GrlCoefficient(0.5).at(0.7) == 0.5
    c = GrlCoefficient(2.0, "ramp")
    assert c.at(0.0) == 0.0
    assert c.at(0.3) == pytest.approx(2.0 * ramp(0.3))
    assert GrlCoefficient.from_dict(0.25) == GrlCoefficient(0.25)
    with pytest.raises(ConfigError):
        GrlCoefficient(-1.0)
    with pytest.raises(ConfigError):
        GrlCoefficient(1.0, "cosine")


def test_grl_is_identity_forward_and_reverses_gradient():
    tape = Tape()
    x = tape.leaf(np.array([[1.0, -2.0]]))
    y = grl(x, GrlCoefficient(0.3))
    assert np.array_equal(y.value.data, x.value.data)
    g = tape.backward(ops.reduce("sum", y))[x]
    assert_allclose(g, [[-0.3, -0.3]])


def test_checkpoint_round_trip(tmp_path, rng):
    m = init_bundle(EF, H, D, seed = 5)
    buffers = {k: rng.normal(size = t.shape) for k, t in m.params.items()}
    state = np.random.default_rng(3).bit_generator.state
    path = str(tmp_path / "ckpt.npz")
    save_checkpoint(path, m, buffers, state, step = 42, epoch = 2)
    ckpt = load_checkpoint(path)
    assert ckpt.bundle.ef == EF and ckpt.bundle.h == H and ckpt.bundle.d == D
    assert all(ckpt.bundle.params[k] == m.params[k] for k in m.names())
    assert all(np.array_equal(ckpt.buffers[k], buffers[k]) for k in buffers)
    assert ckpt.step == 42 and ckpt.epoch == 2
    restored = np.random.default_rng()
    restored.bit_generator.state = ckpt.rng_state
    assert restored.integers(1 << 30) == np.random.default_rng(3).integers(1 << 30)


def test_checkpoint_rejects_foreign_files(tmp_path):
    path = str(tmp_path / "other.npz")
    np.savez(path, x = np.zeros(3))
    with pytest.raises(ParseError):
        load_checkpoint(path)
