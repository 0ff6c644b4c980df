import numpy as np
import pytest

from mfwlab.autodiff import Tape
from mfwlab.model import (ModelConfig, TapedModel, init_params, load_checkpoint,
                          predict, save_checkpoint, forward)
from mfwlab.rng import seeded_rng


def small_config(injection=1):
    return ModelConfig(input_dim=3, layer_widths=[5, 4], num_classes=3,
                       injection_index=injection)


def test_init_deterministic():
    cfg = small_config()
    a = init_params(cfg, seeded_rng(42))
    b = init_params(cfg, seeded_rng(42))
    for wa, wb in zip(a.weights, b.weights):
        assert np.array_equal(wa, wb)
    assert np.array_equal(a.head, b.head)


def test_width_one_degenerate_model():
    cfg = ModelConfig(input_dim=2, layer_widths=[1], num_classes=2, injection_index=1)
    params = init_params(cfg, seeded_rng(0))
    preds = predict(params, np.zeros((3, 2)))
    assert preds.shape == (3,)


def test_fan_in_variance():
    cfg = ModelConfig(input_dim=64, layer_widths=[128], num_classes=2)
    variances = []
    for seed in range(10):
        params = init_params(cfg, seeded_rng(seed))
        variances.append(params.weights[0].var())
    mean_var = np.mean(variances)
    assert abs(mean_var - 2 / 64) < 0.2 * (2 / 64)


def test_biases_zero_at_init():
    params = init_params(small_config(), seeded_rng(1))
    for b in params.biases:
        assert np.array_equal(b, np.zeros_like(b))


@pytest.mark.parametrize("injection", [0, 1, 2])
def test_split_composition_matches_monolithic(injection):
    cfg = small_config(injection)
    params = init_params(cfg, seeded_rng(7))
    x = np.random.default_rng(0).normal(size=(6, 3))
    # manual unsplit forward
    h = x
    for W, b in zip(params.weights, params.biases):
        h = np.maximum(h @ W + b, 0.0)
    expected = h @ params.head
    tape = Tape()
    m = TapedModel(params, tape)
    scores = m.logits(m.head_h(m.features_g(x)))
    assert np.allclose(scores.value, expected, rtol=1e-12)


def test_injection_zero_g_is_identity():
    cfg = small_config(0)
    params = init_params(cfg, seeded_rng(2))
    x = np.random.default_rng(1).normal(size=(4, 3))
    tape = Tape()
    z = TapedModel(params, tape).features_g(x)
    assert np.array_equal(z.value, x)


def test_injection_full_h_is_identity():
    cfg = small_config(2)
    params = init_params(cfg, seeded_rng(2))
    x = np.abs(np.random.default_rng(1).normal(size=(4, 3)))
    tape = Tape()
    m = TapedModel(params, tape)
    z = m.features_g(x)
    f = m.head_h(z)
    assert np.array_equal(f.value, z.value)


def test_zero_params_zero_output():
    cfg = small_config(1)
    params = init_params(cfg, seeded_rng(0))
    for w in params.weights:
        w[:] = 0.0
    params.head[:] = 0.0
    _, scores = forward(params, np.ones((2, 3)))
    assert np.array_equal(scores, np.zeros((2, 3)))


def test_predict_argmax_and_tiebreak():
    cfg = ModelConfig(input_dim=3, layer_widths=[], num_classes=3, injection_index=0)
    params = init_params(cfg, seeded_rng(0))
    params.head[:] = np.eye(3)  # logits = x
    assert predict(params, np.array([[3.0, 1.0, 2.0]]))[0] == 0
    assert predict(params, np.array([[1.0, 1.0, 1.0]]))[0] == 0
    assert predict(params, np.array([[0.0, 2.0, 2.0]]))[0] == 1


def test_batch_purity():
    cfg = small_config(1)
    params = init_params(cfg, seeded_rng(3))
    x = np.random.default_rng(5).normal(size=(8, 3))
    whole = predict(params, x)
    single = np.array([predict(params, x[i:i + 1])[0] for i in range(8)])
    assert np.array_equal(whole, single)


def test_checkpoint_round_trip(tmp_path):
    cfg = small_config(1)
    params = init_params(cfg, seeded_rng(9))
    path = tmp_path / "ckpt.json"
    save_checkpoint(params, path)
    loaded = load_checkpoint(path)
    assert loaded.config == cfg
    for a, b in zip(params.weights, loaded.weights):
        assert np.array_equal(a, b)
    assert np.array_equal(params.head, loaded.head)


def test_config_validation():
    with pytest.raises(ValueError):
        ModelConfig(input_dim=3, layer_widths=[4], num_classes=3, injection_index=2)
    with pytest.raises(ValueError):
        ModelConfig(input_dim=3, layer_widths=[0], num_classes=3)
    with pytest.raises(ValueError):
        ModelConfig(input_dim=3, layer_widths=[4], num_classes=1)
