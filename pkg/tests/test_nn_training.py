import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pecashflow.nn import (
    AdamState, LayerSpec, Network, NetworkSpec, TrainConfig, TrainData, TrainingError, adam_step,
    gradient_check, load_checkpoint, save_checkpoint, train, weighted_mse, weighted_mse_grad,
)
from pecashflow.nn.gradcheck import analytic_gradients


def seq2seq_spec(d=3, h=(4, 4, 2), steps=3, head="exponential", seed=0, cell="gru"):
    return NetworkSpec(d, (
        LayerSpec(cell, h[0], "relu", False),
        LayerSpec("repeat_expand", steps),
        LayerSpec(cell, h[1], "relu", True),
        LayerSpec(cell, h[2], "sigmoid", True),
        LayerSpec("time_distributed_dense", 3, head),
    ), 3, seed)


def sample(rng, n=4, t=5, d=3, s=3):
    return rng.normal(size=(n, t, d)), rng.uniform(0.1, 1.0, size=(n, s, 3))


# ---------------------------------------------------------------- loss

def test_weighted_mse_examples():
    assert weighted_mse(np.ones((2, 3)), np.ones((2, 3))) == 0.0
    assert weighted_mse(np.array([0.0, 0.0]), np.array([1.0, 1.0]), np.array([1.0])) == 1.0
    rng = np.random.default_rng(0)
    p, t = rng.normal(size=(2, 4, 3)), rng.normal(size=(2, 4, 3))
    assert weighted_mse(p, t, [1, 1]) == weighted_mse(p, t, [2, 2])


def test_weighted_mse_masks_and_weights():
    p = np.zeros((2, 2, 1))
    t = np.array([[[1.0], [3.0]], [[2.0], [2.0]]])
    mask = np.array([[True, False], [True, True]])
    # window 0 contributes 1, window 1 contributes 4
    assert weighted_mse(p, t, [1.0, 3.0], mask) == pytest.approx((1 * 1 + 3 * 4) / 4)
    with pytest.raises(ValueError, match="masked"):
        weighted_mse(p, t, None, np.zeros((2, 2), bool))
    with pytest.raises(ValueError):
        weighted_mse(p, t, [1.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.floats(0.01, 100))
def test_weighted_mse_scale_invariant(k):
    rng = np.random.default_rng(1)
    p, t, w = rng.normal(size=(3, 2, 3)), rng.normal(size=(3, 2, 3)), rng.uniform(0.1, 1, 3)
    assert weighted_mse(p, t, w * k) == pytest.approx(weighted_mse(p, t, w), rel=1e-12)


def test_loss_gradient_matches_differences():
    rng = np.random.default_rng(2)
    p, t = rng.normal(size=(3, 2, 3)), rng.normal(size=(3, 2, 3))
    w, m = rng.uniform(0.2, 1, 3), rng.random((3, 2)) < 0.7
    m[0] = True
    g = weighted_mse_grad(p, t, w, m)
    eps = 1e-6
    for idx in np.ndindex(p.shape):
        q = p.copy()
        q[idx] += eps
        up = weighted_mse(q, t, w, m)
        q[idx] -= 2 * eps
        down = weighted_mse(q, t, w, m)
        assert g[idx] == pytest.approx((up - down) / (2 * eps), abs=1e-8)


# ---------------------------------------------------------------- optimiser

def test_adam_zero_grad_keeps_params():
    params = {"a": np.array([1.0, -2.0])}
    new, _ = adam_step(params, {"a": np.zeros(2)}, AdamState())
    np.testing.assert_array_equal(new["a"], params["a"])


def test_adam_first_step_is_sign():
    params = {"a": np.array([1.0, -2.0, 3.0])}
    grads = {"a": np.array([0.5, -3.0, 1e-3])}
    new, state = adam_step(params, grads, AdamState(), lr=0.01)
    np.testing.assert_allclose(new["a"] - params["a"], -0.01 * np.sign(grads["a"]), rtol=1e-4)
    assert state.step == 1


def test_adam_quadratic_against_scalar_run():
    x = {"x": np.array([1.0])}
    state = AdamState()
    m = v = 0.0
    ref = 1.0
    for k in range(1, 201):
        x, state = adam_step(x, {"x": 2 * x["x"]}, state, lr=0.1)
        g = 2 * ref
        m = 0.9 * m + 0.1 * g
        v = 0.999 * v + 0.001 * g * g
        ref -= 0.1 * (m / (1 - 0.9 ** k)) / (np.sqrt(v / (1 - 0.999 ** k)) + 1e-8)
    assert abs(x["x"][0]) < 0.05
    assert x["x"][0] == pytest.approx(ref, abs=1e-12)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(adam_beta1=1.0)
    with pytest.raises(ValueError):
        TrainConfig(adam_epsilon=0)
    assert TrainConfig().learning_rate == 1e-3 and TrainConfig().batch_size == 32


# ---------------------------------------------------------------- network / backward

def test_spec_validation():
    with pytest.raises(ValueError):
        NetworkSpec(3, (LayerSpec("gru", 4), LayerSpec("dense", 2)), 3)
    with pytest.raises(ValueError):
        LayerSpec("conv", 3)
    with pytest.raises(ValueError):
        LayerSpec("gru", 0)
    spec = seq2seq_spec()
    assert NetworkSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec
    assert spec.output_steps == 3 and spec.hidden_sizes == [4, 4, 2]


def test_same_seed_same_weights():
    a, b = Network(seq2seq_spec(seed=3)), Network(seq2seq_spec(seed=3))
    for k, v in a.named_params().items():
        np.testing.assert_array_equal(v, b.named_params()[k])
    assert any(not np.array_equal(v, Network(seq2seq_spec(seed=4)).named_params()[k])
               for k, v in a.named_params().items())


def test_zero_residual_gives_zero_gradients():
    net = Network(seq2seq_spec())
    x = np.random.default_rng(0).normal(size=(3, 5, 3))
    y = net.forward(x)
    for g in analytic_gradients(net, x, y).values():
        assert not g.any()


def test_duplicated_window_doubles_gradient():
    rng = np.random.default_rng(5)
    net = Network(seq2seq_spec())
    x, y = sample(rng, n=1)
    g1 = analytic_gradients(net, x, y, np.ones(1))
    g2 = analytic_gradients(net, np.concatenate([x, x]), np.concatenate([y, y]), np.ones(2))
    # the weight-normalised loss is unchanged by duplication
    for k in g1:
        np.testing.assert_allclose(g2[k], g1[k], rtol=1e-12, atol=1e-15)
    net2 = Network(seq2seq_spec())
    net2.zero_grad()
    pred = net2.forward(np.concatenate([x, x]))
    # summed (unnormalised) loss: undo the 1 / sum(w) factor
    grad = weighted_mse_grad(pred, np.concatenate([y, y]), np.ones(2)) * 2
    net2.backward(grad)
    for k, v in net2.named_grads().items():
        np.testing.assert_allclose(v, 2 * g1[k], rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("cell", ["gru", "lstm"])
def test_gradient_check_seq2seq(cell):
    rng = np.random.default_rng(6)
    spec = seq2seq_spec(cell=cell, seed=1)
    x, y = sample(rng)
    mask = np.ones((4, 3), bool)
    mask[1, 2] = False
    assert gradient_check(spec, (x, y, rng.uniform(0.5, 1, 4), mask)) <= 1e-4


def test_gradient_check_indirect_topology():
    rng = np.random.default_rng(7)
    spec = NetworkSpec(3, (LayerSpec("gru", 4, "relu", True), LayerSpec("gru", 3, "relu", True),
                           LayerSpec("gru", 4, "relu", False), LayerSpec("dense", 3, "sigmoid")), 3, 2)
    x = rng.normal(size=(4, 6, 3))
    y = rng.uniform(size=(4, 1, 3))
    assert gradient_check(spec, (x, y)) <= 1e-4


def test_gradient_check_linear_dense_exact():
    rng = np.random.default_rng(8)
    spec = NetworkSpec(3, (LayerSpec("gru", 2, "linear", True),
                           LayerSpec("time_distributed_dense", 3, "linear")), 3)
    x, y = rng.normal(size=(2, 4, 3)), rng.normal(size=(2, 4, 3))
    assert gradient_check(spec, (x, y)) <= 1e-4
    lin = NetworkSpec(2, (LayerSpec("gru", 2, "linear", False), LayerSpec("dense", 3, "linear")), 3)
    net = Network(lin)
    # freeze the recurrent part: check only a purely linear map of the features
    x2, y2 = rng.normal(size=(3, 1, 2)), rng.normal(size=(3, 1, 3))
    assert gradient_check(net, (x2, y2)) <= 1e-6


def test_gradient_check_scaled_sigmoid_head():
    rng = np.random.default_rng(9)
    spec = NetworkSpec(3, (LayerSpec("lstm", 3, "tanh", False),
                           LayerSpec("dense", 3, "scaled_sigmoid", scale=(1, 1, 5))), 3)
    x, y = rng.normal(size=(3, 4, 3)), rng.uniform(0, 1, size=(3, 1, 3))
    assert gradient_check(spec, (x, y)) <= 1e-4


def test_gradient_check_param_limit():
    with pytest.raises(ValueError, match="parameters"):
        gradient_check(seq2seq_spec(h=(40, 40, 40)), sample(np.random.default_rng(0)), max_params=100)


# ---------------------------------------------------------------- training

def test_overfit_single_window():
    rng = np.random.default_rng(10)
    x, y = sample(rng, n=1)
    net, hist = train(seq2seq_spec(h=(8, 8, 4)), TrainData(x, y), TrainConfig(epochs=2000, learning_rate=0.01))
    assert hist["train"][-1] < 1e-4


def test_training_is_deterministic():
    rng = np.random.default_rng(11)
    x, y = sample(rng, n=40)
    data = TrainData(x, y)
    cfg = TrainConfig(epochs=3, batch_size=8, seed=4)
    _, h1 = train(seq2seq_spec(), data, cfg, validation=data)
    _, h2 = train(seq2seq_spec(), data, cfg, validation=data)
    assert h1 == h2 and len(h1["validation"]) == 3


def test_non_finite_loss_is_reported():
    x = np.full((2, 3, 3), 1e6)
    y = np.ones((2, 3, 3))
    spec = NetworkSpec(3, (LayerSpec("gru", 2, "linear", False), LayerSpec("repeat_expand", 3),
                           LayerSpec("time_distributed_dense", 3, "exponential")), 3)
    net = Network(spec)
    net.set_params({k: np.full_like(v, 50.0) for k, v in net.named_params().items()})
    with pytest.raises(TrainingError, match="epoch 1, batch 1"):
        train(spec, TrainData(x, y), TrainConfig(epochs=1), network=net)


def test_checkpoint_round_trip_bit_exact(tmp_path):
    rng = np.random.default_rng(12)
    x, y = sample(rng, n=6)
    net, _ = train(seq2seq_spec(), TrainData(x, y), TrainConfig(epochs=2))
    path = tmp_path / "ck.json"
    save_checkpoint(net, path, {"note": "x"})
    back, d = load_checkpoint(path)
    assert d["note"] == "x" and set(d) >= {"spec", "seed", "tensors"}
    np.testing.assert_array_equal(back.predict(x), net.predict(x))
    save_checkpoint(back, tmp_path / "ck2.json", {"note": "x"})
    assert path.read_bytes() == (tmp_path / "ck2.json").read_bytes()


def test_random_weight_exponential_forecasts_positive():
    rng = np.random.default_rng(13)
    x = rng.normal(scale=3, size=(50, 6, 3))
    for seed in range(5):
        assert (Network(seq2seq_spec(seed=seed)).predict(x) > 0).all()
