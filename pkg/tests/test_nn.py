import json
import math

import numpy as np
import pytest

from wingfatigue import nn
from wingfatigue.nn import MlpSpec, TrainConfig


def tanh_net(seed, dims=(3, 5, 2)):
    spec = MlpSpec(dims[0], dims[1:-1], dims[-1], "tanh")
    return nn.init_mlp(spec, seed)


def test_xavier_limit_example():
    assert math.isclose(nn.xavier_limit(6, 50), math.sqrt(6 / 56))
    assert round(nn.xavier_limit(6, 50), 4) == 0.3273


def test_init_is_deterministic_bounded_and_zero_bias():
    spec = MlpSpec(6, (50, 50), 4)
    a, b = nn.init_mlp(spec, 7), nn.init_mlp(spec, 7)
    for wa, wb, (fi, fo) in zip(a.weights, b.weights, zip(spec.dims[:-1], spec.dims[1:])):
        assert np.array_equal(wa, wb)
        assert wa.shape == (fi, fo)
        assert np.abs(wa).max() <= nn.xavier_limit(fi, fo)
    assert all(np.all(bias == 0) for bias in a.biases)
    assert not np.array_equal(a.weights[0], nn.init_mlp(spec, 8).weights[0])


def test_spec_validation():
    with pytest.raises(ValueError):
        MlpSpec(0, (4,), 1)
    with pytest.raises(ValueError):
        MlpSpec(2, (), 1)
    with pytest.raises(ValueError):
        MlpSpec(2, (4,), 1, "sigmoid")
    with pytest.raises(ValueError):
        MlpSpec(2, (4,), 1, dropout_rate=1.0)
    with pytest.raises(ValueError):
        TrainConfig(lr0=0)
    with pytest.raises(ValueError):
        TrainConfig(scheduler_gamma=1.5)


def test_forward_zero_net_outputs_zero():
    net = nn.init_mlp(MlpSpec(3, (4,), 2), 0)
    net.weights = [np.zeros_like(w) for w in net.weights]
    out = nn.forward(net, np.ones((5, 3)))
    assert out.shape == (5, 2) and np.all(out == 0)


def test_forward_no_dropout_train_equals_eval():
    net = nn.init_mlp(MlpSpec(3, (8, 8), 2, "relu", 0.0), 1)
    x = np.random.default_rng(0).normal(size=(10, 3))
    assert np.array_equal(nn.forward(net, x, train_mode=True, seed=3), nn.forward(net, x))


def test_forward_relu_identity():
    spec = MlpSpec(3, (3,), 3, "relu")
    net = nn.Mlp(spec, [np.eye(3), np.eye(3)], [np.zeros(3), np.zeros(3)])
    x = np.array([[0.0, 1.5, 2.0], [3.0, 0.25, 0.0]])
    assert np.array_equal(nn.forward(net, x), x)


def test_forward_shape_mismatch():
    net = nn.init_mlp(MlpSpec(3, (4,), 1), 0)
    with pytest.raises(ValueError):
        nn.forward(net, np.ones((2, 4)))


def test_dropout_is_deterministic_per_seed():
    net = nn.init_mlp(MlpSpec(3, (16,), 1, "relu", 0.3), 0)
    x = np.ones((4, 3))
    a = nn.forward(net, x, train_mode=True, seed=5)
    assert np.array_equal(a, nn.forward(net, x, train_mode=True, seed=5))
    assert not np.array_equal(a, nn.forward(net, x, train_mode=True, seed=6))


def test_dropout_inverted_scaling_preserves_expectation():
    spec = MlpSpec(2, (32,), 1, "relu", 0.2)
    net = nn.init_mlp(spec, 3)
    net.weights[1] = np.abs(net.weights[1])
    x = np.tile([[0.7, 0.4]], (100_000, 1))
    dropped = nn.forward(net, x, train_mode=True, seed=11).mean()
    clean = nn.forward(net, x[:1])[0, 0]
    assert abs(dropped - clean) / abs(clean) < 0.01


def test_mae_examples():
    assert nn.mae_loss(np.array([1.0, 2.0]), np.array([2.0, 4.0])) == 1.5
    assert nn.mae_loss(np.array([3.0]), np.array([3.0])) == 0.0
    p, t = np.array([[1.0, -2.0]]), np.array([[0.5, 4.0]])
    assert nn.mae_loss(p, t) == nn.mae_loss(t, p)
    with pytest.raises(ValueError):
        nn.mae_loss(np.ones(2), np.ones(3))


def test_lr_schedule_examples():
    cfg = TrainConfig(lr0=8e-3, scheduler_gamma=0.975, scheduler_step=30)
    assert nn.lr_at_epoch(cfg, 0) == 8e-3
    assert math.isclose(nn.lr_at_epoch(cfg, 60), 7.605e-3)
    assert nn.lr_at_epoch(cfg, 29) == 8e-3
    flat = TrainConfig(scheduler_gamma=1.0)
    assert nn.lr_at_epoch(flat, 0) == nn.lr_at_epoch(flat, 999)


def test_train_learns_linear_map():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, (64, 1))
    xv = rng.uniform(0, 1, (32, 1))
    net = nn.init_mlp(MlpSpec(1, (16, 16), 1, "tanh"), 0)
    net, curves = nn.train(net, (x, 2 * x), (xv, 2 * xv), TrainConfig(epochs=2000, batch_size=16))
    assert len(curves.train_loss) == len(curves.val_loss) == 2000
    assert curves.val_loss[-1] < 1e-2 * 2.0


def test_train_zero_epochs_is_noop():
    net = nn.init_mlp(MlpSpec(2, (4,), 1), 0)
    out, curves = nn.train(net, (np.ones((3, 2)), np.ones(3)), None, TrainConfig(epochs=0))
    assert curves.train_loss == [] and curves.val_loss == []
    assert all(np.array_equal(a, b) for a, b in zip(out.weights, net.weights))


def test_train_rejects_empty_set():
    net = nn.init_mlp(MlpSpec(2, (4,), 1), 0)
    with pytest.raises(ValueError):
        nn.train(net, (np.empty((0, 2)), np.empty(0)), None, TrainConfig(epochs=1))


def test_train_is_bitwise_deterministic():
    rng = np.random.default_rng(1)
    x, y = rng.normal(size=(50, 3)), rng.normal(size=(50, 2))
    spec = MlpSpec(3, (8, 8), 2, "relu", 0.1)
    cfg = TrainConfig(epochs=20, batch_size=8, seed=4)
    a, ca = nn.train(nn.init_mlp(spec, 4), (x, y), (x, y), cfg)
    b, cb = nn.train(nn.init_mlp(spec, 4), (x, y), (x, y), cfg)
    assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())
    assert ca == cb


def test_smoothed_training_loss_non_increasing():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, (256, 2))
    y = 2 * x[:, :1] + np.sin(3 * x[:, 1:])
    net = nn.init_mlp(MlpSpec(2, (16, 16), 1, "tanh"), 0)
    _, curves = nn.train(net, (x, y), None, TrainConfig(lr0=1e-3, epochs=1000, batch_size=32))
    windows = np.array(curves.train_loss).reshape(-1, 50).mean(axis=1)
    assert np.all(np.diff(windows) <= 0)


def test_serialization_round_trip_is_bit_exact():
    net = nn.init_mlp(MlpSpec(4, (5, 3), 2, "tanh", 0.1), 9)
    back = nn.Mlp.from_dict(json.loads(json.dumps(net.to_dict())))
    assert back.spec == net.spec
    x = np.random.default_rng(2).normal(size=(6, 4))
    assert np.array_equal(nn.forward(back, x), nn.forward(net, x))


@pytest.mark.parametrize("seed", range(5))
def test_gradient_check_random_tanh(seed):
    rng = np.random.default_rng(seed)
    net = tanh_net(seed, (4, 6, 5, 3))
    x, y = rng.normal(size=(8, 4)), rng.normal(size=(8, 3))
    assert nn.gradient_check(net, (x, y)) < 1e-4


def test_gradient_check_linear_region():
    # positive weights and inputs keep every ReLU active, so the net is linear
    rng = np.random.default_rng(0)
    spec = MlpSpec(3, (4,), 2, "relu")
    net = nn.Mlp(spec, [rng.uniform(0.1, 1, (3, 4)), rng.uniform(0.1, 1, (4, 2))],
                 [np.full(4, 0.1), np.zeros(2)])
    x = rng.uniform(0.5, 1, (8, 3))
    y = rng.normal(size=(8, 2)) * 10
    assert nn.gradient_check(net, (x, y)) < 1e-6


def test_gradient_check_degenerate_input():
    spec = MlpSpec(3, (4,), 2, "tanh")
    net = nn.Mlp(spec, [np.zeros((3, 4)), np.zeros((4, 2))], [np.zeros(4), np.zeros(2)])
    dev = nn.gradient_check(net, (np.zeros((4, 3)), np.ones((4, 2))))
    assert math.isfinite(dev) and dev < 1e-4


def test_loss_and_grads_shapes():
    net = tanh_net(0)
    loss, gw, gb = nn.loss_and_grads(net, np.ones((2, 3)), np.zeros((2, 2)))
    assert loss >= 0
    assert [g.shape for g in gw] == [w.shape for w in net.weights]
    assert [g.shape for g in gb] == [b.shape for b in net.biases]
