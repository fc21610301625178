import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import decimal_gradient, relative_error
from pdvoice import nn
from pdvoice.nn import Network, TrainConfig, TrainingDiverged
from pdvoice.rbm import RBM, RBMDiverged, pretrain_rbm_stack, train_rbm
from pdvoice.weighting import HEALTHY, PD


def random_net(rng):
    depth = int(rng.integers(1, 4))  # weight layers: up to 4 layers of units
    sizes = [int(rng.integers(1, 9)) for _ in range(depth)] + [1]
    net = nn.init_network(sizes, rng)
    for b in net.biases:
        b[:] = rng.normal(0, 0.5, b.shape)
    return net


def test_backprop_matches_finite_differences():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for _ in range(50):
        net = random_net(rng)
        m = int(rng.integers(1, 6))
        X = rng.normal(size=(m, net.layer_sizes[0]))
        y = rng.integers(0, 2, m).astype(float)
        grads = nn.backprop(net, nn.forward(net, X), y)
        ref_w, ref_b = decimal_gradient(net, X, y)
        for a, b in zip(grads.weights + grads.biases, ref_w + ref_b):
            worst = max(worst, float(relative_error(a, b).max()))
    assert worst <= 1e-5


def test_float_central_differences_agree_where_resolvable():
    # In double precision the difference quotient carries ~1e-11 absolute noise.
    rng = np.random.default_rng(5)
    net = random_net(rng)
    X = rng.normal(size=(4, net.layer_sizes[0]))
    y = np.array([1.0, 0.0, 1.0, 0.0])
    grads = nn.backprop(net, nn.forward(net, X), y)
    h = 1e-6
    for p, g in zip(net.weights, grads.weights):
        for idx in np.ndindex(p.shape):
            keep = p[idx]
            p[idx] = keep + h
            up = nn.mse_loss(nn.forward(net, X).output, y)
            p[idx] = keep - h
            down = nn.mse_loss(nn.forward(net, X).output, y)
            p[idx] = keep
            assert abs((up - down) / (2 * h) - g[idx]) < 1e-8


def test_single_unit_forward_and_loss():
    net = Network([1, 1, 1], [np.array([[1.0]]), np.array([[1.0]])], [np.array([1.0]), np.array([0.0])])
    out = nn.forward(net, [1.0]).output[0]
    assert out == pytest.approx(1 / (1 + math.exp(-2)), abs=1e-15)
    assert round(out, 4) == 0.8808
    assert nn.mse_loss([0.5], [1.0]) == 0.125


def test_batch_gradient_is_mean_of_sample_gradients():
    rng = np.random.default_rng(1)
    net = nn.init_network([5, 4, 3, 1], rng)
    X = rng.normal(size=(7, 5))
    y = rng.integers(0, 2, 7).astype(float)
    batch = nn.backprop(net, nn.forward(net, X), y)
    singles = [nn.backprop(net, nn.forward(net, X[i]), y[i : i + 1]) for i in range(7)]
    for l in range(net.depth):
        np.testing.assert_allclose(batch.weights[l], np.mean([s.weights[l] for s in singles], axis=0), atol=1e-12)
        np.testing.assert_allclose(batch.biases[l], np.mean([s.biases[l] for s in singles], axis=0), atol=1e-12)


def test_relu_derivative_at_zero():
    assert nn.relu_grad(np.array([-1.0, 0.0, 2.0])).tolist() == [0.0, 0.0, 1.0]


@pytest.mark.parametrize("n,m,updates", [(120, 2, 60), (121, 2, 61), (40, 2, 20), (39, 4, 10), (5, 5, 1)])
def test_updates_per_epoch(n, m, updates):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(n, 3))
    y = [HEALTHY if i % 2 else PD for i in range(n)]
    cfg = TrainConfig(batch_size=m, epochs=3, hidden=(4,))
    _, trace = nn.fit(X, y, cfg)
    assert trace.updates == [updates] * 3
    assert len(trace.losses) == 3


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 200), st.integers(1, 50))
def test_update_count_is_ceiling(n, m):
    m = min(m, n)
    X = np.zeros((n, 1))
    _, trace = nn.train(nn.init_network([1, 1], 0), X, np.zeros(n), TrainConfig(batch_size=m, epochs=1, hidden=()))
    assert trace.updates == [math.ceil(n / m)]


def test_full_batch_equals_gradient_descent():
    rng = np.random.default_rng(4)
    X = rng.normal(size=(9, 3))
    y = rng.integers(0, 2, 9).astype(float)
    net = nn.init_network([3, 5, 1], 7)
    cfg = TrainConfig(batch_size=9, epochs=4, learning_rate=0.3, hidden=(5,), shuffle=False)
    trained, _ = nn.train(net, X, y, cfg)
    manual = net.copy()
    for _ in range(4):
        grads = nn.backprop(manual, nn.forward(manual, X), y)
        for l in range(manual.depth):
            manual.weights[l] = manual.weights[l] - 0.3 * grads.weights[l]
            manual.biases[l] = manual.biases[l] - 0.3 * grads.biases[l]
    for a, b in zip(trained.weights + trained.biases, manual.weights + manual.biases):
        assert np.array_equal(a, b)
    shuffled, _ = nn.train(net, X, y, TrainConfig(batch_size=9, epochs=4, learning_rate=0.3, hidden=(5,)))
    for a, b in zip(shuffled.weights, manual.weights):
        np.testing.assert_allclose(a, b, atol=1e-12)


def test_mbgd_step_does_not_mutate_unless_asked():
    net = nn.init_network([2, 3, 1], 0)
    before = [w.copy() for w in net.weights]
    new = nn.mbgd_step(net, [[1.0, 2.0], [0.5, -1.0]], [1.0, 0.0], 0.5)
    assert all(np.array_equal(a, b) for a, b in zip(net.weights, before))
    assert not all(np.array_equal(a, b) for a, b in zip(new.weights, before))
    nn.mbgd_step(net, [[1.0, 2.0]], [1.0], 0.5, inplace=True)
    assert not np.array_equal(net.weights[0], before[0])


def test_learns_separable_toy():
    rng = np.random.default_rng(8)
    X = np.vstack([rng.normal(-1.5, 0.4, (30, 2)), rng.normal(1.5, 0.4, (30, 2))])
    y = [PD] * 30 + [HEALTHY] * 30
    net, trace = nn.fit(X, y, TrainConfig(hidden=(8,), epochs=50, seed=3))
    labels = [nn.predict(net, x)[0] for x in X]
    assert labels == y
    assert trace.losses[-1] < trace.losses[0]


def test_training_is_deterministic():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(20, 6))
    y = [HEALTHY, PD] * 10
    cfg = TrainConfig(epochs=5, seed=42)
    a, ta = nn.fit(X, y, cfg)
    b, tb = nn.fit(X, y, cfg)
    assert ta.losses == tb.losses
    assert all(np.array_equal(p, q) for p, q in zip(a.weights + a.biases, b.weights + b.biases))
    c, _ = nn.fit(X, y, TrainConfig(epochs=5, seed=43))
    assert not np.array_equal(a.weights[0], c.weights[0])


def test_standardizer_is_stored_and_applied():
    X = np.array([[1.0, 10.0], [3.0, 10.0]])
    net = nn.build_network(X, TrainConfig(hidden=(2,)))
    np.testing.assert_allclose(net.input_shift, [2.0, 10.0])
    np.testing.assert_allclose(net.input_scale, [1.0, 1.0])
    raw = nn.build_network(X, TrainConfig(hidden=(2,), standardize=False))
    assert raw.input_shift is None


def test_divergence_is_reported(monkeypatch):
    # A bounded sigmoid loss does not blow up on its own; poison the second epoch instead.
    calls = {"n": 0}
    real = nn._update

    def poisoned(net, v0, y, lr):
        calls["n"] += 1
        real(net, v0, y, lr)
        if calls["n"] > 5:
            net.weights[0][0, 0] = np.nan

    monkeypatch.setattr(nn, "_update", poisoned)
    rng = np.random.default_rng(0)
    X = rng.normal(size=(10, 3))
    with pytest.raises(TrainingDiverged, match="epoch 2 with learning rate 0.1"):
        nn.fit(X, [HEALTHY, PD] * 5, TrainConfig(epochs=3))


def test_network_validation():
    with pytest.raises(ValueError):
        Network([2, 2], [np.zeros((2, 2))], [np.zeros(2)])
    with pytest.raises(ValueError):
        Network([2, 1], [np.zeros((1, 3))], [np.zeros(1)])
    with pytest.raises(ValueError):
        nn.label_values(["maybe"])
    with pytest.raises(ValueError):
        TrainConfig(batch_size=0).validate()
    with pytest.raises(ValueError):
        nn.forward(nn.init_network([3, 1]), [1.0, 2.0])


def test_predict_threshold():
    net = Network([1, 1], [np.array([[0.0]])], [np.array([0.0])])
    assert nn.predict(net, np.array([5.0])) == (HEALTHY, 0.5)
    net.biases[0][:] = -1e-9
    assert nn.predict(net, np.array([5.0]))[0] == PD


def test_rbm_reduces_reconstruction_error():
    rng = np.random.default_rng(0)
    protos = rng.integers(0, 2, (3, 12)).astype(float)
    data = protos[rng.integers(0, 3, 300)]
    rbm = RBM.init(12, 6, rng)
    start = rbm.reconstruction_error(data)
    train_rbm(rbm, data, epochs=30, lr=0.1, cd_steps=1, batch_size=10, rng=rng)
    assert rbm.errors[-1] < 0.5 * start


def test_rbm_error_falls_on_average_for_teacher_data():
    curves = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        teacher = RBM.init(12, 4, rng)
        teacher.weights = rng.normal(0, 2, (4, 12))
        h = (rng.random((400, 4)) < 0.5).astype(float)
        data = (rng.random((400, 12)) < teacher.visible_mean(h)).astype(float)
        rbm = RBM.init(12, 4, rng)
        start = rbm.reconstruction_error(data)
        train_rbm(rbm, data, epochs=20, lr=0.05, cd_steps=1, batch_size=10, rng=rng)
        curves.append([start, *rbm.errors])
    assert np.all(np.diff(np.mean(curves, axis=0)) <= 0)


def test_gaussian_rbm_and_zero_epochs():
    rng = np.random.default_rng(1)
    data = rng.normal(size=(50, 4))
    rbm = RBM.init(4, 3, rng, gaussian_visible=True)
    w = rbm.weights.copy()
    train_rbm(rbm, data, epochs=0, lr=0.01, cd_steps=1, batch_size=5, rng=rng)
    assert np.array_equal(rbm.weights, w)
    assert rbm.visible_mean(np.ones((1, 3))).shape == (1, 4)


def test_rbm_divergence_aborts():
    rng = np.random.default_rng(2)
    data = rng.normal(size=(40, 5)) * 50
    rbm = RBM.init(5, 4, rng, gaussian_visible=True)
    with pytest.raises(RBMDiverged, match="epoch"):
        train_rbm(rbm, data, epochs=20, lr=5.0, cd_steps=1, batch_size=4, rng=rng)


def test_rbm_pretraining_shapes_and_determinism():
    rng = np.random.default_rng(3)
    X = rng.normal(size=(30, 6))
    cfg = TrainConfig(hidden=(5, 3), pretrain="rbm", rbm_epochs=3, epochs=2, seed=11)
    layers = pretrain_rbm_stack(X, [5, 3], cfg)
    assert [w.shape for w, _ in layers] == [(5, 6), (3, 5)]
    a, _ = nn.fit(X, [HEALTHY, PD] * 15, cfg)
    b, _ = nn.fit(X, [HEALTHY, PD] * 15, cfg)
    assert all(np.array_equal(p, q) for p, q in zip(a.weights, b.weights))
    plain = nn.build_network(X, TrainConfig(hidden=(5, 3), seed=11))
    assert not np.array_equal(nn.build_network(X, cfg).weights[0], plain.weights[0])


def test_relu_examples():
    assert nn.relu(np.array([-2.0, 3.0, 0.0])).tolist() == [0.0, 3.0, 0.0]


def test_zero_network_outputs_half_and_predicts_healthy():
    net = Network([3, 2, 1], [np.zeros((2, 3)), np.zeros((1, 2))], [np.zeros(2), np.zeros(1)])
    assert nn.forward(net, [1.0, -4.0, 2.0]).output[0] == 0.5
    assert nn.predict(net, np.array([1.0, -4.0, 2.0])) == (HEALTHY, 0.5)


def test_hand_evaluated_chain():
    net = Network([1, 1, 1], [np.array([[1.0]]), np.array([[1.0]])], [np.array([0.0]), np.array([0.0])])
    acts = nn.forward(net, [2.0])
    assert acts.v[1][0, 0] == 2.0
    assert round(acts.output[0], 4) == 0.8808


def test_negative_preactivation_is_silenced():
    net = Network([1, 2, 1], [np.array([[1.0], [-1.0]]), np.ones((1, 2))], [np.zeros(2), np.zeros(1)])
    assert nn.forward(net, [3.0]).v[1][:, 0].tolist() == [3.0, 0.0]


def test_loss_examples():
    assert nn.mse_loss([0.3, 0.9], [0.3, 0.9]) == 0.0
    assert nn.mse_loss([0.0], [1.0]) == 0.5
    assert nn.mse_loss([0.5, 0.5], [1.0, 0.0]) == 0.125


def test_zero_error_and_dead_unit_gradients():
    net = Network([1, 1], [np.array([[0.0]])], [np.array([0.0])])
    g = nn.backprop(net, nn.forward(net, [1.0]), [0.5])
    assert g.weights[0][0, 0] == 0.0 and g.biases[0][0] == 0.0
    dead = Network([2, 2, 1], [np.array([[1.0, 1.0], [-1.0, -1.0]]), np.ones((1, 2))], [np.zeros(2), np.zeros(1)])
    g = nn.backprop(dead, nn.forward(dead, [1.0, 2.0]), [1.0])
    assert g.weights[0][1].tolist() == [0.0, 0.0] and g.biases[0][1] == 0.0


def test_step_reductions():
    rng = np.random.default_rng(11)
    net = nn.init_network([3, 4, 1], rng)
    X, y = rng.normal(size=(2, 3)), np.array([1.0, 0.0])
    still = nn.mbgd_step(net, X, y, 0.0)
    assert all(np.array_equal(a, b) for a, b in zip(still.weights + still.biases, net.weights + net.biases))
    single = nn.mbgd_step(net, X[:1], y[:1], 0.3)
    g = nn.backprop(net, nn.forward(net, X[:1]), y[:1])
    assert all(np.array_equal(w - 0.3 * gw, s) for w, gw, s in zip(net.weights, g.weights, single.weights))
    pair = nn.mbgd_step(net, X, y, 0.3)
    other = nn.mbgd_step(net, X[1:], y[1:], 0.3)
    for a, b, c in zip(pair.weights + pair.biases, single.weights + single.biases, other.weights + other.biases):
        np.testing.assert_allclose(a, (b + c) / 2, atol=1e-12)


def test_zero_epochs_returns_unchanged_network():
    rng = np.random.default_rng(12)
    net = nn.init_network([2, 3, 1], rng)
    X, y = rng.normal(size=(6, 2)), np.array([1.0, 0.0] * 3)
    out, trace = nn.train(net, X, y, TrainConfig(epochs=0, hidden=(3,)))
    assert trace.losses == [] and trace.updates == []
    assert all(np.array_equal(a, b) for a, b in zip(out.weights + out.biases, net.weights + net.biases))
