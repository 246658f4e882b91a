import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from harmon.errors import ConfigError
from harmon.lm import TrainConfig
from harmon.nn import (MlpParams, Topology, forward, init_nguyen_widrow, init_uniform,
                       initialize, jacobian, mse, params_from_dict, params_to_dict,
                       residuals, tansig, train_lm)


def fd_jacobian(params, x, t, h=1e-6):
    flat = params.flatten()
    cols = []
    for i in range(len(flat)):
        up, dn = flat.copy(), flat.copy()
        up[i] += h
        dn[i] -= h
        cols.append((residuals(MlpParams.unflatten(params.topology, up), x, t)
                     - residuals(MlpParams.unflatten(params.topology, dn), x, t)) / (2 * h))
    return np.stack(cols, axis=1)


@pytest.mark.parametrize("n, expected", [(0.0, 0.0), (1.0, 0.7615941559557649), (-20.0, -1.0)])
def test_tansig_values(n, expected):
    assert tansig(n) == pytest.approx(expected, abs=1e-15)


@given(st.floats(-30, 30))
def test_tansig_matches_logistic_form(n):
    assert tansig(n) == pytest.approx(2 / (1 + math.exp(-2 * n)) - 1, abs=1e-12)


def test_topology_counts():
    topo = Topology(22, (7, 7))
    assert topo.sizes == (22, 7, 7, 1)
    assert topo.n_params == 22 * 7 + 7 + 7 * 7 + 7 + 7 + 1
    assert topo.transfers == ("tansig", "tansig", "purelin")
    with pytest.raises(ConfigError):
        Topology(22, (0,))


def test_flatten_round_trip(rng):
    topo = Topology(4, (3, 2))
    flat = rng.normal(size=topo.n_params)
    p = MlpParams.unflatten(topo, flat)
    assert np.array_equal(p.flatten(), flat)
    # layer-major, weights row-major before the bias
    assert np.array_equal(p.weights[0].ravel(), flat[:12])
    assert np.array_equal(p.biases[0], flat[12:15])


class TestInit:
    def test_nguyen_widrow_row_norms(self):
        p = init_nguyen_widrow(Topology(22, (7, 7)), 11)
        np.testing.assert_allclose(np.linalg.norm(p.weights[0], axis=1), 0.7 * 7 ** (1 / 22))
        np.testing.assert_allclose(np.linalg.norm(p.weights[1], axis=1), 0.7 * 7 ** (1 / 7))
        assert np.all(np.abs(p.weights[2]) <= 0.5)
        beta = 0.7 * 7 ** (1 / 22)
        np.testing.assert_allclose(np.abs(p.biases[0]), beta * np.abs(np.linspace(-1, 1, 7)))

    def test_deterministic(self):
        topo = Topology()
        a, b = init_nguyen_widrow(topo, 4), init_nguyen_widrow(topo, 4)
        assert np.array_equal(a.flatten(), b.flatten())
        assert not np.array_equal(a.flatten(), init_nguyen_widrow(topo, 5).flatten())

    def test_uniform_range(self):
        p = init_uniform(Topology(), 0, 10.0)
        flat = p.flatten()
        assert np.all(np.abs(flat) <= 10.0) and np.max(np.abs(flat)) > 5.0

    def test_initialize_dispatch(self):
        cfg = TrainConfig(init="uniform", init_range=2.0)
        assert np.array_equal(initialize(Topology(), cfg, 1).flatten(),
                              init_uniform(Topology(), 1, 2.0).flatten())


class TestForward:
    def test_zero_network(self):
        out, acts = forward(MlpParams.zeros(Topology()), np.ones(22))
        assert out == 0.0 and len(acts) == 4

    def test_hand_computed(self):
        topo = Topology(2, (1,))
        p = MlpParams(topo, [np.array([[1.0, -1.0]]), np.array([[2.0]])],
                      [np.array([0.5]), np.array([-1.0])])
        out, _ = forward(p, [1.0, 0.25])
        assert out == pytest.approx(2 * math.tanh(1.25) - 1, abs=1e-15)

    def test_batch_matches_single(self, rng):
        p = init_nguyen_widrow(Topology(), 2)
        x = rng.normal(size=(5, 22))
        batch, _ = forward(p, x)
        np.testing.assert_allclose(batch, [forward(p, r)[0] for r in x], atol=1e-14)

    def test_width_checked(self):
        with pytest.raises(ConfigError):
            forward(MlpParams.zeros(Topology()), np.ones(21))


class TestJacobian:
    def test_hand_1_1_1(self):
        topo = Topology(1, (1,))
        p = MlpParams(topo, [np.array([[0.0]]), np.array([[0.5]])], [np.zeros(1), np.zeros(1)])
        jac, e = jacobian(p, [[3.0]], [1.0])
        # tansig slope 1 at 0: chain rule by hand, e = t - y
        np.testing.assert_allclose(jac, [[-1.5, -0.5, 0.0, -1.0]], atol=1e-15)
        assert e.tolist() == [1.0]

    @pytest.mark.parametrize("hidden", [(7, 7), (3,), (5, 4, 3)])
    def test_matches_finite_differences(self, hidden, rng):
        topo = Topology(22, hidden)
        p = init_nguyen_widrow(topo, 7)
        x, t = rng.normal(size=(9, 22)), rng.integers(0, 3, 9).astype(float)
        jac, e = jacobian(p, x, t)
        assert np.array_equal(e, residuals(p, x, t))
        np.testing.assert_allclose(jac, fd_jacobian(p, x, t), atol=1e-8)

    def test_multi_output(self, rng):
        topo = Topology(3, (4,), 2)
        p = init_uniform(topo, 1, 1.0)
        x, t = rng.normal(size=(5, 3)), rng.normal(size=(5, 2))
        np.testing.assert_allclose(jacobian(p, x, t)[0], fd_jacobian(p, x, t), atol=1e-8)


def test_mse_definition(rng):
    p = init_nguyen_widrow(Topology(), 0)
    x, t = rng.normal(size=(6, 22)), np.arange(6.0) % 3
    out, _ = forward(p, x)
    assert mse(p, x, t) == pytest.approx(np.mean((t - out) ** 2), rel=1e-14)


@pytest.fixture(scope="module")
def data():
    r = np.random.default_rng(3)
    x = r.normal(size=(30, 22))
    return x, np.clip(np.round(x[:, 0] + 1), 0, 2)


class TestTraining:
    def test_reduces_error(self, data):
        x, t = data
        p0 = init_nguyen_widrow(Topology(), 1)
        p, log = train_lm(p0, x, t, TrainConfig(epochs=50))
        assert mse(p, x, t) < mse(p0, x, t)
        assert log.final_mse == pytest.approx(mse(p, x, t), rel=1e-12)

    def test_deterministic(self, data):
        x, t = data
        cfg = TrainConfig(epochs=30)
        a, _ = train_lm(init_nguyen_widrow(Topology(), 9), x, t, cfg)
        b, _ = train_lm(init_nguyen_widrow(Topology(), 9), x, t, cfg)
        assert np.array_equal(a.flatten(), b.flatten())

    def test_validation_returns_best(self, data):
        x, t = data
        vt = np.random.default_rng(0).permutation(t)
        p, log = train_lm(init_nguyen_widrow(Topology(), 2), x, t,
                          TrainConfig(epochs=200, goal=0.0), validation=(x, vt))
        vals = [r.val_mse for r in log.records if r.val_mse is not None]
        assert mse(p, x, vt) <= min(vals) + 1e-12
        if log.stop_reason == "max_fail":
            assert log.epochs_run - log.best_epoch >= 5

    def test_epoch_limit(self, data):
        x, t = data
        _, log = train_lm(init_nguyen_widrow(Topology(), 1), x, t, TrainConfig(epochs=3, goal=0.0))
        assert log.stop_reason == "epochs" and log.epochs_run == 3


def test_params_dict_round_trip():
    p = init_nguyen_widrow(Topology(22, (5,)), 8)
    back = params_from_dict(params_to_dict(p))
    assert back.topology == p.topology
    assert np.array_equal(back.flatten(), p.flatten())


def test_params_reject_non_finite():
    d = params_to_dict(MlpParams.zeros(Topology(2, (1,))))
    d["layers"][0]["bias"] = [float("nan")]
    with pytest.raises(ConfigError):
        params_from_dict(d)
