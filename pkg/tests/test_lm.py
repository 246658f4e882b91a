import math

import numpy as np
import pytest

from harmon.errors import ConfigError, TrainingAbort
from harmon.lm import TrainConfig, _solve_damped, levenberg_marquardt

X = np.array([1.0, 2.0, 3.0])
T = 2.0 * X


def line_residuals(w):
    return T - w[0] * X


def line_jacobian(w):
    return -X[:, None], line_residuals(w)


def test_defaults():
    c = TrainConfig()
    assert (c.epochs, c.goal, c.max_fail, c.mem_reduc, c.min_grad) == (7500, 0.01, 5, 1, 1e-10)
    assert (c.mu, c.mu_dec, c.mu_inc, c.mu_max, c.show) == (1e-4, 0.1, 10, 1e10, 25)
    assert c.time_limit_s == math.inf


@pytest.mark.parametrize("kw", [dict(mu_dec=1.5), dict(mu_inc=0.5), dict(mu=0), dict(epochs=0),
                                dict(mu=1e11)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        TrainConfig(**kw)


def test_config_dict_round_trip():
    c = TrainConfig(epochs=12, time_limit_s=30.0)
    assert TrainConfig.from_dict(c.to_dict()) == c
    assert TrainConfig.from_dict(TrainConfig().to_dict()).time_limit_s == math.inf


def test_linear_fit_converges():
    w, log = levenberg_marquardt(np.zeros(1), line_residuals, line_jacobian, TrainConfig(goal=0.0))
    assert abs(w[0] - 2.0) < 1e-8
    assert log.stop_reason in ("goal", "min_grad")


def test_mu_schedule():
    w, log = levenberg_marquardt(np.zeros(1), line_residuals, line_jacobian,
                                 TrainConfig(goal=0.0, epochs=4))
    ratios = np.array(log.mu_history[1:]) / np.array(log.mu_history[:-1])
    assert np.all(np.isclose(ratios, 0.1, rtol=1e-12) | np.isclose(ratios, 10.0, rtol=1e-12))
    mses = log.accepted_mse()
    assert all(b <= a for a, b in zip(mses, mses[1:]))


def test_no_descent_hits_mu_max():
    def res(x):
        return np.array([1.0])

    def jac(x):
        return np.array([[1.0]]), res(x)

    x, log = levenberg_marquardt(np.zeros(1), res, jac, TrainConfig(goal=0.0))
    assert log.stop_reason == "mu_max"
    assert log.epochs_run == 1 and not log.records[0].accepted
    assert log.mu_history[-1] > 1e10
    assert x.tolist() == [0.0]


def test_large_mu_is_gradient_descent(rng):
    jac = rng.normal(size=(20, 6))
    e = rng.normal(size=20)
    dx = _solve_damped(jac.T @ jac, jac.T @ e, 1e8)
    g = -(jac.T @ e)
    cos = dx @ g / (np.linalg.norm(dx) * np.linalg.norm(g))
    assert math.degrees(math.acos(min(1.0, cos))) < 1.0


def test_small_mu_is_gauss_newton(rng):
    jac = rng.normal(size=(20, 6))
    e = rng.normal(size=20)
    dx = _solve_damped(jac.T @ jac, jac.T @ e, 1e-12)
    np.testing.assert_allclose(dx, -np.linalg.lstsq(jac, e, rcond=None)[0], atol=1e-9)


def test_non_finite_jacobian_aborts():
    def jac(x):
        return np.array([[np.nan]]), np.array([1.0])

    with pytest.raises(TrainingAbort):
        levenberg_marquardt(np.zeros(1), lambda x: np.array([1.0]), jac, TrainConfig())


def test_goal_checked_before_first_step():
    w, log = levenberg_marquardt(np.array([2.0]), line_residuals, line_jacobian, TrainConfig())
    assert log.stop_reason == "goal" and log.epochs_run == 0 and w[0] == 2.0
