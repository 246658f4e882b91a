"""Levenberg-Marquardt least squares with trainlm-style damping control.

The solver is model agnostic: it works on a flat parameter vector and two
callables, one returning residuals ``e = target - output`` and one returning
``(J, e)`` where ``J = de/dx``.  Each epoch computes ``J`` once and then
tries damped Gauss-Newton steps

    dx = -(J^T J + mu I)^-1 J^T e

raising ``mu`` by ``mu_inc`` after every rejected step and lowering it by
``mu_dec`` on acceptance.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .errors import ConfigError, TrainingAbort

log = logging.getLogger(__name__)

STOP_REASONS = ("goal", "epochs", "mu_max", "min_grad", "time", "max_fail")


@dataclass
class TrainConfig:
    """Training hyperparameters; defaults are the trainlm settings of the original study."""

    epochs: int = 7500
    goal: float = 0.01
    max_fail: int = 5
    mem_reduc: int = 1  # accepted for compatibility, the full Jacobian is always held
    min_grad: float = 1e-10
    mu: float = 0.0001
    mu_dec: float = 0.1
    mu_inc: float = 10.0
    mu_max: float = 1e10
    show: int | None = 25
    time_limit_s: float = math.inf
    rng_seed: int = 0
    init: str = "nguyen-widrow"
    init_range: float = 0.5

    def __post_init__(self):
        self.validate()

    def validate(self):
        if not 0 < self.mu_dec < 1 < self.mu_inc:
            raise ConfigError("need 0 < mu_dec < 1 < mu_inc")
        if not 0 < self.mu < self.mu_max:
            raise ConfigError("need 0 < mu < mu_max")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.max_fail < 1:
            raise ConfigError("max_fail must be >= 1")
        if self.init not in ("nguyen-widrow", "uniform"):
            raise ConfigError(f"unknown init scheme {self.init!r}")

    def to_dict(self) -> dict:
        d = asdict(self)
        # JSON has no infinity
        d["time_limit_s"] = None if math.isinf(self.time_limit_s) else self.time_limit_s
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if d.get("time_limit_s") is None:
            d["time_limit_s"] = math.inf
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown training options: {sorted(unknown)}")
        return cls(**d)


@dataclass
class EpochRecord:
    epoch: int
    mse: float
    mu: float
    gradient_norm: float
    accepted: bool
    val_mse: float | None = None


@dataclass
class TrainLog:
    initial_mse: float
    records: list[EpochRecord] = field(default_factory=list)
    mu_history: list[float] = field(default_factory=list)
    stop_reason: str | None = None
    stop_epoch: int = 0
    best_epoch: int = 0

    @property
    def epochs_run(self) -> int:
        return len(self.records)

    @property
    def final_mse(self) -> float:
        for r in reversed(self.records):
            if r.accepted:
                return r.mse
        return self.initial_mse

    def accepted_mse(self) -> list[float]:
        return [self.initial_mse] + [r.mse for r in self.records if r.accepted]


def _solve_damped(jtj: np.ndarray, jte: np.ndarray, mu: float):
    a = jtj + mu * np.eye(len(jtj))
    try:
        c = linalg.cho_factor(a, check_finite=True)
    except (linalg.LinAlgError, ValueError):
        return None
    return -linalg.cho_solve(c, jte)


def levenberg_marquardt(
    x0,
    residuals: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray]],
    config: TrainConfig,
    val_residuals: Callable[[np.ndarray], np.ndarray] | None = None,
):
    """Minimize mean(e**2) from ``x0``; returns ``(x, TrainLog)``.

    When ``val_residuals`` is given, training stops after ``max_fail``
    consecutive epochs without a new best validation error and the
    best-validation parameters are returned.
    """
    x = np.array(x0, dtype=float)
    e = residuals(x)
    perf = float(np.mean(e * e))
    if not math.isfinite(perf):
        raise TrainingAbort("initial error is not finite")
    mu = float(config.mu)
    trace = TrainLog(initial_mse=perf)
    trace.mu_history.append(mu)

    best_x, best_val, fails = x.copy(), math.inf, 0
    if val_residuals is not None:
        ev = val_residuals(x)
        best_val = float(np.mean(ev * ev))

    t0 = time.monotonic()
    epoch = 0
    while True:
        epoch += 1
        jac, e = jacobian(x)
        jte = jac.T @ e
        if not np.all(np.isfinite(jte)):
            raise TrainingAbort(f"non-finite Jacobian or residuals at epoch {epoch}")
        gnorm = float(np.max(np.abs(jte))) if jte.size else 0.0
        stop = None
        if perf <= config.goal:
            stop = "goal"
        elif epoch > config.epochs:
            stop = "epochs"
        elif mu > config.mu_max:
            stop = "mu_max"
        elif gnorm < config.min_grad:
            stop = "min_grad"
        elif time.monotonic() - t0 > config.time_limit_s:
            stop = "time"
        if stop is not None:
            trace.stop_reason, trace.stop_epoch = stop, epoch
            break

        jtj = jac.T @ jac
        accepted = False
        new_perf = perf
        while mu <= config.mu_max:
            dx = _solve_damped(jtj, jte, mu)
            if dx is not None:
                cand = x + dx
                ec = residuals(cand)
                cand_perf = float(np.mean(ec * ec))
                if cand_perf < perf:
                    x, new_perf, accepted = cand, cand_perf, True
                    mu = mu * config.mu_dec
                    trace.mu_history.append(mu)
                    break
            # factorization failures fall through here like rejected steps;
            # a mu that underflowed to zero restarts from the smallest normal
            mu = mu * config.mu_inc if mu > 0 else float(np.finfo(float).tiny)
            trace.mu_history.append(mu)

        perf = new_perf
        rec = EpochRecord(epoch, perf, mu, gnorm, accepted)

        if val_residuals is not None and accepted:
            ev = val_residuals(x)
            vperf = float(np.mean(ev * ev))
            rec.val_mse = vperf
            if vperf < best_val:
                best_val, best_x, fails = vperf, x.copy(), 0
                trace.best_epoch = epoch
            else:
                fails += 1
        trace.records.append(rec)

        if config.show and epoch % config.show == 0:
            log.debug("epoch %d mse %.6g mu %.3g grad %.3g", epoch, perf, mu, gnorm)
        if not accepted:
            trace.stop_reason, trace.stop_epoch = "mu_max", epoch
            break
        if val_residuals is not None and fails >= config.max_fail:
            trace.stop_reason, trace.stop_epoch = "max_fail", epoch
            return best_x, trace

    if val_residuals is not None:
        ev = val_residuals(x)
        if float(np.mean(ev * ev)) > best_val:
            return best_x, trace
    else:
        trace.best_epoch = trace.epochs_run
    return x, trace
