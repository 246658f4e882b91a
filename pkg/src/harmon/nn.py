"""Feed-forward perceptron with tansig hidden layers and a linear output.

Parameters are flattened layer by layer: each layer's weight matrix
(fan_out x fan_in, row-major) followed by its bias vector.  The Jacobian
columns follow the same order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .lm import TrainConfig, TrainLog, levenberg_marquardt

TRANSFERS = ("tansig", "purelin")


def tansig(n):
    """Hyperbolic tangent sigmoid, written as 2 / (1 + exp(-2n)) - 1."""
    n = np.asarray(n, dtype=float)
    # tanh is the same function without the overflow in exp(-2n) for n << 0
    return np.tanh(n)


def tansig_deriv_from_output(a):
    return 1.0 - a * a


def purelin(n):
    return np.asarray(n, dtype=float)


_FUNCS = {"tansig": tansig, "purelin": purelin}


@dataclass(frozen=True)
class Topology:
    n_inputs: int = 22
    hidden_sizes: tuple[int, ...] = (7, 7)
    n_outputs: int = 1
    transfers: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "hidden_sizes", tuple(int(h) for h in self.hidden_sizes))
        if self.transfers is None:
            tags = ("tansig",) * len(self.hidden_sizes) + ("purelin",)
            object.__setattr__(self, "transfers", tags)
        else:
            object.__setattr__(self, "transfers", tuple(self.transfers))
        sizes = (self.n_inputs, *self.hidden_sizes, self.n_outputs)
        if any(s < 1 for s in sizes):
            raise ConfigError(f"layer sizes must be >= 1: {sizes}")
        if len(self.transfers) != len(self.hidden_sizes) + 1:
            raise ConfigError("one transfer tag per layer is required")
        if any(t not in TRANSFERS for t in self.transfers):
            raise ConfigError(f"unknown transfer in {self.transfers}")
        if self.transfers[-1] != "purelin":
            raise ConfigError("the output layer must be purelin")

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.n_inputs, *self.hidden_sizes, self.n_outputs)

    @property
    def n_params(self) -> int:
        s = self.sizes
        return sum(s[i + 1] * s[i] + s[i + 1] for i in range(len(s) - 1))

    def to_dict(self) -> dict:
        return {"n_inputs": self.n_inputs, "hidden_sizes": list(self.hidden_sizes),
                "n_outputs": self.n_outputs, "transfers": list(self.transfers)}

    @classmethod
    def from_dict(cls, d) -> "Topology":
        return cls(int(d["n_inputs"]), tuple(d["hidden_sizes"]), int(d.get("n_outputs", 1)),
                   tuple(d["transfers"]) if "transfers" in d else None)


@dataclass
class MlpParams:
    topology: Topology
    weights: list[np.ndarray] = field(default_factory=list)
    biases: list[np.ndarray] = field(default_factory=list)

    def __post_init__(self):
        s = self.topology.sizes
        if len(self.weights) != len(s) - 1 or len(self.biases) != len(s) - 1:
            raise ConfigError("parameter count does not match topology")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (s[i + 1], s[i]) or b.shape != (s[i + 1],):
                raise ConfigError(f"layer {i} has shapes {w.shape}, {b.shape}")

    def flatten(self) -> np.ndarray:
        parts = []
        for w, b in zip(self.weights, self.biases):
            parts += [w.ravel(), b]
        return np.concatenate(parts)

    @classmethod
    def unflatten(cls, topology: Topology, flat) -> "MlpParams":
        flat = np.asarray(flat, dtype=float)
        if flat.shape != (topology.n_params,):
            raise ConfigError(f"expected {topology.n_params} parameters, got {flat.shape}")
        s = topology.sizes
        weights, biases, pos = [], [], 0
        for i in range(len(s) - 1):
            n = s[i + 1] * s[i]
            weights.append(flat[pos:pos + n].reshape(s[i + 1], s[i]).copy())
            pos += n
            biases.append(flat[pos:pos + s[i + 1]].copy())
            pos += s[i + 1]
        return cls(topology, weights, biases)

    @classmethod
    def zeros(cls, topology: Topology) -> "MlpParams":
        return cls.unflatten(topology, np.zeros(topology.n_params))


def init_nguyen_widrow(topology: Topology, seed: int) -> MlpParams:
    """Nguyen-Widrow initialization for tansig layers, small uniform output weights.

    Each hidden weight row is a random direction scaled to length
    ``0.7 * H ** (1 / fan_in)``; biases spread evenly over ``[-beta, beta]``
    so the neurons' active regions tile the (normalized) input space.
    """
    rng = np.random.default_rng(seed)
    s = topology.sizes
    weights, biases = [], []
    for i in range(len(s) - 1):
        fan_in, fan_out = s[i], s[i + 1]
        if topology.transfers[i] == "tansig":
            beta = 0.7 * fan_out ** (1.0 / fan_in)
            w = rng.uniform(-1.0, 1.0, (fan_out, fan_in))
            norms = np.linalg.norm(w, axis=1, keepdims=True)
            w = beta * w / np.where(norms > 0, norms, 1.0)
            spread = np.linspace(-1.0, 1.0, fan_out) if fan_out > 1 else np.zeros(1)
            b = beta * spread * np.sign(w[:, 0])
        else:
            w = rng.uniform(-0.5, 0.5, (fan_out, fan_in))
            b = rng.uniform(-0.5, 0.5, fan_out)
        weights.append(w)
        biases.append(b)
    return MlpParams(topology, weights, biases)


def init_uniform(topology: Topology, seed: int, scale: float = 0.5) -> MlpParams:
    """Every weight and bias uniform in [-scale, scale]."""
    rng = np.random.default_rng(seed)
    return MlpParams.unflatten(topology, rng.uniform(-scale, scale, topology.n_params))


def initialize(topology: Topology, config: TrainConfig, seed: int | None = None) -> MlpParams:
    seed = config.rng_seed if seed is None else seed
    if config.init == "uniform":
        return init_uniform(topology, seed, config.init_range)
    return init_nguyen_widrow(topology, seed)


def forward(params: MlpParams, inputs):
    """Outputs and per-layer activations for one vector or a batch of rows.

    A single vector returns a scalar output (for one output neuron).
    """
    x = np.asarray(inputs, dtype=float)
    single = x.ndim == 1
    a = np.atleast_2d(x)
    if a.shape[1] != params.topology.n_inputs:
        raise ConfigError(f"input width {a.shape[1]} != {params.topology.n_inputs}")
    acts = [a]
    for w, b, tag in zip(params.weights, params.biases, params.topology.transfers):
        a = _FUNCS[tag](a @ w.T + b)
        acts.append(a)
    out = a
    if single:
        out = out[0]
        if params.topology.n_outputs == 1:
            out = float(out[0])
    elif params.topology.n_outputs == 1:
        out = out[:, 0]
    return out, acts


def _as_targets(targets, n_outputs: int) -> np.ndarray:
    return np.asarray(targets, dtype=float).reshape(-1, n_outputs)


def residuals(params: MlpParams, inputs, targets) -> np.ndarray:
    """e = target - output, flattened sample-major."""
    _, acts = forward(params, np.atleast_2d(inputs))
    t = _as_targets(targets, params.topology.n_outputs)
    return (t - acts[-1]).ravel()


def mse(params: MlpParams, inputs, targets) -> float:
    e = residuals(params, inputs, targets)
    if e.size == 0:
        raise ConfigError("empty dataset")
    return float(np.mean(e * e))


def jacobian(params: MlpParams, inputs, targets):
    """Jacobian of the residuals w.r.t. the flat parameters, plus the residuals.

    Row ``i * n_outputs + o`` belongs to sample ``i``, output ``o``.
    """
    topo = params.topology
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    _, acts = forward(params, x)
    t = _as_targets(targets, topo.n_outputs)
    e = (t - acts[-1]).ravel()
    n, n_out = x.shape[0], topo.n_outputs
    n_layers = len(params.weights)

    # delta[s, o, j]: d e_{s,o} / d net_j of the current layer
    eye = np.broadcast_to(-np.eye(n_out), (n, n_out, n_out))
    delta = eye.copy()  # purelin output: de/dnet = -1 on the diagonal
    blocks = [None] * n_layers
    for k in range(n_layers - 1, -1, -1):
        a_in = acts[k]
        gw = np.einsum("soj,si->soji", delta, a_in).reshape(n * n_out, -1)
        gb = delta.reshape(n * n_out, -1)
        blocks[k] = (gw, gb)
        if k > 0:
            delta = delta @ params.weights[k]
            if topo.transfers[k - 1] == "tansig":
                delta = delta * tansig_deriv_from_output(acts[k])[:, None, :]
    cols = []
    for gw, gb in blocks:
        cols += [gw, gb]
    return np.hstack(cols), e


def train_lm(params: MlpParams, inputs, targets, config: TrainConfig | None = None,
             validation=None) -> tuple[MlpParams, TrainLog]:
    """Levenberg-Marquardt training on mean squared error.

    ``validation`` is an optional ``(inputs, targets)`` pair enabling
    ``max_fail`` early stopping.
    """
    config = config or TrainConfig()
    topo = params.topology
    x = np.atleast_2d(np.asarray(inputs, dtype=float))
    if x.shape[0] == 0:
        raise ConfigError("empty training set")
    t = np.asarray(targets, dtype=float)

    def res(flat):
        return residuals(MlpParams.unflatten(topo, flat), x, t)

    def jac(flat):
        return jacobian(MlpParams.unflatten(topo, flat), x, t)

    val = None
    if validation is not None:
        vx, vt = validation

        def val(flat):
            return residuals(MlpParams.unflatten(topo, flat), vx, vt)

    flat, log = levenberg_marquardt(params.flatten(), res, jac, config, val)
    return MlpParams.unflatten(topo, flat), log


def params_to_dict(params: MlpParams) -> dict:
    return {
        "topology": params.topology.to_dict(),
        "layers": [{"weights": w.tolist(), "bias": b.tolist()}
                   for w, b in zip(params.weights, params.biases)],
    }


def params_from_dict(d: dict) -> MlpParams:
    topo = Topology.from_dict(d["topology"])
    weights = [np.asarray(layer["weights"], dtype=float) for layer in d["layers"]]
    biases = [np.asarray(layer["bias"], dtype=float) for layer in d["layers"]]
    for arr in weights + biases:
        if not np.all(np.isfinite(arr)):
            raise ConfigError("non-finite parameter in model")
    return MlpParams(topo, weights, biases)


__all__ = [
    "Topology", "MlpParams", "TrainConfig", "TrainLog", "tansig", "purelin",
    "init_nguyen_widrow", "init_uniform", "initialize", "forward", "residuals",
    "jacobian", "mse", "train_lm", "params_to_dict", "params_from_dict",
]
