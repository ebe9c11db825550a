"""Small fully-connected Q-network and its DQN update, in plain numpy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .replay import as_batch

LAYER_SIZES = (2, 64, 64, 8)


class EmptyBatch(ValueError):
    pass


@dataclass(eq=False)
class MlpParams:
    """Weights ``W[i]`` have shape (fan_out, fan_in); hidden layers use ReLU."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases):
            raise ValueError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: inconsistent shapes {w.shape} / {b.shape}")
            if i and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: fan_in {w.shape[1]} != previous fan_out")

    @classmethod
    def init(cls, rng: np.random.Generator, sizes=LAYER_SIZES) -> "MlpParams":
        """Uniform in +-sqrt(6 / fan_in), zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            bound = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
            biases.append(np.zeros(fan_out))
        return cls(weights, biases)

    @classmethod
    def zeros(cls, sizes=LAYER_SIZES) -> "MlpParams":
        return cls(
            [np.zeros((o, i)) for i, o in zip(sizes[:-1], sizes[1:])],
            [np.zeros(o) for o in sizes[1:]],
        )

    @property
    def sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def arrays(self) -> list[np.ndarray]:
        """W1, b1, W2, b2, ... in layer order."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> "MlpParams":
        return MlpParams([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([a.ravel() for a in self.arrays()])

    def with_flat(self, theta: np.ndarray) -> "MlpParams":
        arrays, pos = [], 0
        for a in self.arrays():
            arrays.append(np.array(theta[pos : pos + a.size]).reshape(a.shape))
            pos += a.size
        return MlpParams(arrays[0::2], arrays[1::2])

    def __eq__(self, other):
        if not isinstance(other, MlpParams):
            return NotImplemented
        return self.sizes == other.sizes and all(
            np.array_equal(x, y) for x, y in zip(self.arrays(), other.arrays())
        )

    __hash__ = None


def _forward(p: MlpParams, x: np.ndarray):
    """Returns (output, cache) where cache holds layer inputs and pre-activations."""
    acts = [x]
    pres = []
    h = x
    last = len(p.weights) - 1
    for i, (w, b) in enumerate(zip(p.weights, p.biases)):
        z = h @ w.T + b
        pres.append(z)
        h = z if i == last else np.maximum(z, 0.0)
        if i != last:
            acts.append(h)
    return h, (acts, pres)


def mlp_forward(p: MlpParams, state) -> np.ndarray:
    """Action values for one normalized state (shape (2,)) or a batch (n, 2)."""
    x = np.asarray(state, dtype=np.float64)
    out, _ = _forward(p, np.atleast_2d(x))
    return out[0] if x.ndim == 1 else out


def loss_and_grad(p: MlpParams, x: np.ndarray, actions: np.ndarray, targets: np.ndarray):
    """Mean of 0.5 * (Q(x, a) - target)^2 over the batch and its gradient.

    ``targets`` are constants. Gradients come back in ``p.arrays()`` order.
    """
    n = len(actions)
    out, (acts, pres) = _forward(p, x)
    rows = np.arange(n)
    err = out[rows, actions] - targets
    loss = 0.5 * float(np.mean(err**2))

    delta = np.zeros_like(out)
    delta[rows, actions] = err / n
    grads = [None] * (2 * len(p.weights))
    for i in range(len(p.weights) - 1, -1, -1):
        grads[2 * i] = delta.T @ acts[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        if i:
            delta = (delta @ p.weights[i]) * (pres[i - 1] > 0)
    return loss, grads


def td_targets(p: MlpParams, s_next_x: np.ndarray, r: np.ndarray, done: np.ndarray, gamma: float) -> np.ndarray:
    """``r + gamma * max_a Q(s', a; w)``, bootstrap dropped on terminal samples."""
    q_next = mlp_forward(p, s_next_x)
    return r + gamma * q_next.max(axis=1) * (~done)


def dqn_update(p: MlpParams, batch, eta: float, gamma: float, normalize=None) -> float:
    """One gradient-descent step on the batch TD loss; returns the pre-update loss.

    ``normalize`` maps an (n, 2) array of lattice coordinates to network
    inputs; without it the batch states are fed to the network as-is.
    Targets use the current weights (no separate target network).
    """
    if normalize is None:
        normalize = _as_float
    b = as_batch(batch)
    if len(b) == 0:
        raise EmptyBatch("dqn_update needs at least one transition")
    if not eta > 0:
        raise ValueError("eta must be positive")
    x = normalize(b.s)
    targets = td_targets(p, normalize(b.s_next), b.r, b.done, gamma)
    loss, grads = loss_and_grad(p, x, b.a, targets)
    for arr, g in zip(p.arrays(), grads):
        arr -= eta * g
    return loss


def _as_float(xy):
    return np.asarray(xy, dtype=np.float64)


def grid_normalizer(cfg):
    """Coordinates divided by the grid extent, giving inputs in [0, 1]."""
    scale = np.array([cfg.grid.width, cfg.grid.height], dtype=np.float64)

    def normalize(xy):
        return np.asarray(xy, dtype=np.float64) / scale

    return normalize
