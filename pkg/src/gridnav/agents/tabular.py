"""Q-table learners: Q-learning and SARSA."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from ..env import N_ACTIONS, EnvConfig, Transition


class TdQuantities(NamedTuple):
    td_target: float
    td_error: float  # prediction - target


class QTable:
    """``values[state_index, action]``, zero-initialised.

    States may be given as table indices or, when the table was made with
    ``for_env``, as lattice coordinates.
    """

    def __init__(self, n_states: int, values: np.ndarray | None = None, *, d: int | None = None,
                 nx: int | None = None):
        if values is None:
            values = np.zeros((n_states, N_ACTIONS), dtype=np.float64)
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (n_states, N_ACTIONS):
            raise ValueError(f"expected shape ({n_states}, {N_ACTIONS}), got {values.shape}")
        self.values = values
        self.d = d
        self.nx = nx

    @classmethod
    def for_env(cls, cfg: EnvConfig) -> "QTable":
        return cls(cfg.n_states, d=cfg.d, nx=cfg.nx)

    def bind(self, cfg: EnvConfig) -> "QTable":
        if self.n_states != cfg.n_states:
            raise ValueError(f"table has {self.n_states} states, environment has {cfg.n_states}")
        self.d, self.nx = cfg.d, cfg.nx
        return self

    @property
    def n_states(self) -> int:
        return self.values.shape[0]

    def index(self, s) -> int:
        if isinstance(s, (int, np.integer)):
            return int(s)
        if self.d is None:
            raise ValueError("table has no lattice geometry; pass state indices or use QTable.for_env")
        return (s[1] // self.d) * self.nx + s[0] // self.d

    def row(self, s) -> np.ndarray:
        return self.values[self.index(s)]

    def __eq__(self, other):
        if not isinstance(other, QTable):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    __hash__ = None

    def copy(self) -> "QTable":
        return QTable(self.n_states, self.values.copy(), d=self.d, nx=self.nx)


def _check(alpha: float, gamma: float) -> None:
    if not 0.0 < alpha <= 1.0:
        raise ValueError("alpha must lie in (0, 1]")
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")


def _blend(table: QTable, t: Transition, target: float, alpha: float) -> TdQuantities:
    q = table.values
    s, a = table.index(t.s), int(t.a)
    pred = q[s, a]
    q[s, a] = (1.0 - alpha) * pred + alpha * target
    return TdQuantities(float(target), float(pred - target))


def qlearning_update(table: QTable, t: Transition, alpha: float, gamma: float) -> TdQuantities:
    """Move Q(s, a) a fraction ``alpha`` toward ``r + gamma * max_a Q(s', a)``."""
    _check(alpha, gamma)
    target = t.r if t.done else t.r + gamma * table.row(t.s_next).max()
    return _blend(table, t, target, alpha)


def sarsa_update(table: QTable, t: Transition, a_next, alpha: float, gamma: float) -> TdQuantities:
    """Same blend as Q-learning but bootstrapping on the action actually taken next."""
    _check(alpha, gamma)
    target = t.r if t.done else t.r + gamma * table.row(t.s_next)[int(a_next)]
    return _blend(table, t, target, alpha)


def qlearning_batch_update(table: QTable, batch, alpha: float, gamma: float) -> float:
    """Apply ``qlearning_update`` to every sample of a replay batch, in order.

    Returns the mean squared TD error seen before each update.
    """
    _check(alpha, gamma)
    q = table.values
    d, nx = table.d, table.nx
    s_idx = ((batch.s[:, 1] // d) * nx + batch.s[:, 0] // d).tolist()
    s2_idx = ((batch.s_next[:, 1] // d) * nx + batch.s_next[:, 0] // d).tolist()
    keep = 1.0 - alpha
    sq = 0.0
    # plain-float loop: sample j may bootstrap on a row updated by sample i < j
    for s, a, r, s2, done in zip(s_idx, batch.a.tolist(), batch.r.tolist(), s2_idx, batch.done.tolist()):
        target = r if done else r + gamma * max(q[s2].tolist())
        pred = q[s, a]
        q[s, a] = keep * pred + alpha * target
        sq += (pred - target) ** 2
    return sq / len(s_idx)
