"""Exploration schedule and action selection shared by all three learners."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..env import N_ACTIONS, Action


class BadDistribution(ValueError):
    pass


@dataclass(frozen=True)
class EpsilonSchedule:
    """Linear decay from ``eps_initial`` to ``eps_final`` over ``total_episodes``."""

    eps_initial: float = 0.6
    eps_final: float = 0.1
    total_episodes: int = 500

    def __post_init__(self):
        if not (0.0 <= self.eps_final <= self.eps_initial <= 1.0):
            raise ValueError("need 0 <= eps_final <= eps_initial <= 1")
        if self.total_episodes < 1:
            raise ValueError("total_episodes must be positive")

    @property
    def delta(self) -> float:
        return (self.eps_initial - self.eps_final) / self.total_episodes


def epsilon_at(sched: EpsilonSchedule, episode: int) -> float:
    if episode < 0:
        raise ValueError("episode must be >= 0")
    return max(sched.eps_final, sched.eps_initial - episode * sched.delta)


def argmax_action(q_values) -> Action:
    # np.argmax returns the first maximum, i.e. the lowest action index
    return Action(int(np.argmax(q_values)))


def select_action(q_values, eps: float, rng: np.random.Generator) -> Action:
    """Epsilon-greedy. Consumes one uniform draw, plus one integer draw when exploring."""
    if rng.random() < eps:
        return Action(int(rng.integers(N_ACTIONS)))
    return argmax_action(q_values)


def expected_value(q_row, policy_probs) -> float:
    """Expected action value under ``policy_probs`` for one state's Q row."""
    p = np.asarray(policy_probs, dtype=np.float64)
    q = np.asarray(q_row, dtype=np.float64)
    if p.shape != (N_ACTIONS,) or np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise BadDistribution("policy_probs must be a non-negative 8-vector summing to 1")
    return float(p @ q)


def epsilon_greedy_probs(q_values, eps: float) -> np.ndarray:
    p = np.full(N_ACTIONS, eps / N_ACTIONS)
    p[argmax_action(q_values)] += 1.0 - eps
    return p
