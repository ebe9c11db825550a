"""Fixed-capacity experience replay."""

from __future__ import annotations

from typing import Iterable, NamedTuple

import numpy as np

from ..env import Action, AgentState, Transition


class InsufficientSamples(ValueError):
    pass


class TransitionBatch(NamedTuple):
    s: np.ndarray  # (n, 2) int
    a: np.ndarray  # (n,) int
    r: np.ndarray  # (n,) float
    s_next: np.ndarray  # (n, 2) int
    done: np.ndarray  # (n,) bool

    @classmethod
    def from_transitions(cls, transitions: Iterable[Transition]) -> "TransitionBatch":
        ts = list(transitions)
        return cls(
            np.array([t.s for t in ts], dtype=np.int64).reshape(-1, 2),
            np.array([int(t.a) for t in ts], dtype=np.int64),
            np.array([t.r for t in ts], dtype=np.float64),
            np.array([t.s_next for t in ts], dtype=np.int64).reshape(-1, 2),
            np.array([t.done for t in ts], dtype=bool),
        )

    def __len__(self) -> int:
        return len(self.a)

    def transitions(self) -> list[Transition]:
        return [
            Transition(
                AgentState(int(s[0]), int(s[1])),
                Action(int(a)),
                float(r),
                AgentState(int(s2[0]), int(s2[1])),
                bool(d),
            )
            for s, a, r, s2, d in zip(self.s, self.a, self.r, self.s_next, self.done)
        ]


def as_batch(batch) -> TransitionBatch:
    if isinstance(batch, TransitionBatch):
        return batch
    return TransitionBatch.from_transitions(batch)


class ReplayBuffer:
    """Ring buffer; once full, each push overwrites the oldest entry."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._s = np.zeros((capacity, 2), dtype=np.int64)
        self._a = np.zeros(capacity, dtype=np.int64)
        self._r = np.zeros(capacity, dtype=np.float64)
        self._s2 = np.zeros((capacity, 2), dtype=np.int64)
        self._done = np.zeros(capacity, dtype=bool)
        self._next = 0
        self._size = 0

    def __len__(self) -> int:
        return self._size

    def push(self, t: Transition) -> None:
        i = self._next
        self._s[i] = t.s
        self._a[i] = int(t.a)
        self._r[i] = t.r
        self._s2[i] = t.s_next
        self._done[i] = t.done
        self._next = (i + 1) % self.capacity
        self._size = min(self._size + 1, self.capacity)

    def gather(self, idx) -> TransitionBatch:
        """Entries at logical positions ``idx`` (0 = oldest)."""
        phys = np.asarray(idx, dtype=np.int64)
        if self._size == self.capacity:
            phys = (phys + self._next) % self.capacity
        return TransitionBatch(
            self._s[phys].copy(),
            self._a[phys].copy(),
            self._r[phys].copy(),
            self._s2[phys].copy(),
            self._done[phys].copy(),
        )

    def contents(self) -> list[Transition]:
        return self.gather(np.arange(self._size)).transitions()

    def sample_indices(self, batch_size: int, rng: np.random.Generator) -> np.ndarray:
        if batch_size > self._size:
            raise InsufficientSamples(f"need {batch_size} transitions, have {self._size}")
        return rng.choice(self._size, size=batch_size, replace=False)

    def sample(self, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
        return self.gather(self.sample_indices(batch_size, rng))


def buffer_push(buf: ReplayBuffer, t: Transition) -> None:
    buf.push(t)


def buffer_sample(buf: ReplayBuffer, batch_size: int, rng: np.random.Generator) -> TransitionBatch:
    return buf.sample(batch_size, rng)
