"""Deterministic grid-world MDP: a square robot footprint stepping on a lattice."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .gridmap import CellState, OccupancyGrid, footprint_collides

COLLISION_REWARD = -20.0
AXIS_REWARD = -1.0
DIAGONAL_REWARD = -1.5
GOAL_REWARD = 20.0


class InvalidState(ValueError):
    pass


class Action(enum.IntEnum):
    UP = 0
    DOWN = 1
    LEFT = 2
    RIGHT = 3
    UPPER_LEFT = 4
    UPPER_RIGHT = 5
    LOWER_LEFT = 6
    LOWER_RIGHT = 7

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]

    @property
    def diagonal(self) -> bool:
        return self >= Action.UPPER_LEFT

    @property
    def move_reward(self) -> float:
        return DIAGONAL_REWARD if self.diagonal else AXIS_REWARD


N_ACTIONS = len(Action)

# unit displacements, scaled by the step length d
_DELTAS = {
    Action.UP: (0, 1),
    Action.DOWN: (0, -1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
    Action.UPPER_LEFT: (-1, 1),
    Action.UPPER_RIGHT: (1, 1),
    Action.LOWER_LEFT: (-1, -1),
    Action.LOWER_RIGHT: (1, -1),
}


class AgentState(NamedTuple):
    x: int
    y: int


class Event(enum.Enum):
    MOVED = "moved"
    MOVED_DIAGONAL = "moved_diagonal"
    COLLIDED = "collided"
    REACHED_GOAL = "reached_goal"
    TRUNCATED = "truncated"


class StepOutcome(NamedTuple):
    next_state: AgentState
    reward: float
    done: bool
    event: Event
    # True only for real terminations (goal, or collision in terminating mode);
    # time-limit truncation still bootstraps.
    terminal: bool
    collided: bool


class Transition(NamedTuple):
    s: AgentState
    a: Action
    r: float
    s_next: AgentState
    done: bool


@dataclass(frozen=True, eq=False)
class EnvConfig:
    grid: OccupancyGrid
    d: int = 10
    footprint: tuple[int, int] = (10, 10)
    start: AgentState = AgentState(0, 0)
    goal: AgentState = AgentState(90, 90)
    max_steps: int = 200
    collision_terminates: bool = False
    _free: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("step length d must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be positive")
        object.__setattr__(self, "start", AgentState(*self.start))
        object.__setattr__(self, "goal", AgentState(*self.goal))
        object.__setattr__(self, "footprint", tuple(self.footprint))
        w, h = self.footprint
        free = np.zeros((self.ny, self.nx), dtype=bool)
        for iy in range(self.ny):
            for ix in range(self.nx):
                free[iy, ix] = not footprint_collides(self.grid, ix * self.d, iy * self.d, w, h)
        free.setflags(write=False)
        object.__setattr__(self, "_free", free)
        for name in ("start", "goal"):
            if not self.is_valid(getattr(self, name)):
                raise InvalidState(f"{name} {getattr(self, name)} is off-lattice or colliding")
        if self.start == self.goal:
            raise ValueError("start and goal must differ")

    @property
    def nx(self) -> int:
        return math.ceil(self.grid.width / self.d)

    @property
    def ny(self) -> int:
        return math.ceil(self.grid.height / self.d)

    @property
    def n_states(self) -> int:
        return self.nx * self.ny

    @property
    def free_mask(self) -> np.ndarray:
        """``free_mask[iy, ix]`` is True where the footprint fits."""
        return self._free

    def on_lattice(self, s) -> bool:
        x, y = s
        return (
            x % self.d == 0
            and y % self.d == 0
            and 0 <= x < self.nx * self.d
            and 0 <= y < self.ny * self.d
        )

    def is_valid(self, s) -> bool:
        return self.on_lattice(s) and bool(self._free[s[1] // self.d, s[0] // self.d])

    def collides(self, s) -> bool:
        x, y = s
        if self.on_lattice(s):
            return not self._free[y // self.d, x // self.d]
        return footprint_collides(self.grid, x, y, *self.footprint)

    def valid_states(self) -> list[AgentState]:
        return [
            AgentState(ix * self.d, iy * self.d)
            for iy in range(self.ny)
            for ix in range(self.nx)
            if self._free[iy, ix]
        ]

    def state_from_index(self, idx: int) -> AgentState:
        iy, ix = divmod(idx, self.nx)
        return AgentState(ix * self.d, iy * self.d)


def default_paper_layout() -> EnvConfig:
    """100x100 map with two 10x60 walls forming a slalom from (0,0) to (90,90)."""
    grid = OccupancyGrid.filled(100, 100, CellState.FREE)
    grid = grid.with_rect(30, 0, 40, 60).with_rect(60, 40, 70, 100)
    return EnvConfig(grid=grid)


def empty_layout(size: int = 100) -> EnvConfig:
    grid = OccupancyGrid.filled(size, size, CellState.FREE)
    return EnvConfig(grid=grid, goal=AgentState(size - 10, size - 10))


def state_index(cfg: EnvConfig, s) -> int:
    if not cfg.on_lattice(s):
        raise InvalidState(f"{tuple(s)} is not a lattice state")
    return (s[1] // cfg.d) * cfg.nx + s[0] // cfg.d


def step(cfg: EnvConfig, s, a, steps_so_far: int = 0) -> StepOutcome:
    """Apply action ``a`` at ``s``.

    Colliding moves leave the agent in place with -20. Arriving at the goal
    pays the move's own cost plus the +20 bonus, so a goal-reaching path with
    ``m`` axis and ``k`` diagonal moves returns exactly ``20 - m - 1.5k``.
    """
    if not cfg.is_valid(s):
        raise InvalidState(f"{tuple(s)} is off-lattice or colliding")
    a = Action(a)
    s = AgentState(*s)
    dx, dy = a.delta
    cand = AgentState(s.x + dx * cfg.d, s.y + dy * cfg.d)
    truncated = steps_so_far + 1 >= cfg.max_steps

    if cfg.collides(cand):
        terminal = cfg.collision_terminates
        return StepOutcome(s, COLLISION_REWARD, terminal or truncated, Event.COLLIDED, terminal, True)
    if cand == cfg.goal:
        return StepOutcome(cand, GOAL_REWARD + a.move_reward, True, Event.REACHED_GOAL, True, False)
    if truncated:
        event = Event.TRUNCATED
    else:
        event = Event.MOVED_DIAGONAL if a.diagonal else Event.MOVED
    return StepOutcome(cand, a.move_reward, truncated, event, False, False)


def episode_return(rewards: Sequence[float], gamma: float = 1.0) -> float:
    if not 0.0 <= gamma <= 1.0:
        raise ValueError("gamma must lie in [0, 1]")
    total = 0.0
    discount = 1.0
    for r in rewards:
        total += discount * r
        discount *= gamma
    return total


def path_return(n_axis: int, n_diagonal: int) -> float:
    """Undiscounted return of a collision-free goal-reaching path."""
    return GOAL_REWARD + n_axis * AXIS_REWARD + n_diagonal * DIAGONAL_REWARD


def decompose_path(steps: int, total_reward: float) -> tuple[int, int]:
    """Recover (axis moves, diagonal moves) from a step count and return.

    Solves ``m + k = steps`` and ``20 - m - 1.5k = total_reward``.
    """
    k_exact = 2.0 * (GOAL_REWARD - total_reward - steps)
    k = round(k_exact)
    m = steps - k
    if abs(k_exact - k) > 1e-9 or k < 0 or m < 0:
        raise ValueError(f"({steps}, {total_reward}) is not a goal-reaching lattice path")
    return m, k
