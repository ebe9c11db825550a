"""Training loop, greedy evaluation and multi-seed comparison."""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields, replace

import numpy as np

from . import env as mdp
from .agents import (
    EpsilonSchedule,
    MlpParams,
    QTable,
    ReplayBuffer,
    dqn_update,
    epsilon_at,
    greedy_action,
    grid_normalizer,
    mlp_forward,
    qlearning_batch_update,
    sarsa_update,
    select_action,
)
from .env import AgentState, EnvConfig, Event, Transition, default_paper_layout

ALGOS = ("qlearning", "sarsa", "dqn")
DEFAULT_EPISODES = {"dqn": 300, "qlearning": 500, "sarsa": 500}
METRICS_HEADER = ("episode", "steps", "accumulated_reward", "epsilon", "reached_goal", "wall_ms")
FINAL_WINDOW = 50


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    algo: str = "dqn"
    gamma: float = 0.99
    eps_initial: float = 0.6
    eps_final: float = 0.1
    buffer_capacity: int = 100_000
    batch_size: int = 128
    episodes: int | None = None  # None -> 300 for dqn, 500 otherwise
    alpha: float = 0.01
    eta: float = 0.001
    seed: int = 0
    env: EnvConfig = field(default_factory=default_paper_layout, compare=False)

    def __post_init__(self):
        if self.algo not in ALGOS:
            raise ConfigError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        if self.episodes is None:
            object.__setattr__(self, "episodes", DEFAULT_EPISODES[self.algo])
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigError("gamma must lie in [0, 1)")
        if self.episodes < 1:
            raise ConfigError("episodes must be >= 1")
        if not 1 <= self.batch_size <= self.buffer_capacity:
            raise ConfigError("need 1 <= batch_size <= buffer_capacity")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigError("alpha must lie in (0, 1]")
        if not self.eta > 0:
            raise ConfigError("eta must be positive")
        if not 0.0 <= self.eps_final <= self.eps_initial <= 1.0:
            raise ConfigError("need 0 <= eps_final <= eps_initial <= 1")

    @property
    def schedule(self) -> EpsilonSchedule:
        return EpsilonSchedule(self.eps_initial, self.eps_final, self.episodes)


@dataclass
class EpisodeMetrics:
    episode: int
    steps: int
    accumulated_reward: float
    epsilon: float
    reached_goal: bool
    wall_ms: float = 0.0
    collisions: int = 0
    diagonal_moves: int = 0


@dataclass
class PathTrace:
    states: list[AgentState]
    actions: list[mdp.Action]
    rewards: list[float]
    total_reward: float
    steps: int
    reached_goal: bool
    collisions: int = 0

    @property
    def cost(self) -> float:
        """Movement cost of a goal-reaching trace (20 - return); inf otherwise."""
        if not self.reached_goal or self.collisions:
            return math.inf
        return mdp.GOAL_REWARD - self.total_reward

    def to_dict(self) -> dict:
        return {
            "states": [[int(s[0]), int(s[1])] for s in self.states],
            "actions": [mdp.Action(a).name.lower() for a in self.actions],
            "rewards": [float(r) for r in self.rewards],
            "total_reward": float(self.total_reward),
            "steps": int(self.steps),
            "reached_goal": bool(self.reached_goal),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "PathTrace":
        rewards = [float(r) for r in d["rewards"]]
        return cls(
            [AgentState(*s) for s in d["states"]],
            [mdp.Action[a.upper()] for a in d["actions"]],
            rewards,
            float(d["total_reward"]),
            int(d["steps"]),
            bool(d["reached_goal"]),
            sum(r == mdp.COLLISION_REWARD for r in rewards),
        )


# training


def _new_model(cfg: TrainConfig, rng: np.random.Generator):
    if cfg.algo == "dqn":
        return MlpParams.init(rng)
    return QTable.for_env(cfg.env)


def train(cfg: TrainConfig, timing: bool = False):
    """Run ``cfg.episodes`` episodes; returns ``(model, [EpisodeMetrics])``.

    A single generator seeded with ``cfg.seed`` supplies every random draw:
    network init first, then per step the exploration draw(s) followed by the
    replay-batch indices.
    """
    env = cfg.env
    rng = np.random.default_rng(cfg.seed)
    model = _new_model(cfg, rng)
    sched = cfg.schedule
    buf = ReplayBuffer(cfg.buffer_capacity) if cfg.algo != "sarsa" else None
    normalize = grid_normalizer(env)

    if cfg.algo == "dqn":
        def q_of(s):
            return mlp_forward(model, normalize(s))
    else:
        def q_of(s):
            return model.row(s)

    history = []
    for ep in range(cfg.episodes):
        t0 = time.perf_counter() if timing else 0.0
        eps = epsilon_at(sched, ep)
        s = env.start
        total = 0.0
        collisions = diagonals = 0
        reached = False
        a = select_action(q_of(s), eps, rng)
        n = 0
        while True:
            out = mdp.step(env, s, a, n)
            n += 1
            total += out.reward
            collisions += out.collided
            diagonals += a.diagonal and not out.collided
            t = Transition(s, a, out.reward, out.next_state, out.terminal)

            if cfg.algo == "sarsa":
                a_next = None if out.done else select_action(q_of(out.next_state), eps, rng)
                sarsa_update(model, t, a_next if a_next is not None else 0, cfg.alpha, cfg.gamma)
            else:
                buf.push(t)
                if len(buf) >= cfg.batch_size:
                    batch = buf.sample(cfg.batch_size, rng)
                    if cfg.algo == "dqn":
                        dqn_update(model, batch, cfg.eta, cfg.gamma, normalize)
                    else:
                        qlearning_batch_update(model, batch, cfg.alpha, cfg.gamma)

            if out.done:
                reached = out.event is Event.REACHED_GOAL
                break
            s = out.next_state
            if cfg.algo == "sarsa":
                a = a_next
            else:
                a = select_action(q_of(s), eps, rng)
        wall = (time.perf_counter() - t0) * 1000.0 if timing else 0.0
        history.append(EpisodeMetrics(ep, n, total, eps, reached, wall, collisions, diagonals))
    return model, history


def evaluate_greedy(model, env: EnvConfig) -> PathTrace:
    """Roll out the greedy policy from ``env.start``.

    Stops at the goal, after ``max_steps``, or as soon as a state repeats:
    the policy is deterministic, so a repeat means it loops forever.
    """
    if isinstance(model, QTable) and model.d is None:
        model.bind(env)
    s = env.start
    states, actions, rewards = [s], [], []
    visited = {s}
    collisions = 0
    reached = False
    for n in range(env.max_steps):
        a = greedy_action(model, env, s)
        out = mdp.step(env, s, a, n)
        actions.append(a)
        rewards.append(out.reward)
        states.append(out.next_state)
        collisions += out.collided
        if out.event is Event.REACHED_GOAL:
            reached = True
            break
        if out.done or out.next_state in visited:
            break
        visited.add(out.next_state)
        s = out.next_state
    return PathTrace(states, actions, rewards, mdp.episode_return(rewards), len(actions), reached, collisions)


# metrics I/O


def _fmt(v: float) -> str:
    return repr(float(v))


def metrics_csv(history) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRICS_HEADER)
    for m in history:
        w.writerow([m.episode, m.steps, _fmt(m.accumulated_reward), _fmt(m.epsilon),
                    int(m.reached_goal), _fmt(m.wall_ms)])
    return buf.getvalue()


def read_metrics_csv(text: str) -> list[EpisodeMetrics]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or tuple(rows[0]) != METRICS_HEADER:
        raise ValueError("bad metrics header")
    return [
        EpisodeMetrics(int(r[0]), int(r[1]), float(r[2]), float(r[3]), r[4] == "1", float(r[5]))
        for r in rows[1:]
    ]


def first_goal_episode(history) -> int | None:
    return next((m.episode for m in history if m.reached_goal), None)


def final_window_reward(history, window: int = FINAL_WINDOW) -> float:
    tail = history[-window:]
    return float(np.mean([m.accumulated_reward for m in tail]))


# comparison


@dataclass
class RunSummary:
    algo: str
    seed: int
    episodes: int
    reached_goal: bool
    greedy_steps: int
    greedy_reward: float
    greedy_cost: float
    final_window_reward: float
    first_goal_episode: int | None
    train_goal_rate: float
    trace: PathTrace = field(repr=False)


REPORT_HEADER = (
    "algo", "seed", "episodes", "reached_goal", "greedy_steps", "greedy_reward",
    "greedy_cost", "final50_reward", "first_goal_episode", "train_goal_rate",
)


@dataclass
class ComparisonReport:
    runs: list[RunSummary]

    def for_algo(self, algo: str) -> list[RunSummary]:
        return [r for r in self.runs if r.algo == algo]

    def aggregate(self) -> dict[str, dict[str, float]]:
        out = {}
        for algo in ALGOS:
            rs = self.for_algo(algo)
            if not rs:
                continue
            firsts = [r.first_goal_episode for r in rs if r.first_goal_episode is not None]
            out[algo] = {
                "goal_rate": sum(r.reached_goal for r in rs) / len(rs),
                "median_final50_reward": statistics.median(r.final_window_reward for r in rs),
                "median_greedy_cost": statistics.median(r.greedy_cost for r in rs),
                "median_first_goal_episode": statistics.median(firsts) if firsts else math.inf,
            }
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_HEADER)
        for r in self.runs:
            w.writerow([
                r.algo, r.seed, r.episodes, int(r.reached_goal), r.greedy_steps,
                _fmt(r.greedy_reward), _fmt(r.greedy_cost), _fmt(r.final_window_reward),
                "" if r.first_goal_episode is None else r.first_goal_episode,
                _fmt(r.train_goal_rate),
            ])
        return buf.getvalue()


def summarize_run(cfg: TrainConfig, model, history) -> RunSummary:
    trace = evaluate_greedy(model, cfg.env)
    return RunSummary(
        cfg.algo,
        cfg.seed,
        cfg.episodes,
        trace.reached_goal and trace.collisions == 0,
        trace.steps,
        trace.total_reward,
        trace.cost,
        final_window_reward(history),
        first_goal_episode(history),
        sum(m.reached_goal for m in history) / len(history),
        trace,
    )


def _run_one(cfg: TrainConfig) -> RunSummary:
    model, history = train(cfg)
    return summarize_run(cfg, model, history)


def run_comparison(base: TrainConfig, seeds, algos=ALGOS, workers: int = 1) -> ComparisonReport:
    """Train every algorithm on every seed with its default episode budget.

    Rows are ordered by algorithm, then seed, whatever ``workers`` is.
    """
    seeds = list(seeds)
    if not seeds:
        raise ValueError("need at least one seed")
    cfgs = [
        replace(base, algo=algo, seed=seed, episodes=DEFAULT_EPISODES[algo])
        for algo in algos
        for seed in seeds
    ]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            runs = list(pool.map(_run_one, cfgs))
    else:
        runs = [_run_one(c) for c in cfgs]
    return ComparisonReport(runs)


# config text format

_ENV_KEYS = {"step", "footprint", "start", "goal", "max_steps", "collision_terminates"}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"env"}


def _pair(v: str) -> tuple[int, int]:
    parts = [p for p in v.replace(",", " ").split() if p]
    if len(parts) != 2:
        raise ConfigError(f"expected two integers, got {v!r}")
    return int(parts[0]), int(parts[1])


def _bool(v: str) -> bool:
    low = v.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {v!r}")


def parse_config(text: str, grid=None, **overrides) -> TrainConfig:
    """Parse ``key = value`` lines. Unknown keys are errors; ``#`` starts a comment.

    ``grid`` replaces the built-in layout's map; ``overrides`` win over the file.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        if key not in _TRAIN_KEYS | _ENV_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = value

    base_env = default_paper_layout()
    try:
        env_kw = {}
        if "step" in raw:
            env_kw["d"] = int(raw["step"])
        if "footprint" in raw:
            env_kw["footprint"] = _pair(raw["footprint"])
        if "start" in raw:
            env_kw["start"] = AgentState(*_pair(raw["start"]))
        if "goal" in raw:
            env_kw["goal"] = AgentState(*_pair(raw["goal"]))
        if "max_steps" in raw:
            env_kw["max_steps"] = int(raw["max_steps"])
        if "collision_terminates" in raw:
            env_kw["collision_terminates"] = _bool(raw["collision_terminates"])
        if grid is not None:
            env_kw["grid"] = grid
        env = replace(base_env, **env_kw) if env_kw else base_env

        kw = {}
        for name in ("gamma", "eps_initial", "eps_final", "alpha", "eta"):
            if name in raw:
                kw[name] = float(raw[name])
        for name in ("buffer_capacity", "batch_size", "episodes", "seed"):
            if name in raw:
                kw[name] = int(raw[name])
        if "algo" in raw:
            kw["algo"] = raw["algo"]
        kw.update({k: v for k, v in overrides.items() if v is not None})
        return TrainConfig(env=env, **kw)
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def format_config(cfg: TrainConfig) -> str:
    e = cfg.env
    lines = [
        f"algo = {cfg.algo}",
        f"gamma = {cfg.gamma!r}",
        f"eps_initial = {cfg.eps_initial!r}",
        f"eps_final = {cfg.eps_final!r}",
        f"buffer_capacity = {cfg.buffer_capacity}",
        f"batch_size = {cfg.batch_size}",
        f"episodes = {cfg.episodes}",
        f"alpha = {cfg.alpha!r}",
        f"eta = {cfg.eta!r}",
        f"seed = {cfg.seed}",
        f"step = {e.d}",
        f"footprint = {e.footprint[0]}, {e.footprint[1]}",
        f"start = {e.start.x}, {e.start.y}",
        f"goal = {e.goal.x}, {e.goal.y}",
        f"max_steps = {e.max_steps}",
        f"collision_terminates = {str(e.collision_terminates).lower()}",
    ]
    return "\n".join(lines) + "\n"
