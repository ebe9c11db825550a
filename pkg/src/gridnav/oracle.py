"""Exact shortest paths over the lattice move graph.

Edge costs mirror the movement penalties (1 per axis move, 1.5 per diagonal)
and are doubled internally so the priority queue only ever sees integers.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .env import GOAL_REWARD, Action, AgentState, EnvConfig, state_index
from .trainer import PathTrace

_COST2 = {a: (3 if a.diagonal else 2) for a in Action}


class Unreachable(Exception):
    pass


@dataclass
class ShortestPath:
    cost: float
    trace: PathTrace

    @property
    def optimal_reward(self) -> float:
        return GOAL_REWARD - self.cost if self.trace.actions else 0.0


def neighbours(env: EnvConfig, s: AgentState):
    """Yield ``(action, next_state, doubled_cost)`` for every non-colliding move."""
    for a in Action:
        dx, dy = a.delta
        nxt = AgentState(s.x + dx * env.d, s.y + dy * env.d)
        if env.is_valid(nxt):
            yield a, nxt, _COST2[a]


def edges(env: EnvConfig) -> list[tuple[AgentState, Action, AgentState, int]]:
    return [(s, a, t, c) for s in env.valid_states() for a, t, c in neighbours(env, s)]


def _dijkstra(env: EnvConfig, source: AgentState, target: AgentState | None = None):
    """Doubled distances from ``source`` and (pred_index, action) back-pointers.

    Ties go to the lower predecessor state index, then the lower action index.
    """
    src = state_index(env, source)
    dist = {src: 0}
    pred: dict[int, tuple[int, int]] = {}
    done = set()
    heap = [(0, src)]
    tgt = state_index(env, target) if target is not None else None
    while heap:
        d, u = heapq.heappop(heap)
        if u in done:
            continue
        done.add(u)
        if u == tgt:
            break
        for a, v_state, c in neighbours(env, env.state_from_index(u)):
            v = state_index(env, v_state)
            if v in done:
                continue
            nd = d + c
            old = dist.get(v)
            if old is None or nd < old:
                dist[v] = nd
                pred[v] = (u, int(a))
                heapq.heappush(heap, (nd, v))
            elif nd == old and (u, int(a)) < pred[v]:
                pred[v] = (u, int(a))
    return dist, pred


def shortest_path(env: EnvConfig, start=None, goal=None) -> ShortestPath:
    start = AgentState(*(start if start is not None else env.start))
    goal = AgentState(*(goal if goal is not None else env.goal))
    for name, s in (("start", start), ("goal", goal)):
        if not env.is_valid(s):
            raise ValueError(f"{name} {tuple(s)} is not a valid lattice state")
    if start == goal:
        return ShortestPath(0.0, PathTrace([start], [], [], 0.0, 0, True))

    dist, pred = _dijkstra(env, start, goal)
    g = state_index(env, goal)
    if g not in dist:
        raise Unreachable(f"no collision-free path from {tuple(start)} to {tuple(goal)}")

    actions: list[Action] = []
    node = g
    while node != state_index(env, start):
        node, a = pred[node]
        actions.append(Action(a))
    actions.reverse()

    states = [start]
    for a in actions:
        dx, dy = a.delta
        s = states[-1]
        states.append(AgentState(s.x + dx * env.d, s.y + dy * env.d))
    rewards = [a.move_reward for a in actions]
    rewards[-1] += GOAL_REWARD
    cost = dist[g] / 2
    return ShortestPath(cost, PathTrace(states, actions, rewards, sum(rewards), len(actions), True))


def cost_map(env: EnvConfig, source=None) -> dict[AgentState, float]:
    """Shortest-path cost from ``source`` (default: start) to every reachable state."""
    source = AgentState(*(source if source is not None else env.start))
    dist, _ = _dijkstra(env, source)
    return {env.state_from_index(i): d / 2 for i, d in dist.items()}


def bellman_ford(env: EnvConfig, source=None) -> dict[AgentState, float]:
    """Same costs as ``cost_map`` by repeated edge relaxation; an independent cross-check."""
    source = AgentState(*(source if source is not None else env.start))
    dist = {s: math.inf for s in env.valid_states()}
    dist[source] = 0
    es = edges(env)
    for _ in range(len(dist) - 1):
        changed = False
        for u, _a, v, c in es:
            if dist[u] + c < dist[v]:
                dist[v] = dist[u] + c
                changed = True
        if not changed:
            break
    return {s: d / 2 for s, d in dist.items() if d < math.inf}
