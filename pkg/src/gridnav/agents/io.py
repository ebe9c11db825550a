"""Line-oriented text format for trained models.

    qtable <n_states> 8          mlp 2 64 64 8
    <n_states rows of 8>         <W1 rows> <b1> <W2 rows> <b2> ...

Values use 17 significant digits, which round-trips float64 exactly.
"""

from __future__ import annotations

import numpy as np

from ..env import N_ACTIONS
from .mlp import MlpParams
from .tabular import QTable


class BadModelFile(ValueError):
    pass


class KindMismatch(BadModelFile):
    pass


def _fmt_row(values) -> str:
    return " ".join(format(float(v), ".17g") for v in values)


def save_model(model) -> bytes:
    if isinstance(model, QTable):
        lines = [f"qtable {model.n_states} {N_ACTIONS}"]
        lines += [_fmt_row(row) for row in model.values]
    elif isinstance(model, MlpParams):
        lines = ["mlp " + " ".join(str(n) for n in model.sizes)]
        for w, b in zip(model.weights, model.biases):
            lines += [_fmt_row(row) for row in w]
            lines.append(_fmt_row(b))
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return ("\n".join(lines) + "\n").encode("ascii")


def _parse_rows(lines: list[str], n: int, width: int) -> np.ndarray:
    if len(lines) < n:
        raise BadModelFile(f"expected {n} more rows, found {len(lines)}")
    try:
        arr = np.array([[float(v) for v in ln.split()] for ln in lines[:n]], dtype=np.float64)
    except ValueError as exc:
        raise BadModelFile(str(exc)) from exc
    if arr.shape != (n, width):
        raise BadModelFile(f"expected {n}x{width} values, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise BadModelFile("non-finite value in model file")
    return arr


def load_model(data: bytes | str, kind: str | None = None):
    """Parse a model file. ``kind`` ('qtable' or 'mlp') asserts what is expected."""
    text = data.decode("ascii") if isinstance(data, bytes) else data
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise BadModelFile("empty model file")
    head = lines[0].split()
    found = head[0]
    if found not in ("qtable", "mlp"):
        raise BadModelFile(f"unknown model kind {found!r}")
    if kind is not None and kind != found:
        raise KindMismatch(f"expected a {kind} model, file holds {found}")
    try:
        dims = [int(v) for v in head[1:]]
    except ValueError as exc:
        raise BadModelFile("bad header dimensions") from exc
    body = lines[1:]

    if found == "qtable":
        if len(dims) != 2 or dims[1] != N_ACTIONS:
            raise BadModelFile(f"qtable header must be 'qtable <n> {N_ACTIONS}'")
        values = _parse_rows(body, dims[0], N_ACTIONS)
        if len(body) != dims[0]:
            raise BadModelFile("trailing rows after qtable")
        return QTable(dims[0], values)

    if len(dims) < 2:
        raise BadModelFile("mlp header needs at least two layer sizes")
    weights, biases, pos = [], [], 0
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        weights.append(_parse_rows(body[pos:], fan_out, fan_in))
        pos += fan_out
        biases.append(_parse_rows(body[pos:], 1, fan_out)[0])
        pos += 1
    if pos != len(body):
        raise BadModelFile("trailing rows after mlp layers")
    return MlpParams(weights, biases)
