"""Dependency-free SVG output: line charts for training curves and path overlays."""

from __future__ import annotations

from xml.sax.saxutils import escape

from .gridmap import CellState, OccupancyGrid

WIDTH, HEIGHT = 800, 600
MARGIN = 60


def _num(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def _open(title: str) -> list[str]:
    return [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f"<title>{escape(title)}</title>",
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]


def line_chart(ys, title: str = "", xlabel: str = "episode", ylabel: str = "") -> str:
    """One polyline point per value, x = index."""
    ys = [float(y) for y in ys]
    parts = _open(title)
    x0, x1 = MARGIN, WIDTH - MARGIN / 2
    y0, y1 = HEIGHT - MARGIN, MARGIN / 2
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    if ys:
        lo, hi = min(ys), max(ys)
        if hi == lo:
            lo, hi = lo - 1.0, hi + 1.0
        span_x = max(len(ys) - 1, 1)

        def px(i):
            return x0 + (x1 - x0) * i / span_x

        def py(v):
            return y0 - (y0 - y1) * (v - lo) / (hi - lo)

        pts = " ".join(f"{_num(px(i))},{_num(py(v))}" for i, v in enumerate(ys))
        parts.append(f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{pts}"/>')
        for v in (lo, hi):
            parts.append(
                f'<text x="{x0 - 6}" y="{_num(py(v) + 4)}" font-size="12" text-anchor="end">{_num(v)}</text>'
            )
        parts.append(
            f'<text x="{x1}" y="{y0 + 18}" font-size="12" text-anchor="end">{len(ys) - 1}</text>'
        )
    parts.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 15}" font-size="14" text-anchor="middle">{escape(xlabel)}</text>')
    parts.append(
        f'<text x="18" y="{(y0 + y1) / 2}" font-size="14" text-anchor="middle" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2})">{escape(ylabel)}</text>'
    )
    parts.append(f'<text x="{WIDTH / 2}" y="22" font-size="16" text-anchor="middle">{escape(title)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def path_overlay(grid: OccupancyGrid, states, footprint=(10, 10), title: str = "") -> str:
    """Grid raster (occupied black, unknown grey) with the footprint-centre path on top."""
    parts = _open(title)
    scale = min((WIDTH - 2 * 20) / grid.width, (HEIGHT - 2 * 20) / grid.height)
    ox = (WIDTH - grid.width * scale) / 2
    oy = (HEIGHT - grid.height * scale) / 2

    def sx(x):
        return ox + x * scale

    def sy(y):
        # world y grows upward
        return oy + (grid.height - y) * scale

    parts.append(
        f'<rect x="{_num(sx(0))}" y="{_num(sy(grid.height))}" width="{_num(grid.width * scale)}" '
        f'height="{_num(grid.height * scale)}" fill="white" stroke="black"/>'
    )
    colours = {CellState.OCCUPIED: "black", CellState.UNKNOWN: "#cdcdcd"}
    for state, colour in colours.items():
        for y in range(grid.height):
            row = grid.cells[y]
            x = 0
            while x < grid.width:
                if row[x] != state:
                    x += 1
                    continue
                run = x
                while run < grid.width and row[run] == state:
                    run += 1
                parts.append(
                    f'<rect x="{_num(sx(x))}" y="{_num(sy(y + 1))}" width="{_num((run - x) * scale)}" '
                    f'height="{_num(scale)}" fill="{colour}"/>'
                )
                x = run
    fw, fh = footprint
    if states:
        pts = " ".join(f"{_num(sx(s[0] + fw / 2))},{_num(sy(s[1] + fh / 2))}" for s in states)
        parts.append(f'<polyline fill="none" stroke="red" stroke-width="2" points="{pts}"/>')
        for s, colour in ((states[0], "green"), (states[-1], "red")):
            parts.append(
                f'<rect x="{_num(sx(s[0]))}" y="{_num(sy(s[1] + fh))}" width="{_num(fw * scale)}" '
                f'height="{_num(fh * scale)}" fill="{colour}" fill-opacity="0.5"/>'
            )
    if title:
        parts.append(f'<text x="{WIDTH / 2}" y="16" font-size="14" text-anchor="middle">{escape(title)}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
