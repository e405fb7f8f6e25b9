"""Hand-written SVG reports: optimization history, cost box plots and workspace trajectories.

Every plotted number is also stored verbatim (``repr`` of the float) in a
``data-*`` attribute so a plot can be checked against its source data.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence
from xml.sax.saxutils import escape, quoteattr

import numpy as np

from .autotune.study import Study, best_so_far
from .world import RobotModel, Scenario, TrajectoryLog, fk_all

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=70, right=20, top=40, bottom=50)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _num(v: float) -> str:
    return f"{v:.2f}"


def _comment(text: str) -> str:
    # "--" is not allowed inside XML comments
    while "--" in text:
        text = text.replace("--", "- -")
    return f"<!-- {text} -->"


@dataclass(frozen=True)
class _Scale:
    lo: float
    hi: float
    p0: float
    p1: float

    def __call__(self, v: float) -> float:
        span = self.hi - self.lo
        return self.p0 + (v - self.lo) / span * (self.p1 - self.p0) if span else 0.5 * (self.p0 + self.p1)


def _padded(lo: float, hi: float, frac: float = 0.05) -> tuple[float, float]:
    if hi == lo:
        pad = abs(lo) * 0.1 or 1.0
        return lo - pad, hi + pad
    pad = (hi - lo) * frac
    return lo - pad, hi + pad


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=raw)
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def _tick_label(v: float) -> str:
    return f"{v:.4g}"


class _Canvas:
    def __init__(self, title: str, metadata: Mapping[str, object], width=WIDTH, height=HEIGHT):
        self.width, self.height = width, height
        self.parts = [
            '<?xml version="1.0" encoding="UTF-8"?>',
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        ]
        for key, value in metadata.items():
            self.parts.append(_comment(f"{key}: {value}"))
        self.parts.append(f'<rect width="{width}" height="{height}" fill="white"/>')
        self.parts.append(f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="15">'
                          f'{escape(title)}</text>')

    @property
    def box(self):
        return (MARGIN["left"], self.width - MARGIN["right"],
                self.height - MARGIN["bottom"], MARGIN["top"])

    def add(self, element: str):
        self.parts.append(element)

    def axes(self, xs: _Scale, ys: _Scale, xlabel: str, ylabel: str, xticks=True):
        x0, x1, y0, y1 = self.box
        self.add(f'<g class="axes" stroke="black" fill="none">'
                 f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}"/>'
                 f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}"/></g>')
        for t in _ticks(ys.lo, ys.hi):
            y = ys(t)
            self.add(f'<line x1="{x0 - 4}" y1="{_num(y)}" x2="{x0}" y2="{_num(y)}" stroke="black"/>'
                     f'<text x="{x0 - 6}" y="{_num(y + 4)}" text-anchor="end">{_tick_label(t)}</text>')
        if xticks:
            for t in _ticks(xs.lo, xs.hi):
                x = xs(t)
                self.add(f'<line x1="{_num(x)}" y1="{y0}" x2="{_num(x)}" y2="{y0 + 4}" stroke="black"/>'
                         f'<text x="{_num(x)}" y="{y0 + 18}" text-anchor="middle">{_tick_label(t)}</text>')
        self.add(f'<text x="{(x0 + x1) / 2:.1f}" y="{self.height - 10}" text-anchor="middle">'
                 f'{escape(xlabel)}</text>')
        self.add(f'<text transform="translate(16 {(y0 + y1) / 2:.1f}) rotate(-90)" '
                 f'text-anchor="middle">{escape(ylabel)}</text>')

    def render(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


# optimization history ------------------------------------------------------------

def history_svg(study: Study, source: str | None = None) -> str:
    """Trial costs as markers plus the best-so-far step line."""
    if not study.trials:
        raise ValueError("study has no trials")
    costs = study.costs
    running = best_so_far(costs)
    finite = [c for c in costs if math.isfinite(c)]
    meta = {"source": source or "<memory>", "master_seed": study.master_seed,
            "sampler": study.sampler, "trials": len(costs)}
    canvas = _Canvas(f"Optimization history ({study.sampler}, {len(costs)} trials)", meta)
    x0, x1, y0, y1 = canvas.box
    n = len(costs)
    xs = _Scale(*_padded(0, max(n - 1, 1), 0.02), x0, x1)
    lo, hi = (min(finite), max(finite)) if finite else (0.0, 1.0)
    ys = _Scale(*_padded(lo, hi), y0, y1)
    canvas.axes(xs, ys, "trial", "cost")
    canvas.add('<g class="trials" fill="#1f77b4" fill-opacity="0.7">')
    for t in study.trials:
        c = t.cost
        y = ys(c) if math.isfinite(c) else y1
        shape = "circle" if math.isfinite(c) else "rect"
        if shape == "circle":
            canvas.add(f'<circle cx="{_num(xs(t.index))}" cy="{_num(y)}" r="3.5" '
                       f'data-index="{t.index}" data-cost="{c!r}"/>')
        else:
            canvas.add(f'<rect x="{_num(xs(t.index) - 3)}" y="{_num(y - 3)}" width="6" height="6" '
                       f'fill="#d62728" data-index="{t.index}" data-cost="inf"/>')
    canvas.add("</g>")
    points = []
    for i, r in enumerate(running):
        if not math.isfinite(r):
            continue
        if points:
            points.append(f"{_num(xs(i))},{points[-1].split(',')[1]}")
        points.append(f"{_num(xs(i))},{_num(ys(r))}")
    if points:
        values = " ".join(repr(r) for r in running)
        canvas.add(f'<polyline class="best-so-far" fill="none" stroke="#d62728" stroke-width="2" '
                   f'points="{" ".join(points)}" data-values="{values}"/>')
    return canvas.render()


# comparison box plot -------------------------------------------------------------

def box_stats(values: Sequence[float]) -> dict[str, float]:
    """Quartiles (linear interpolation) and Tukey whiskers over the finite values."""
    v = np.sort(np.asarray([x for x in values if math.isfinite(x)], dtype=float))
    if v.size == 0:
        raise ValueError("no finite values to summarize")
    q1, med, q3 = (float(x) for x in np.percentile(v, [25, 50, 75]))
    iqr = q3 - q1
    lo_w = float(v[v >= q1 - 1.5 * iqr].min())
    hi_w = float(v[v <= q3 + 1.5 * iqr].max())
    outliers = [float(x) for x in v if x < lo_w or x > hi_w]
    return {"q1": q1, "median": med, "q3": q3, "whisker_low": lo_w, "whisker_high": hi_w,
            "outliers": outliers, "nonfinite": len(values) - int(v.size)}


def box_svg(groups: Mapping[str, Sequence[float]], metadata: Mapping[str, object] | None = None,
            title: str = "Test-scenario cost") -> str:
    """One box per labelled group of per-scenario costs."""
    if not groups:
        raise ValueError("nothing to plot")
    stats = {label: box_stats(vals) for label, vals in groups.items()}
    canvas = _Canvas(title, dict(metadata or {}))
    x0, x1, y0, y1 = canvas.box
    lo = min(min(s["whisker_low"], *s["outliers"]) if s["outliers"] else s["whisker_low"]
             for s in stats.values())
    hi = max(max(s["whisker_high"], *s["outliers"]) if s["outliers"] else s["whisker_high"]
             for s in stats.values())
    ys = _Scale(*_padded(lo, hi), y0, y1)
    slot = (x1 - x0) / len(stats)
    canvas.axes(_Scale(0, 1, x0, x1), ys, "", "cost", xticks=False)
    for k, (label, s) in enumerate(stats.items()):
        cx = x0 + slot * (k + 0.5)
        w = min(60.0, slot * 0.5)
        color = PALETTE[k % len(PALETTE)]
        attrs = " ".join(f'data-{key.replace("_", "-")}="{s[key]!r}"'
                         for key in ("q1", "median", "q3", "whisker_low", "whisker_high"))
        canvas.add(f'<g class="box" data-label={quoteattr(label)} {attrs} '
                   f'data-values="{" ".join(repr(float(v)) for v in groups[label])}">')
        canvas.add(f'<line x1="{_num(cx)}" y1="{_num(ys(s["whisker_low"]))}" x2="{_num(cx)}" '
                   f'y2="{_num(ys(s["q1"]))}" stroke="black"/>')
        canvas.add(f'<line x1="{_num(cx)}" y1="{_num(ys(s["q3"]))}" x2="{_num(cx)}" '
                   f'y2="{_num(ys(s["whisker_high"]))}" stroke="black"/>')
        for key in ("whisker_low", "whisker_high"):
            canvas.add(f'<line x1="{_num(cx - w / 4)}" y1="{_num(ys(s[key]))}" x2="{_num(cx + w / 4)}" '
                       f'y2="{_num(ys(s[key]))}" stroke="black"/>')
        top, bottom = ys(s["q3"]), ys(s["q1"])
        canvas.add(f'<rect x="{_num(cx - w / 2)}" y="{_num(top)}" width="{_num(w)}" '
                   f'height="{_num(max(bottom - top, 0.5))}" fill="{color}" fill-opacity="0.35" '
                   f'stroke="{color}"/>')
        canvas.add(f'<line class="median" x1="{_num(cx - w / 2)}" y1="{_num(ys(s["median"]))}" '
                   f'x2="{_num(cx + w / 2)}" y2="{_num(ys(s["median"]))}" stroke="{color}" '
                   f'stroke-width="2"/>')
        for v in s["outliers"]:
            canvas.add(f'<circle cx="{_num(cx)}" cy="{_num(ys(v))}" r="3" fill="none" '
                       f'stroke="{color}" data-value="{v!r}"/>')
        canvas.add(f'<text x="{_num(cx)}" y="{y0 + 18}" text-anchor="middle">{escape(label)}</text>')
        canvas.add("</g>")
    return canvas.render()


# workspace trajectory ------------------------------------------------------------

def trajectory_svg(robot: RobotModel, scenario: Scenario, log: TrajectoryLog,
                   metadata: Mapping[str, object] | None = None, size: int = 480) -> str:
    """End-effector path with obstacles, goal, and the arm at its first and last states."""
    reach = robot.reach
    ext = [(-reach, reach), (-reach, reach)]
    for o in scenario.obstacles:
        for d in range(2):
            ext[d] = (min(ext[d][0], o.center[d] - o.radius), max(ext[d][1], o.center[d] + o.radius))
    lo = min(ext[0][0], ext[1][0]) - 0.05
    hi = max(ext[0][1], ext[1][1]) + 0.05
    canvas = _Canvas("Workspace trajectory", dict(metadata or {}), size, size + 30)
    pad = 30
    px = _Scale(lo, hi, pad, size - pad)
    py = _Scale(lo, hi, size + 30 - pad, pad + 30)
    scale = (size - 2 * pad) / (hi - lo)
    canvas.add('<g class="obstacles" fill="#999" fill-opacity="0.6" stroke="#444">')
    for o in scenario.obstacles:
        canvas.add(f'<circle cx="{_num(px(o.center[0]))}" cy="{_num(py(o.center[1]))}" '
                   f'r="{_num(o.radius * scale)}" data-center="{o.center[0]!r} {o.center[1]!r}" '
                   f'data-radius="{o.radius!r}"/>')
    canvas.add("</g>")
    gx, gy = scenario.goal
    canvas.add(f'<g class="goal" stroke="#2ca02c" stroke-width="2" data-goal="{gx!r} {gy!r}">'
               f'<line x1="{_num(px(gx) - 6)}" y1="{_num(py(gy) - 6)}" x2="{_num(px(gx) + 6)}" '
               f'y2="{_num(py(gy) + 6)}"/><line x1="{_num(px(gx) - 6)}" y1="{_num(py(gy) + 6)}" '
               f'x2="{_num(px(gx) + 6)}" y2="{_num(py(gy) - 6)}"/></g>')
    for cls, q, color in (("arm-start", log.q[0], "#aaa"), ("arm-end", log.q[-1], "#1f77b4")):
        joints = np.vstack([[0.0, 0.0], fk_all(robot, q)])
        pts = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in joints)
        canvas.add(f'<polyline class="{cls}" fill="none" stroke="{color}" stroke-width="4" '
                   f'stroke-linecap="round" points="{pts}"/>')
        for (x, y), r in zip(joints[1:], robot.sphere_radii):
            canvas.add(f'<circle cx="{_num(px(x))}" cy="{_num(py(y))}" r="{_num(r * scale)}" '
                       f'fill="none" stroke="{color}" stroke-dasharray="3 2"/>')
    pts = " ".join(f"{_num(px(x))},{_num(py(y))}" for x, y in log.ee)
    canvas.add(f'<polyline class="ee-path" fill="none" stroke="#d62728" stroke-width="1.5" '
               f'points="{pts}" data-termination="{log.termination}"/>')
    return canvas.render()
