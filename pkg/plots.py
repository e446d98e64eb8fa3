"""
SVG figures for planner runs
World/tree renderings and convergence plots built from string templates
"""

import math
from typing import Any, Dict, List, Optional, Sequence, Tuple

from bitstar import PlannerResult
from space import ContractViolation, World

PALETTE = ['#667eea', '#e8590c', '#2f9e44', '#c2255c', '#1098ad', '#f59f00', '#495057']

WIDTH = 640
HEIGHT = 400
MARGIN = 50

SVG_HEADER = """<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">
<style>
  text {{ font-family: 'Segoe UI', Tahoma, Geneva, Verdana, sans-serif; font-size: 12px; fill: #333; }}
  .axis {{ stroke: #333; stroke-width: 1; }}
  .grid {{ stroke: #e0e0e0; stroke-width: 1; }}
  .obstacle {{ fill: #555; }}
  .edge {{ stroke: #9fa8da; stroke-width: 0.5; }}
  .solution {{ fill: none; stroke: #e8590c; stroke-width: 2; }}
</style>
<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>
"""

SVG_FOOTER = "</svg>\n"


def _num(value: float) -> str:
    """Fixed-precision coordinate text so regenerated files are byte-identical"""
    text = f"{value:.3f}".rstrip('0').rstrip('.')
    return '0' if text in ('-0', '') else text


def _polyline(points: Sequence[Tuple[float, float]]) -> str:
    return ' '.join(f"{_num(x)},{_num(y)}" for x, y in points)


# World rendering

def render_world_svg(world: World, result: Optional[PlannerResult] = None, size: int = 480) -> str:
    """Obstacles, tree edges, solution path and start/goal markers of a planar world"""
    if world.dimension != 2:
        raise ContractViolation("world rendering needs a 2-D world")
    lo, extents = world.bounds.lo, world.bounds.extents
    scale = size / float(max(extents))
    height = extents[1] * scale

    def px(state) -> Tuple[float, float]:
        return (state[0] - lo[0]) * scale, height - (state[1] - lo[1]) * scale

    parts = [SVG_HEADER.format(width=_num(extents[0] * scale), height=_num(height))]
    for box in world.obstacles:
        x0, y1 = px(box.lo)
        x1, y0 = px(box.hi)
        parts.append(f'<rect class="obstacle" x="{_num(x0)}" y="{_num(y0)}" '
                     f'width="{_num(x1 - x0)}" height="{_num(y1 - y0)}"/>\n')
    if result is not None:
        for a, b in result.tree_edges:
            (ax, ay), (bx, by) = px(a), px(b)
            parts.append(f'<line class="edge" x1="{_num(ax)}" y1="{_num(ay)}" x2="{_num(bx)}" y2="{_num(by)}"/>\n')
        if result.path is not None:
            points = [px(w) for w in result.path.waypoints]
            parts.append(f'<polyline class="solution" points="{_polyline(points)}"/>\n')
    for state, colour in ((world.x_start, '#2f9e44'), (world.x_goal, '#c2255c')):
        x, y = px(state)
        parts.append(f'<circle cx="{_num(x)}" cy="{_num(y)}" r="5" fill="{colour}"/>\n')
    if result is not None:
        label = f"{result.planner}: cost {result.best_cost:.4f}" if result.solved else f"{result.planner}: no solution"
        parts.append(f'<text x="8" y="16">{label}</text>\n')
    parts.append(SVG_FOOTER)
    return ''.join(parts)


# Convergence plots

def _by_planner(rows: Sequence[Dict[str, Any]]) -> Dict[str, List[Dict[str, Any]]]:
    groups: Dict[str, List[Dict[str, Any]]] = {}
    for row in rows:
        groups.setdefault(row['planner'], []).append(row)
    for group in groups.values():
        group.sort(key=lambda r: r['time_ms'])
    return groups


class _Axes:
    """Maps data coordinates into the plot area"""

    def __init__(self, x_max: float, y_min: float, y_max: float):
        self.x_max = x_max if x_max > 0 else 1.0
        self.y_min = y_min
        self.y_max = y_max if y_max > y_min else y_min + 1.0

    def x(self, value: float) -> float:
        return MARGIN + value / self.x_max * (WIDTH - 2 * MARGIN)

    def y(self, value: float) -> float:
        return HEIGHT - MARGIN - (value - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - 2 * MARGIN)

    def frame(self, title: str, y_label: str) -> str:
        left, right = MARGIN, WIDTH - MARGIN
        top, bottom = MARGIN, HEIGHT - MARGIN
        parts = [f'<text x="{MARGIN}" y="30">{title}</text>\n']
        for i in range(5):
            fy = self.y_min + (self.y_max - self.y_min) * i / 4
            gy = self.y(fy)
            parts.append(f'<line class="grid" x1="{left}" y1="{_num(gy)}" x2="{right}" y2="{_num(gy)}"/>\n')
            parts.append(f'<text x="4" y="{_num(gy + 4)}">{_num(fy)}</text>\n')
        for i in range(5):
            fx = self.x_max * i / 4
            gx = self.x(fx)
            parts.append(f'<text x="{_num(gx - 10)}" y="{bottom + 18}">{_num(fx)}</text>\n')
        parts.append(f'<line class="axis" x1="{left}" y1="{bottom}" x2="{right}" y2="{bottom}"/>\n')
        parts.append(f'<line class="axis" x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/>\n')
        parts.append(f'<text x="{_num(WIDTH / 2 - 30)}" y="{HEIGHT - 8}">time [ms]</text>\n')
        parts.append(f'<text x="4" y="{MARGIN - 8}">{y_label}</text>\n')
        return ''.join(parts)


def _legend(planners: Sequence[str]) -> str:
    parts = []
    for i, planner in enumerate(planners):
        y = MARGIN + 14 * i
        colour = PALETTE[i % len(PALETTE)]
        parts.append(f'<line x1="{WIDTH - MARGIN - 110}" y1="{y}" x2="{WIDTH - MARGIN - 90}" y2="{y}" '
                     f'stroke="{colour}" stroke-width="2"/>\n')
        parts.append(f'<text x="{WIDTH - MARGIN - 85}" y="{y + 4}">{planner}</text>\n')
    return ''.join(parts)


def render_success_svg(rows: Sequence[Dict[str, Any]]) -> str:
    """Fraction of trials solved against time, one line per planner"""
    groups = _by_planner(rows)
    x_max = max((r['time_ms'] for r in rows), default=1.0)
    axes = _Axes(x_max, 0.0, 1.0)
    parts = [SVG_HEADER.format(width=WIDTH, height=HEIGHT), axes.frame('Success', 'solved')]
    for i, (planner, group) in enumerate(groups.items()):
        points = [(axes.x(r['time_ms']), axes.y(r['success_fraction'])) for r in group]
        parts.append(f'<polyline fill="none" stroke="{PALETTE[i % len(PALETTE)]}" stroke-width="2" '
                     f'points="{_polyline(points)}"/>\n')
    parts.append(_legend(list(groups)))
    parts.append(SVG_FOOTER)
    return ''.join(parts)


def _runs(group: Sequence[Dict[str, Any]]) -> List[Tuple[str, List[Dict[str, Any]]]]:
    """Consecutive rows sharing a drawable regime"""
    runs: List[Tuple[str, List[Dict[str, Any]]]] = []
    for row in group:
        if row['median_cost'] is None:
            runs.append(('', []))
            continue
        if runs and runs[-1][0] == row['regime']:
            runs[-1][1].append(row)
        else:
            # Share the boundary point so a dashed run joins the solid one
            previous = runs[-1][1][-1:] if runs and runs[-1][0] else []
            runs.append((row['regime'], previous + [row]))
    return [(regime, rs) for regime, rs in runs if regime and rs]


def _initial_points(initial: Optional[Dict[str, Dict[str, Any]]],
                    planners: Sequence[str]) -> Dict[str, Tuple[float, float]]:
    """Median first-solution (time, cost) for planners that solved at least once"""
    points = {}
    for planner in planners:
        s = (initial or {}).get(planner) or {}
        t, c = s.get('median_time_ms'), s.get('median_cost')
        if t is not None and c is not None and math.isfinite(t) and math.isfinite(c):
            points[planner] = (t, c)
    return points


def render_cost_svg(rows: Sequence[Dict[str, Any]], initial: Optional[Dict[str, Dict[str, Any]]] = None) -> str:
    """Median solution cost against time with its confidence band

    Dashed segments mark times where only part of the trials had solved.
    A dot marks each planner's median first solution when `initial` has one.
    """
    groups = _by_planner(rows)
    dots = _initial_points(initial, list(groups))
    defined = [r for r in rows if r['median_cost'] is not None]
    x_max = max([r['time_ms'] for r in rows] + [t for t, _ in dots.values()], default=1.0)
    if defined or dots:
        y_min = min([r['ci_lo'] for r in defined] + [c for _, c in dots.values()])
        y_max = max([r['ci_hi'] for r in defined] + [c for _, c in dots.values()])
        pad = 0.05 * (y_max - y_min) if y_max > y_min else 0.05 * max(abs(y_max), 1.0)
        axes = _Axes(x_max, y_min - pad, y_max + pad)
    else:
        axes = _Axes(x_max, 0.0, 1.0)

    parts = [SVG_HEADER.format(width=WIDTH, height=HEIGHT), axes.frame('Median cost', 'cost')]
    for i, (planner, group) in enumerate(groups.items()):
        colour = PALETTE[i % len(PALETTE)]
        for regime, run in _runs(group):
            upper = [(axes.x(r['time_ms']), axes.y(r['ci_hi'])) for r in run]
            lower = [(axes.x(r['time_ms']), axes.y(r['ci_lo'])) for r in reversed(run)]
            parts.append(f'<polygon fill="{colour}" fill-opacity="0.15" stroke="none" '
                         f'points="{_polyline(upper + lower)}"/>\n')
            dash = ' stroke-dasharray="6,4"' if regime == 'dashed' else ''
            median = [(axes.x(r['time_ms']), axes.y(r['median_cost'])) for r in run]
            parts.append(f'<polyline fill="none" stroke="{colour}" stroke-width="2"{dash} '
                         f'points="{_polyline(median)}"/>\n')
        if planner in dots:
            t, c = dots[planner]
            parts.append(f'<circle class="initial" cx="{_num(axes.x(t))}" cy="{_num(axes.y(c))}" r="4" '
                         f'fill="{colour}"/>\n')
    parts.append(_legend(list(groups)))
    parts.append(SVG_FOOTER)
    return ''.join(parts)


def plot_files(rows: Sequence[Dict[str, Any]], initial: Optional[Dict[str, Dict[str, Any]]] = None,
               suffix: str = '') -> Dict[str, str]:
    """File name to SVG text for every convergence figure"""
    if any(math.isnan(r['time_ms']) for r in rows):
        raise ContractViolation("aggregate rows carry a NaN time")
    return {f'success{suffix}.svg': render_success_svg(rows), f'cost{suffix}.svg': render_cost_svg(rows, initial)}
