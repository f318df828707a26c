"""Self-contained SVG drawings of instances, plans, flown tracks and bench sweeps."""
from __future__ import annotations

from typing import Sequence

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


def _fmt(x: float) -> str:
    return f"{x:.2f}"


class _Frame:
    def __init__(self, xs: Sequence[float], ys: Sequence[float], size: float = 640.0, pad: float = 20.0):
        self.x0, self.x1 = min(xs), max(xs)
        self.y0, self.y1 = min(ys), max(ys)
        span = max(self.x1 - self.x0, self.y1 - self.y0, 1e-9)
        self.k = (size - 2 * pad) / span
        self.pad = pad
        self.w = (self.x1 - self.x0) * self.k + 2 * pad
        self.h = (self.y1 - self.y0) * self.k + 2 * pad

    def __call__(self, p) -> tuple[str, str]:
        return _fmt(self.pad + (p[0] - self.x0) * self.k), _fmt(self.h - self.pad - (p[1] - self.y0) * self.k)


def _polyline(frame: _Frame, pts, color: str, width: float = 1.5, dash: str | None = None) -> str:
    coords = " ".join(",".join(frame(p)) for p in pts)
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return (f'<polyline points="{coords}" fill="none" stroke="{color}" '
            f'stroke-width="{width}"{extra}/>')


def render_mission(inst, waypoints=None, tracks=None, title: str = "") -> str:
    """Targets, planned paths (dashed) and simulated tracks (solid) per UAV."""
    pts = [(0.0, 0.0), (inst.width, inst.height), *inst.targets]
    for group in (waypoints or []), (tracks or []):
        for path in group:
            pts.extend(path)
    frame = _Frame([p[0] for p in pts], [p[1] for p in pts])
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_fmt(frame.w)}" height="{_fmt(frame.h)}" '
           f'viewBox="0 0 {_fmt(frame.w)} {_fmt(frame.h)}">',
           '<rect width="100%" height="100%" fill="white"/>']
    if title:
        out.append(f'<title>{title}</title>')
    (ax, ay), (bx, by) = frame((0.0, inst.height)), frame((inst.width, 0.0))
    out.append(f'<rect x="{ax}" y="{ay}" width="{_fmt(float(bx) - float(ax))}" '
               f'height="{_fmt(float(by) - float(ay))}" fill="none" stroke="#999" stroke-width="1"/>')
    for j, path in enumerate(waypoints or []):
        out.append(_polyline(frame, path, PALETTE[j % len(PALETTE)], 1.0, "4 3"))
    for j, path in enumerate(tracks or []):
        out.append(_polyline(frame, path, PALETTE[j % len(PALETTE)], 1.5))
    for p in inst.targets:
        x, y = frame(p)
        out.append(f'<circle cx="{x}" cy="{y}" r="3" fill="black"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_bench(rows: Sequence[dict], sweep: str) -> str:
    """Mean cost per sweep value for psa, greedy and the lower bound."""
    series = (("psa_mean", PALETTE[0]), ("greedy_mean", PALETTE[1]), ("lb_mean", PALETTE[2]))
    xs = [r["value"] for r in rows]
    ys = [r[k] for r in rows for k, _ in series] + [0.0]
    kx = (480.0 - 80.0) / max(max(xs) - min(xs), 1e-9)
    ky = (320.0 - 80.0) / max(max(ys), 1e-9)

    def at(x, y):
        return _fmt(40 + (x - min(xs)) * kx), _fmt(320 - 40 - y * ky)

    out = ['<svg xmlns="http://www.w3.org/2000/svg" width="480" height="320" viewBox="0 0 480 320">',
           '<rect width="100%" height="100%" fill="white"/>',
           f'<text x="240" y="312" font-size="12" text-anchor="middle">{sweep}</text>',
           '<line x1="40" y1="280" x2="440" y2="280" stroke="#333"/>',
           '<line x1="40" y1="40" x2="40" y2="280" stroke="#333"/>']
    for i, (key, color) in enumerate(series):
        coords = " ".join(",".join(at(r["value"], r[key])) for r in rows)
        out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{50}" y="{16 + 12 * i}" font-size="11" fill="{color}">{key[:-5]}</text>')
    for r in rows:
        x, _ = at(r["value"], 0)
        out.append(f'<text x="{x}" y="294" font-size="10" text-anchor="middle">{r["value"]}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
