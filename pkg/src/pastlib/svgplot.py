"""Minimal SVG line-plot writer (polylines, error bars, legend, text
annotations) so figures regenerate without a plotting stack."""

from __future__ import annotations

from dataclasses import dataclass, field

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

WIDTH, HEIGHT = 640, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 20, 40, 50


@dataclass
class Series:
    label: str
    xs: list
    ys: list
    errs: list = None
    dashed: bool = False


@dataclass
class LinePlot:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list = field(default_factory=list)
    annotations: list = field(default_factory=list)  # (text,) lines, top-left

    def add_series(self, label, xs, ys, errs=None, dashed=False):
        self.series.append(Series(label, list(xs), list(ys), list(errs) if errs is not None else None, dashed))

    def annotate(self, text):
        self.annotations.append(text)

    def _ranges(self):
        xs = [x for s in self.series for x in s.xs]
        ys = []
        for s in self.series:
            for i, y in enumerate(s.ys):
                e = s.errs[i] if s.errs else 0.0
                ys.extend([y - e, y + e])
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
        if x1 == x0:
            x1 = x0 + 1.0
        if y1 == y0:
            y1 = y0 + 1.0
        pad_y = 0.05 * (y1 - y0)
        return x0, x1, y0 - pad_y, y1 + pad_y

    def render(self):
        if not self.series:
            raise ValueError("nothing to plot")
        x0, x1, y0, y1 = self._ranges()
        pw = WIDTH - MARGIN_L - MARGIN_R
        ph = HEIGHT - MARGIN_T - MARGIN_B

        def px(x):
            return MARGIN_L + (x - x0) / (x1 - x0) * pw

        def py(y):
            return MARGIN_T + (1.0 - (y - y0) / (y1 - y0)) * ph

        out = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
            f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
            f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
            f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" '
            'fill="none" stroke="#333"/>',
        ]
        if self.title:
            out.append(
                f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">'
                f"{_esc(self.title)}</text>"
            )
        # Axis ticks: 5 per axis.
        for k in range(6):
            xv = x0 + k * (x1 - x0) / 5
            yv = y0 + k * (y1 - y0) / 5
            out.append(
                f'<line x1="{px(xv):.1f}" y1="{MARGIN_T + ph}" x2="{px(xv):.1f}" '
                f'y2="{MARGIN_T + ph + 5}" stroke="#333"/>'
            )
            out.append(
                f'<text x="{px(xv):.1f}" y="{MARGIN_T + ph + 18}" '
                f'text-anchor="middle">{_fmt(xv)}</text>'
            )
            out.append(
                f'<line x1="{MARGIN_L - 5}" y1="{py(yv):.1f}" x2="{MARGIN_L}" '
                f'y2="{py(yv):.1f}" stroke="#333"/>'
            )
            out.append(
                f'<text x="{MARGIN_L - 8}" y="{py(yv) + 4:.1f}" '
                f'text-anchor="end">{_fmt(yv)}</text>'
            )
        if self.xlabel:
            out.append(
                f'<text x="{MARGIN_L + pw / 2}" y="{HEIGHT - 12}" '
                f'text-anchor="middle">{_esc(self.xlabel)}</text>'
            )
        if self.ylabel:
            cy = MARGIN_T + ph / 2
            out.append(
                f'<text x="16" y="{cy}" text-anchor="middle" '
                f'transform="rotate(-90 16 {cy})">{_esc(self.ylabel)}</text>'
            )
        for idx, s in enumerate(self.series):
            color = _PALETTE[idx % len(_PALETTE)]
            dash = ' stroke-dasharray="6 4"' if s.dashed else ""
            pts = " ".join(f"{px(x):.1f},{py(y):.1f}" for x, y in zip(s.xs, s.ys))
            out.append(
                f'<polyline points="{pts}" fill="none" stroke="{color}" '
                f'stroke-width="1.8"{dash}/>'
            )
            for i, (x, y) in enumerate(zip(s.xs, s.ys)):
                out.append(
                    f'<circle cx="{px(x):.1f}" cy="{py(y):.1f}" r="2.6" fill="{color}"/>'
                )
                if s.errs:
                    e = s.errs[i]
                    out.append(
                        f'<line x1="{px(x):.1f}" y1="{py(y - e):.1f}" '
                        f'x2="{px(x):.1f}" y2="{py(y + e):.1f}" stroke="{color}"/>'
                    )
        # Legend, top right inside the frame.
        ly = MARGIN_T + 14
        for idx, s in enumerate(self.series):
            color = _PALETTE[idx % len(_PALETTE)]
            lx = MARGIN_L + pw - 150
            out.append(
                f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
                f'stroke="{color}" stroke-width="1.8"'
                + (' stroke-dasharray="6 4"' if s.dashed else "")
                + "/>"
            )
            out.append(f'<text x="{lx + 28}" y="{ly}">{_esc(s.label)}</text>')
            ly += 16
        ay = MARGIN_T + 14
        for text in self.annotations:
            out.append(f'<text x="{MARGIN_L + 8}" y="{ay}" fill="#555">{_esc(text)}</text>')
            ay += 15
        out.append("</svg>")
        return "\n".join(out) + "\n"

    def write(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.render())


def _esc(text):
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
    )


def _fmt(v):
    if v == 0:
        return "0"
    if abs(v) >= 1000 or abs(v) < 0.01:
        return f"{v:.1e}"
    return f"{v:.3g}"
