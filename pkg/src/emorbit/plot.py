"""Self-contained SVG line charts for quick visual checks.

No plotting dependency: charts are assembled as SVG text. Enough for
orbit projections, per-component comparisons and error-versus-noise
curves; not a general plotting layer.
"""

import numpy as np

__all__ = ["line_chart", "orbit_projection", "orbit_components", "sweep_chart"]

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo, hi, count=5):
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    return np.linspace(lo, hi, count)


def _fmt(value):
    text = "%.4g" % value
    return "0" if text == "-0" else text


class _Chart:
    def __init__(self, width, height, title, xlabel, ylabel):
        self.width, self.height = width, height
        self.title, self.xlabel, self.ylabel = title, xlabel, ylabel
        self.margin = (60.0, 20.0, 42.0, 34.0)  # left, right, bottom, top
        self.curves = []

    def add(self, x, y, label="", color=None, width=1.5, dashes=None):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = np.isfinite(x) & np.isfinite(y)
        if color is None:
            color = PALETTE[len(self.curves) % len(PALETTE)]
        self.curves.append((x[keep], y[keep], label, color, width, dashes))

    def _limits(self):
        xs = [c[0] for c in self.curves if c[0].size]
        ys = [c[1] for c in self.curves if c[1].size]
        if not xs:
            return (0.0, 1.0, 0.0, 1.0)
        x_lo = min(float(np.min(x)) for x in xs)
        x_hi = max(float(np.max(x)) for x in xs)
        y_lo = min(float(np.min(y)) for y in ys)
        y_hi = max(float(np.max(y)) for y in ys)
        if x_hi <= x_lo:
            x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
        if y_hi <= y_lo:
            y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
        pad_x = 0.04 * (x_hi - x_lo)
        pad_y = 0.07 * (y_hi - y_lo)
        return (x_lo - pad_x, x_hi + pad_x, y_lo - pad_y, y_hi + pad_y)

    def render(self):
        left, right, bottom, top = self.margin
        x_lo, x_hi, y_lo, y_hi = self._limits()
        plot_w = self.width - left - right
        plot_h = self.height - top - bottom

        def sx(v):
            return left + (v - x_lo) / (x_hi - x_lo) * plot_w

        def sy(v):
            return self.height - bottom - (v - y_lo) / (y_hi - y_lo) * plot_h

        parts = [
            '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
            'viewBox="0 0 %d %d">' % (self.width, self.height, self.width, self.height),
            '<rect width="%d" height="%d" fill="white"/>' % (self.width, self.height),
            '<text x="%.1f" y="%.1f" font-family="sans-serif" font-size="14" '
            'text-anchor="middle">%s</text>'
            % (left + plot_w / 2, top - 8, self.title),
        ]
        for tick in _ticks(x_lo, x_hi):
            px = sx(tick)
            parts.append(
                '<line x1="%.1f" y1="%.1f" x2="%.1f" y2="%.1f" stroke="#ddd"/>'
                % (px, top, px, self.height - bottom)
            )
            parts.append(
                '<text x="%.1f" y="%.1f" font-family="sans-serif" font-size="10" '
                'text-anchor="middle">%s</text>'
                % (px, self.height - bottom + 14, _fmt(tick))
            )
        for tick in _ticks(y_lo, y_hi):
            py = sy(tick)
            parts.append(
                '<line x1="%.1f" y1="%.1f" x2="%.1f" y2="%.1f" stroke="#ddd"/>'
                % (left, py, self.width - right, py)
            )
            parts.append(
                '<text x="%.1f" y="%.1f" font-family="sans-serif" font-size="10" '
                'text-anchor="end">%s</text>' % (left - 5, py + 3, _fmt(tick))
            )
        parts.append(
            '<rect x="%.1f" y="%.1f" width="%.1f" height="%.1f" fill="none" '
            'stroke="#333"/>' % (left, top, plot_w, plot_h)
        )
        parts.append(
            '<text x="%.1f" y="%.1f" font-family="sans-serif" font-size="12" '
            'text-anchor="middle">%s</text>'
            % (left + plot_w / 2, self.height - 6, self.xlabel)
        )
        parts.append(
            '<text x="%.1f" y="%.1f" font-family="sans-serif" font-size="12" '
            'text-anchor="middle" transform="rotate(-90 14 %.1f)">%s</text>'
            % (14.0, top + plot_h / 2, top + plot_h / 2, self.ylabel)
        )
        legend_y = top + 14
        for x, y, label, color, width, dashes in self.curves:
            if x.size == 0:
                continue
            coords = " ".join(
                "%.2f,%.2f" % (sx(xv), sy(yv)) for xv, yv in zip(x, y)
            )
            dash = ' stroke-dasharray="%s"' % dashes if dashes else ""
            if x.size == 1:
                parts.append(
                    '<circle cx="%.2f" cy="%.2f" r="3" fill="%s"/>'
                    % (sx(x[0]), sy(y[0]), color)
                )
            else:
                parts.append(
                    '<polyline points="%s" fill="none" stroke="%s" '
                    'stroke-width="%.1f"%s/>' % (coords, color, width, dash)
                )
            if label:
                parts.append(
                    '<line x1="%.1f" y1="%.1f" x2="%.1f" y2="%.1f" stroke="%s" '
                    'stroke-width="%.1f"%s/>'
                    % (left + plot_w - 130, legend_y, left + plot_w - 110,
                       legend_y, color, width, dash)
                )
                parts.append(
                    '<text x="%.1f" y="%.1f" font-family="sans-serif" '
                    'font-size="11">%s</text>'
                    % (left + plot_w - 105, legend_y + 3, label)
                )
                legend_y += 15
        parts.append("</svg>")
        return "\n".join(parts) + "\n"


def line_chart(path, curves, title="", xlabel="", ylabel="", size=(720, 480)):
    """curves: iterable of dicts with keys x, y and optional label, color,
    width, dashes."""
    chart = _Chart(size[0], size[1], title, xlabel, ylabel)
    for c in curves:
        chart.add(
            c["x"], c["y"], c.get("label", ""), c.get("color"),
            c.get("width", 1.5), c.get("dashes"),
        )
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(chart.render())


def _decimate(arr, limit=2000):
    arr = np.asarray(arr)
    if arr.shape[0] <= limit:
        return arr
    idx = np.linspace(0, arr.shape[0] - 1, limit).astype(int)
    return arr[idx]


def orbit_projection(path, truth, recon, title="orbit, a1-a2 projection"):
    pts_t = _decimate(truth.points)
    pts_r = _decimate(recon.points)
    line_chart(
        path,
        [
            {"x": pts_t[:, 0], "y": pts_t[:, 1], "label": "true", "width": 2.0},
            {"x": pts_r[:, 0], "y": pts_r[:, 1], "label": "reconstructed",
             "dashes": "6,4"},
        ],
        title=title, xlabel="a1 [m]", ylabel="a2 [m]",
    )


def orbit_components(path, truth, recon, title="orbit components vs time"):
    tt = _decimate(truth.grid.times())
    pts_t = _decimate(truth.points)
    pts_r = _decimate(recon.points)
    curves = []
    for i in range(3):
        curves.append(
            {"x": tt, "y": pts_t[:, i], "label": "a%d true" % (i + 1),
             "color": PALETTE[i], "width": 2.0}
        )
        curves.append(
            {"x": tt, "y": pts_r[:, i], "label": "a%d rec" % (i + 1),
             "color": PALETTE[i], "dashes": "6,4"}
        )
    line_chart(path, curves, title=title, xlabel="t [s]", ylabel="position [m]")


def sweep_chart(path, points, slope, intercept, title="reconstruction error vs noise"):
    points = sorted(points)
    eps = np.array([p[0] for p in points])
    err = np.array([p[1] for p in points])
    curves = [{"x": eps, "y": err, "label": "mean err", "width": 0.0}]
    curves[0]["width"] = 1.5
    if np.isfinite(slope):
        fit_x = np.linspace(float(eps.min()), float(eps.max()), 50)
        curves.append(
            {"x": fit_x, "y": slope * fit_x + intercept, "label": "linear fit",
             "dashes": "4,4"}
        )
    line_chart(path, curves, title=title, xlabel="epsilon", ylabel="err")
