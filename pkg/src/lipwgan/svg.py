"""Minimal hand-written SVG charts. Numbers are printed with fixed precision
so that identical inputs give byte-identical files."""

from html import escape

import numpy as np

W, H = 480, 360
PAD = 48


def _num(v):
    return f"{v:.3f}"


def _doc(body, title, width=W, height=H):
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" '
        f'font-size="13">{escape(title)}</text>\n' + "".join(body) + "</svg>\n"
    )


def _lerp_color(t):
    # blue (low) -> yellow (high)
    t = float(np.clip(t, 0.0, 1.0))
    lo, hi = np.array([49, 54, 149]), np.array([253, 231, 37])
    r, g, b = (lo + t * (hi - lo)).round().astype(int)
    return f"#{r:02x}{g:02x}{b:02x}"


class _Axes:
    def __init__(self, xlim, ylim):
        self.x0, self.x1 = xlim
        self.y0, self.y1 = ylim
        if self.x1 <= self.x0:
            self.x1 = self.x0 + 1.0
        if self.y1 <= self.y0:
            self.y1 = self.y0 + 1.0

    def px(self, x):
        return PAD + (x - self.x0) / (self.x1 - self.x0) * (W - 2 * PAD)

    def py(self, y):
        return H - PAD - (y - self.y0) / (self.y1 - self.y0) * (H - 2 * PAD)

    def frame(self, xlabel, ylabel):
        parts = [
            f'<rect x="{PAD}" y="{PAD}" width="{W - 2 * PAD}" height="{H - 2 * PAD}" '
            f'fill="none" stroke="black"/>\n',
            f'<text x="{W / 2:.1f}" y="{H - 12}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="11">{escape(xlabel)}</text>\n',
            f'<text x="14" y="{H / 2:.1f}" text-anchor="middle" font-family="sans-serif" '
            f'font-size="11" transform="rotate(-90 14 {H / 2:.1f})">{escape(ylabel)}</text>\n',
        ]
        for x in np.linspace(self.x0, self.x1, 5):
            parts.append(f'<text x="{_num(self.px(x))}" y="{H - PAD + 14}" text-anchor="middle" '
                         f'font-family="sans-serif" font-size="9">{x:.2f}</text>\n')
        for y in np.linspace(self.y0, self.y1, 5):
            parts.append(f'<text x="{PAD - 4}" y="{_num(self.py(y) + 3)}" text-anchor="end" '
                         f'font-family="sans-serif" font-size="9">{y:.2f}</text>\n')
        return parts


def scatter_band_svg(x, y, fit=None, title="", xlabel="neural IPM", ylabel="exact W1"):
    """Scatter of (x, y) with the fitted curve and its [a f, b f] envelope."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    xmax = float(x.max()) * 1.05 if len(x) else 1.0
    ymax = float(y.max()) * 1.05 if len(y) else 1.0
    if fit is not None:
        ymax = max(ymax, float(fit.b * fit.f(xmax)))
    ax = _Axes((0.0, xmax), (0.0, ymax))
    body = ax.frame(xlabel, ylabel)
    if fit is not None:
        grid = np.linspace(0.0, xmax, 64)
        f = fit.f(grid)
        upper = [(ax.px(g), ax.py(min(fit.b * v, ymax))) for g, v in zip(grid, f)]
        lower = [(ax.px(g), ax.py(fit.a * v)) for g, v in zip(grid, f)]
        poly = " ".join(f"{_num(a)},{_num(b)}" for a, b in upper + lower[::-1])
        body.append(f'<polygon points="{poly}" fill="#f4a3a3" fill-opacity="0.5" stroke="none"/>\n')
        line = " ".join(f"{_num(ax.px(g))},{_num(ax.py(min(v, ymax)))}" for g, v in zip(grid, f))
        body.append(f'<polyline points="{line}" fill="none" stroke="#c00000" stroke-width="1.5"/>\n')
        body.append(f'<text x="{PAD + 6}" y="{PAD + 14}" font-family="sans-serif" font-size="10">'
                    f'LRE={fit.lre:.4f}  b-a={fit.b - fit.a:.4f}</text>\n')
    for a, b in zip(x, y):
        body.append(f'<circle cx="{_num(ax.px(a))}" cy="{_num(ax.py(b))}" r="2.5" fill="#1f4e9c"/>\n')
    return _doc(body, title)


def points_svg(real, fake, title="", lim=None):
    real, fake = np.asarray(real, dtype=float), np.asarray(fake, dtype=float)
    both = np.concatenate([real, fake])
    lo, hi = (both.min(axis=0), both.max(axis=0)) if lim is None else (np.array(lim[0]), np.array(lim[1]))
    ax = _Axes((float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1])))
    body = ax.frame("x1", "x2")
    for pts, color in ((real, "#2ca02c"), (fake, "#1f4e9c")):
        for a, b in pts:
            body.append(f'<circle cx="{_num(ax.px(a))}" cy="{_num(ax.py(b))}" r="1.2" fill="{color}" '
                        f'fill-opacity="0.6"/>\n')
    return _doc(body, title)


def heatmap_svg(values, x_range, y_range, title=""):
    """Colour map of ``values[iy, ix]`` over the given ranges (y grows upward)."""
    values = np.asarray(values, dtype=float)
    ny, nx = values.shape
    ax = _Axes(tuple(x_range), tuple(y_range))
    body = ax.frame("x1", "x2")
    lo, hi = float(values.min()), float(values.max())
    span = hi - lo if hi > lo else 1.0
    cw = (W - 2 * PAD) / nx
    ch = (H - 2 * PAD) / ny
    for iy in range(ny):
        for ix in range(nx):
            c = _lerp_color((values[iy, ix] - lo) / span)
            body.append(f'<rect x="{_num(PAD + ix * cw)}" y="{_num(H - PAD - (iy + 1) * ch)}" '
                        f'width="{_num(cw + 0.05)}" height="{_num(ch + 0.05)}" fill="{c}"/>\n')
    return _doc(body, title)


def heattable_svg(matrix, row_labels, col_labels, title="", row_name="p", col_name="q"):
    """Annotated grid table, one coloured cell per (row, column) value."""
    m = np.asarray(matrix, dtype=float)
    nr, nc = m.shape
    cell = 60
    width, height = PAD + nc * cell + 20, PAD + nr * cell + 40
    finite = m[np.isfinite(m)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    body = []
    for i in range(nr):
        body.append(f'<text x="{PAD - 6}" y="{PAD + i * cell + cell / 2 + 4:.1f}" text-anchor="end" '
                    f'font-family="sans-serif" font-size="11">{row_name}={row_labels[i]}</text>\n')
        for j in range(nc):
            v = m[i, j]
            color = _lerp_color((v - lo) / span) if np.isfinite(v) else "#cccccc"
            x, y = PAD + j * cell, PAD + i * cell
            body.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{color}" stroke="white"/>\n')
            label = f"{v:.3f}" if np.isfinite(v) else "fail"
            body.append(f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 4:.1f}" text-anchor="middle" '
                        f'font-family="sans-serif" font-size="11">{label}</text>\n')
    for j in range(nc):
        body.append(f'<text x="{PAD + j * cell + cell / 2:.1f}" y="{PAD + nr * cell + 16}" '
                    f'text-anchor="middle" font-family="sans-serif" font-size="11">'
                    f'{col_name}={col_labels[j]}</text>\n')
    return _doc(body, title, width, height)


def write(path, text):
    with open(path, "w") as fh:
        fh.write(text)
