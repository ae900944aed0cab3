"""Static SVG rendering of trajectory CSV files.

Each CSV yields three figures: the position traces (with a marker at every
distinct constrained endpoint) and the east / north velocity components
against time.
"""
from __future__ import annotations

import csv
from collections import OrderedDict
from pathlib import Path
from xml.sax.saxutils import escape

CSV_HEADER = ["trajectory_id", "kind", "k", "t_seconds", "x_m", "vx_mps", "y_m", "vy_mps"]

KIND_COLORS = {
    "constrained": "#1f77b4",
    "relaxed": "#d62728",
    "constrained_identity": "#2ca02c",
}

WIDTH, HEIGHT, PAD = 640, 480, 56


class CSVFormatError(ValueError):
    pass


def read_trajectories(path):
    """Load a trajectory CSV into ``{(trajectory_id, kind): [row, ...]}``."""
    path = Path(path)
    try:
        with path.open(newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if header != CSV_HEADER:
                raise CSVFormatError(f"{path}: unexpected header {header}")
            series = OrderedDict()
            for lineno, row in enumerate(reader, 2):
                if len(row) != len(CSV_HEADER):
                    raise CSVFormatError(f"{path}:{lineno}: expected {len(CSV_HEADER)} fields")
                try:
                    tid = int(row[0])
                    vals = [int(row[2])] + [float(v) for v in row[3:]]
                except ValueError as exc:
                    raise CSVFormatError(f"{path}:{lineno}: {exc}") from exc
                series.setdefault((tid, row[1]), []).append(vals)
    except OSError as exc:
        raise CSVFormatError(f"cannot read {path}: {exc}") from exc
    return series


class _Axes:
    def __init__(self, xs, ys):
        xs = list(xs) or [0.0, 1.0]
        ys = list(ys) or [0.0, 1.0]
        self.x0, self.x1 = min(xs), max(xs)
        self.y0, self.y1 = min(ys), max(ys)
        if self.x1 == self.x0:
            self.x0, self.x1 = self.x0 - 1.0, self.x1 + 1.0
        if self.y1 == self.y0:
            self.y0, self.y1 = self.y0 - 1.0, self.y1 + 1.0

    def px(self, x):
        return PAD + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - 2 * PAD)

    def py(self, y):
        return HEIGHT - PAD - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - 2 * PAD)


def _svg(title, xlabel, ylabel, ax, body):
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<rect x="{PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" height="{HEIGHT - 2 * PAD}" '
        'fill="none" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 12}" text-anchor="middle" font-size="12">'
        f'{escape(xlabel)}</text>',
        f'<text x="14" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {HEIGHT / 2})">{escape(ylabel)}</text>',
        f'<text x="{PAD}" y="{HEIGHT - PAD + 16}" font-size="10">{ax.x0:.6g}</text>',
        f'<text x="{WIDTH - PAD}" y="{HEIGHT - PAD + 16}" text-anchor="end" font-size="10">'
        f'{ax.x1:.6g}</text>',
        f'<text x="{PAD - 4}" y="{HEIGHT - PAD}" text-anchor="end" font-size="10">{ax.y0:.6g}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 10}" text-anchor="end" font-size="10">{ax.y1:.6g}</text>',
    ]
    parts.extend(body)
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _polyline(ax, xs, ys, color, label):
    pts = " ".join(f"{ax.px(x):.2f},{ax.py(y):.2f}" for x, y in zip(xs, ys))
    return (f'<polyline data-series="{escape(label)}" fill="none" stroke="{color}" '
            f'stroke-width="1.2" points="{pts}"/>')


def position_svg(series, title):
    xs = [r[2] for rows in series.values() for r in rows]
    ys = [r[4] for rows in series.values() for r in rows]
    ax = _Axes(xs, ys)
    body = []
    for (tid, kind), rows in series.items():
        body.append(_polyline(ax, [r[2] for r in rows], [r[4] for r in rows],
                              KIND_COLORS.get(kind, "#555555"), f"{kind}-{tid}"))
    for x, y in destination_markers(series):
        body.append(f'<circle class="destination" cx="{ax.px(x):.2f}" cy="{ax.py(y):.2f}" '
                    'r="5" fill="none" stroke="black" stroke-width="2"/>')
    return _svg(title, "east position x (m)", "north position y (m)", ax, body)


def velocity_svg(series, title, column, label):
    ts = [r[1] for rows in series.values() for r in rows]
    vs = [r[column] for rows in series.values() for r in rows]
    ax = _Axes(ts, vs)
    body = [
        _polyline(ax, [r[1] for r in rows], [r[column] for r in rows],
                  KIND_COLORS.get(kind, "#555555"), f"{kind}-{tid}")
        for (tid, kind), rows in series.items()
    ]
    return _svg(title, "time (s)", label, ax, body)


def destination_markers(series):
    """Distinct terminal positions of constrained trajectories, to the metre."""
    seen = OrderedDict()
    for (tid, kind), rows in series.items():
        if kind.startswith("constrained") and rows:
            x, y = rows[-1][2], rows[-1][4]
            seen.setdefault((round(x), round(y)), (x, y))
    return list(seen.values())


def emit_plot(csv_path, out_dir=None):
    """Write ``<stem>_positions.svg``, ``<stem>_vx.svg`` and ``<stem>_vy.svg``."""
    csv_path = Path(csv_path)
    out_dir = Path(out_dir) if out_dir is not None else csv_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    series = read_trajectories(csv_path)
    stem = csv_path.stem
    figures = {
        f"{stem}_positions.svg": position_svg(series, f"{stem}: positions"),
        f"{stem}_vx.svg": velocity_svg(series, f"{stem}: eastward velocity", 3, "vx (m/s)"),
        f"{stem}_vy.svg": velocity_svg(series, f"{stem}: northward velocity", 5, "vy (m/s)"),
    }
    written = []
    for name, text in figures.items():
        path = out_dir / name
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written
