"""CSV and SVG output."""

from __future__ import annotations

import csv
import html
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

VIEWPORT = 800
MARGIN = 0.05


def fmt_number(value) -> str:
    """Shortest round-trip decimal for floats; integers verbatim."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_number(v) for v in row])


def write_log_csv(path: str | Path, log: Sequence[Mapping[str, float]]) -> None:
    header = list(log[0]) if log else ["epoch"]
    write_csv(path, header, ([row.get(k, "") for k in header] for row in log))


def read_csv_columns(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ValueError(f"{path} is empty")
        rows = [r for r in reader if r]
    try:
        values = np.array([[float(c) for c in r] for r in rows], dtype=np.float64)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from None
    return header, values.reshape(len(rows), len(header))


def svg_scatter(points: np.ndarray, radius: float = 3.0, title: str = "") -> str:
    """Self-contained 800x800 scatter plot; the data range fills the viewport minus a 5% margin per side."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 2)
    if len(pts):
        lo, hi = pts.min(axis=0), pts.max(axis=0)
    else:
        lo, hi = np.zeros(2), np.ones(2)
    span = np.where(hi - lo > 0, hi - lo, 1.0)
    inner = VIEWPORT * (1.0 - 2.0 * MARGIN)
    pad = VIEWPORT * MARGIN
    px = pad + (pts[:, 0] - lo[0]) / span[0] * inner
    py = VIEWPORT - pad - (pts[:, 1] - lo[1]) / span[1] * inner
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{VIEWPORT}" height="{VIEWPORT}" '
        f'viewBox="0 0 {VIEWPORT} {VIEWPORT}">',
        f'<rect width="{VIEWPORT}" height="{VIEWPORT}" fill="white"/>',
    ]
    if title:
        out.append(f"<title>{html.escape(title)}</title>")
    for x, y in zip(px, py):
        out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="{radius}" fill="steelblue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
