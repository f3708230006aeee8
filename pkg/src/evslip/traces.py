"""CSV trace writers and a dependency-free SVG line plot."""
from __future__ import annotations

import csv
import io
from pathlib import Path
from typing import Sequence

from .errors import IoFailure


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return "%.6f" % value
    return str(value)


def format_csv(header: Sequence[str], rows) -> str:
    """Header row, comma separated, ``%.6f`` reals, LF line endings."""
    out = [",".join(header)]
    out.extend(",".join(_fmt(v) for v in row) for row in rows)
    return "\n".join(out) + "\n"


def write_csv(path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_csv(header, rows))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
    return path


def read_csv(path) -> tuple[list[str], list[list[float]]]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path} has no header")
    header, body = rows[0], rows[1:]
    try:
        return header, [[float(v) for v in r] for r in body]
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric cell ({exc})") from None


def svg_polyline(xs: Sequence[float], ys: Sequence[float], title: str = "",
                 width: int = 640, height: int = 240, margin: int = 30) -> str:
    """One series as an SVG polyline with min/max labels on the y axis."""
    if len(xs) != len(ys):
        raise ValueError("xs and ys differ in length")
    if xs:
        x0, x1 = min(xs), max(xs)
        y0, y1 = min(ys), max(ys)
    else:
        x0 = x1 = y0 = y1 = 0.0
    sx = (width - 2 * margin) / ((x1 - x0) or 1.0)
    sy = (height - 2 * margin) / ((y1 - y0) or 1.0)
    pts = " ".join(
        "%.2f,%.2f" % (margin + (x - x0) * sx, height - margin - (y - y0) * sy)
        for x, y in zip(xs, ys)
    )
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
        f'<rect width="{width}" height="{height}" fill="white"/>\n'
        f'<text x="{margin}" y="16" font-size="12" font-family="sans-serif">{title}</text>\n'
        f'<text x="2" y="{margin + 4}" font-size="10" font-family="sans-serif">{y1:.3g}</text>\n'
        f'<text x="2" y="{height - margin}" font-size="10" font-family="sans-serif">{y0:.3g}</text>\n'
        f'<polyline fill="none" stroke="black" stroke-width="1" points="{pts}"/>\n'
        "</svg>\n"
    )


def export_svg(csv_path, out_dir=None) -> list[Path]:
    """Write one SVG per non-time column of ``csv_path``, plotted against column 0."""
    csv_path = Path(csv_path)
    header, rows = read_csv(csv_path)
    out_dir = Path(out_dir) if out_dir else csv_path.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    xs = [r[0] for r in rows]
    written = []
    for j, name in enumerate(header[1:], start=1):
        path = out_dir / f"{csv_path.stem}_{name}.svg"
        try:
            path.write_text(svg_polyline(xs, [r[j] for r in rows], f"{csv_path.stem}: {name}"),
                            encoding="utf-8")
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        written.append(path)
    return written
