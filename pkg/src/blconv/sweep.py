"""One-parameter CM sweeps: tables, CSV/SVG output and trend verdicts."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Sequence
from xml.sax.saxutils import escape

import numpy as np
from scipy.stats import spearmanr

from .errors import BLError, UsageError
from .netgen import GenParams, cm_over_trials

logger = logging.getLogger(__name__)

PARAMS = ("N", "B", "C", "D", "p_hat", "w_hat")

DEFAULT_GRIDS: dict[str, tuple] = {
    "N": tuple(range(5, 51, 5)),
    "B": (1, 5, 10, 15, 20, 25, 30),
    "C": tuple(round(0.1 * k, 10) for k in range(1, 10)),
    "D": tuple(round(0.1 * k, 10) for k in range(1, 10)),
    "p_hat": tuple(float(v) for v in range(4, 11)),
    "w_hat": tuple(float(v) for v in range(20, 31)),
}

AXIS_LABELS = {"N": "N", "B": "B", "C": "C", "D": "D", "p_hat": "p_hat", "w_hat": "w_hat"}


@dataclass(frozen=True)
class SweepSpec:
    vary: str
    grid: tuple = ()
    nominal: GenParams = field(default_factory=GenParams)
    out_csv: str | Path | None = None
    out_svg: str | Path | None = None

    def __post_init__(self):
        if self.vary not in PARAMS:
            raise UsageError(f"vary must be one of {', '.join(PARAMS)}; got {self.vary!r}")
        grid = tuple(self.grid) if len(self.grid) else DEFAULT_GRIDS[self.vary]
        object.__setattr__(self, "grid", grid)
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise UsageError("grid must be strictly increasing")
        for v in grid:
            self.params_at(v)  # validates ranges

    def params_at(self, value) -> GenParams:
        if self.vary in ("N", "B") and float(value) != int(value):
            raise UsageError(f"{self.vary} must be an integer, got {value}")
        return self.nominal.with_value(self.vary, value)


class SweepRow(NamedTuple):
    value: float
    cm_max: float
    cm_mean: float
    cm_min: float


def run_sweep(spec: SweepSpec) -> list[SweepRow]:
    rows = []
    for v in spec.grid:
        try:
            res = cm_over_trials(spec.params_at(v))
        except BLError as exc:
            raise type(exc)(f"sweep aborted at {spec.vary}={v}: {exc}") from exc
        cms = res.per_trial
        rows.append(SweepRow(v, res.cm_max, float(np.mean(cms)), min(cms)))
        logger.info("%s=%s cm_max=%.4f", spec.vary, v, res.cm_max)
    return rows


def _fmt(v) -> str:
    return f"{v:.17g}"


def table_csv(table: Sequence[SweepRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["param", "cm_max", "cm_mean", "cm_min"])
    for row in table:
        writer.writerow([_fmt(x) for x in row])
    return buf.getvalue()


def table_svg(table: Sequence[SweepRow], vary: str, width: int = 480, height: int = 320) -> str:
    """SVG 1.1 line chart of cm_max against the swept parameter."""
    left, right, top, bottom = 60, 20, 20, 50
    xs = np.array([r.value for r in table], dtype=float)
    ys = np.array([r.cm_max for r in table], dtype=float)
    x0, x1 = xs.min(), xs.max()
    y0, y1 = 0.0, max(ys.max(), 1e-12) * 1.05
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    pw, ph = width - left - right, height - top - bottom

    def sx(x):
        return left + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return top + ph - (y - y0) / (y1 - y0) * ph

    points = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(xs, ys))
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{left}" y1="{top + ph}" x2="{left + pw}" y2="{top + ph}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{top + ph}" stroke="black"/>',
    ]
    for x in xs:
        lines.append(
            f'<text x="{sx(x):.2f}" y="{top + ph + 16}" font-size="10" text-anchor="middle">{x:g}</text>'
        )
    for y in np.linspace(y0, y1, 5):
        lines.append(
            f'<text x="{left - 6}" y="{sy(y) + 3:.2f}" font-size="10" text-anchor="end">{y:.3g}</text>'
        )
    lines += [
        f'<polyline fill="none" stroke="steelblue" stroke-width="2" points="{points}"/>',
        f'<text x="{left + pw / 2}" y="{height - 10}" font-size="12" text-anchor="middle">'
        f"{escape(AXIS_LABELS[vary])}</text>",
        f'<text x="15" y="{top + ph / 2}" font-size="12" text-anchor="middle" '
        f'transform="rotate(-90 15 {top + ph / 2})">CM</text>',
        "</svg>",
    ]
    return "\n".join(lines) + "\n"


def _write(path: str | Path, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def emit_outputs(table: Sequence[SweepRow], spec: SweepSpec) -> list[Path]:
    if not table:
        raise UsageError("nothing to write: empty sweep table")
    written = []
    if spec.out_csv is not None:
        _write(spec.out_csv, table_csv(table))
        written.append(Path(spec.out_csv))
    if spec.out_svg is not None:
        _write(spec.out_svg, table_svg(table, spec.vary))
        written.append(Path(spec.out_svg))
    return written


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    if len(x) < 2 or np.ptp(y) == 0:
        return 0.0
    return float(spearmanr(x, y)[0])


class TrendVerdict(NamedTuple):
    ok: bool
    detail: str


def trend_verdict(vary: str, table: Sequence[SweepRow]) -> TrendVerdict:
    """Check a sweep against the qualitative trend reported for its parameter.

    N, B, C, w_hat: cm_max rises (Spearman >= 0.9).  B additionally grows
    sub-linearly over the grid.  p_hat: falls (Spearman <= -0.9).  D: the
    minimum sits at D in [0.4, 0.6].
    """
    xs = [r.value for r in table]
    ys = [r.cm_max for r in table]
    if vary == "D":
        at = xs[int(np.argmin(ys))]
        return TrendVerdict(0.4 - 1e-12 <= at <= 0.6 + 1e-12, f"argmin D = {at:g}")
    rho = spearman(xs, ys)
    if vary == "p_hat":
        return TrendVerdict(rho <= -0.9, f"spearman = {rho:.3f}")
    ok = rho >= 0.9
    detail = f"spearman = {rho:.3f}"
    if vary == "B" and xs[0] > 0 and ys[0] > 0:
        growth, span = ys[-1] / ys[0], xs[-1] / xs[0]
        ok = ok and growth < span
        detail += f", cm ratio {growth:.3g} vs B ratio {span:.3g}"
    return TrendVerdict(ok, detail)
