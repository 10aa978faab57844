"""Render stability/regret CSVs as line plots with shaded 95% bands.

The renderer performs no numerical aggregation: every plotted value is a
cell of an input CSV.  The optional debug dump exposes exactly the
numbers handed to the plotting backend, so figure fidelity can be
checked without touching pixels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

Y_LABELS = {
    "stability": "running average of the state norm",
    "regret": "cumulative regret",
}


class RenderError(ValueError):
    """Bad figure spec or malformed input CSV; message names the file."""


@dataclass
class Curve:
    csv: str
    label: str


@dataclass
class FigureSpec:
    curves: list[Curve]
    y_kind: str = "stability"
    ref_line: float | None = None
    out: str = "figure.png"
    debug_dump: str | None = None
    title: str = ""


@dataclass
class CurveData:
    label: str
    csv: str
    t: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    lo95: np.ndarray
    hi95: np.ndarray
    meta: dict = field(default_factory=dict)


EXPECTED_COLUMNS = ["t", "mean", "se", "lo95", "hi95"]


def read_series_csv(path: str) -> tuple[dict, np.ndarray]:
    """Parse one harness CSV: '# key = value' header block, then columns."""
    p = Path(path)
    if not p.exists():
        raise RenderError(f"{path}: file not found")
    meta: dict[str, str] = {}
    rows: list[list[float]] = []
    header = None
    with open(p, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if line.startswith("# "):
                key, sep, val = line[2:].partition(" = ")
                if not sep:
                    raise RenderError(f"{path}:{lineno}: malformed metadata line")
                meta[key] = val
                continue
            if header is None:
                header = line.split(",")
                if header != EXPECTED_COLUMNS:
                    raise RenderError(
                        f"{path}:{lineno}: expected columns {','.join(EXPECTED_COLUMNS)}, "
                        f"got {line!r}"
                    )
                continue
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != len(EXPECTED_COLUMNS):
                raise RenderError(f"{path}:{lineno}: expected 5 fields, got {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError as err:
                raise RenderError(f"{path}:{lineno}: unparseable number: {err}") from err
    if not meta:
        raise RenderError(f"{path}: missing the metadata header block")
    if "metric" not in meta:
        raise RenderError(f"{path}: metadata lacks the 'metric' key")
    if not rows:
        raise RenderError(f"{path}: no data rows")
    return meta, np.array(rows)


def load_curve(curve: Curve) -> CurveData:
    meta, rows = read_series_csv(curve.csv)
    return CurveData(
        label=curve.label,
        csv=curve.csv,
        t=rows[:, 0],
        mean=rows[:, 1],
        se=rows[:, 2],
        lo95=rows[:, 3],
        hi95=rows[:, 4],
        meta=meta,
    )


def render(spec: FigureSpec) -> list[CurveData]:
    """Write the figure (and optional debug dump); returns the plotted data."""
    if not spec.curves:
        raise RenderError("figure spec has no curves")
    if spec.y_kind not in Y_LABELS:
        raise RenderError(f"unknown y-axis kind {spec.y_kind!r}")
    data = [load_curve(c) for c in spec.curves]
    base_t = data[0].t
    for d in data[1:]:
        if len(d.t) != len(base_t) or not np.array_equal(d.t, base_t):
            raise RenderError(
                f"{d.csv}: time axis differs from {data[0].csv}; "
                "curves must share the horizon"
            )

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for d in data:
        (line,) = ax.plot(d.t, d.mean, label=d.label, linewidth=1.4)
        ax.fill_between(d.t, d.lo95, d.hi95, color=line.get_color(), alpha=0.25, linewidth=0)
    if spec.ref_line is not None:
        ax.axhline(spec.ref_line, color="red", linestyle="--", linewidth=1.0)
    ax.set_xlabel("time step")
    ax.set_ylabel(Y_LABELS[spec.y_kind])
    if spec.title:
        ax.set_title(spec.title)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(spec.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out)
    plt.close(fig)

    if spec.debug_dump:
        dump = {
            "y_kind": spec.y_kind,
            "ref_line": spec.ref_line,
            "out": str(spec.out),
            "curves": [
                {
                    "label": d.label,
                    "csv": d.csv,
                    "t": d.t.tolist(),
                    "mean": d.mean.tolist(),
                    "lo95": d.lo95.tolist(),
                    "hi95": d.hi95.tolist(),
                }
                for d in data
            ],
        }
        dump_path = Path(spec.debug_dump)
        dump_path.parent.mkdir(parents=True, exist_ok=True)
        dump_path.write_text(json.dumps(dump, sort_keys=True), encoding="utf-8")
    return data


def spec_from_json(path: str) -> FigureSpec:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as err:
        raise RenderError(f"{path}: file not found") from err
    except json.JSONDecodeError as err:
        raise RenderError(f"{path}: invalid JSON: {err}") from err
    try:
        curves = [Curve(csv=c["csv"], label=c["label"]) for c in raw["curves"]]
    except (KeyError, TypeError) as err:
        raise RenderError(f"{path}: curves need 'csv' and 'label' fields") from err
    ref = raw.get("ref")
    return FigureSpec(
        curves=curves,
        y_kind=raw.get("kind", "stability"),
        ref_line=float(ref) if ref is not None else None,
        out=raw.get("out", "figure.png"),
        debug_dump=raw.get("debug_dump"),
        title=raw.get("title", ""),
    )
