"""Log-log convergence figures from the solver's result CSVs.

Reads only the documented CSV schema (`data` rows of the columns listed
in KNOWN_COLUMNS); rate rows are ignored.  One curve per requested
quantity, one dotted reference line per requested slope, anchored at
the first data point of the first curve.  Output is deterministic SVG.
"""

import csv
import math
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

__all__ = ["PlotSpec", "read_rows", "collect_series", "render", "PlotgenError"]

KNOWN_COLUMNS = [
    "row", "level", "h", "nu",
    "err_u_L2_final", "err_u_H1_sum", "err_div_sum",
    "err_p_fluct_sum", "err_u_fluct_sum",
    "composite", "p_primitive", "picard_iters_max",
]

X_AXES = {"h": ("h", "mesh width h"), "nu_inv": ("nu", "1/nu")}


class PlotgenError(ValueError):
    pass


@dataclass(frozen=True)
class PlotSpec:
    csv_paths: tuple
    columns: tuple
    x_axis: str = "h"
    slopes: tuple = ()
    out_path: str = "convergence.svg"
    title: str = None

    def __post_init__(self):
        if isinstance(self.csv_paths, str):
            object.__setattr__(self, "csv_paths", (self.csv_paths,))
        else:
            object.__setattr__(self, "csv_paths", tuple(self.csv_paths))
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "slopes", tuple(self.slopes))
        if not self.columns:
            raise PlotgenError("no quantity columns requested")
        if self.x_axis not in X_AXES:
            raise PlotgenError(f"x_axis must be one of {sorted(X_AXES)}")
        unknown = [c for c in self.columns if c not in KNOWN_COLUMNS[4:11]]
        if unknown:
            raise PlotgenError(f"unknown column(s): {', '.join(unknown)}")


def read_rows(path):
    """Data rows of one CSV, with numeric fields parsed."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in KNOWN_COLUMNS if c not in header]
        if missing:
            raise PlotgenError(f"{path}: missing column(s): {', '.join(missing)}")
        rows = []
        for raw in reader:
            if raw["row"] != "data":
                continue
            parsed = {}
            for key in KNOWN_COLUMNS[1:]:
                value = raw[key]
                parsed[key] = float(value) if value not in ("", None) else None
            rows.append(parsed)
    if not rows:
        raise PlotgenError(f"{path}: no data rows")
    return rows


def collect_series(spec):
    """(x values, {label: y values}) for every file and column."""
    x_key, _ = X_AXES[spec.x_axis]
    series = {}
    xs_out = None
    for path in spec.csv_paths:
        rows = read_rows(path)
        xs = [r[x_key] for r in rows]
        if spec.x_axis == "nu_inv":
            xs = [1.0 / v for v in xs]
        for col in spec.columns:
            ys = [r[col] for r in rows]
            label = col if len(spec.csv_paths) == 1 else f"{path}:{col}"
            series[label] = (xs, ys)
        xs_out = xs
    return xs_out, series


def fitted_slope(xs, ys):
    """Least-squares slope of log(y) vs log(x)."""
    lx = np.log(np.asarray(xs, dtype=float))
    ly = np.log(np.asarray(ys, dtype=float))
    return float(np.polyfit(lx, ly, 1)[0])


def render(spec):
    """Write the figure; returns the plotted series for inspection."""
    _, series = collect_series(spec)
    plt.rcParams["svg.hashsalt"] = "plotgen"
    fig, ax = plt.subplots(figsize=(5.0, 4.0))
    for label, (xs, ys) in sorted(series.items()):
        ax.loglog(xs, ys, marker="o", label=label)
    # reference slopes anchored at the first point of the first curve
    if spec.slopes and series:
        first = sorted(series)[0]
        xs0, ys0 = series[first]
        x = np.array([min(xs0), max(xs0)], dtype=float)
        for slope in spec.slopes:
            y = ys0[0] * (x / xs0[0]) ** slope
            ax.loglog(x, y, linestyle=":", color="black",
                      label=f"slope {slope:g}")
    ax.set_xlabel(X_AXES[spec.x_axis][1])
    ax.set_ylabel("error")
    if spec.title:
        ax.set_title(spec.title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(spec.out_path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return series
