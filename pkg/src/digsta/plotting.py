"""Deterministic SVG figures from the experiment CSV files."""
from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

# kind -> (x column, [(y column, legend label)], x label, y label)
PLOT_KINDS = {
    "fidelity-vs-step": ("m", [("F", "fidelity")], "step m", "fidelity $F_m$"),
    "energy-vs-step": ("m", [("E", "energy")], "step m", "energy $E_m$"),
    "energy-vs-R": ("R", [("eps0", r"$\varepsilon_0$"), ("eps1", r"$\varepsilon_1$")], "R (Å)", "energy (hartree)"),
    "bands": ("kx_a", [("eps_valence", "valence"), ("eps_conduction", "conduction")], "$k_x a$", "energy (eV)"),
    "convergence": ("M", [("F_final", "final fidelity")], "steps M", "fidelity $F_M$"),
}

_RC = {
    "svg.hashsalt": "digsta",
    "svg.fonttype": "path",
    "figure.figsize": (5.0, 3.5),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class PlotInputError(ValueError):
    pass


def read_columns(path: str | Path) -> dict[str, list[float]]:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.DictReader(line for line in io.StringIO(text) if not line.startswith("#"))
    if reader.fieldnames is None:
        raise PlotInputError(f"{path}: empty CSV")
    cols: dict[str, list[float]] = {name: [] for name in reader.fieldnames}
    for row in reader:
        for name in reader.fieldnames:
            try:
                cols[name].append(float(row[name]))
            except (TypeError, ValueError):
                cols[name].append(float("nan"))
    return cols


def emit_plot(csv_path: str | Path, kind: str, svg_path: str | Path | None = None, title: str | None = None) -> Path:
    """Render ``csv_path`` as an SVG line plot next to it (or at ``svg_path``).

    Each series is a single line artist with gid ``series-<column>``.  Output
    bytes depend only on the CSV contents.
    """
    if kind not in PLOT_KINDS:
        raise PlotInputError(f"unknown plot kind {kind!r}; choose from {sorted(PLOT_KINDS)}")
    xcol, series, xlabel, ylabel = PLOT_KINDS[kind]
    cols = read_columns(csv_path)
    missing = [c for c in [xcol] + [s for s, _ in series] if c not in cols]
    if missing:
        raise PlotInputError(f"{csv_path}: missing column(s) {', '.join(missing)} for plot kind {kind}")
    out = Path(svg_path) if svg_path else Path(csv_path).with_suffix(".svg")
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        for column, label in series:
            (line,) = ax.plot(cols[xcol], cols[column], marker="o", markersize=3, linewidth=1.2, label=label)
            line.set_gid(f"series-{column}")
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        if title:
            ax.set_title(title)
        ax.legend(loc="best", frameon=False)
        fig.tight_layout()
        fig.savefig(out, format="svg", metadata={"Date": None, "Creator": None})
        plt.close(fig)
    return out
