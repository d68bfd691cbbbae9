"""Figures for the CLI datasets (matplotlib) and a gnuplot script emitter."""

from __future__ import annotations

from math import sqrt
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .io import Dataset, read_csv  # noqa: E402

golden_mean = (sqrt(5.0) - 1.0) / 2.0
fig_width = 6.8
params = {
    "axes.labelsize": 10,
    "axes.prop_cycle": matplotlib.cycler(color=["#08589e", "#d7301f", "#2b8cbe", "#7bccc4", "#fc8d59", "#4d4d4d"]),
    "font.size": 9,
    "font.family": "serif",
    "mathtext.fontset": "stix",
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "lines.linewidth": 1.0,
    "lines.markersize": 3,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}

LABELS = {
    "x": r"$\Delta\omega$",
    "rho": r"$\varrho(\omega)$",
    "J": r"$J(\omega)$",
    "t": r"$t\,\xi_0$",
    "abs_u": r"$|u(t)|$",
    "abs_u_rec": r"$|u(t)|$ (poles + cut)",
    "abs_u_bm": r"$|u_{BM}(t)|$",
    "v": r"$v(t)$",
    "v_bm": r"$v_{BM}(t)$",
    "n": r"$n(t)$",
    "n_bm": r"$n_{BM}(t)$",
    "kappa": r"$\kappa(t)$",
    "fidelity": "fidelity",
    "abs_c_a": r"$|c_a(t)|$",
    "grid_population": r"$\sum_n |c_n|^2$",
    "eta": r"$\eta$",
    "delta_omega": r"$\Delta\Omega_j$",
    "residue": r"$Z_j$",
    "u_s_max": r"$u_s^m$",
    "v_s_max": r"$v_s^m$",
    "n_s_max": r"$n_s^m$",
}

# command -> list of panels, each (x column, y columns)
PANELS = {
    "spectrum": [("x", ["rho"]), ("x", ["J"])],
    "propagate": [("t", ["abs_u", "abs_u_rec"]), ("t", ["kappa"])],
    "thermal": [("t", ["v"]), ("t", ["n"])],
    "density-matrix": [("t", ["fidelity"]), ("t", ["p0", "p1", "p2"])],
    "lattice": [("t", ["abs_c_a", "abs_u"]), ("t", ["grid_population"])],
    "compare-bm": [("t", ["abs_u", "abs_u_bm"]), ("t", ["n", "n_bm"])],
    "bound-states": [("delta_omega", ["residue"])],
    "sweep": [("eta", ["delta_omega"]), ("eta", ["residue"])],
    "sweep-steady": [("eta", ["u_s_max"]), ("eta", ["v_s_max"]), ("eta", ["n_s_max"])],
}


def _label(name):
    return LABELS.get(name, name.replace("_", " "))


def _draw_panel(ax, data: Dataset, x, ys, group=None):
    xv = data.column(x)
    for y in ys:
        if y not in data.columns:
            continue
        yv = data.column(y).astype(float)
        if group and group in data.columns:
            keys = data.column(group)
            for key in dict.fromkeys(keys.tolist()):
                sel = keys == key
                ax.plot(xv[sel], yv[sel], "o", label=f"{group}={key}")
        elif xv.dtype.kind not in "if":
            ax.plot(np.arange(len(yv)), yv, "o", label=_label(y))
        else:
            style = "o" if x in ("delta_omega", "eta") and len(xv) < 200 else "-"
            ax.plot(xv, yv, style, label=_label(y))
    ax.set_xlabel(_label(x))
    ax.set_ylabel(_label(ys[0]))
    if len(ax.get_lines()) > 1:
        ax.legend()


def render(command: str, csv_path, png_path=None) -> Path:
    """Render the dataset for ``command`` to a PNG next to the CSV."""
    data = read_csv(csv_path)
    panels = PANELS[command]
    png_path = Path(png_path) if png_path else Path(csv_path).with_suffix(".png")
    group = "kind" if command in ("sweep", "bound-states") else None
    if command == "sweep" and "detuning" in data.columns and len(set(data.column("detuning").tolist())) > 1:
        group = "detuning"
    with plt.rc_context(params):
        fig, axes = plt.subplots(1, len(panels), figsize=(fig_width, fig_width * golden_mean / max(1, len(panels) - 1)),
                                 squeeze=False)
        for ax, (x, ys) in zip(axes[0], panels):
            _draw_panel(ax, data, x, ys, group)
        fig.tight_layout()
        fig.savefig(png_path)
        plt.close(fig)
    return png_path


def emit_plot_script(dataset_paths, script_path, panels=None) -> Path:
    """Write a gnuplot script that renders each CSV to a PNG.

    ``panels`` maps a dataset path to ``(x, [y, ...])``; by default the first
    column is plotted against every other numeric column.

    Raises
    ------
    ValueError
        if ``dataset_paths`` is empty.
    FileNotFoundError
        listing every dataset that does not exist.
    """
    paths = [Path(p) for p in dataset_paths]
    if not paths:
        raise ValueError("no datasets given")
    missing = [str(p) for p in paths if not p.exists()]
    if missing:
        raise FileNotFoundError("missing datasets: " + ", ".join(missing))
    panels = panels or {}
    lines = [
        "# render each dataset to a PNG: gnuplot <this file>",
        "set datafile separator ','",
        "set datafile commentschars '#'",
        "set key autotitle columnhead",
        "set terminal pngcairo size 900,560",
        "",
    ]
    for p in paths:
        data = read_csv(p)
        x, ys = panels.get(str(p), (data.columns[0], data.columns[1:]))
        numeric = [y for y in ys if y in data.columns and data.rows
                   and isinstance(data.rows[0][data.columns.index(y)], (int, float))]
        lines.append(f"set output '{p.with_suffix('.gp.png').name}'")
        lines.append(f"set xlabel '{x}'")
        plots = [f"'{p.name}' using \"{x}\":\"{y}\" with lines title '{y}'" for y in numeric]
        lines.append("plot " + ", \\\n     ".join(plots))
        lines.append("")
    script_path = Path(script_path)
    script_path.write_text("\n".join(lines))
    return script_path
