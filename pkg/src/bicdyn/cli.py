"""Command-line scenario runner.

    bicdyn <command> --config <file> [--out <dir>]

Exit status is 0 on success, 1 for an invalid scenario file and 2 when a
computation fails (band-edge singularity, unsettled transient, Fock
truncation and similar).
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .born_markov import bm_coefficients, bm_green_functions, bm_photon_number
from .bound_states import completeness_check, continuum_weight, find_bound_states, root_residual
from .greens import (
    SteadyStateError,
    ThermalBath,
    photon_number,
    solve_u,
    solve_v,
    steady_state_time,
    u_reconstruct,
    v_steady,
    window_max,
)
from .io import COMMANDS, ConfigError, load_config, write_csv
from .lattice import half_size_for, simulate, snapshot_rows
from .master_eq import FockDensityMatrix, coefficients, default_dim, evolve_density_matrix, fidelity
from .plotting import PANELS, emit_plot_script, render
from .spectral import UEV_OMEGA0, UEV_XI0, CavityModel, ReservoirModel, reduced_spectral_density, _reduced_dos

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


@dataclass
class Scenario:
    command: str
    units: str
    scale: float  # energy unit of the file per internal unit (xi0)
    model: ReservoirModel
    cavity: CavityModel
    bath: ThermalBath
    dt: float
    t_max: float
    order: int
    echo: dict
    opts: dict = field(default_factory=dict)


def _bath(cfg, omega_c, scale, required=False):
    if cfg.has("temperature") and cfg.has("temperature_ratio"):
        cfg._fail("temperature_ratio", "give either temperature or temperature_ratio, not both")
    if cfg.has("temperature"):
        return ThermalBath(cfg.get_float("temperature", lo=0, lo_open=True) / scale)
    if cfg.has("temperature_ratio") or required:
        return ThermalBath(cfg.get_float("temperature_ratio", 2.0, lo=0, lo_open=True) * omega_c)
    return ThermalBath.zero()


def build_scenario(command: str, cfg) -> Scenario:
    """Validate every field the command needs before any computation."""
    units = cfg.get_choice("units", ("internal", "ueV"), "internal")
    if units == "ueV":
        xi0 = cfg.get_float("xi0", UEV_XI0, lo=0, lo_open=True)
        omega0 = cfg.get_float("omega0", UEV_OMEGA0)
    else:
        xi0 = cfg.get_float("xi0", 1.0, lo=0, lo_open=True)
        omega0 = cfg.get_float("omega0", UEV_OMEGA0 / UEV_XI0 * xi0)
    eta = cfg.get_float("eta", 1.0, lo=0)
    xi00 = cfg.get_float("xi00", 0.0, lo=0)
    model = ReservoirModel(omega0 / xi0, 1.0, eta, xi00 / xi0)
    if cfg.has("omega_c") and cfg.has("detuning"):
        cfg._fail("omega_c", "give either detuning or omega_c, not both")
    if cfg.has("omega_c"):
        cavity = CavityModel(cfg.get_float("omega_c") / xi0)
    else:
        cavity = CavityModel.from_detuning(cfg.get_float("detuning", 0.0), model)
    if cavity.omega_c <= 0:
        cfg._fail("detuning", "cavity frequency must be positive")
    needs_bath = command in ("thermal", "compare-bm")
    bath = _bath(cfg, cavity.omega_c, xi0, required=needs_bath)
    dt = cfg.get_float("dt", 0.01, lo=0, lo_open=True)
    t_max = cfg.get_float("t_max", 100.0, lo=dt)
    order = cfg.get_int("order", 3, lo=1)
    if order > 3:
        cfg._fail("order", "must be 1, 2 or 3")
    echo = {
        "command": command, "units": units, "omega0": omega0, "xi0": xi0, "eta": eta, "xi00": xi00,
        "detuning": cavity.detuning(model), "temperature": bath.temperature * xi0,
        "dt": dt, "t_max": t_max, "order": order,
    }
    opts = _command_options(command, cfg, model)
    echo.update({k: v for k, v in opts.items() if isinstance(v, (int, float, str)) and not isinstance(v, bool)})
    unknown = cfg.unused()
    if unknown:
        cfg._fail(unknown[0], "unknown field for command " + command)
    return Scenario(command, units, xi0, model, cavity, bath, dt, t_max, order, echo, opts)


def _command_options(command, cfg, model):
    o = {}
    if command == "spectrum":
        o["points"] = cfg.get_int("points", 801, lo=3)
    elif command == "propagate":
        o["reconstruct"] = cfg.get_bool("reconstruct", True)
        o["record_every"] = cfg.get_int("record_every", 1, lo=1)
    elif command == "thermal":
        o["n0"] = cfg.get_float("n0", 10.0, lo=0)
        o["record_every"] = cfg.get_int("record_every", 1, lo=1)
        o["window"] = cfg.get_float("window", 100.0, lo=0)
    elif command == "density-matrix":
        o["initial_state"] = cfg.get_list("initial_state", [1, 0, 1], float)
        o["dim"] = cfg.get_int("dim", default_dim(len(o["initial_state"])), lo=len(o["initial_state"]))
        o["samples"] = cfg.get_int("samples", 21, lo=2)
        o["frame"] = cfg.get_choice("frame", ("rotating", "lab"), "rotating")
    elif command == "lattice":
        t_max = cfg.get_float("t_max", 100.0)
        o["half_size"] = cfg.get_int("half_size", half_size_for(t_max, model), lo=2)
        o["sites"] = cfg.get_sites("sites", [(0, 0), (1, 0), (1, 1), (2, 0)])
        for x, y in o["sites"]:
            if max(abs(x), abs(y)) > o["half_size"]:
                cfg._fail("sites", f"site {x}:{y} lies outside the array")
        o["record_every"] = cfg.get_int("record_every", 10, lo=1)
        o["snapshot_every"] = cfg.get_int("snapshot_every", 0, lo=0)
        o["snapshot_radius"] = cfg.get_int("snapshot_radius", 10, lo=0)
        o["compare"] = cfg.get_bool("compare", True)
        if cfg.get_float("dt", 0.01) > 0.05:
            cfg._fail("dt", "lattice RK4 needs dt <= 0.05")
    elif command == "sweep":
        o["kind"] = cfg.get_choice("sweep", ("bound-states", "steady"), "bound-states")
        o["eta_values"] = cfg.get_list("eta_values", list(np.round(np.linspace(0.1, 2.4, 24), 10)))
        if min(o["eta_values"]) < 0:
            cfg._fail("eta_values", "eta must be >= 0")
        o["detunings"] = cfg.get_list("detunings", [0.0, 0.5, 5.0])
        o["n0"] = cfg.get_float("n0", 10.0, lo=0)
        o["window"] = cfg.get_float("window", 100.0, lo=0)
        o["workers"] = cfg.get_int("workers", 1, lo=1)
        if o["kind"] == "steady":
            o["temperature_ratio"] = cfg.get_float("temperature_ratio", 2.0, lo=0, lo_open=True)
    elif command == "compare-bm":
        o["n0"] = cfg.get_float("n0", 10.0, lo=0)
        o["record_every"] = cfg.get_int("record_every", 10, lo=1)
    return o


# --- commands -----------------------------------------------------------------

def _out(sc, name, columns, rows, outdir, written):
    path = write_csv(outdir / f"{name}.csv", columns, rows, sc.echo)
    written.append(path)
    return path


def run_spectrum(sc, outdir, written):
    x = np.linspace(-1, 1, sc.opts["points"])
    with np.errstate(divide="ignore"):
        rho = _reduced_dos(x) / 4  # per xi0
    J = 4 * reduced_spectral_density(x, sc.model)
    rows = np.column_stack([x, sc.model.absolute(x) * sc.scale, rho / sc.scale, J * sc.scale])
    _out(sc, "spectrum", ["x", "omega", "rho", "J"], rows, outdir, written)


def run_bound_states(sc, outdir, written):
    states = find_bound_states(sc.model, sc.cavity)
    rows = [[s.kind.value, s.reduced, s.omega_b * sc.scale, s.residue_z, root_residual(s, sc.model, sc.cavity) * sc.scale]
            for s in states]
    _out(sc, "bound_states", ["kind", "delta_omega", "omega", "residue", "residual"], rows, outdir, written)
    w = continuum_weight(sc.model, sc.cavity)
    summary = [["continuum_weight", w], ["completeness", sum(s.residue_z for s in states) + w],
               ["count", len(states)]]
    write_csv(outdir / "bound_states_summary.csv", ["quantity", "value"], summary, sc.echo)


def run_propagate(sc, outdir, written):
    traj = solve_u(sc.model, sc.cavity, sc.dt, sc.t_max, sc.order)
    co = coefficients(traj)
    k = slice(None, None, sc.opts["record_every"])
    cols = [traj.t_grid[k], traj.u_values.real[k], traj.u_values.imag[k], np.abs(traj.u_values)[k],
            co.omega_c_ren[k] * sc.scale, co.kappa[k] * sc.scale]
    names = ["t", "re_u", "im_u", "abs_u", "omega_c_ren", "kappa"]
    if sc.opts["reconstruct"]:
        states = find_bound_states(sc.model, sc.cavity)
        names.append("abs_u_rec")
        cols.append(np.abs(u_reconstruct(sc.model, sc.cavity, states, traj.t_grid[k])))
    _out(sc, "propagate", names, np.column_stack(cols), outdir, written)
    if traj.accuracy_warning:
        print(f"warning: dt={sc.dt} exceeds the recommended 0.02/xi0", file=sys.stderr)


def run_thermal(sc, outdir, written):
    traj = solve_u(sc.model, sc.cavity, sc.dt, sc.t_max, sc.order)
    traj = solve_v(sc.model, sc.cavity, sc.bath, traj)
    n = photon_number(sc.opts["n0"], traj)
    co = coefficients(traj)
    k = slice(None, None, sc.opts["record_every"])
    rows = np.column_stack([traj.t_grid[k], np.abs(traj.u_values)[k], traj.v_values[k], n[k],
                            co.kappa_tilde[k] * sc.scale])
    _out(sc, "thermal", ["t", "abs_u", "v", "n", "kappa_tilde"], rows, outdir, written)
    states = find_bound_states(sc.model, sc.cavity)
    t_s = steady_state_time(traj, bound_states=states)
    i = int(round(t_s / traj.dt))
    summary = [
        ["t_s", t_s], ["v_ts", traj.v_values[i]], ["n_ts", n[i]],
        ["v_steady", v_steady(sc.model, sc.cavity, sc.bath, states, t_s)],
        ["nbar_c", 1 / np.expm1(sc.cavity.omega_c / sc.bath.temperature)],
    ]
    w = sc.opts["window"]
    if t_s + w <= traj.t_grid[-1] + 1e-9:
        summary += [["u_s_max", window_max(np.abs(traj.u_values), traj.t_grid, t_s, w)],
                    ["v_s_max", window_max(traj.v_values, traj.t_grid, t_s, w)],
                    ["n_s_max", window_max(n, traj.t_grid, t_s, w)]]
    write_csv(outdir / "thermal_summary.csv", ["quantity", "value"], summary, sc.echo)


def run_density_matrix(sc, outdir, written):
    traj = solve_u(sc.model, sc.cavity, sc.dt, sc.t_max, sc.order)
    if not sc.bath.zero_temperature:
        traj = solve_v(sc.model, sc.cavity, sc.bath, traj)
    rho0 = FockDensityMatrix.from_state(sc.opts["initial_state"], sc.opts["dim"])
    u = traj.envelope if sc.opts["frame"] == "rotating" else traj.u_values
    v = traj.v_values if traj.v_values is not None else np.zeros(traj.t_grid.size)
    idx = np.unique(np.round(np.linspace(0, traj.t_grid.size - 1, sc.opts["samples"])).astype(int))
    npop = min(sc.opts["dim"], 6)
    rows = []
    for i in idx:
        rho = evolve_density_matrix(rho0, u[i], v[i])
        pops = rho.elements.diagonal().real[:npop]
        rows.append([traj.t_grid[i], fidelity(rho, rho0), np.trace(rho.elements).real, rho.leakage, *pops])
    cols = ["t", "fidelity", "trace", "leakage"] + [f"p{j}" for j in range(npop)]
    _out(sc, "density_matrix", cols, rows, outdir, written)


def run_lattice(sc, outdir, written):
    o = sc.opts
    run = simulate(sc.model, sc.cavity, o["half_size"], sc.dt, sc.t_max, sites=o["sites"],
                   snapshot_every=o["snapshot_every"], record_every=o["record_every"])
    cols = [run.t, np.abs(run.c_a), run.grid_population, run.norm]
    names = ["t", "abs_c_a", "grid_population", "norm"]
    if o["compare"]:
        traj = solve_u(sc.model, sc.cavity, sc.dt, sc.t_max, sc.order)
        u = np.interp(run.t, traj.t_grid, traj.u_values.real) + 1j * np.interp(run.t, traj.t_grid, traj.u_values.imag)
        cols += [np.abs(u), np.abs(run.c_a - u)]
        names += ["abs_u", "deviation"]
    for (x, y), series in zip(run.sites, run.site_series(run.sites)):
        cols.append(series)
        names.append(f"site_{x}_{y}".replace("-", "m"))
    _out(sc, "lattice", names, np.column_stack(cols), outdir, written)
    if run.t[-1] > run.reflection_horizon:
        print(f"note: t_max={sc.t_max} exceeds the reflection horizon {run.reflection_horizon:g}", file=sys.stderr)
    if o["snapshot_every"]:
        r, N = o["snapshot_radius"], o["half_size"]
        rows = []
        for t, grid in run.snapshots:
            crop = grid[N - min(r, N):N + min(r, N) + 1, N - min(r, N):N + min(r, N) + 1]
            rows += [[t, *row] for row in snapshot_rows(crop)]
        write_csv(outdir / "lattice_snapshots.csv", ["t", "x", "y", "re", "im", "abs"], rows, sc.echo)


def _sweep_bound_point(args):
    eta, det, xi00, omega0 = args
    model = ReservoirModel(omega0, 1.0, eta, xi00)
    cavity = CavityModel.from_detuning(det, model)
    return [[det, eta, s.kind.value, s.reduced, s.residue_z] for s in find_bound_states(model, cavity)]


def _sweep_steady_point(args):
    eta, det, xi00, omega0, ratio, n0, dt, t_max, order, window = args
    model = ReservoirModel(omega0, 1.0, eta, xi00)
    cavity = CavityModel.from_detuning(det, model)
    bath = ThermalBath(ratio * cavity.omega_c)
    traj = solve_v(model, cavity, bath, solve_u(model, cavity, dt, t_max, order))
    t_s = steady_state_time(traj, bound_states=find_bound_states(model, cavity))
    n = photon_number(n0, traj)
    return [[det, eta, t_s, window_max(np.abs(traj.u_values), traj.t_grid, t_s, window),
             window_max(traj.v_values, traj.t_grid, t_s, window), window_max(n, traj.t_grid, t_s, window)]]


def run_sweep(sc, outdir, written):
    o, m = sc.opts, sc.model
    points = [(eta, det) for det in o["detunings"] for eta in o["eta_values"]]
    if o["kind"] == "bound-states":
        jobs = [(eta, det, m.xi00, m.omega0) for eta, det in points]
        fn, cols = _sweep_bound_point, ["detuning", "eta", "kind", "delta_omega", "residue"]
    else:
        jobs = [(eta, det, m.xi00, m.omega0, o["temperature_ratio"], o["n0"], sc.dt, sc.t_max, sc.order, o["window"])
                for eta, det in points]
        fn, cols = _sweep_steady_point, ["detuning", "eta", "t_s", "u_s_max", "v_s_max", "n_s_max"]
    if o["workers"] > 1:
        with ProcessPoolExecutor(o["workers"]) as pool:
            results = list(pool.map(fn, jobs))
    else:
        results = [fn(j) for j in jobs]
    rows = [row for res in results for row in res]
    _out(sc, "sweep" if o["kind"] == "bound-states" else "sweep_steady", cols, rows, outdir, written)


def run_compare_bm(sc, outdir, written):
    traj = solve_u(sc.model, sc.cavity, sc.dt, sc.t_max, sc.order)
    traj = solve_v(sc.model, sc.cavity, sc.bath, traj)
    bm = bm_coefficients(sc.model, sc.cavity, sc.bath)
    k = slice(None, None, sc.opts["record_every"])
    t = traj.t_grid[k]
    bmt = bm_green_functions(bm, t)
    n0 = sc.opts["n0"]
    rows = np.column_stack([t, np.abs(traj.u_values[k]), np.abs(bmt.u_values), traj.v_values[k], bmt.v_values,
                            photon_number(n0, traj)[k], bm_photon_number(bm, n0, t)])
    _out(sc, "compare_bm", ["t", "abs_u", "abs_u_bm", "v", "v_bm", "n", "n_bm"], rows, outdir, written)
    summary = [["kappa", bm.kappa * sc.scale], ["omega_c_ren", bm.omega_c_ren * sc.scale],
               ["kappa_tilde", bm.kappa_tilde * sc.scale], ["nbar_c", bm.nbar_c]]
    write_csv(outdir / "compare_bm_summary.csv", ["quantity", "value"], summary, sc.echo)


RUNNERS = {
    "spectrum": run_spectrum,
    "bound-states": run_bound_states,
    "propagate": run_propagate,
    "thermal": run_thermal,
    "density-matrix": run_density_matrix,
    "lattice": run_lattice,
    "sweep": run_sweep,
    "compare-bm": run_compare_bm,
}


def run(sc: Scenario, outdir, plots: bool = True) -> list[Path]:
    """Run a validated scenario; returns the dataset paths written."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    try:
        RUNNERS[sc.command](sc, outdir, written)
    finally:
        if plots and written:
            panels = {}
            for path in written:
                key = "sweep-steady" if path.stem == "sweep_steady" else sc.command
                render(key, path)
                x = PANELS[key][0][0]
                panels[str(path)] = (x, [y for px, ys in PANELS[key] if px == x for y in ys])
            emit_plot_script(written, outdir / "plot.gp", panels)
    return written


class _Parser(argparse.ArgumentParser):
    # usage errors are configuration errors; argparse would exit with 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    parser = _Parser(prog="bicdyn", description=__doc__.split("\n\n")[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", required=True, help="scenario file (key = value lines)")
    parser.add_argument("--out", default=".", help="output directory (default: current)")
    parser.add_argument("--no-plots", action="store_true", help="skip PNG figures and the gnuplot script")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        sc = build_scenario(args.command, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        paths = run(sc, args.out, plots=not args.no_plots)
    except (SteadyStateError, ValueError, ArithmeticError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"numeric failure in {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
