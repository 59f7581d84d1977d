"""Experiment pipelines: full-order run, subgrid oracle, kernel estimation, scaling sweep.

Each stage reads and writes files in an output directory so stages can be
run separately from the command line.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plots
from .integrators import Trajectory, integrate
from .io import SnapshotFile, metadata_line, read_csv, save_kernel_table, write_csv
from .kernel import build_kernel_table
from .memory import MemorySeries, compare, decay_profiles, metric_energy, metric_mean, reconstruct_memory, scaling_study
from .models import exact_subgrid, initial_condition

__all__ = [
    "ConfigMismatchError",
    "FomResult",
    "KernelResult",
    "run_fom",
    "load_fom",
    "run_subgrid",
    "estimate",
    "run_kernel",
    "run_scaling",
    "replot",
]

log = logging.getLogger(__name__)

FOM_FILE = "fom.mzk"
RESOLVED_FILE = "resolved.mzk"


class ConfigMismatchError(ValueError):
    pass


def _out(config, out_dir):
    path = Path(out_dir or config.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _split_columns(prefix, values, labels):
    """Column names and real data for possibly complex ``values`` of shape (T, m)."""
    if np.iscomplexobj(values):
        names = [f"{prefix}{k}_re" for k in labels] + [f"{prefix}{k}_im" for k in labels]
        return names, np.hstack([values.real, values.imag])
    return [f"{prefix}{k}" for k in labels], np.asarray(values, dtype=float)


def _join_columns(columns, data, prefix):
    re = [i for i, c in enumerate(columns) if c.startswith(prefix) and c.endswith("_re")]
    if re:
        im = [columns.index(columns[i][:-3] + "_im") for i in re]
        return data[:, re] + 1j * data[:, im]
    idx = [i for i, c in enumerate(columns) if c.startswith(prefix) and c[len(prefix):].isdigit()]
    return data[:, idx]


@dataclass
class FomResult:
    trajectory: Trajectory
    full: SnapshotFile
    resolved: SnapshotFile
    full_path: Path | None = None
    resolved_path: Path | None = None


def _simulate(config):
    system = config.system()
    x0 = initial_condition(system, config.seed)
    return system, integrate(system, x0, config.t_f, config.stepper)


def run_fom(config, out_dir=None, write=True):
    """Integrate the full system and store full and resolved snapshot files."""
    system, traj = _simulate(config)
    log.info("full-order run: %s N=%d m=%d, %d steps, %d RHS evaluations",
             config.model, system.N, system.m, traj.n_steps, traj.counter.rhs_evals)
    full = SnapshotFile(config.model, system.N, system.m, config.dt, config.seed, traj.states, "full")
    resolved = SnapshotFile(config.model, system.N, system.m, config.dt, config.seed,
                            traj.states[:, : system.m], "resolved")
    result = FomResult(traj, full, resolved)
    if write:
        out = _out(config, out_dir)
        result.full_path = out / FOM_FILE
        result.resolved_path = out / RESOLVED_FILE
        full.write(result.full_path)
        resolved.write(result.resolved_path)
    return result


def load_fom(config, path):
    """Read a full-order snapshot file and refuse it if it does not match ``config``."""
    snap = SnapshotFile.read(path)
    expected = {"model": config.model, "N": config.N, "m": config.m, "seed": config.seed,
                "n_steps": config.n_steps, "layout": "full"}
    found = {"model": snap.model, "N": snap.N, "m": snap.m, "seed": snap.seed,
             "n_steps": snap.n_steps, "layout": snap.layout}
    bad = {k: (expected[k], found[k]) for k in expected if expected[k] != found[k]}
    if abs(snap.dt - config.dt) > 1e-15 * config.dt:
        bad["dt"] = (config.dt, snap.dt)
    if bad:
        raise ConfigMismatchError(f"snapshot file {path} does not match config: {bad}")
    return snap


def _trajectory(snap):
    return Trajectory(snap.times, snap.data, snap.dt)


def _labels(m):
    return list(range(1, m + 1))


def run_subgrid(config, fom_path=None, out_dir=None):
    """Exact subgrid series ``w_j(t_n)`` for ``n = 0..N_t``; returns the array."""
    out = _out(config, out_dir)
    snap = load_fom(config, fom_path or out / FOM_FILE)
    system = config.system()
    w = exact_subgrid(system, snap.data)
    meta = metadata_line(config)
    t = snap.times[:, None]
    names, data = _split_columns("w", w, _labels(system.m))
    write_csv(out / "subgrid.csv", meta, ["t"] + names, np.hstack([t, data]))
    if system.spectral:
        u_hat = snap.data[:, : system.m]
        write_csv(out / "subgrid_norm.csv", meta, ["t"] + [f"absw{k}" for k in _labels(system.m)],
                  np.hstack([t, np.abs(w)]))
        write_csv(out / "subgrid_metrics.csv", meta, ["t", "mean_re", "xi_F"],
                  np.column_stack([snap.times, metric_mean(w), metric_energy(w, u_hat)]))
        plots.contour(out / "subgrid_contour.svg", snap.times, np.abs(w))
    return w


@dataclass
class KernelResult:
    table: object
    series: MemorySeries
    report: dict
    profiles: object
    status: str


def estimate(config, traj, workers=1):
    """Kernel table, memory series, error report and decay profiles for one trajectory."""
    system = config.system()
    table = build_kernel_table(system, traj, config.epsilon, config.horizon_policy, config.stepper,
                               workers=workers, row_chunk=config.row_chunk,
                               snapshot_indices=config.snapshot_indices())
    counts = table.lag_counts
    shown = counts if len(counts) <= 10 else counts[:5] + ["..."] + counts[-5:]
    log.info("kernel evaluations: %d in %d rows with lag counts %s; pseudo-ODE steps %d",
             table.total_entries, table.n_t, shown, table.counter.steps)
    M = reconstruct_memory(table, allow_partial=True)
    w = exact_subgrid(system, traj.states[1:])
    series = MemorySeries(M, w, config.dt)
    u_hat = traj.states[1:, : system.m] if system.spectral else None
    report = compare(series, u_hat)
    profiles = decay_profiles(table, config.profile_scaling)
    status = "partial" if table.partial else "ok"
    return KernelResult(table, series, report, profiles, status)


def _cutoff_component(system):
    return system.m - 1


def run_kernel(config, fom_path=None, out_dir=None, workers=1):
    """Estimate the kernel from a stored full-order run and write all diagnostics.

    Runs the full-order stage first when no snapshot file exists yet.
    """
    out = _out(config, out_dir)
    fom_path = Path(fom_path) if fom_path else out / FOM_FILE
    if not fom_path.exists():
        log.info("no full-order file at %s; running it first", fom_path)
        run_fom(config, out)
    snap = load_fom(config, fom_path)
    res = estimate(config, _trajectory(snap), workers)
    write_kernel_outputs(config, res, out)
    return res


def write_kernel_outputs(config, res, out):
    out = Path(out)
    table, series, report, prof = res.table, res.series, res.report, res.profiles
    m = series.M.shape[1]
    labels = _labels(m)
    meta = metadata_line(config, status=res.status)
    save_kernel_table(out / "kernel_table.npz", table)
    t = series.times[:, None]
    m_names, m_data = _split_columns("M", series.M, labels)
    w_names, w_data = _split_columns("w", series.w_exact, labels)
    write_csv(out / "memory.csv", meta, ["t"] + m_names + w_names, np.hstack([t, m_data, w_data]))

    cols = ["t", "mean_M", "mean_w"]
    data = [series.times, report["mean_M"], report["mean_w"]]
    if "xi_M" in report:
        cols += ["xi_M", "xi_w"]
        data += [report["xi_M"], report["xi_w"]]
    write_csv(out / "metrics.csv", meta, cols, np.column_stack(data))

    err = np.column_stack([np.arange(0, m + 1),
                           [report["rel_l2_total"]] + report["rel_l2"],
                           [report["nrms_total"]] + report["nrms"],
                           [report["corr_total"]] + report["corr"]])
    write_csv(out / "errors.csv", meta, ["k", "rel_l2", "nrms", "corr"], err)

    write_csv(out / "decay_profiles.csv", meta, ["lag"] + [f"p{k}" for k in labels],
              np.column_stack([prof.lags, prof.profiles]))
    write_csv(out / "memory_lengths.csv", meta, ["k", "tau", "zero", "non_decaying"],
              np.column_stack([labels, prof.tau, prof.zero, prof.non_decaying]))

    snap_rows = []
    for t_idx, snap in sorted(table.snapshots.items()):
        s = config.dt * np.arange(1, t_idx + 1)
        _, vals = _split_columns("K", snap, labels)
        snap_rows.append(np.column_stack([np.full(t_idx, t_idx * config.dt), s, vals]))
    if snap_rows:
        k_names, _ = _split_columns("K", table.snapshots[min(table.snapshots)], labels)
        write_csv(out / "kernel_snapshots.csv", meta, ["t", "s"] + k_names, np.vstack(snap_rows))

    if table.failures:
        write_csv(out / "failed_rows.csv", meta, ["row", "step"],
                  np.array(sorted(table.failures.items()), dtype=float))
    _kernel_plots(out, config.dt, series, prof, table.snapshots)


def _kernel_plots(out, dt, series, prof, snapshots):
    plots.overlay(out / "overlay.svg", series.times, series.M, series.w_exact)
    plots.kernel_snapshots(out / "kernel_snapshots.svg", dt, snapshots, series.M.shape[1] - 1)
    plots.decay_heatmap(out / "decay_profiles.svg", prof.lags, prof.profiles)
    plots.memory_lengths(out / "memory_lengths.svg", prof.tau)


def run_scaling(config, m_list, out_dir=None, workers=1):
    """Cut-off memory length against ROM size, with a log-log power-law fit."""
    out = _out(config, out_dir)
    m_list = sorted(int(m) for m in m_list)
    taus, flags, profiles = [], [], {}
    for m in m_list:
        cfg_m = config.replace(m=m)
        _, traj = _simulate(cfg_m)
        res = estimate(cfg_m, traj, workers)
        if res.status != "ok":
            raise RuntimeError(f"scaling run m={m} failed rows {sorted(res.table.failures)}")
        j = m - 1
        taus.append(res.profiles.tau[j])
        flags.append(res.profiles.non_decaying[j])
        profiles[m] = res.profiles.profiles[:, j]
        log.info("m=%d: cut-off memory length %.6g%s", m, taus[-1], " (non-decaying)" if flags[-1] else "")
    study = scaling_study(m_list, taus, profiles)
    meta = metadata_line(config, m_list=";".join(map(str, m_list)), slope=repr(study.slope),
                         intercept=repr(study.intercept), residual=repr(study.residual))
    write_csv(out / "scaling.csv", meta, ["m", "tau", "non_decaying"], np.column_stack([m_list, taus, flags]))
    lags = config.dt * np.arange(len(next(iter(profiles.values()))))
    write_csv(out / "scaling_profiles.csv", meta, ["lag"] + [f"m{m}" for m in m_list],
              np.column_stack([lags] + [profiles[m] for m in m_list]))
    plots.scaling_loglog(out / "scaling.svg", m_list, taus, study.slope, study.intercept)
    return study


def replot(out_dir):
    """Regenerate SVGs from the CSVs present in ``out_dir``."""
    out = Path(out_dir)
    made = []
    if (out / "memory.csv").exists():
        _, cols, data = read_csv(out / "memory.csv")
        plots.overlay(out / "overlay.svg", data[:, 0], _join_columns(cols, data, "M"), _join_columns(cols, data, "w"))
        made.append("overlay.svg")
    if (out / "decay_profiles.csv").exists():
        _, cols, data = read_csv(out / "decay_profiles.csv")
        plots.decay_heatmap(out / "decay_profiles.svg", data[:, 0], data[:, 1:])
        made.append("decay_profiles.svg")
    if (out / "memory_lengths.csv").exists():
        _, _, data = read_csv(out / "memory_lengths.csv")
        plots.memory_lengths(out / "memory_lengths.svg", data[:, 1])
        made.append("memory_lengths.svg")
    if (out / "kernel_snapshots.csv").exists():
        _, cols, data = read_csv(out / "kernel_snapshots.csv")
        vals = _join_columns(cols, data, "K")
        dt = data[0, 1]
        snaps = {}
        for t in np.unique(data[:, 0]):
            sel = data[:, 0] == t
            snaps[int(round(t / dt))] = vals[sel]
        plots.kernel_snapshots(out / "kernel_snapshots.svg", dt, snaps, vals.shape[1] - 1)
        made.append("kernel_snapshots.svg")
    if (out / "subgrid_norm.csv").exists():
        _, _, data = read_csv(out / "subgrid_norm.csv")
        plots.contour(out / "subgrid_contour.svg", data[:, 0], data[:, 1:])
        made.append("subgrid_contour.svg")
    if (out / "scaling.csv").exists():
        meta, _, data = read_csv(out / "scaling.csv")
        fields = dict(item.split("=", 1) for item in meta[2:].split() if "=" in item)
        plots.scaling_loglog(out / "scaling.svg", data[:, 0], data[:, 1],
                             float(fields.get("slope", "nan")), float(fields.get("intercept", "nan")))
        made.append("scaling.svg")
    return made
