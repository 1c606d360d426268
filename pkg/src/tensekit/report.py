"""CSV writers and figure rendering for the command line front end.

CSV numbers are written with 17 significant digits so that values
round-trip through IEEE-754 exactly and repeated runs produce identical
bytes.  Figures are rendered with the Agg backend next to the tables.
"""

from __future__ import annotations

import csv

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = [
    "write_trajectory_csv",
    "write_energy_csv",
    "write_slack_events_csv",
    "write_frequencies_csv",
    "write_modes_csv",
    "write_restlengths_csv",
    "write_sweep_csv",
    "plot_trajectory",
    "plot_energy",
    "plot_frequencies",
    "plot_sweep",
    "plot_restlengths",
]


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def _write_rows(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([c if isinstance(c, str) else _fmt(c)
                             for c in row])


def write_trajectory_csv(path, traj, topo, forces):
    header = ["t"]
    header += [f"q{i}" for i in range(topo.n)]
    header += [f"v{i}" for i in range(topo.n_free)]
    for cable in forces.cables:
        header += [f"{cable.name}_length", f"{cable.name}_tension",
                   f"{cable.name}_slack"]

    def rows():
        for k in range(len(traj.ts)):
            row = [traj.ts[k], *traj.qs[k], *traj.vs[k]]
            for j in range(forces.n_cables):
                row += [traj.cable_lengths[k, j], traj.cable_tensions[k, j],
                        traj.cable_slack[k, j]]
            yield row

    _write_rows(path, header, rows())


def write_energy_csv(path, traj):
    _write_rows(path, ["t", "kinetic", "potential", "total"],
                ((traj.ts[k], traj.kinetic[k], traj.potential[k],
                  traj.kinetic[k] + traj.potential[k])
                 for k in range(len(traj.ts))))


def write_slack_events_csv(path, traj):
    _write_rows(path, ["t", "cable", "event"],
                ((t, name, kind) for t, name, kind in traj.slack_events))


def write_frequencies_csv(path, modes):
    _write_rows(path, ["mode", "omega2", "frequency_hz", "stable"],
                ((r, modes.omega2[r], modes.frequencies_hz[r],
                  modes.stable[r]) for r in range(modes.omega2.size)))


def write_modes_csv(path, modes):
    n = modes.shapes_natural.shape[0]
    header = ["mode", "frequency_hz"] + [f"q{i}" for i in range(n)]
    _write_rows(path, header,
                ((r, modes.frequencies_hz[r], *modes.shapes_natural[:, r])
                 for r in range(modes.omega2.size)))


def write_restlengths_csv(path, forces, static_state):
    _write_rows(path, ["cable", "length_m", "rest_length_m",
                       "force_density", "tension_n"],
                ((c.name, static_state.lengths[j], static_state.mu[j],
                  static_state.gamma[j], static_state.tensions[j])
                 for j, c in enumerate(forces.cables)))


def write_sweep_csv(path, rows, n_modes):
    header = ["alpha", "beta"] + [f"f{r+1}_hz" for r in range(n_modes)] \
        + ["stable", "note"]
    _write_rows(path, header, rows)


# ---- figures ---------------------------------------------------------------

def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def plot_trajectory(path, traj, probes, dim):
    """Probe point coordinates over time (one panel per axis)."""
    if not probes:
        probes = []
    fig, axes = plt.subplots(dim, 1, sharex=True,
                             figsize=(7.0, 2.2 * dim))
    axes = np.atleast_1d(axes)
    labels = "xyz"[:dim]
    for label, matrix in probes:
        track = traj.qs @ matrix.T
        for ax_i in range(dim):
            axes[ax_i].plot(traj.ts, track[:, ax_i], label=label, lw=0.9)
    for ax_i in range(dim):
        axes[ax_i].set_ylabel(f"{labels[ax_i]} [m]")
        axes[ax_i].grid(alpha=0.3)
    if probes:
        axes[0].legend(loc="upper right", fontsize=8)
    axes[-1].set_xlabel("t [s]")
    _save(fig, path)


def plot_energy(path, traj):
    fig, ax = plt.subplots(figsize=(7.0, 3.0))
    ax.plot(traj.ts, traj.kinetic, label="kinetic", lw=0.8)
    ax.plot(traj.ts, traj.potential, label="potential", lw=0.8)
    ax.plot(traj.ts, traj.energy, label="total", lw=1.1, color="k")
    ax.set_xlabel("t [s]")
    ax.set_ylabel("energy [J]")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    _save(fig, path)


def plot_frequencies(path, modes):
    fig, ax = plt.subplots(figsize=(6.0, 3.2))
    idx = np.arange(1, modes.omega2.size + 1)
    ax.stem(idx, modes.frequencies_hz)
    unstable = ~modes.stable
    if unstable.any():
        ax.plot(idx[unstable], np.zeros(unstable.sum()), "rx",
                label="unstable")
        ax.legend(fontsize=8)
    ax.set_xlabel("mode")
    ax.set_ylabel("frequency [Hz]")
    ax.grid(alpha=0.3)
    _save(fig, path)


def plot_sweep(path, alphas, freq_table):
    fig, ax = plt.subplots(figsize=(6.5, 3.6))
    freq_table = np.asarray(freq_table)
    for r in range(freq_table.shape[1]):
        ax.plot(alphas, freq_table[:, r], marker=".", ms=3, lw=0.9,
                label=f"mode {r+1}")
    ax.set_xlabel("rest length ratio")
    ax.set_ylabel("frequency [Hz]")
    ax.invert_xaxis()
    ax.grid(alpha=0.3)
    ax.legend(fontsize=7, ncol=2)
    _save(fig, path)


def plot_restlengths(path, forces, static_state):
    names = [c.name for c in forces.cables]
    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7.0, 4.2))
    x = np.arange(len(names))
    axes[0].bar(x, static_state.mu, width=0.7)
    axes[0].set_ylabel("rest length [m]")
    axes[1].bar(x, static_state.tensions, width=0.7, color="darkred")
    axes[1].set_ylabel("tension [N]")
    axes[1].set_xticks(x)
    axes[1].set_xticklabels(names, rotation=60, fontsize=7)
    for ax in axes:
        ax.grid(alpha=0.3, axis="y")
    _save(fig, path)
