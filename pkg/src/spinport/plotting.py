"""Figure rendering for the CLI presets (PNG, non-interactive backend)."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return path


def witness_figure(data, path: Path) -> Path:
    cols = data["columns"]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(cols["r"], cols["V_s_ESM"], label="effective spin model")
    if "V_s_FM" in cols:
        ax.plot(cols["r"], cols["V_s_FM"], "--", label="full model")
    ax.plot(cols["r"], cols["V_s_HP"], ":", color="gray", label="linearized")
    ax.axhline(1.0, color="k", lw=0.5)
    ax.set_xlabel(r"$r = |\bar N \chi_{ab} t|$")
    ax.set_ylabel(r"$V_s$")
    ax.set_ylim(0, 1.2)
    ax.legend(frameon=False)
    return _save(fig, path)


def husimi_figure(panels, path: Path) -> Path:
    fig, axes = plt.subplots(1, len(panels), figsize=(4.2 * len(panels), 3.2), squeeze=False)
    for ax, (title, (th, ph, q)) in zip(axes[0], panels):
        mesh = ax.pcolormesh(np.degrees(ph), np.degrees(th), q, shading="auto", cmap="viridis")
        ax.set_xlabel(r"$\phi$ (deg)")
        ax.set_ylabel(r"$\theta$ (deg)")
        ax.set_title(title)
        fig.colorbar(mesh, ax=ax)
    return _save(fig, path)


def magnetization_figure(data, path: Path) -> Path:
    fig, axes = plt.subplots(1, 3, figsize=(11, 3))
    for ax, axis in zip(axes, "xyz"):
        m, p_in, p_out = data[f"mag_{axis}"]
        ax.bar(m - 0.2, p_in, width=0.4, label="input")
        ax.bar(m + 0.2, p_out, width=0.4, label="teleported")
        ax.set_xlabel(f"$M_{axis}$")
    axes[0].set_ylabel("probability")
    axes[0].legend(frameon=False)
    return _save(fig, path)


def outcome_figure(data, path: Path) -> Path:
    P, F = data["P"], data["F"]
    n_a, n_c = P.shape
    ma = np.arange(n_a) - (n_a - 1) / 2
    mc = np.arange(n_c) - (n_c - 1) / 2
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.6))
    for ax, z, title in ((axes[0], P, "P"), (axes[1], F, "F")):
        mesh = ax.pcolormesh(mc, ma, z, shading="auto", cmap="magma")
        ax.set_xlabel(r"$M_z^c$")
        ax.set_ylabel(r"$M_z^a$")
        ax.set_title(title)
        fig.colorbar(mesh, ax=ax)
    return _save(fig, path)


def scaling_figure(data, path: Path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for kind, (n, f, fit) in data.items():
        (line,) = ax.plot(n, f, "o", label=f"{kind}  p = {fit.p:.3f}")
        grid = np.linspace(n.min(), n.max(), 100)
        ax.plot(grid, fit.predict(grid), color=line.get_color(), lw=1)
    ax.set_xlabel(r"$\bar N$")
    ax.set_ylabel(r"$\bar F$")
    ax.legend(frameon=False)
    return _save(fig, path)


def engine_figure(data, path: Path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(9, 3.4))
    axes[0].plot(data["r"], data["ed"], label="ED (full model)")
    axes[0].errorbar(data["r"], data["dtwa"], yerr=2 * data["se"], fmt="o", ms=3, label="DTWA ±2 SE")
    axes[0].set_xlabel("r")
    axes[0].set_ylabel(r"$\langle S_x^a \rangle$ (lab)")
    axes[0].legend(frameon=False)
    axes[1].plot(data["r"], data["vs_ed"], label="ED")
    axes[1].plot(data["r"], data["vs_dtwa"], "o", ms=3, label="DTWA")
    axes[1].set_xlabel("r")
    axes[1].set_ylabel(r"$V_s$")
    axes[1].legend(frameon=False)
    return _save(fig, path)


def render(preset: str, plot_data: dict, out_dir: Path) -> list:
    """Write the figures belonging to ``preset``; returns the paths."""
    out = []
    if preset == "witness-scan":
        out.append(witness_figure(plot_data, out_dir / "witness_scan.png"))
    elif preset == "teleport":
        panels = [("input", plot_data["husimi_input"])]
        if "husimi_output" in plot_data:
            panels.append(("teleported (most probable)", plot_data["husimi_output"]))
            out.append(magnetization_figure(plot_data, out_dir / "magnetization.png"))
        out.append(husimi_figure(panels, out_dir / "husimi.png"))
    elif preset == "outcome-grid":
        out.append(outcome_figure(plot_data, out_dir / "outcome_grid.png"))
        out.append(husimi_figure([("teleported (most probable)", plot_data["husimi_output"])],
                                 out_dir / "husimi_output.png"))
    elif preset == "scaling-sweep":
        out.append(scaling_figure(plot_data, out_dir / "scaling.png"))
    elif preset == "engine-compare":
        out.append(engine_figure(plot_data, out_dir / "engine_compare.png"))
    return out
