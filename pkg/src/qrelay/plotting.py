"""SVG figures drawn from the emitted CSV tables (never from in-memory results).

Output is deterministic: fixed SVG id salt and no creation date.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

plt.rcParams["svg.hashsalt"] = "qrelay"
plt.rcParams["svg.fonttype"] = "none"


def _read(path) -> dict[str, list[str]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    head, body = rows[0], rows[1:]
    return {h: [r[i] for r in body] for i, h in enumerate(head)}


def _num(col) -> np.ndarray:
    return np.array([float(x) if x not in ("", "nan") else np.nan for x in col])


def _save(fig, svg) -> list[str]:
    fig.tight_layout()
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return [Path(svg).name]


def plot_entanglement(csv_paths, svg) -> list[str]:
    fig, ax = plt.subplots(figsize=(7, 4))
    for p in csv_paths:
        d = _read(p)
        kind = Path(p).stem.rsplit("_", 1)[-1]
        t = _num(d["tau_ps"])
        ax.plot(t, _num(d["f_phi_plus_frac"]), lw=0.8, label=f"Phi+ ({kind})")
        ax.plot(t, _num(d["f_time_evolving_frac"]), lw=1.2, ls="--", label=f"time-evolving ({kind})")
    ax.axhline(0.5, color="grey", lw=0.5)
    ax.set_xlabel("X-2X delay (ps)")
    ax.set_ylabel("fidelity")
    ax.legend(fontsize=7)
    return _save(fig, svg)


def plot_sweep(csv_path, svg) -> list[str]:
    d = _read(csv_path)
    x, y, s = _num(d["sqrt_area_ps"]), _num(d["mean_f_frac"]), _num(d["sigma_frac"])
    flag = np.array([v == "1" for v in d["flag_all_above_75_bool"]], dtype=bool)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.errorbar(x[~flag], y[~flag], s[~flag], fmt=".", ms=2, lw=0.3, color="grey", label="some below 0.75")
    ax.errorbar(x[flag], y[flag], s[flag], fmt=".", ms=2, lw=0.3, color="C0", label="all above 0.75")
    ax.axhline(0.75, color="k", lw=0.6, ls=":")
    ax.set_xlabel("sqrt(window area) (ps)")
    ax.set_ylabel("mean 4-state fidelity")
    ax.legend(fontsize=7)
    return _save(fig, svg)


def plot_detuning(csv_path, svg) -> list[str]:
    d = _read(csv_path)
    x = _num(d["delta_ghz"])
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(x, _num(d["f_analytic_frac"]), "-", label="analytic")
    mc = _num(d["f_mc_frac"])
    if np.any(np.isfinite(mc)):
        ax.errorbar(x, mc, _num(d["sigma_mc_frac"]), fmt="o", ms=3, label="Monte Carlo")
    for level in (2 / 3, 0.78):
        ax.axhline(level, color="grey", lw=0.5, ls=":")
    ax.set_xlabel("laser detuning (GHz)")
    ax.set_ylabel("fidelity, input D")
    ax.legend(fontsize=7)
    return _save(fig, svg)


def plot_oscillation(series_csv, fits_csv, svg) -> list[str]:
    d = _read(series_csv)
    f = _read(fits_csv)
    fits = {lab: (float(a), float(p), float(c), float(w))
            for lab, a, p, c, w in zip(f["input_label"], f["amplitude_frac"], f["phase_rad"],
                                       f["offset_frac"], f["omega_rad_per_ps"])}
    fig, ax = plt.subplots(figsize=(7, 4))
    keys = list(dict.fromkeys(zip(d["input_label"], d["source_label"])))
    t_all = _num(d["t2_ps"])
    for i, (lab, kind) in enumerate(keys):
        m = np.array([a == lab and b == kind for a, b in zip(d["input_label"], d["source_label"])])
        ax.plot(t_all[m], _num(d["fraction_d3_frac"])[m], "o", ms=3, color=f"C{i}", label=f"{lab} ({kind})")
        key = f"{lab}/{kind}"
        if key in fits:
            a, p, c, w = fits[key]
            tt = np.linspace(t_all[m].min(), t_all[m].max(), 400)
            ax.plot(tt, a * np.cos(w * tt + p) + c, "-", lw=0.8, color=f"C{i}")
    ax.set_xlabel("tau2 (ps)")
    ax.set_ylabel("D3 fraction")
    ax.legend(fontsize=7, ncol=2)
    return _save(fig, svg)


def plot_chi(csv_path, svg) -> list[str]:
    d = _read(csv_path)
    re = _num(d["re_chi_dimless"]).reshape(4, 4)
    im = _num(d["im_chi_dimless"]).reshape(4, 4)
    labels = d["m_label"][::4]
    fig, axes = plt.subplots(1, 2, figsize=(8, 3.6))
    for ax, m, title in ((axes[0], re, "Re chi"), (axes[1], im, "Im chi")):
        img = ax.imshow(m, vmin=-1, vmax=1, cmap="RdBu_r")
        ax.set_xticks(range(4), labels)
        ax.set_yticks(range(4), labels)
        ax.set_title(title)
        for i in range(4):
            for j in range(4):
                ax.text(j, i, f"{m[i, j]:.2f}", ha="center", va="center", fontsize=7)
    fig.colorbar(img, ax=axes, shrink=0.8)
    fig.savefig(svg, format="svg", metadata={"Date": None})
    plt.close(fig)
    return [Path(svg).name]


def plot_landscape(csv_path, svg) -> list[str]:
    d = _read(csv_path)
    th, ph, f = _num(d["theta_rad"]), _num(d["phi_rad"]), _num(d["fidelity_frac"])
    nt = np.unique(th).size
    grid = f.reshape(nt, -1)
    fig, ax = plt.subplots(figsize=(6, 3.6))
    img = ax.imshow(grid, origin="upper", aspect="auto", cmap="viridis",
                    extent=(ph.min(), ph.max(), th.max(), th.min()), vmin=min(0.5, grid.min()), vmax=1)
    ax.contour(np.unique(ph), np.unique(th), grid, levels=[2 / 3, 0.9], colors="w", linewidths=0.6)
    ax.set_xlabel("phi (rad)")
    ax.set_ylabel("theta (rad)")
    fig.colorbar(img, ax=ax, label="fidelity")
    return _save(fig, svg)
