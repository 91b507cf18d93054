"""Scenario runners: each turns a :class:`BenchConfig` into CSV tables, SVG plots and a summary.

Scenarios share a :class:`RunContext` that caches the expensive pieces
(heralded peak delay, tomography) so that ``full-report`` computes each of
them once. All files are written from the calling thread.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import zlib
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from qrelay import __version__, plotting
from qrelay.coincidence import (
    CoincidenceMap,
    FidelityEstimate,
    Tau2Series,
    Window,
    analytic_correlations,
    analytic_fidelity,
    analytic_window_rate,
    build_threefold_map,
    compensated,
    detuning_sweep,
    entanglement_fidelity_curve,
    expected_count_map,
    heralded_peak_t2,
    highest_significance,
    mean_fidelity,
    oscillation_period_fft,
    simulate_pair_correlations,
    tau2_series,
    teleportation_fidelity,
    window_grid,
    window_sweep,
    write_detuning_csv,
    write_entanglement_csv,
    write_map_csv,
    write_sweep_csv,
)
from qrelay.config import BenchConfig, ConfigError
from qrelay.errors import DomainError, InvariantViolation
from qrelay.polarization import HBAR_UEV_PS, NAMED_STATES, SIGMA_X, check_density, expected_output, fidelity
from qrelay.relay import (
    Grid,
    RateDensity3F,
    RelayScenario,
    analytic_threefold_density,
    expected_channel,
    simulate_threefold_tags,
)
from qrelay.security import threshold_report
from qrelay.tomography import (
    CANONICAL_INPUTS,
    SinusoidFit,
    average_gate_fidelity,
    fidelity_landscape,
    fit_oscillation,
    process_fidelity,
    process_tomography,
    state_tomography_oscillation,
    write_chi_csv,
    write_fit_csv,
    write_landscape_csv,
)

SCENARIOS = ("entanglement", "bb84-sweep", "detuning", "oscillation", "tomography", "landscape",
             "full-report")
BB84_INPUTS = (("H", "HV"), ("V", "HV"), ("D", "DA"), ("A", "DA"))
OSCILLATION_INPUTS = ("D", "A", "R", "L")
TAU1_CENTER_PS = -0.5  # centre of the bins symmetric about tau1 = 0 for integer tags
FIDELITY_TOL = 1e-9


@dataclass
class ScenarioResult:
    name: str
    summary: dict
    files: list[str] = field(default_factory=list)


@dataclass
class _Tomography:
    fits: dict
    p_hv: dict
    series: dict
    states: dict
    chi: np.ndarray
    chi_sigma: np.ndarray
    summary: dict


class RunContext:
    """Effective configuration plus caches shared between scenarios."""

    def __init__(self, cfg: BenchConfig):
        self.cfg = cfg.effective()
        self.requested = cfg
        run = self.cfg.run
        self.analytic = run.backend in ("analytic", "both")
        self.mc = run.backend in ("montecarlo", "both")
        a = self.cfg.analysis
        self.grid = Grid(a.t1_range_ps[0], a.t1_range_ps[1], a.t2_range_ps[0], a.t2_range_ps[1], a.bin_ps)
        self._t2_star: float | None = None
        self._tomo: _Tomography | None = None

    # -- building blocks

    def scenario(self, label: str, basis: str, bob_phase: float = 0.0) -> RelayScenario:
        c = self.cfg
        return RelayScenario(NAMED_STATES[label], c.source, c.laser, c.detector, c.coupler,
                             basis, bob_phase, background=not c.run.noise_disabled)

    def seed(self, label: str) -> np.random.SeedSequence:
        """Independent, reproducible stream per (run seed, purpose)."""
        return np.random.SeedSequence([self.cfg.run.seed, zlib.crc32(label.encode())])

    def seed_int(self, label: str) -> int:
        return int(self.seed(label).generate_state(2, np.uint64)[0])

    def density(self, scn: RelayScenario, grid: Grid) -> RateDensity3F:
        d = analytic_threefold_density(scn, grid)
        for part in (d.signal, d.multiphoton, d.accidental):
            if not np.all(np.isfinite(part)) or np.any(part < -1e-12 * max(1.0, float(np.abs(part).max()))):
                raise InvariantViolation("rate density is negative or not finite")
        return d

    def duration(self, rate_cps: float) -> float:
        if self.cfg.run.duration_s is not None:
            return self.cfg.run.duration_s
        if not rate_cps > 0:
            raise InvariantViolation("window holds no three-fold rate")
        return self.cfg.run.heralds_per_point / rate_cps

    @property
    def t2_star(self) -> float:
        """tau2 at which the heralded signal peaks; windows are centred there."""
        if self._t2_star is None:
            self._t2_star = heralded_peak_t2(self.density(self.scenario("D", "DA"), self.grid))
        return self._t2_star


# --- helpers -------------------------------------------------------------------


def _check_fidelity(f: float, what: str) -> float:
    if math.isnan(f):
        return f
    if not -FIDELITY_TOL <= f <= 1 + FIDELITY_TOL:
        raise InvariantViolation(f"{what} outside [0, 1]: {f}")
    return min(max(f, 0.0), 1.0)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def _write_summary(out: Path, name: str, summary: dict) -> list[str]:
    blob = _jsonable(summary)
    (out / "summary.json").write_text(json.dumps(blob, indent=2, sort_keys=True) + "\n")
    lines = [f"scenario: {name}"]

    def walk(prefix, v):
        if isinstance(v, dict):
            for k in sorted(v):
                walk(f"{prefix}.{k}" if prefix else k, v[k])
        elif isinstance(v, list) and any(isinstance(x, (dict, list)) for x in v):
            for i, x in enumerate(v):
                walk(f"{prefix}[{i}]", x)
        else:
            lines.append(f"{prefix}: {v}")

    walk("", blob)
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return ["summary.json", "summary.txt"]


def _estimate_dict(e: FidelityEstimate | None) -> dict | None:
    if e is None:
        return None
    return {"value": e.value, "sigma": e.sigma, "n_correct": e.n_correct, "n_wrong": e.n_wrong}


def _mc_map(ctx: RunContext, label: str, scn: RelayScenario, duration: float, grid: Grid) -> CoincidenceMap:
    tags = simulate_threefold_tags(ctx.seed(label), scn, duration, grid)
    return build_threefold_map(tags, grid.step, ((grid.t1_min, grid.t1_max), (grid.t2_min, grid.t2_max)))


def _base_info(ctx: RunContext) -> dict:
    return {"version": __version__, "seed": ctx.cfg.run.seed, "backend": ctx.cfg.run.backend,
            "noise_disabled": ctx.cfg.run.noise_disabled, "config_sha256": ctx.requested.digest().hex()}


# --- entanglement ------------------------------------------------------------------


def _entanglement(ctx: RunContext, out: Path) -> ScenarioResult:
    a, src, det = ctx.cfg.analysis, ctx.cfg.source, ctx.cfg.detector
    b = a.entanglement_bin_ps
    if a.entanglement_tau_max_ps % b:
        raise ConfigError("analysis.entanglement_tau_max_ps must be a multiple of entanglement_bin_ps")
    edges = np.arange(0, a.entanglement_tau_max_ps + b, b, dtype=float)
    tau = (edges[:-1] + edges[1:]) / 2
    summary = {"bin_ps": b, "tau_max_ps": a.entanglement_tau_max_ps}
    files = []
    curves = {}
    if ctx.analytic:
        curves["analytic"] = entanglement_fidelity_curve(tau, *analytic_correlations(tau, src, det, b),
                                                         src, det, b)
    if ctx.mc:
        c_hv, c_da, c_rl, n = simulate_pair_correlations(np.random.default_rng(ctx.seed("entanglement")),
                                                         src, det, a.entanglement_pairs, edges)
        keep = n > 0
        if keep.sum() < 8:
            raise InvariantViolation("too few populated delay bins")
        curves["mc"] = entanglement_fidelity_curve(tau, c_hv, c_da, c_rl, src, det, b, weights=n)
    for kind, curve in curves.items():
        for arr in (curve.f_phi_plus, curve.f_phi_minus):
            if np.any(arr < -FIDELITY_TOL) or np.any(arr > 1 + FIDELITY_TOL):
                raise InvariantViolation("entanglement fidelity outside [0, 1]")
        fname = f"entanglement_{kind}.csv"
        write_entanglement_csv(curve, out / fname)
        files.append(fname)
        summary[kind] = {
            "period_fft_ps": oscillation_period_fft(curve.tau_ps, curve.f_phi_plus),
            "peak_f_static": curve.peak_fidelity,
            "max_bin_f_phi_plus": float(np.max(curve.f_phi_plus)),
            "max_bin_f_phi_minus": float(np.max(curve.f_phi_minus)),
            "f_time_evolving": float(curve.f_time_evolving[0]),
            "oscillation_amplitude": curve.amplitude,
        }
    head = summary.get("mc", summary.get("analytic"))
    summary["threshold_report"] = threshold_report(min(1.0, max(0.0, head["f_time_evolving"]))).as_dict()
    files += plotting.plot_entanglement([out / f for f in files], out / "entanglement.svg")
    return ScenarioResult("entanglement", summary, files)


# --- BB84 suite and window sweep ---------------------------------------------------


def _bb84(ctx: RunContext, out: Path) -> ScenarioResult:
    a = ctx.cfg.analysis
    t2s = ctx.t2_star
    win = Window(a.bb84_window_ps[0], a.bb84_window_ps[1], TAU1_CENTER_PS, t2s)
    sweep_win = Window(a.sweep_max_ps[0], a.sweep_max_ps[1], TAU1_CENTER_PS, t2s)
    try:
        sgrid = window_grid(sweep_win, a.bin_ps, (ctx.grid.t1_min, ctx.grid.t2_min))
        for w in (win, sweep_win):
            s1, s2 = w.bin_slices(a.bin_ps, ctx.grid.t1_min, ctx.grid.t2_min)
            if s1.start < 0 or s2.start < 0 or s1.stop > ctx.grid.shape[0] or s2.stop > ctx.grid.shape[1]:
                raise DomainError("window")
    except DomainError:
        raise ConfigError("BB84 or sweep window does not fit inside the map ranges") from None
    single = Window(a.bin_ps, a.bin_ps, TAU1_CENTER_PS, t2s)
    rows, maps, channels, files = [], [], [], []
    per_input = {}
    for label, basis in BB84_INPUTS:
        scn = compensated(ctx.scenario(label, basis), t2s)
        ch = expected_channel(scn, t2s)
        dens = ctx.density(scn, ctx.grid)
        duration = ctx.duration(analytic_window_rate(dens, win))
        f_an = _check_fidelity(analytic_fidelity(dens, win, ch), "analytic fidelity")
        f_bin = _check_fidelity(analytic_fidelity(dens, single, ch), "analytic fidelity")
        entry = {"basis": basis, "expected_channel": ch.name, "analytic": f_an, "analytic_single_bin": f_bin,
                 "duration_s": duration}
        if ctx.mc:
            cmap = _mc_map(ctx, f"bb84/{label}", scn, duration, sgrid)
            suffix = "mc"
        else:
            cmap = expected_count_map(dens, duration)
            suffix = "analytic"
        est = teleportation_fidelity(cmap, win, ch)
        _check_fidelity(est.value, "window fidelity")
        entry["window"] = _estimate_dict(est)
        fname = f"bb84_map_{label}_{suffix}.csv"
        write_map_csv(cmap, out / fname)
        files.append(fname)
        per_input[label] = entry
        rows.append((label, basis, ch.name, f_an, f_bin, est, duration))
        maps.append((cmap, ch))
        channels.append(ch)
    with open(out / "bb84_fidelities.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["input_label", "basis_label", "expected_channel_label", "f_analytic_frac",
                    "f_analytic_single_bin_frac", "f_window_frac", "sigma_window_frac", "n_window_counts",
                    "duration_s"])
        for label, basis, chn, f_an, f_bin, est, dur in rows:
            w.writerow([label, basis, chn, f"{f_an:.6f}", f"{f_bin:.6f}", f"{est.value:.6f}",
                        f"{est.sigma:.6f}", est.n_total, f"{dur:.6g}"])
    files.append("bb84_fidelities.csv")
    sweep = window_sweep(maps, a.bin_ps, a.sweep_max_ps[0], a.sweep_max_ps[1],
                         centers=[(TAU1_CENTER_PS, t2s)] * len(maps))
    write_sweep_csv(sweep, out / "bb84_sweep.csv", labels=tuple(x for x, _ in BB84_INPUTS))
    files.append("bb84_sweep.csv")
    mean, sig = mean_fidelity([r[5] for r in rows])
    mean_an = float(np.mean([r[3] for r in rows]))
    best = highest_significance(sweep)
    summary = {
        "t2_star_ps": t2s,
        "window_ps": list(a.bb84_window_ps),
        "inputs": per_input,
        "mean_analytic": mean_an,
        "mean_window": mean,
        "sigma_mean_window": sig,
        "max_single_bin_analytic": max(r[4] for r in rows),
        "polar_above_equatorial": min(r[5].value for r in rows[:2]) > max(r[5].value for r in rows[2:]),
        "best_window": None if best is None else {
            "dt1_ps": best.dt1_ps, "dt2_ps": best.dt2_ps, "mean": best.mean, "sigma": best.sigma_mean,
            "significance": best.significance},
        "threshold_report": threshold_report(_check_fidelity(mean, "mean fidelity")).as_dict(),
    }
    files += plotting.plot_sweep(out / "bb84_sweep.csv", out / "bb84_sweep.svg")
    return ScenarioResult("bb84-sweep", summary, files)


# --- detuning ---------------------------------------------------------------------------


def _detuning(ctx: RunContext, out: Path) -> ScenarioResult:
    a = ctx.cfg.analysis
    t2s = ctx.t2_star
    win = Window(a.detuning_window_ps[0], a.detuning_window_ps[1], TAU1_CENTER_PS, t2s)
    grid = window_grid(win, a.bin_ps, (ctx.grid.t1_min, ctx.grid.t2_min))
    base = compensated(ctx.scenario("D", "DA"), t2s)
    heralds = None
    if ctx.mc:
        heralds = ctx.cfg.run.heralds_per_point
    points = detuning_sweep(base, a.detuning_ghz, win, grid, mc_heralds=heralds, seed=ctx.seed_int("detuning"))
    for p in points:
        _check_fidelity(p.analytic, "analytic fidelity")
        if p.mc is not None:
            _check_fidelity(p.mc.value, "detuning fidelity")
    write_detuning_csv(points, out / "detuning.csv")
    files = ["detuning.csv"]
    an = [p.analytic for p in points]
    order = np.argsort([abs(p.delta_ghz) for p in points], kind="stable")
    mags = [an[i] for i in order]
    summary = {
        "t2_star_ps": t2s,
        "window_ps": list(a.detuning_window_ps),
        "points": [{"delta_ghz": p.delta_ghz, "analytic": p.analytic, "mc": _estimate_dict(p.mc),
                    "duration_s": p.duration_s} for p in points],
        "monotone_in_abs_detuning": bool(all(x >= y - 1e-12 for x, y in zip(mags, mags[1:]))),
        "threshold_report": [threshold_report(_check_fidelity(
            p.mc.value if p.mc is not None else p.analytic, "fidelity")).as_dict() for p in points],
    }
    files += plotting.plot_detuning(out / "detuning.csv", out / "detuning.svg")
    return ScenarioResult("detuning", summary, files)


# --- oscillation and tomography -------------------------------------------------------


def _series_grid(ctx: RunContext) -> tuple[Grid, int]:
    a = ctx.cfg.analysis
    if (0 - ctx.grid.t2_min) % a.bin_ps:
        raise ConfigError("tau2 = 0 must fall on a map bin edge")
    g1 = window_grid(Window(a.tomography_t1_window_ps, a.bin_ps, TAU1_CENTER_PS, 0.0), a.bin_ps,
                     (ctx.grid.t1_min, ctx.grid.t2_min))
    grid = Grid(g1.t1_min, g1.t1_max, 0, a.tomography_t2_span_ps, a.bin_ps)
    return grid, a.tomography_t2_span_ps // a.tomography_t2_bin_ps


def _series(ctx: RunContext, label: str, basis: str, tag: str):
    """tau2 series of one input in one basis: expected (analytic) and, if enabled, sampled."""
    a = ctx.cfg.analysis
    grid, nb = _series_grid(ctx)
    scn = ctx.scenario(label, basis)
    dens = ctx.density(scn, grid)
    rate = float(dens.total.sum() * grid.step**2)
    duration = ctx.duration(rate)
    args = (grid.step, grid.t1_min, grid.t2_min, a.tomography_t1_window_ps, TAU1_CENTER_PS, 0,
            a.tomography_t2_bin_ps, nb)
    expected = tau2_series(dens.expected_counts(duration), *args)
    sampled = None
    if ctx.mc:
        cmap = _mc_map(ctx, f"{tag}/{label}/{basis}", scn, duration, grid)
        sampled = tau2_series(cmap.counts, *args)
    return expected, sampled, duration


def _fit_series(ctx: RunContext, s: Tau2Series) -> SinusoidFit:
    omega = ctx.cfg.source.fss_ueV / HBAR_UEV_PS
    n = s.n.astype(float)
    if np.count_nonzero(n) < 8:
        raise InvariantViolation("too few populated tau2 bins for an oscillation fit")
    y = np.where(n > 0, s.d3 / np.maximum(n, 1e-300), 0.0)
    return fit_oscillation(s.t2_ps, y, weights=n, omega=omega)


def _write_series(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["input_label", "source_label", "t2_ps", "d3_counts", "d4_counts", "fraction_d3_frac"])
        for label, kind, s in rows:
            fr = s.fraction
            for t, a, b, f in zip(s.t2_ps, s.d3, s.d4, fr):
                w.writerow([label, kind, f"{t:.1f}", f"{a:.6g}", f"{b:.6g}", f"{f:.6f}"])


def _oscillation(ctx: RunContext, out: Path) -> ScenarioResult:
    omega = ctx.cfg.source.fss_ueV / HBAR_UEV_PS
    fits, series_rows, fit_rows = {}, [], []
    for label in OSCILLATION_INPUTS:
        expected, sampled, duration = _series(ctx, label, "DA", "oscillation")
        kinds = [("analytic", expected)] if ctx.analytic or sampled is None else []
        if sampled is not None:
            kinds.append(("mc", sampled))
        for kind, s in kinds:
            fit = _fit_series(ctx, s)
            free = fit_oscillation(s.t2_ps, np.nan_to_num(s.fraction), weights=s.n.astype(float),
                                   free=True, omega_seed=omega)
            fits.setdefault(kind, {})[label] = {"fixed": fit, "free": free}
            series_rows.append((label, kind, s))
            fit_rows.append((f"{label}/{kind}", "DA", fit))
            fit_rows.append((f"{label}/{kind}/free", "DA", free))
    _write_series(out / "oscillation_series.csv", series_rows)
    write_fit_csv(fit_rows, out / "oscillation_fits.csv")
    files = ["oscillation_series.csv", "oscillation_fits.csv"]
    summary = {"omega_rad_per_ps": omega, "period_ps": 2 * math.pi / omega}
    for kind, fk in fits.items():
        d = {label: {"amplitude": v["fixed"].amplitude, "phase_rad": v["fixed"].phase,
                     "free_period_ps": v["free"].period_ps} for label, v in fk.items()}
        dphi = math.remainder(fk["R"]["fixed"].phase - fk["D"]["fixed"].phase, 2 * math.pi)
        d["phase_r_minus_d_rad"] = dphi
        d["abs_phase_r_minus_d_rad"] = abs(dphi)
        summary[kind] = d
    head = fits.get("mc", fits.get("analytic"))
    vis = float(np.mean([2 * v["fixed"].amplitude for v in head.values()]))
    summary["threshold_report"] = threshold_report(min(1.0, (1 + vis) / 2)).as_dict()
    files += plotting.plot_oscillation(out / "oscillation_series.csv", out / "oscillation_fits.csv",
                                       out / "oscillation.svg")
    return ScenarioResult("oscillation", summary, files)


def _clamped(fit: SinusoidFit) -> SinusoidFit:
    return fit if fit.amplitude <= 0.5 else dataclasses.replace(fit, amplitude=0.5)


def _states_from(ctx: RunContext, fits: dict, p_hv: dict) -> dict:
    off = ctx.cfg.source.phase_offset_rad
    return {k: state_tomography_oscillation(_clamped(fits[k]), p_hv[k], off) for k in CANONICAL_INPUTS}


def _process(states: dict) -> np.ndarray:
    pm = process_tomography([(CANONICAL_INPUTS[k], states[k]) for k in CANONICAL_INPUTS])
    pm.validate()
    return pm.chi


def _run_tomography(ctx: RunContext) -> _Tomography:
    if ctx._tomo is not None:
        return ctx._tomo
    a = ctx.cfg.analysis
    fits, p_hv, series, counts = {}, {}, {}, {}
    for label in CANONICAL_INPUTS:
        e_da, s_da, _ = _series(ctx, label, "DA", "tomography")
        e_hv, s_hv, _ = _series(ctx, label, "HV", "tomography")
        da = s_da if s_da is not None else e_da
        hv = s_hv if s_hv is not None else e_hv
        fits[label] = _fit_series(ctx, da)
        n3, n = float(hv.d3.sum()), float(hv.n.sum())
        if not n > 0:
            raise InvariantViolation("no HV-basis three-folds")
        p_hv[label] = n3 / n
        series[label] = da
        counts[label] = (da, n3, n)
    states = _states_from(ctx, fits, p_hv)
    for k, rho in states.items():
        try:
            check_density(rho)
        except DomainError as exc:
            raise InvariantViolation(f"reconstructed state {k} is not physical: {exc}") from None
    chi = _process(states)

    # parametric bootstrap of the counts
    rng = np.random.default_rng(ctx.seed("tomography/bootstrap"))
    samples = []
    for _ in range(a.bootstrap_samples):
        bf, bp = {}, {}
        for label, (da, n3, n) in counts.items():
            d3 = rng.poisson(np.maximum(da.d3, 0)).astype(float)
            d4 = rng.poisson(np.maximum(da.d4, 0)).astype(float)
            bs = Tau2Series(da.t2_ps, d3, d4)
            try:
                bf[label] = _fit_series(ctx, bs)
            except (DomainError, InvariantViolation):
                break
            bp[label] = rng.binomial(int(round(n)), min(max(n3 / n, 0.0), 1.0)) / max(int(round(n)), 1)
        else:
            samples.append(_process(_states_from(ctx, bf, bp)))
    if samples:
        arr = np.array(samples)
        sigma = np.std(arr.real, axis=0, ddof=1) + 1j * np.std(arr.imag, axis=0, ddof=1) \
            if len(samples) > 1 else np.zeros((4, 4), complex)
    else:
        sigma = np.full((4, 4), np.nan, complex)
    fp = _check_fidelity(process_fidelity(chi), "process fidelity")
    fp_s = [process_fidelity(c) for c in samples]
    f_out = {}
    for k, rho in states.items():
        ideal = expected_output(CANONICAL_INPUTS[k], 0.0, 0.0, 0.0)
        f_out[k] = _check_fidelity(fidelity(rho, ideal.density()), "state fidelity")
    summary = {
        "chi_xx": float(chi[1, 1].real),
        "sigma_chi_xx": float(sigma[1, 1].real),
        "process_fidelity": fp,
        "average_gate_fidelity": average_gate_fidelity(fp),
        "sigma_average_gate_fidelity": float(np.std([average_gate_fidelity(x) for x in fp_s], ddof=1))
        if len(fp_s) > 1 else math.nan,
        "bootstrap_samples": len(samples),
        "output_state_fidelity": f_out,
        "p_hv": p_hv,
        "fits": {k: {"amplitude": f.amplitude, "phase_rad": f.phase} for k, f in fits.items()},
    }
    ctx._tomo = _Tomography(fits, p_hv, series, states, chi, sigma, summary)
    return ctx._tomo


def _tomography(ctx: RunContext, out: Path) -> ScenarioResult:
    t = _run_tomography(ctx)
    _write_series(out / "tomography_series.csv",
                  [(k, "mc" if ctx.mc else "analytic", s) for k, s in t.series.items()])
    write_fit_csv([(k, "DA", f) for k, f in t.fits.items()], out / "tomography_fits.csv")
    write_chi_csv(t.chi, out / "chi.csv", t.chi_sigma)
    with open(out / "tomography_states.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["input_label", "s_x_dimless", "s_y_dimless", "s_z_dimless", "p_hv_frac",
                    "fidelity_to_ideal_frac"])
        for k, rho in t.states.items():
            s = [2 * rho[0, 1].real, 2 * rho[1, 0].imag, (rho[0, 0] - rho[1, 1]).real]
            w.writerow([k] + [f"{x:.6f}" for x in s]
                       + [f"{t.p_hv[k]:.6f}", f"{t.summary['output_state_fidelity'][k]:.6f}"])
    files = ["tomography_series.csv", "tomography_fits.csv", "chi.csv", "tomography_states.csv"]
    summary = dict(t.summary)
    summary["threshold_report"] = threshold_report(summary["average_gate_fidelity"]).as_dict()
    files += plotting.plot_chi(out / "chi.csv", out / "chi.svg")
    return ScenarioResult("tomography", summary, files)


def _landscape(ctx: RunContext, out: Path) -> ScenarioResult:
    t = _run_tomography(ctx)
    nt, nphi = ctx.cfg.analysis.landscape_grid
    land = fidelity_landscape(t.chi, np.linspace(0, math.pi, nt), np.linspace(0, 2 * math.pi, nphi), SIGMA_X)
    if np.any(land.fidelity < -FIDELITY_TOL) or np.any(land.fidelity > 1 + FIDELITY_TOL):
        raise InvariantViolation("landscape fidelity outside [0, 1]")
    write_landscape_csv(land, out / "landscape.csv")
    write_chi_csv(t.chi, out / "chi.csv", t.chi_sigma)
    summary = {
        "min": land.min,
        "max": land.max,
        "mean": float(np.mean(land.fidelity)),
        "north_pole": float(np.mean(land.fidelity[0])),
        "south_pole": float(np.mean(land.fidelity[-1])),
        "chi_xx": t.summary["chi_xx"],
        "threshold_report": threshold_report(min(1.0, max(0.0, land.min))).as_dict(),
    }
    files = ["landscape.csv", "chi.csv"]
    files += plotting.plot_landscape(out / "landscape.csv", out / "landscape.svg")
    return ScenarioResult("landscape", summary, files)


_RUNNERS = {
    "entanglement": _entanglement,
    "bb84-sweep": _bb84,
    "detuning": _detuning,
    "oscillation": _oscillation,
    "tomography": _tomography,
    "landscape": _landscape,
}


def _headline(results: dict) -> dict:
    """Fidelity figures of every scenario, for the combined report."""
    h = {}
    if "entanglement" in results:
        e = results["entanglement"].summary
        k = "mc" if "mc" in e else "analytic"
        h["entanglement_time_evolving"] = e[k]["f_time_evolving"]
    if "bb84-sweep" in results:
        b = results["bb84-sweep"].summary
        for label, v in b["inputs"].items():
            h[f"bb84_{label}"] = v["window"]["value"]
        h["bb84_mean"] = b["mean_window"]
    if "detuning" in results:
        for p in results["detuning"].summary["points"]:
            h[f"detuning_{p['delta_ghz']:g}ghz"] = p["mc"]["value"] if p["mc"] else p["analytic"]
    if "tomography" in results:
        t = results["tomography"].summary
        h["average_gate_fidelity"] = t["average_gate_fidelity"]
        for k, v in t["output_state_fidelity"].items():
            h[f"tomography_output_{k}"] = v
    if "landscape" in results:
        h["landscape_min"] = results["landscape"].summary["min"]
    return h


def run_scenario(name: str, cfg: BenchConfig, out_dir=None) -> ScenarioResult:
    """Run one named scenario; files go to ``<out_dir>/<name>/``."""
    if name not in SCENARIOS:
        raise ConfigError(f"unknown scenario {name!r}; choose from {SCENARIOS}")
    ctx = RunContext(cfg)
    root = Path(out_dir if out_dir is not None else ctx.cfg.run.output_dir) / name
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.yaml").write_text(cfg.to_yaml())
    if name != "full-report":
        res = _RUNNERS[name](ctx, root)
        res.summary = {**_base_info(ctx), **res.summary}
        res.files = ["config.yaml"] + res.files + _write_summary(root, name, res.summary)
        return res
    results = {}
    for sub, fn in _RUNNERS.items():
        d = root / sub
        d.mkdir(exist_ok=True)
        r = fn(ctx, d)
        r.files = [f"{sub}/{f}" for f in r.files + _write_summary(d, sub, r.summary)]
        results[sub] = r
    head = {k: float(v) for k, v in _headline(results).items()}
    summary = {
        **_base_info(ctx),
        "fidelities": head,
        "threshold_report": {k: threshold_report(_check_fidelity(v, k)).as_dict() for k, v in head.items()},
        "scenarios": {k: r.summary for k, r in results.items()},
    }
    files = ["config.yaml"] + [f for r in results.values() for f in r.files]
    files += _write_summary(root, name, summary)
    return ScenarioResult(name, summary, files)
