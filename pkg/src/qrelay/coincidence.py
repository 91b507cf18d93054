"""Coincidence maps, windowed fidelities, window and detuning sweeps, pair-correlation curves."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse

from qrelay.errors import DomainError, PreconditionError
from qrelay.polarization import (
    HBAR_UEV_PS,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    entanglement_fidelity_from_correlations,
    pair_phase,
)
from qrelay.relay import (
    Grid,
    RateDensity3F,
    RelayScenario,
    analytic_threefold_density,
    compensation_phase,
    expected_channel,
    simulate_threefold_tags,
)
from qrelay.source import DetectorParams, QdSourceParams, mixed_pair_state
from qrelay.tags import Channel, TimeTagStream

CLASSICAL_4STATE = 0.75


@dataclass(frozen=True)
class CoincidenceMap:
    """Three-fold counts per Bob outcome over (tau1, tau2) bins.

    Bin (i, j) covers tau1 in [t1_origin + i*bin_ps, t1_origin + (i+1)*bin_ps)
    and likewise for tau2. ``counts`` has shape (2, n1, n2): D3 then D4.
    """

    bin_ps: int
    t1_origin: int
    t2_origin: int
    counts: np.ndarray

    def __post_init__(self):
        if self.bin_ps <= 0:
            raise DomainError("bin_ps must be positive")
        if self.counts.ndim != 3 or self.counts.shape[0] != 2:
            raise DomainError("counts must have shape (2, n_tau1, n_tau2)")
        if np.any(self.counts < 0):
            raise DomainError("counts must be non-negative")

    @classmethod
    def empty(cls, bin_ps: int, ranges) -> CoincidenceMap:
        (a1, b1), (a2, b2) = ranges
        if (b1 - a1) % bin_ps or (b2 - a2) % bin_ps or b1 <= a1 or b2 <= a2:
            raise DomainError("ranges must be non-empty multiples of bin_ps")
        shape = (2, (b1 - a1) // bin_ps, (b2 - a2) // bin_ps)
        return cls(bin_ps, a1, a2, np.zeros(shape, dtype=np.int64))

    @classmethod
    def from_grid(cls, grid: Grid) -> CoincidenceMap:
        return cls.empty(grid.step, ((grid.t1_min, grid.t1_max), (grid.t2_min, grid.t2_max)))

    @property
    def shape(self) -> tuple[int, int]:
        return self.counts.shape[1], self.counts.shape[2]

    @property
    def ranges(self):
        n1, n2 = self.shape
        return ((self.t1_origin, self.t1_origin + n1 * self.bin_ps),
                (self.t2_origin, self.t2_origin + n2 * self.bin_ps))

    def __add__(self, other: CoincidenceMap) -> CoincidenceMap:
        if (self.bin_ps, self.t1_origin, self.t2_origin, self.shape) != (
                other.bin_ps, other.t1_origin, other.t2_origin, other.shape):
            raise DomainError("maps have different binning")
        return CoincidenceMap(self.bin_ps, self.t1_origin, self.t2_origin, self.counts + other.counts)

    def total(self) -> int:
        return int(self.counts.sum())


def _pairs_in_range(ref: np.ndarray, other: np.ndarray, lo: int, hi: int):
    """All (ref index, other index) with other - ref in [lo, hi); both arrays ascending."""
    a = np.searchsorted(other, ref + lo, side="left")
    b = np.searchsorted(other, ref + hi, side="left")
    n = b - a
    rows = np.repeat(np.arange(ref.size), n)
    starts = np.repeat(a - np.concatenate([[0], np.cumsum(n)[:-1]]), n)
    cols = starts + np.arange(rows.size)
    return rows, cols


def _count_matrix(rows, delays, origin, bin_ps, n_rows, n_bins):
    idx = (delays - origin) // bin_ps
    return sparse.csr_matrix((np.ones(rows.size, dtype=np.int64), (rows, idx)), shape=(n_rows, n_bins))


def build_threefold_map(tags: TimeTagStream, bin_ps: int = 8,
                        ranges=((-204, 204), (-200, 1400)), chunk: int = 200_000) -> CoincidenceMap:
    """Histogram every (D1, D2, Bob) triple with tau1 and tau2 inside ``ranges``.

    For each D1 tag the D2 and Bob partners in range are found by binary
    search over the per-channel sorted times (a merge join); the per-tag
    tau1 and tau2 histograms combine as a sparse outer product, so the cost
    is linear in the number of tags for bounded ranges. D1 tags are processed
    in chunks and the partial maps summed.
    """
    if not tags.is_sorted():
        raise PreconditionError("time tags must be sorted by time")
    cmap = CoincidenceMap.empty(bin_ps, ranges)
    (lo1, hi1), (lo2, hi2) = ranges
    n1, n2 = cmap.shape
    d1 = tags.select(Channel.D1)
    d2 = tags.select(Channel.D2)
    bob = [tags.select(Channel.D3), tags.select(Channel.D4)]
    counts = np.zeros_like(cmap.counts)
    for start in range(0, d1.size, chunk):
        ref = d1[start:start + chunk]
        r2, c2 = _pairs_in_range(ref, d2, lo1, hi1)
        if r2.size == 0:
            continue
        u = _count_matrix(r2, d2[c2] - ref[r2], lo1, bin_ps, ref.size, n1)
        for k in range(2):
            rb, cb = _pairs_in_range(ref, bob[k], lo2, hi2)
            if rb.size == 0:
                continue
            v = _count_matrix(rb, bob[k][cb] - ref[rb], lo2, bin_ps, ref.size, n2)
            counts[k] += (u.T @ v).toarray()
    return CoincidenceMap(bin_ps, lo1, lo2, counts)


@dataclass(frozen=True)
class Window:
    """Rectangular post-selection window of size dt1 x dt2 centred at (center_t1, center_t2)."""

    dt1_ps: int
    dt2_ps: int
    center_t1_ps: float = 0.0
    center_t2_ps: float = 0.0

    def __post_init__(self):
        if self.dt1_ps <= 0 or self.dt2_ps <= 0:
            raise DomainError("window sizes must be positive")

    def bin_slices(self, bin_ps: int, t1_origin: int, t2_origin: int) -> tuple[slice, slice]:
        """Bin index slices; the window edges are snapped to the nearest bin edges."""
        if self.dt1_ps % bin_ps or self.dt2_ps % bin_ps:
            raise DomainError("window sizes must be multiples of the bin width")
        out = []
        for dt, c, o in ((self.dt1_ps, self.center_t1_ps, t1_origin),
                         (self.dt2_ps, self.center_t2_ps, t2_origin)):
            n = dt // bin_ps
            # integer tags: bin k holds tau in {o + k*b, ..., o + k*b + b - 1}, centred at +(b-1)/2
            start = int(math.floor((c - (bin_ps - 1) / 2 - o) / bin_ps - (n - 1) / 2 + 0.5))
            out.append(slice(start, start + n))
        return out[0], out[1]


@dataclass(frozen=True)
class FidelityEstimate:
    """Fraction of three-folds in the expected channel with its binomial error."""

    value: float
    sigma: float
    n_correct: int
    n_wrong: int

    @property
    def n_total(self) -> int:
        return self.n_correct + self.n_wrong

    @property
    def empty(self) -> bool:
        return self.n_total == 0

    @classmethod
    def from_counts(cls, n_correct: int, n_wrong: int) -> FidelityEstimate:
        n = n_correct + n_wrong
        if n == 0:
            return cls(math.nan, math.nan, 0, 0)
        f = n_correct / n
        return cls(f, math.sqrt(f * (1 - f) / n), int(n_correct), int(n_wrong))


def _window_counts(counts: np.ndarray, win: Window, bin_ps, o1, o2) -> np.ndarray:
    s1, s2 = win.bin_slices(bin_ps, o1, o2)
    n1, n2 = counts.shape[1:]
    if s1.start < 0 or s2.start < 0 or s1.stop > n1 or s2.stop > n2:
        raise DomainError("window extends beyond the map")
    return counts[:, s1, s2].sum(axis=(1, 2))


def _channel_index(expected: Channel | int) -> int:
    ch = Channel(int(expected))
    if ch not in (Channel.D3, Channel.D4):
        raise DomainError("expected outcome must be D3 or D4")
    return int(ch) - int(Channel.D3)


def teleportation_fidelity(cmap: CoincidenceMap, win: Window, expected: Channel | int) -> FidelityEstimate:
    """Raw (no accidental subtraction) fidelity inside ``win``."""
    k = _channel_index(expected)
    w = _window_counts(cmap.counts, win, cmap.bin_ps, cmap.t1_origin, cmap.t2_origin)
    return FidelityEstimate.from_counts(int(w[k]), int(w[1 - k]))


def analytic_fidelity(density: RateDensity3F, win: Window, expected: Channel | int,
                      subtract_accidentals: bool = False) -> float:
    """Expected fidelity inside ``win`` from analytic densities.

    ``subtract_accidentals`` drops the uncorrelated component; it is a
    diagnostic and never used for headline numbers.
    """
    k = _channel_index(expected)
    arr = density.total - density.accidental if subtract_accidentals else density.total
    g = density.grid
    w = _window_counts(arr, win, g.step, g.t1_min, g.t2_min)
    s = w.sum()
    return float(w[k] / s) if s > 0 else math.nan


def analytic_window_rate(density: RateDensity3F, win: Window) -> float:
    """Expected three-fold rate (1/s) inside ``win``, both outcomes."""
    g = density.grid
    return float(_window_counts(density.total, win, g.step, g.t1_min, g.t2_min).sum() * g.step**2)


def heralded_peak_t2(density: RateDensity3F) -> float:
    """tau2 bin centre where the heralded signal peaks in the tau1 = 0 row."""
    g = density.grid
    i = int(np.argmin(np.abs(g.t1_centers)))
    j = int(np.argmax(density.signal.sum(axis=0)[i]))
    return float(g.t2_centers[j])


def expected_count_map(density: RateDensity3F, duration_s: float) -> CoincidenceMap:
    """Expected counts of an analytic density rounded to integers, as a map."""
    g = density.grid
    counts = np.rint(density.expected_counts(duration_s)).astype(np.int64)
    return CoincidenceMap(g.step, g.t1_min, g.t2_min, counts)


@dataclass(frozen=True)
class Tau2Series:
    """Counts per Bob outcome versus tau2 inside a tau1 window."""

    t2_ps: np.ndarray  # bin centres (mean of the integer delays in each bin)
    d3: np.ndarray
    d4: np.ndarray

    @property
    def n(self) -> np.ndarray:
        return self.d3 + self.d4

    @property
    def fraction(self) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.n > 0, self.d3 / np.maximum(self.n, 1), np.nan)


def tau2_series(counts: np.ndarray, bin_ps: int, t1_origin: int, t2_origin: int, dt1_ps: int,
                center_t1_ps: float, t2_start_ps: int, t2_bin_ps: int, n_bins: int) -> Tau2Series:
    """Sum a tau1 window and rebin tau2 into ``n_bins`` bins of ``t2_bin_ps`` from ``t2_start_ps``."""
    if t2_bin_ps % bin_ps or (t2_start_ps - t2_origin) % bin_ps:
        raise DomainError("tau2 rebinning must align with the map bins")
    s1, _ = Window(dt1_ps, bin_ps, center_t1_ps, t2_origin).bin_slices(bin_ps, t1_origin, t2_origin)
    j0 = (t2_start_ps - t2_origin) // bin_ps
    k = t2_bin_ps // bin_ps
    if s1.start < 0 or s1.stop > counts.shape[1] or j0 < 0 or j0 + n_bins * k > counts.shape[2]:
        raise DomainError("series extends beyond the map")
    sub = counts[:, s1, j0:j0 + n_bins * k].sum(axis=1).reshape(2, n_bins, k).sum(axis=2)
    centers = t2_start_ps + t2_bin_ps * np.arange(n_bins) + (t2_bin_ps - 1) / 2
    return Tau2Series(centers.astype(float), sub[0], sub[1])


# --- window sweep ------------------------------------------------------------


@dataclass(frozen=True)
class SweepRow:
    dt1_ps: int
    dt2_ps: int
    sqrt_area_ps: float
    fidelities: tuple[FidelityEstimate, ...]
    mean: float
    sigma_mean: float
    min_individual: float
    all_above_75: bool

    @property
    def significance(self) -> float:
        """Standard deviations by which the mean exceeds the 4-state classical limit."""
        if not self.sigma_mean > 0:
            return math.inf if self.mean > CLASSICAL_4STATE else -math.inf
        return (self.mean - CLASSICAL_4STATE) / self.sigma_mean


def mean_fidelity(estimates) -> tuple[float, float]:
    """Mean of independent estimates and its propagated error."""
    vals = np.array([e.value for e in estimates])
    sig = np.array([e.sigma for e in estimates])
    return float(vals.mean()), float(math.sqrt(np.sum(sig**2)) / len(estimates))


def window_sweep(inputs, bin_ps: int = 8, max_dt1_ps: int = 200, max_dt2_ps: int = 400,
                 centers=None) -> list[SweepRow]:
    """Evaluate every window size (in bin steps) for a set of input-state maps.

    ``inputs`` is a sequence of ``(CoincidenceMap, expected_channel)``;
    ``centers`` gives each map's window centre ``(t1, t2)`` (default (0, 0)).
    """
    inputs = list(inputs)
    if not inputs:
        raise DomainError("window sweep needs at least one map")
    centers = centers or [(0.0, 0.0)] * len(inputs)
    rows = []
    for n1 in range(1, max_dt1_ps // bin_ps + 1):
        for n2 in range(1, max_dt2_ps // bin_ps + 1):
            ests = []
            for (cmap, ch), (c1, c2) in zip(inputs, centers):
                if cmap.bin_ps != bin_ps:
                    raise DomainError("map bin width differs from the sweep step")
                ests.append(teleportation_fidelity(cmap, Window(n1 * bin_ps, n2 * bin_ps, c1, c2), ch))
            if any(e.empty for e in ests):
                continue
            mean, sig = mean_fidelity(ests)
            vals = [e.value for e in ests]
            rows.append(SweepRow(n1 * bin_ps, n2 * bin_ps, math.sqrt(n1 * n2) * bin_ps, tuple(ests),
                                 mean, sig, min(vals), all(v > CLASSICAL_4STATE for v in vals)))
    return rows


def highest_significance(rows) -> SweepRow | None:
    """Flagged window whose mean fidelity beats 75 % by the most standard deviations."""
    flagged = [r for r in rows if r.all_above_75]
    return max(flagged, key=lambda r: r.significance) if flagged else None


# --- detuning sweep ------------------------------------------------------------


@dataclass(frozen=True)
class DetuningPoint:
    delta_ghz: float
    analytic: float
    mc: FidelityEstimate | None
    duration_s: float


def window_grid(win: Window, bin_ps: int = 8, origin=(-204, -200)) -> Grid:
    """Smallest bin-aligned grid containing ``win`` on the default map binning."""
    s1, s2 = win.bin_slices(bin_ps, origin[0], origin[1])
    return Grid(origin[0] + s1.start * bin_ps, origin[0] + s1.stop * bin_ps,
                origin[1] + s2.start * bin_ps, origin[1] + s2.stop * bin_ps, bin_ps)


def detuning_sweep(base: RelayScenario, deltas, win: Window, grid: Grid | None = None,
                   mc_heralds: int | None = None, seed: int = 0) -> list[DetuningPoint]:
    """Input-D fidelity versus laser detuning in a common window.

    The analytic value is always computed. With ``mc_heralds`` the
    herald-conditioned sampler is run for a duration that yields that many
    expected three-folds inside the window; per-point seeds are spawned from
    ``seed``.
    """
    grid = grid or Grid()
    seeds = np.random.SeedSequence(seed).spawn(len(list(deltas)))
    out = []
    for delta, ss in zip(deltas, seeds):
        scn = replace(base, laser=replace(base.laser, detuning_ghz=float(delta)))
        dens = analytic_threefold_density(scn, grid)
        ch = expected_channel(scn, win.center_t2_ps)
        f_an = analytic_fidelity(dens, win, ch)
        mc = None
        duration = 0.0
        if mc_heralds:
            duration = mc_heralds / analytic_window_rate(dens, win)
            g = window_grid(win, grid.step, (grid.t1_min, grid.t2_min))
            tags = simulate_threefold_tags(ss, scn, duration, g)
            cmap = build_threefold_map(tags, g.step, ((g.t1_min, g.t1_max), (g.t2_min, g.t2_max)))
            mc = teleportation_fidelity(cmap, win, ch)
        out.append(DetuningPoint(float(delta), f_an, mc, duration))
    return out


def compensated(scn: RelayScenario, tau2: float) -> RelayScenario:
    """Scenario with Bob's analyser phase aligned to the ideal output at ``tau2``."""
    return replace(scn, bob_phase_rad=compensation_phase(scn.src, tau2))


# --- entanglement fidelity curves --------------------------------------------

def _pauli_pair(a: np.ndarray) -> np.ndarray:
    return np.kron(a, a)


def correlation_operators() -> dict[str, np.ndarray]:
    """<ZZ>, <XX>, <YY>: the HV, DA and RL polarization correlations."""
    return {"HV": _pauli_pair(SIGMA_Z), "DA": _pauli_pair(SIGMA_X), "RL": _pauli_pair(SIGMA_Y)}


@dataclass(frozen=True)
class EntanglementCurve:
    tau_ps: np.ndarray
    c_hv: np.ndarray
    c_da: np.ndarray
    c_rl: np.ndarray
    f_phi_plus: np.ndarray
    f_phi_minus: np.ndarray
    f_time_evolving: np.ndarray
    amplitude: float
    hv_mean: float = 1.0

    @property
    def peak_fidelity(self) -> float:
        """Maximum of the fitted Phi+/Phi- fidelity oscillation, (1 + <C_HV> + 2a)/4."""
        return (1 + self.hv_mean + 2 * self.amplitude) / 4


def _jitter_factor(sigma_ps: float, src: QdSourceParams) -> float:
    w = src.fss_ueV / HBAR_UEV_PS
    return math.exp(-((w * sigma_ps) ** 2) / 2)


def analytic_correlations(tau, src: QdSourceParams, det: DetectorParams, bin_ps: float = 0.0):
    """Expected two-fold correlations at measured X-2X delay ``tau`` (ps).

    Jitter (cross-channel sigma) and a uniform bin of width ``bin_ps``
    attenuate the oscillating terms.
    """
    tau = np.asarray(tau, dtype=float)
    ops = correlation_operators()
    base = mixed_pair_state(0.0, src)
    c_hv = np.full(tau.shape, np.trace(ops["HV"] @ base).real)
    att = _jitter_factor(det.cross_sigma_ps, src)
    if bin_ps > 0:
        x = pair_phase(bin_ps, src.fss_ueV) / 2
        att *= math.sin(x) / x if x else 1.0
    ph = pair_phase(tau, src.fss_ueV)
    amp = (1 - src.depolarization) * att
    return c_hv, amp * np.cos(ph), -amp * np.cos(ph)


def _fit_cos_amplitude(tau, y, omega, weights=None):
    m = np.column_stack([np.cos(omega * tau), np.sin(omega * tau), np.ones_like(tau)])
    sw = np.ones_like(tau) if weights is None else np.sqrt(np.asarray(weights, dtype=float))
    coef, *_ = np.linalg.lstsq(m * sw[:, None], y * sw, rcond=None)
    return float(math.hypot(coef[0], coef[1]))


def entanglement_fidelity_curve(tau, c_hv, c_da, c_rl, src: QdSourceParams,
                                det: DetectorParams, bin_ps: float = 0.0, weights=None) -> EntanglementCurve:
    """Fidelity to Phi+, Phi- and to the time-evolving state from measured correlations.

    The time-evolving target rotates with the pair phase, so its fidelity
    uses the oscillation amplitude a of (C_DA - C_RL)/2 (fitted at the known
    frequency) instead of the instantaneous values, corrected for the
    attenuation that jitter and binning impose on that amplitude. Optional
    ``weights`` (pair counts per bin) weight the fit and the mean HV
    correlation.
    """
    tau = np.asarray(tau, dtype=float)
    f_plus = entanglement_fidelity_from_correlations(c_hv, c_da, c_rl, "phi+")
    f_minus = entanglement_fidelity_from_correlations(c_hv, c_da, c_rl, "phi-")
    omega = src.fss_ueV / HBAR_UEV_PS
    amp = _fit_cos_amplitude(tau, (np.asarray(c_da) - np.asarray(c_rl)) / 2, omega, weights)
    w = np.ones_like(tau) if weights is None else np.asarray(weights, dtype=float)
    hv_mean = float(np.sum(w * np.asarray(c_hv, dtype=float)) / np.sum(w))
    att = _jitter_factor(det.cross_sigma_ps, src)
    if bin_ps > 0:
        x = omega * bin_ps / 2
        att *= math.sin(x) / x
    # the deconvolved estimate can leave [0, 1] through sampling noise alone
    f_te = np.full(tau.shape, min(1.0, max(0.0, (1 + hv_mean + 2 * amp / att) / 4)))
    return EntanglementCurve(tau, np.asarray(c_hv, float), np.asarray(c_da, float), np.asarray(c_rl, float),
                             np.asarray(f_plus), np.asarray(f_minus), f_te, amp, hv_mean)


def simulate_pair_correlations(rng: np.random.Generator, src: QdSourceParams, det: DetectorParams,
                               n_pairs: int, bin_edges):
    """Monte Carlo two-fold correlations per basis from ``n_pairs`` detected pairs each.

    Each pair is projected in the chosen basis at its true delay; the delay
    is then jittered and histogrammed. Returns ``(c_hv, c_da, c_rl, n)``
    per bin, where ``n`` is the per-basis pair count in each bin.
    """
    bin_edges = np.asarray(bin_edges, dtype=float)
    out, counts = [], []
    for basis in ("HV", "DA", "RL"):
        tau = rng.exponential(src.x_lifetime_ps, n_pairs)
        ph = pair_phase(tau, src.fss_ueV)
        lam = src.depolarization
        if basis == "HV":
            corr = np.full(n_pairs, 1 - lam)
        else:
            sign = 1.0 if basis == "DA" else -1.0
            corr = sign * (1 - lam) * np.cos(ph)
        same = rng.random(n_pairs) < (1 + corr) / 2
        meas = tau + rng.normal(0.0, det.cross_sigma_ps, n_pairs) if det.cross_sigma_ps > 0 else tau
        n_same, _ = np.histogram(meas[same], bin_edges)
        n_all, _ = np.histogram(meas, bin_edges)
        with np.errstate(invalid="ignore", divide="ignore"):
            out.append(np.where(n_all > 0, (2 * n_same - n_all) / np.maximum(n_all, 1), 0.0))
        counts.append(n_all)
    return out[0], out[1], out[2], np.minimum.reduce(counts)


def oscillation_period_fft(tau, values, pad_factor: int = 64) -> float:
    """Dominant period of a uniformly sampled oscillation (Hann window, zero padding,
    parabolic peak interpolation)."""
    tau = np.asarray(tau, dtype=float)
    y = np.asarray(values, dtype=float)
    if tau.size < 8:
        raise DomainError("need at least 8 samples")
    dt = np.diff(tau)
    if np.max(np.abs(dt - dt[0])) > 1e-9 * abs(dt[0]):
        raise DomainError("samples must be uniformly spaced")
    y = (y - y.mean()) * np.hanning(y.size)
    n = int(2 ** math.ceil(math.log2(y.size * pad_factor)))
    spec = np.abs(np.fft.rfft(y, n))
    freqs = np.fft.rfftfreq(n, dt[0])
    k = int(np.argmax(spec[1:])) + 1
    if 1 <= k < spec.size - 1:
        a, b, c = np.log(spec[k - 1:k + 2] + 1e-300)
        shift = 0.5 * (a - c) / (a - 2 * b + c) if (a - 2 * b + c) != 0 else 0.0
    else:
        shift = 0.0
    return float(1.0 / (freqs[k] + shift * (freqs[1] - freqs[0])))


# --- CSV -----------------------------------------------------------------------


def write_map_csv(cmap: CoincidenceMap, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["i_t1_idx", "i_t2_idx", "t1_ps", "t2_ps", "d3_counts", "d4_counts"])
        n1, n2 = cmap.shape
        for i in range(n1):
            for j in range(n2):
                d3, d4 = int(cmap.counts[0, i, j]), int(cmap.counts[1, i, j])
                if d3 or d4:
                    w.writerow([i, j, cmap.t1_origin + i * cmap.bin_ps,
                                cmap.t2_origin + j * cmap.bin_ps, d3, d4])


def write_sweep_csv(rows, path, labels=("H", "V", "D", "A")) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["dt1_ps", "dt2_ps", "sqrt_area_ps", "mean_f_frac", "sigma_frac", "min_f_frac",
                    "flag_all_above_75_bool"] + [f"f_{x}_frac" for x in labels])
        for r in rows:
            w.writerow([r.dt1_ps, r.dt2_ps, f"{r.sqrt_area_ps:.4f}", f"{r.mean:.6f}", f"{r.sigma_mean:.6f}",
                        f"{r.min_individual:.6f}", int(r.all_above_75)]
                       + [f"{e.value:.6f}" for e in r.fidelities])


def write_detuning_csv(points, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["delta_ghz", "f_analytic_frac", "f_mc_frac", "sigma_mc_frac", "n_mc_counts"])
        for p in points:
            if p.mc is None:
                w.writerow([f"{p.delta_ghz:.4f}", f"{p.analytic:.6f}", "", "", 0])
            else:
                w.writerow([f"{p.delta_ghz:.4f}", f"{p.analytic:.6f}", f"{p.mc.value:.6f}",
                            f"{p.mc.sigma:.6f}", p.mc.n_total])


def write_entanglement_csv(curve: EntanglementCurve, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau_ps", "c_hv_dimless", "c_da_dimless", "c_rl_dimless", "f_phi_plus_frac", "f_phi_minus_frac",
                    "f_time_evolving_frac"])
        for row in zip(curve.tau_ps, curve.c_hv, curve.c_da, curve.c_rl,
                       curve.f_phi_plus, curve.f_phi_minus, curve.f_time_evolving):
            w.writerow([f"{row[0]:.3f}"] + [f"{x:.6f}" for x in row[1:]])
