"""Three-fold coincidence model of the relay: analytic densities and Monte Carlo tags.

Charlie's Bell-state measurement combines the laser photon (input qubit) and
the biexciton (2X) photon on a beam splitter followed by a PBS. A click pair
D1 (H) and D2 (V) heralds the teleportation; Bob analyses the exciton (X)
photon in one of three bases with detectors D3 (first basis element) and D4.

Delays are ``tau1 = t_D2 - t_D1`` and ``tau2 = t_Bob - t_D1``. The heralded,
unnormalized X state is

    K = Tr_{L,2X}[(Pi (x) I)(rho_L (x) rho_pair)],

with the click operator on (laser, 2X)

    Pi = fV |HV><HV| + fH |VH><VH| + sqrt(fH fV) (G |HV><VH| + h.c.).

``fH = f_X(tau2)`` weights the alternative where the 2X photon went to D1 and
``fV = f_X(tau2 - tau1)`` the one where it went to D2; ``G`` is the complex
two-photon coherence at the true delay tau1, with the detuning measured from
the centre of the two 2X lines. The pair phase is S(tau2 - tau1/2)/hbar: the
two alternatives differ both in the X delay and in the 2X photon frequency
(the lines are S apart), and against the fixed laser frequency the two
contributions combine into a phase referenced to the midpoint of the two
possible 2X detection times. Herald classes other than laser+2X are modelled
explicitly:

* dot-dot (two 2X photons from different cascades, antibunched) and
  2X-dark heralds carry the conditional X state of one port;
* laser-laser, dark-dark and all remaining heralds are uncorrelated with Bob,
  whose clicks then come from the X singles and dark counts.

Finally every density is convolved with the detector jitter. Two clicks share
the D1 jitter, so the delay jitter is bivariate Gaussian with correlation 1/2.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import signal

from qrelay.errors import DomainError
from qrelay.polarization import (
    SIGMA_X,
    PolarizationState,
    expected_output,
    pair_phase,
)
from qrelay.source import (
    CouplerParams,
    DetectorParams,
    LaserParams,
    QdSourceParams,
    biexciton_g2,
    interference_coherence,
    sample_pair_emissions,
    x_delay_cell_mass,
    x_delay_density,
)
from qrelay.tags import Channel, TimeTagStream

BASES = ("HV", "DA", "RL")
MAX_GRID_STEP_PS = 8
JITTER_PAD_SIGMAS = 6.0
INTERACTION_WINDOW_PS = 1000.0
# Spacing of independent three-fold events on the synthetic time axis.
EVENT_SPACING_PS = 1_000_000


@dataclass(frozen=True)
class RelayScenario:
    """One teleportation configuration.

    ``bob_phase_rad`` is the phase applied by Bob's polarization controller to
    the equatorial analysis bases. ``background=False`` switches off every
    herald class except laser+2X and all uncorrelated Bob clicks.
    """

    input_state: PolarizationState
    src: QdSourceParams = field(default_factory=QdSourceParams)
    laser: LaserParams = field(default_factory=LaserParams)
    det: DetectorParams = field(default_factory=DetectorParams)
    coupler: CouplerParams = field(default_factory=CouplerParams)
    bob_basis: str = "DA"
    bob_phase_rad: float = 0.0
    background: bool = True

    def __post_init__(self):
        if self.bob_basis not in BASES:
            raise DomainError(f"bob_basis must be one of {BASES}, got {self.bob_basis!r}")
        if not math.isfinite(self.bob_phase_rad):
            raise DomainError("bob_phase_rad must be finite")


@dataclass(frozen=True)
class Grid:
    """Rectangular (tau1, tau2) grid with square bins; ranges are half-open."""

    t1_min: int = -204
    t1_max: int = 204
    t2_min: int = -200
    t2_max: int = 1400
    step: int = 8

    def __post_init__(self):
        if not 0 < self.step <= MAX_GRID_STEP_PS:
            raise DomainError(f"grid step must lie in (0, {MAX_GRID_STEP_PS}] ps")
        for lo, hi in ((self.t1_min, self.t1_max), (self.t2_min, self.t2_max)):
            if hi <= lo or (hi - lo) % self.step:
                raise DomainError("grid ranges must be non-empty multiples of the step")

    @property
    def shape(self) -> tuple[int, int]:
        return ((self.t1_max - self.t1_min) // self.step, (self.t2_max - self.t2_min) // self.step)

    @property
    def t1_centers(self) -> np.ndarray:
        return self.t1_min + self.step * (np.arange(self.shape[0]) + 0.5) - 0.5

    @property
    def t2_centers(self) -> np.ndarray:
        return self.t2_min + self.step * (np.arange(self.shape[1]) + 0.5) - 0.5


@dataclass(frozen=True)
class RateDensity3F:
    """Three-fold rate densities (counts / s / ps^2) per Bob outcome.

    Arrays have shape (2, n_tau1, n_tau2); index 0 is D3, 1 is D4. ``total``
    is the sum of the ``signal`` (laser+2X heralds), ``multiphoton``
    (dot-dot and 2X-dark heralds) and ``accidental`` components.
    """

    grid: Grid
    signal: np.ndarray
    multiphoton: np.ndarray
    accidental: np.ndarray

    @property
    def total(self) -> np.ndarray:
        return self.signal + self.multiphoton + self.accidental

    def expected_counts(self, duration_s: float) -> np.ndarray:
        return self.total * self.grid.step**2 * duration_s

    def fraction(self) -> np.ndarray:
        """D3 share of the total density (NaN where the density vanishes)."""
        tot = self.total
        with np.errstate(invalid="ignore", divide="ignore"):
            return tot[0] / (tot[0] + tot[1])


# --- rates and operators ---------------------------------------------------


@dataclass(frozen=True)
class _Rates:
    r2x: float  # 2X photons detected at Charlie, both ports
    port2x: float  # per port
    laser_h: float  # laser photons at D1
    laser_v: float  # laser photons at D2
    dark: float
    bob_eff: float
    emission: float  # cascades per second
    bob_single: float  # Bob singles per channel (X plus dark)


def emission_rate_cps(src: QdSourceParams, det: DetectorParams, coupler: CouplerParams) -> float:
    """Cascade rate implied by Bob's X singles and his conditional efficiency."""
    r2x = src.pair_rate_cps * coupler.split_ratio
    if det.efficiency <= 0 or src.x_rate_cps <= 0:
        return r2x
    rate = src.x_rate_cps / det.efficiency
    if rate < r2x:
        raise DomainError("x_rate_cps / efficiency must not fall below the 2X rate at the relay")
    return rate


def _bitflip(rho: np.ndarray, eps: float) -> np.ndarray:
    return (1 - eps) * rho + eps * SIGMA_X @ rho @ SIGMA_X


def _input_density(scn: RelayScenario) -> np.ndarray:
    return _bitflip(scn.input_state.density(), scn.det.leak)


def _rates(scn: RelayScenario) -> _Rates:
    rho = _input_density(scn)
    r2x = scn.src.pair_rate_cps * scn.coupler.split_ratio
    rl = scn.laser.intensity_ratio * r2x
    bob_eff = scn.det.efficiency if scn.src.x_rate_cps > 0 else 0.0
    return _Rates(
        r2x=r2x,
        port2x=r2x / 2,
        laser_h=rl * rho[0, 0].real,
        laser_v=rl * rho[1, 1].real,
        dark=scn.det.dark_cps,
        bob_eff=bob_eff,
        emission=emission_rate_cps(scn.src, scn.det, scn.coupler),
        bob_single=scn.src.x_rate_cps / 2 + scn.det.dark_cps,
    )


def _pair_terms(scn: RelayScenario):
    """Pair state split as P0 + e^{i phi} P1 + e^{-i phi} P1^dag, 2X port leak included."""
    lam = scn.src.depolarization
    p0 = np.zeros((4, 4), dtype=complex)
    p0[0, 0] = p0[3, 3] = (1 - lam) / 2
    p0 += lam * np.eye(4) / 4
    p1 = np.zeros((4, 4), dtype=complex)
    p1[3, 0] = (1 - lam) / 2
    flip = np.kron(SIGMA_X, np.eye(2))
    eps = scn.det.leak
    out = []
    for p in (p0, p1, p1.conj().T):
        out.append((1 - eps) * p + eps * flip @ p @ flip)
    return out


def bob_povm(scn: RelayScenario) -> np.ndarray:
    """POVM elements (D3, D4) of Bob's analyser including PBS leakage."""
    beta = scn.bob_phase_rad + (math.pi / 2 if scn.bob_basis == "RL" else 0.0)
    if scn.bob_basis == "HV":
        p = np.array([1, 0], dtype=complex)
        q = np.array([0, 1], dtype=complex)
    else:
        e = np.exp(1j * beta)
        p = np.array([1, e]) / math.sqrt(2)
        q = np.array([1, -e]) / math.sqrt(2)
    pp, qq = np.outer(p, p.conj()), np.outer(q, q.conj())
    eps = scn.det.leak
    return np.stack([(1 - eps) * pp + eps * qq, (1 - eps) * qq + eps * pp])


def _herald_operator_table(scn: RelayScenario) -> np.ndarray:
    """Tr(E_k M) for click terms (V, H, cross, cross^dag) and pair phase orders (0, +, -).

    Shape (2, 4, 3).
    """
    rho_in = _input_density(scn)
    pis = []
    for a, b in ((1, 1), (2, 2), (1, 2), (2, 1)):
        pi = np.zeros((4, 4), dtype=complex)
        pi[a, b] = 1.0
        pis.append(np.kron(pi, np.eye(2)))
    povm = bob_povm(scn)
    table = np.zeros((2, 4, 3), dtype=complex)
    for j, op in enumerate(pis):
        for p, pair in enumerate(_pair_terms(scn)):
            m = (op @ np.kron(rho_in, pair)).reshape(2, 2, 2, 2, 2, 2)
            kx = np.einsum("ijkijl->kl", m)
            for k in range(2):
                table[k, j, p] = np.trace(povm[k] @ kx)
    return table


def _conditional_outcomes(scn: RelayScenario) -> np.ndarray:
    """Bob outcome probabilities for an X photon whose 2X left via D1 (row 0) or D2 (row 1)."""
    p0 = _pair_terms(scn)[0]
    povm = bob_povm(scn)
    out = np.zeros((2, 2))
    for port in range(2):
        proj = np.zeros((2, 2))
        proj[port, port] = 1.0
        m = (np.kron(proj, np.eye(2)) @ p0).reshape(2, 2, 2, 2)
        cond = 2 * np.einsum("ikil->kl", m)
        for k in range(2):
            out[port, k] = np.trace(povm[k] @ cond).real
    return out


def _signal_weights(scn: RelayScenario, table, t1, t2, f_h, f_v):
    """Bob-outcome weights Tr(E_k K) (before the laser x 2X rate), broadcast over t1, t2."""
    phi = pair_phase(t2 - 0.5 * t1, scn.src.fss_ueV) - scn.src.phase_offset_rad
    e = np.exp(1j * phi)
    orders = (1.0, e, np.conj(e))
    gam = interference_coherence(t1, scn.laser, scn.src)
    cross = np.sqrt(f_h * f_v)
    out = []
    for k in range(2):
        terms = [sum(table[k, j, p] * orders[p] for p in range(3)) for j in range(4)]
        w = f_v * terms[0] + f_h * terms[1] + cross * (gam * terms[2] + np.conj(gam) * terms[3])
        out.append(np.clip(np.real(w), 0.0, None))
    return out


def herald_density(scn: RelayScenario, t1) -> np.ndarray:
    """D1 and D2 coincidence density (1/s/ps) at true delay ``t1`` before jitter."""
    r = _rates(scn)
    t1 = np.asarray(t1, dtype=float)
    if not scn.background:
        return (r.laser_h * r.port2x + r.port2x * r.laser_v) * 1e-12 * np.ones_like(t1)
    g2 = biexciton_g2(t1, scn.src, r.emission)
    d1 = r.laser_h + r.port2x + r.dark
    d2 = r.laser_v + r.port2x + r.dark
    return (d1 * d2 - r.port2x**2 * (1 - g2)) * 1e-12


def _multiphoton_weight(scn: RelayScenario, r: _Rates, t1):
    g2 = biexciton_g2(t1, scn.src, r.emission)
    return (r.port2x**2 * g2 + r.port2x * r.dark) * 1e-12


# --- analytic backend -------------------------------------------------------


def _jitter_pad(det: DetectorParams) -> int:
    sigma = det.cross_sigma_ps
    return int(math.ceil(JITTER_PAD_SIGMAS * sigma)) + 1 if sigma >= 0.5 else 0


def _jitter_kernel(det: DetectorParams, pad: int) -> np.ndarray:
    off = np.arange(-pad, pad + 1, dtype=float)
    u, v = np.meshgrid(off, off, indexing="ij")
    s2 = det.cross_sigma_ps**2
    # inverse of s2 * [[1, 1/2], [1/2, 1]]
    q = (4.0 / 3.0) * (u * u - u * v + v * v) / s2
    k = np.exp(-0.5 * q)
    return k / k.sum()


def _bin2d(fine: np.ndarray, grid: Grid) -> np.ndarray:
    n1, n2 = grid.shape
    s = grid.step
    return fine.reshape(n1, s, n2, s).sum(axis=(1, 3)) / (s * s)


def analytic_threefold_density(scn: RelayScenario, grid: Grid | None = None) -> RateDensity3F:
    """Expected three-fold rate densities on ``grid`` after detector jitter.

    The intrinsic densities are evaluated on a 1 ps lattice (cell k covers
    [k - 0.5, k + 0.5) ps, matching integer time tags), convolved with the
    jitter kernel and averaged into the grid bins.
    """
    grid = grid or Grid()
    r = _rates(scn)
    pad = _jitter_pad(scn.det)
    t1 = np.arange(grid.t1_min - pad, grid.t1_max + pad, dtype=float)[:, None]
    t2 = np.arange(grid.t2_min - pad, grid.t2_max + pad, dtype=float)[None, :]
    f_h = x_delay_cell_mass(t2 - 0.5, t2 + 0.5, scn.src)
    f_v = x_delay_cell_mass(t2 - t1 - 0.5, t2 - t1 + 0.5, scn.src)
    f_h = np.broadcast_to(f_h, f_v.shape)

    table = _herald_operator_table(scn)
    amp = (r.laser_h + r.laser_v) * r.r2x * 1e-12 * r.bob_eff
    sig = np.stack(_signal_weights(scn, table, t1, t2, f_h, f_v)) * amp

    if scn.background:
        cond = _conditional_outcomes(scn)
        w = _multiphoton_weight(scn, r, t1) * r.bob_eff
        mp = np.stack([w * (f_h * cond[0, k] + f_v * cond[1, k]) for k in range(2)])
    else:
        mp = np.zeros_like(sig)

    if pad:
        kernel = _jitter_kernel(scn.det, pad)
        sig = np.stack([signal.fftconvolve(a, kernel, mode="valid") for a in sig])
        mp = np.stack([signal.fftconvolve(a, kernel, mode="valid") for a in mp])
    sig = np.clip(sig, 0.0, None)
    mp = np.clip(mp, 0.0, None)

    if scn.background:
        h = herald_density(scn, t1[:, 0])
        if pad:
            off = np.arange(-pad, pad + 1, dtype=float)
            k1 = np.exp(-0.5 * (off / scn.det.cross_sigma_ps) ** 2)
            h = np.convolve(h, k1 / k1.sum(), mode="valid")
        n1, n2 = grid.shape
        h = h.reshape(n1, grid.step).mean(axis=1)
        acc_k = r.bob_single * 1e-12
        acc = np.broadcast_to(h[None, :, None] * acc_k, (2, n1, n2)).copy()
    else:
        acc = np.zeros((2,) + grid.shape)

    return RateDensity3F(
        grid=grid,
        signal=np.stack([_bin2d(a, grid) for a in sig]),
        multiphoton=np.stack([_bin2d(a, grid) for a in mp]),
        accidental=acc,
    )


def herald_rate(scn: RelayScenario, t1_range: tuple[float, float] = (-204, 204)) -> float:
    """Expected D1 and D2 coincidence rate (1/s) with measured tau1 in ``t1_range``.

    Integer-picosecond cells [lo, hi) are summed after jitter, so the result
    matches counts from integer time tags.
    """
    lo, hi = int(math.floor(t1_range[0])), int(math.ceil(t1_range[1]))
    if hi <= lo:
        raise DomainError("empty tau1 range")
    pad = _jitter_pad(scn.det)
    t1 = np.arange(lo - pad, hi + pad, dtype=float)
    h = herald_density(scn, t1)
    if pad:
        off = np.arange(-pad, pad + 1, dtype=float)
        k1 = np.exp(-0.5 * (off / scn.det.cross_sigma_ps) ** 2)
        h = np.convolve(h, k1 / k1.sum(), mode="valid")
    return float(h.sum())


def expected_channel(scn: RelayScenario, tau2: float = 0.0) -> Channel:
    """Bob channel that the ideal teleporter output at ``tau2`` lights up."""
    out = expected_output(scn.input_state, tau2, scn.src.fss_ueV, scn.src.phase_offset_rad)
    ideal = RelayScenario(scn.input_state, scn.src, scn.laser,
                          DetectorParams(jitter_fwhm_ps=0.0, dark_cps=0.0, efficiency=1.0,
                                         extinction_ratio_db=math.inf),
                          scn.coupler, scn.bob_basis, scn.bob_phase_rad)
    povm = bob_povm(ideal)
    p3 = np.trace(povm[0] @ out.density()).real
    p4 = np.trace(povm[1] @ out.density()).real
    if abs(p3 - p4) < 1e-9:
        raise DomainError("input has no definite outcome in this analysis basis")
    return Channel.D3 if p3 > p4 else Channel.D4


def compensation_phase(src: QdSourceParams, tau2: float) -> float:
    """Analyser phase that aligns the equatorial bases with the output at ``tau2``."""
    return float(pair_phase(tau2, src.fss_ueV)) - src.phase_offset_rad


# --- Monte Carlo backends ---------------------------------------------------


def _seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(seed.integers(0, 2**63, 4).tolist())
    return np.random.SeedSequence(int(seed))


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get("QRELAY_THREADS", "1")))
    except ValueError:
        raise DomainError("QRELAY_THREADS must be an integer") from None


def _run_segments(fn, seeds, args_list):
    n = worker_count()
    if n == 1 or len(args_list) == 1:
        return [fn(np.random.default_rng(s), *a) for s, a in zip(seeds, args_list)]
    with ThreadPoolExecutor(max_workers=n) as pool:
        futures = [pool.submit(fn, np.random.default_rng(s), *a) for s, a in zip(seeds, args_list)]
        return [f.result() for f in futures]


def _pick_outcome(rng, p3):
    return np.where(rng.random(np.shape(p3)) < p3, int(Channel.D3), int(Channel.D4)).astype(np.uint8)


def _signal_p3(scn: RelayScenario, table, t1, t2):
    f_h = x_delay_density(t2, scn.src)
    f_v = x_delay_density(t2 - t1, scn.src)
    w3, w4 = _signal_weights(scn, table, t1, t2, f_h, f_v)
    tot = w3 + w4
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(tot > 0, w3 / np.where(tot > 0, tot, 1.0), 0.5)


def _thinned_uniform(rng, mean_candidates, lo, hi, weight_fn, w_max):
    """Inhomogeneous Poisson points on [lo, hi) by thinning a uniform process at ``w_max``."""
    cand = rng.uniform(lo, hi, rng.poisson(mean_candidates))
    return cand[rng.random(cand.size) * w_max < weight_fn(cand)]


def _threefold_segment(rng, scn: RelayScenario, duration_s, t1r, t2r):
    """Sample (tau1, tau2, channel) for one segment before jitter."""
    r = _rates(scn)
    table = _herald_operator_table(scn)
    span1 = t1r[1] - t1r[0]
    parts = []

    # laser + 2X heralds: branch H (2X at D1), branch V (2X at D2)
    for rate, branch in ((r.port2x * r.laser_v, "H"), (r.laser_h * r.port2x, "V")):
        n = rng.poisson(rate * 1e-12 * r.bob_eff * span1 * duration_s)
        t1 = rng.uniform(*t1r, n)
        d = rng.exponential(scn.src.x_lifetime_ps, n)
        t2 = d if branch == "H" else t1 + d
        keep = (t2 >= t2r[0]) & (t2 < t2r[1])
        t1, t2 = t1[keep], t2[keep]
        parts.append((t1, t2, _pick_outcome(rng, _signal_p3(scn, table, t1, t2))))

    if scn.background:
        cond = _conditional_outcomes(scn)
        w_max = (r.port2x**2 + r.port2x * r.dark) * 1e-12
        for port in range(2):
            t1 = _thinned_uniform(rng, w_max * r.bob_eff * span1 * duration_s, *t1r,
                                  lambda x: _multiphoton_weight(scn, r, x), w_max)
            d = rng.exponential(scn.src.x_lifetime_ps, t1.size)
            t2 = d if port == 0 else t1 + d
            keep = (t2 >= t2r[0]) & (t2 < t2r[1])
            t1, t2 = t1[keep], t2[keep]
            parts.append((t1, t2, _pick_outcome(rng, np.full(t1.size, cond[port, 0]))))

        h_max = (r.laser_h + r.port2x + r.dark) * (r.laser_v + r.port2x + r.dark) * 1e-12
        span2 = t2r[1] - t2r[0]
        mean = h_max * span1 * 2 * r.bob_single * 1e-12 * span2 * duration_s
        t1 = _thinned_uniform(rng, mean, *t1r, lambda x: herald_density(scn, x), h_max)
        t2 = rng.uniform(*t2r, t1.size)
        parts.append((t1, t2, _pick_outcome(rng, np.full(t1.size, 0.5))))

    t1 = np.concatenate([p[0] for p in parts])
    t2 = np.concatenate([p[1] for p in parts])
    ch = np.concatenate([p[2] for p in parts])
    # fixed order inside the segment, independent of class layout
    order = rng.permutation(t1.size)
    sig = scn.det.channel_sigma_ps
    jit = rng.normal(0.0, sig, (3, t1.size)) if sig > 0 else np.zeros((3, t1.size))
    return t1[order], t2[order], ch[order], jit[:, order]


def simulate_threefold_tags(seed, scn: RelayScenario, duration_s: float, grid: Grid | None = None,
                            segments: int = 8) -> TimeTagStream:
    """Herald-conditioned Monte Carlo: only events that can form a three-fold in ``grid``.

    Every herald class of the analytic model is drawn as an independent
    Poisson process over the grid (padded by the jitter range before
    jitter is applied). Each event becomes its own D1, D2, Bob triple and
    triples are laid out ``EVENT_SPACING_PS`` apart, so the stream carries
    three-fold statistics only and not singles rates. Results are identical
    for any ``QRELAY_THREADS``.
    """
    if not duration_s > 0:
        raise DomainError("duration must be > 0")
    grid = grid or Grid()
    pad = _jitter_pad(scn.det)
    t1r = (grid.t1_min - pad - 0.5, grid.t1_max + pad - 0.5)
    t2r = (grid.t2_min - pad - 0.5, grid.t2_max + pad - 0.5)
    seeds = _seed_sequence(seed).spawn(segments)
    seg = duration_s / segments
    results = _run_segments(_threefold_segment, seeds, [(scn, seg, t1r, t2r)] * segments)
    t1 = np.concatenate([x[0] for x in results])
    t2 = np.concatenate([x[1] for x in results])
    bob = np.concatenate([x[2] for x in results])
    jit = np.concatenate([x[3] for x in results], axis=1)
    base = EVENT_SPACING_PS * (np.arange(t1.size, dtype=np.int64) + 1)
    reach = max(abs(t1r[0]), abs(t1r[1]), abs(t2r[0]), abs(t2r[1])) + 10 * scn.det.channel_sigma_ps
    if 2 * reach >= EVENT_SPACING_PS:
        raise DomainError("grid too wide for the event spacing")
    d1 = base + np.rint(jit[0]).astype(np.int64)
    d2 = base + np.rint(t1 + jit[1]).astype(np.int64)
    db = base + np.rint(t2 + jit[2]).astype(np.int64)
    chans = np.concatenate([np.full(t1.size, int(Channel.D1), np.uint8),
                            np.full(t1.size, int(Channel.D2), np.uint8), bob])
    return TimeTagStream.from_unsorted(chans, np.concatenate([d1, d2, db]))


def _nearest(sorted_t, query, window):
    """Index of the nearest element of ``sorted_t`` to each query within ``window``, else -1."""
    if sorted_t.size == 0:
        return np.full(query.size, -1)
    i = np.searchsorted(sorted_t, query)
    lo = np.clip(i - 1, 0, sorted_t.size - 1)
    hi = np.clip(i, 0, sorted_t.size - 1)
    pick = np.where(np.abs(sorted_t[hi] - query) < np.abs(sorted_t[lo] - query), hi, lo)
    return np.where(np.abs(sorted_t[pick] - query) <= window, pick, -1)


def _event_segment(rng, scn: RelayScenario, duration_s, offset_ps):
    r = _rates(scn)
    span = duration_s * 1e12
    src = scn.src
    t2x, tx = sample_pair_emissions(rng, src, duration_s, rate_cps=r.emission,
                                    antibunched=True) if r.emission > 0 else (np.zeros(0), np.zeros(0))
    n = t2x.size
    at_relay = rng.random(n) < (r.r2x / r.emission if r.emission > 0 else 0.0)
    at_bob = rng.random(n) < r.bob_eff
    port_d1 = rng.random(n) < 0.5  # 2X reduced state is maximally mixed

    rl = r.laser_h + r.laser_v
    n_l = rng.poisson(rl * duration_s)
    tl = np.sort(rng.uniform(0.0, span, n_l))
    laser_d1 = rng.random(n_l) < (r.laser_h / rl if rl > 0 else 0.0)
    tl_d1, tl_d2 = tl[laser_d1], tl[~laser_d1]

    # Bob outcome probability for every emitted X photon
    cond = _conditional_outcomes(scn)
    p3 = np.full(n, 0.5)
    relay_idx = np.flatnonzero(at_relay)
    p3[relay_idx] = np.where(port_d1[relay_idx], cond[0, 0], cond[1, 0])
    table = _herald_operator_table(scn)
    for d1_side in (True, False):
        idx = relay_idx[port_d1[relay_idx] == d1_side]
        partners = tl_d2 if d1_side else tl_d1
        j = _nearest(partners, t2x[idx], INTERACTION_WINDOW_PS)
        ok = j >= 0
        idx, tp = idx[ok], partners[j[ok]]
        if d1_side:
            tau1 = tp - t2x[idx]
            tau2 = tx[idx] - t2x[idx]
        else:
            tau1 = t2x[idx] - tp
            tau2 = tx[idx] - tp
        p3[idx] = _signal_p3(scn, table, tau1, tau2)

    bob_idx = np.flatnonzero(at_bob)
    bob_ch = _pick_outcome(rng, p3[bob_idx])
    d1 = np.concatenate([t2x[relay_idx[port_d1[relay_idx]]], tl_d1])
    d2 = np.concatenate([t2x[relay_idx[~port_d1[relay_idx]]], tl_d2])
    chans = [np.full(d1.size, int(Channel.D1), np.uint8), np.full(d2.size, int(Channel.D2), np.uint8), bob_ch]
    times = [d1, d2, tx[bob_idx]]
    for ch in Channel:
        k = rng.poisson(scn.det.dark_cps * duration_s)
        times.append(rng.uniform(0.0, span, k))
        chans.append(np.full(k, int(ch), np.uint8))
    t = np.concatenate(times)
    c = np.concatenate(chans)
    sig = scn.det.channel_sigma_ps
    if sig > 0:
        t = t + rng.normal(0.0, sig, t.size)
    t = np.rint(t + offset_ps).astype(np.int64)
    keep = t >= 0
    return c[keep], t[keep]


def simulate_time_tags(seed, scn: RelayScenario, duration_s: float,
                       segment_s: float = 0.25) -> TimeTagStream:
    """Event-by-event Monte Carlo of all four detector channels.

    Emission cascades (antibunched), laser photons, port choices, the Bell
    measurement click pattern and Bob's outcome are all sampled from the
    same operator model as :func:`analytic_threefold_density`. The run is
    split into segments with seeds spawned from ``seed``; each segment
    starts fresh, so correlations across segment boundaries are dropped.
    """
    if not duration_s > 0:
        raise DomainError("duration must be > 0")
    n_seg = max(1, int(math.ceil(duration_s / segment_s - 1e-9)))
    seeds = _seed_sequence(seed).spawn(n_seg)
    args = []
    for i in range(n_seg):
        seg = min(segment_s, duration_s - i * segment_s)
        args.append((scn, seg, i * segment_s * 1e12))
    parts = _run_segments(_event_segment, seeds, args)
    return TimeTagStream.from_unsorted(np.concatenate([p[0] for p in parts]),
                                       np.concatenate([p[1] for p in parts]))
