"""Parametric models of the pair source, laser input, coupler and detectors.

The two-photon interference model is a documented stand-in for a
semi-empirical source model that is not reproduced here:

* The biexciton photon has a Lorentzian line, so its first-order coherence
  decays as exp(-|t|/coh2x_ps).
* The 400 kHz laser is treated as monochromatic; a detuning delta adds the
  beat exp(2j*pi*delta*t).
* Detection timing jitter is Gaussian and blurs the measured delay.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from qrelay.errors import DomainError
from qrelay.polarization import entangled_pair_state
from qrelay.tags import Channel, TimeTagStream

FWHM_TO_SIGMA = 1.0 / (2.0 * math.sqrt(2.0 * math.log(2.0)))


def _check_nonneg(obj, *names):
    for name in names:
        value = getattr(obj, name)
        if not (value >= 0) or math.isnan(value):
            raise DomainError(f"{type(obj).__name__}.{name} must be >= 0, got {value!r}")


@dataclass(frozen=True)
class QdSourceParams:
    """Quantum-dot entangled-pair source.

    ``pair_rate_cps`` is the rate of biexciton photons reaching the relay
    coupler (detector efficiency included); ``x_rate_cps`` is the exciton
    singles rate summed over Bob's two detectors. ``antibunching_ps`` is the
    recovery time of the biexciton second-order correlation and
    ``phase_offset_rad`` a fixed phase added to the teleported state.
    """

    fss_ueV: float = 9.05
    coh2x_ps: float = 95.0
    x_lifetime_ps: float = 1000.0
    pair_rate_cps: float = 300e3
    x_rate_cps: float = 400e3
    depolarization: float = 0.0493
    linewidth_ghz: float = 3.0
    antibunching_ps: float = 500.0
    phase_offset_rad: float = 0.0

    def __post_init__(self):
        _check_nonneg(self, "fss_ueV", "coh2x_ps", "pair_rate_cps", "x_rate_cps",
                      "depolarization", "linewidth_ghz", "antibunching_ps")
        if not self.x_lifetime_ps > 0:
            raise DomainError("x_lifetime_ps must be > 0")
        if self.depolarization > 1:
            raise DomainError("depolarization must be <= 1")
        if not math.isfinite(self.phase_offset_rad):
            raise DomainError("phase_offset_rad must be finite")


@dataclass(frozen=True)
class LaserParams:
    """Weak coherent input; ``intensity_ratio`` is laser rate / detected 2X rate at the relay."""

    detuning_ghz: float = 0.0
    linewidth_khz: float = 400.0
    intensity_ratio: float = 0.9

    def __post_init__(self):
        _check_nonneg(self, "linewidth_khz", "intensity_ratio")
        if not math.isfinite(self.detuning_ghz):
            raise DomainError("detuning_ghz must be finite")


@dataclass(frozen=True)
class DetectorParams:
    """Detection chain.

    ``jitter_fwhm_ps`` is the cross-channel timing jitter, ``efficiency`` the
    probability that the exciton partner of an emitted pair is detected by
    Bob, and ``extinction_ratio_db`` the polarization extinction of the PBSs.
    """

    jitter_fwhm_ps: float = 70.0
    dark_cps: float = 100.0
    efficiency: float = 0.1
    extinction_ratio_db: float = 30.0

    def __post_init__(self):
        _check_nonneg(self, "jitter_fwhm_ps", "dark_cps", "efficiency", "extinction_ratio_db")
        if self.efficiency > 1:
            raise DomainError("efficiency must be <= 1")

    @property
    def cross_sigma_ps(self) -> float:
        """Standard deviation of the jitter on a two-channel delay."""
        return self.jitter_fwhm_ps * FWHM_TO_SIGMA

    @property
    def channel_sigma_ps(self) -> float:
        """Per-channel jitter; two channels combine to ``cross_sigma_ps``."""
        return self.cross_sigma_ps / math.sqrt(2.0)

    @property
    def leak(self) -> float:
        """Probability that a photon exits the wrong PBS port."""
        return 10.0 ** (-self.extinction_ratio_db / 10.0)


@dataclass(frozen=True)
class CouplerParams:
    """Fraction of the quantum-dot arm transmitted toward the Bell-state PBS."""

    split_ratio: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.split_ratio < 1.0:
            raise DomainError("split_ratio must lie in (0, 1)")


def mixed_pair_state(tau: float, src: QdSourceParams) -> np.ndarray:
    """(1 - lambda)|Phi(tau)><Phi(tau)| + lambda * I/4."""
    lam = src.depolarization
    return (1 - lam) * entangled_pair_state(tau, src.fss_ueV) + lam * np.eye(4) / 4


def sample_pair_emissions(rng: np.random.Generator, src: QdSourceParams, duration_s: float,
                          rate_cps: float | None = None, antibunched: bool = False):
    """Sample biexciton emission times and the delayed exciton emissions.

    Returns ``(t2x, tx)`` in ps, ``t2x`` ascending. Without antibunching the
    biexciton times are a homogeneous Poisson process; with it they form a
    two-stage renewal process whose g2 is 1 - exp(-|tau|/tau_eff), see
    :func:`biexciton_g2`.
    """
    if not duration_s > 0:
        raise DomainError("duration must be > 0")
    rate = src.pair_rate_cps if rate_cps is None else rate_cps
    span = duration_s * 1e12
    if rate <= 0:
        return np.zeros(0), np.zeros(0)
    if antibunched and src.antibunching_ps > 0:
        mean_gap = 1e12 / rate
        if mean_gap <= src.antibunching_ps:
            raise DomainError("pair rate too high for the configured antibunching time")
        n_guess = int(rate * duration_s * 1.1 + 10 * math.sqrt(rate * duration_s) + 10)
        chunks = []
        t_last = rng.uniform(0, mean_gap)
        while True:
            gaps = rng.exponential(src.antibunching_ps, n_guess) + rng.exponential(
                mean_gap - src.antibunching_ps, n_guess)
            t = t_last + np.cumsum(gaps)
            chunks.append(t[t < span])
            if t[-1] >= span:
                break
            t_last = t[-1]
        t2x = np.concatenate(chunks)
    else:
        n = rng.poisson(rate * duration_s)
        t2x = np.sort(rng.uniform(0.0, span, n))
    tx = t2x + rng.exponential(src.x_lifetime_ps, t2x.size)
    return t2x, tx


def biexciton_g2(tau, src: QdSourceParams, rate_cps: float):
    """Second-order correlation of the biexciton emission process at delay ``tau`` (ps)."""
    tau = np.abs(np.asarray(tau, dtype=float))
    if src.antibunching_ps <= 0 or rate_cps <= 0:
        return np.ones_like(tau)
    mean_gap = 1e12 / rate_cps
    inv = 1.0 / src.antibunching_ps + 1.0 / (mean_gap - src.antibunching_ps)
    return 1.0 - np.exp(-tau * inv)


def x_delay_density(t, src: QdSourceParams):
    """Probability density (1/ps) of the exciton delay after the biexciton."""
    t = np.asarray(t, dtype=float)
    return np.where(t >= 0, np.exp(-np.clip(t, 0, None) / src.x_lifetime_ps) / src.x_lifetime_ps, 0.0)


def x_delay_cell_mass(lo, hi, src: QdSourceParams):
    """Probability that the exciton delay falls in [lo, hi) (ps)."""
    lo = np.clip(np.asarray(lo, dtype=float), 0, None)
    hi = np.clip(np.asarray(hi, dtype=float), 0, None)
    tau = src.x_lifetime_ps
    return np.exp(-lo / tau) - np.exp(-hi / tau)


def interference_coherence(tau1, laser: LaserParams, src: QdSourceParams):
    """Complex two-photon coherence exp(-|tau1|/tau_c) * exp(2j*pi*delta*tau1) at true delay tau1."""
    tau1 = np.asarray(tau1, dtype=float)
    env = np.exp(-np.abs(tau1) / src.coh2x_ps) if src.coh2x_ps > 0 else (tau1 == 0).astype(float)
    return env * np.exp(2j * np.pi * laser.detuning_ghz * 1e-3 * tau1)


def _half_line(a, mu, sigma):
    # integral_0^inf exp(-a t) N(t; mu, sigma) dt, stable for complex a
    z = (a * sigma**2 - mu) / (sigma * math.sqrt(2.0))
    gauss = np.exp(-(mu**2) / (2 * sigma**2))
    with np.errstate(over="ignore", invalid="ignore"):
        pos = 0.5 * gauss * special.erfcx(z)
        neg = np.exp(-a * mu + a**2 * sigma**2 / 2) - 0.5 * gauss * special.erfcx(-z)
    return np.where(np.real(z) >= 0, pos, neg)


def blurred_coherence(tau1, laser: LaserParams, src: QdSourceParams, sigma_ps: float):
    """Expected complex coherence at measured delay ``tau1`` after Gaussian jitter."""
    tau1 = np.asarray(tau1, dtype=float)
    if sigma_ps <= 0:
        return interference_coherence(tau1, laser, src)
    omega = 2 * np.pi * laser.detuning_ghz * 1e-3
    if src.coh2x_ps <= 0:
        return np.zeros_like(tau1, dtype=complex)
    if math.isinf(src.coh2x_ps):
        return np.exp(1j * omega * tau1 - (omega * sigma_ps) ** 2 / 2)
    inv_c = 1.0 / src.coh2x_ps
    return (_half_line(inv_c - 1j * omega, tau1, sigma_ps)
            + _half_line(inv_c + 1j * omega, -tau1, sigma_ps))


def visibility_prefactor(g: float) -> float:
    """Peak visibility 2g/(1+g^2) for an intensity ratio g between the two inputs.

    Equal to 2g/(1+g)^2 * (1+g)^2/(1+g^2); it is 1 for balanced inputs.
    """
    if g < 0:
        raise DomainError("intensity ratio must be >= 0")
    return 2 * g / (1 + g * g)


def hom_visibility(tau1, laser: LaserParams, src: QdSourceParams, det: DetectorParams,
                   g: float | None = None):
    """Effective laser/biexciton interference visibility at measured delay ``tau1`` (ps).

    V(tau1) = V0(g) * [exp(-|t|/tau_c) cos(2 pi delta t)] convolved with the
    cross-channel Gaussian jitter. The signed value is returned; callers
    clamp at zero where a non-negative visibility is required.
    """
    g = laser.intensity_ratio if g is None else g
    v0 = visibility_prefactor(g)
    return v0 * np.real(blurred_coherence(tau1, laser, src, det.cross_sigma_ps))


def dark_count_stream(rng: np.random.Generator, det: DetectorParams, duration_s: float,
                      channels=tuple(Channel)) -> TimeTagStream:
    """Homogeneous Poisson dark counts on each of ``channels``."""
    if not duration_s > 0:
        raise DomainError("duration must be > 0")
    span = duration_s * 1e12
    chans, times = [], []
    for ch in channels:
        n = rng.poisson(det.dark_cps * duration_s)
        times.append(np.floor(rng.uniform(0, span, n)).astype(np.int64))
        chans.append(np.full(n, int(ch), dtype=np.uint8))
    if not times:
        return TimeTagStream.empty()
    return TimeTagStream.from_unsorted(np.concatenate(chans), np.concatenate(times))
