"""Polarization qubits, Bell states and fidelity measures.

Conventions used throughout the package:

* Single-photon basis order is (H, V).
* Two-photon states use the order (HH, HV, VH, VV) with the biexciton
  photon as the first factor.
* Bloch (Stokes) components are ``s = (<sx>, <sy>, <sz>)`` so that
  D = +x, R = +y, H = +z with ``R = (H + iV)/sqrt(2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from qrelay.errors import DomainError

# Reduced Planck constant in ueV * ps.
HBAR_UEV_PS = 658.2119569

TOL_STATE = 1e-12
TOL_DENSITY = 1e-10

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = np.stack([SIGMA_0, SIGMA_X, SIGMA_Y, SIGMA_Z])
PAULI_LABELS = ("I", "X", "Y", "Z")


@dataclass(frozen=True)
class PolarizationState:
    """Pure polarization state ``amp_h |H> + amp_v |V>``."""

    amp_h: complex
    amp_v: complex

    def __post_init__(self):
        norm = abs(self.amp_h) ** 2 + abs(self.amp_v) ** 2
        if abs(norm - 1.0) > TOL_STATE:
            raise DomainError(f"state is not normalized (|a|^2+|b|^2 = {norm!r})")

    @classmethod
    def from_vector(cls, vec) -> PolarizationState:
        vec = np.asarray(vec, dtype=complex)
        vec = vec / np.linalg.norm(vec)
        return cls(complex(vec[0]), complex(vec[1])).canonicalize()

    @property
    def vector(self) -> np.ndarray:
        return np.array([self.amp_h, self.amp_v], dtype=complex)

    def density(self) -> np.ndarray:
        v = self.vector
        return np.outer(v, v.conj())

    def canonicalize(self) -> PolarizationState:
        """Remove the global phase so the H amplitude is real and non-negative.

        For |V> (vanishing H amplitude) the V amplitude is made real instead.
        """
        ref = self.amp_h if abs(self.amp_h) > 1e-15 else self.amp_v
        phase = ref / abs(ref)
        h = self.amp_h / phase
        v = self.amp_v / phase
        if abs(self.amp_h) > 1e-15:
            h = complex(abs(h), 0.0)
        else:
            v = complex(abs(v), 0.0)
        norm = math.sqrt(abs(h) ** 2 + abs(v) ** 2)
        return PolarizationState(h / norm, v / norm)

    def angles(self) -> tuple[float, float]:
        """Return ``(theta, phi)`` of the canonical form."""
        c = self.canonicalize()
        theta = 2.0 * math.atan2(abs(c.amp_v), abs(c.amp_h))
        phi = math.atan2(c.amp_v.imag, c.amp_v.real) % (2 * math.pi) if abs(c.amp_v) > 1e-15 else 0.0
        if abs(c.amp_h) <= 1e-15:
            phi = 0.0
        return theta, phi


def pure_state(theta: float, phi: float) -> PolarizationState:
    """cos(theta/2)|H> + exp(i phi) sin(theta/2)|V>, canonicalized."""
    if not (0.0 <= theta <= math.pi):
        raise DomainError(f"theta must lie in [0, pi], got {theta!r}")
    if not (0.0 <= phi < 2 * math.pi):
        raise DomainError(f"phi must lie in [0, 2pi), got {phi!r}")
    return PolarizationState(
        complex(math.cos(theta / 2), 0.0),
        complex(math.cos(phi), math.sin(phi)) * math.sin(theta / 2),
    ).canonicalize()


H = pure_state(0.0, 0.0)
V = pure_state(math.pi, 0.0)
D = pure_state(math.pi / 2, 0.0)
A = pure_state(math.pi / 2, math.pi)
R = pure_state(math.pi / 2, math.pi / 2)
L = pure_state(math.pi / 2, 3 * math.pi / 2)

NAMED_STATES = {"H": H, "V": V, "D": D, "A": A, "R": R, "L": L}


def pair_phase(tau, s_split: float):
    """Phase S*tau/hbar (rad) accumulated by the pair at emission delay ``tau`` (ps)."""
    return np.asarray(tau, dtype=float) * s_split / HBAR_UEV_PS


def fss_period_ps(s_split: float) -> float:
    """Oscillation period 2*pi*hbar/S of the time-evolving pair state."""
    return 2 * math.pi * HBAR_UEV_PS / s_split


def entangled_pair_state(tau: float, s_split: float) -> np.ndarray:
    """Density matrix of (|HH> + exp(i S tau / hbar)|VV>)/sqrt(2)."""
    if s_split < 0:
        raise DomainError("fine-structure splitting must be non-negative")
    phase = float(pair_phase(tau, s_split))
    psi = np.array([1, 0, 0, np.exp(1j * phase)], dtype=complex) / math.sqrt(2)
    return np.outer(psi, psi.conj())


def bell_state(name: str) -> np.ndarray:
    """State vector of one of the four Bell states ``phi+``, ``phi-``, ``psi+``, ``psi-``."""
    s = 1 / math.sqrt(2)
    vectors = {
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
        "psi+": [0, s, s, 0],
        "psi-": [0, s, -s, 0],
    }
    try:
        return np.array(vectors[name], dtype=complex)
    except KeyError:
        raise DomainError(f"unknown Bell state {name!r}") from None


def bell_psi_plus_projector() -> np.ndarray:
    psi = bell_state("psi+")
    return np.outer(psi, psi.conj())


def expected_output(
    state: PolarizationState, tau2: float, s_split: float, phase_offset: float = 0.0
) -> PolarizationState:
    """Ideal teleporter output: bit flip plus the pair phase accumulated until ``tau2``.

    Returns cos(theta/2)|V> + exp(i(phi - S tau2/hbar + phase_offset)) sin(theta/2)|H>.
    """
    c = state.canonicalize()
    rot = np.exp(1j * (phase_offset - float(pair_phase(tau2, s_split))))
    return PolarizationState(complex(c.amp_v * rot), c.amp_h).canonicalize()


def as_density(x) -> np.ndarray:
    if isinstance(x, PolarizationState):
        return x.density()
    return np.asarray(x, dtype=complex)


def check_density(m, tol: float = TOL_DENSITY) -> np.ndarray:
    """Validate a density matrix (Hermitian, unit trace, PSD); return it as an array."""
    m = as_density(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DomainError(f"density matrix must be square, got shape {m.shape}")
    if np.max(np.abs(m - m.conj().T)) > tol:
        raise DomainError("density matrix is not Hermitian")
    if abs(np.trace(m) - 1.0) > tol:
        raise DomainError(f"density matrix trace is {np.trace(m).real:.3g}, expected 1")
    if np.linalg.eigvalsh((m + m.conj().T) / 2).min() < -tol:
        raise DomainError("density matrix has negative eigenvalues")
    return m


def fidelity(a, b) -> float:
    """Uhlmann fidelity (tr sqrt(sqrt(a) b sqrt(a)))**2 between two density matrices."""
    a = check_density(a)
    b = check_density(b)
    if a.shape != b.shape:
        raise DomainError("fidelity requires matrices of equal dimension")
    if a.shape == (2, 2):
        # closed form for qubits
        f = np.trace(a @ b).real + 2 * math.sqrt(
            max(np.linalg.det(a).real, 0.0) * max(np.linalg.det(b).real, 0.0)
        )
    else:
        w, u = np.linalg.eigh(a)
        sqrt_a = (u * np.sqrt(np.clip(w, 0, None))) @ u.conj().T
        ev = np.linalg.eigvalsh(sqrt_a @ b @ sqrt_a)
        f = float(np.sum(np.sqrt(np.clip(ev, 0, None)))) ** 2
    return float(min(max(f, 0.0), 1.0))


def partial_trace(rho4: np.ndarray, keep: int) -> np.ndarray:
    """Reduced state of photon ``keep`` (0 = biexciton, 1 = exciton) from a 4x4 state."""
    t = np.asarray(rho4).reshape(2, 2, 2, 2)
    if keep == 0:
        return np.einsum("ajbj->ab", t)
    if keep == 1:
        return np.einsum("iaib->ab", t)
    raise DomainError("keep must be 0 or 1")


def bloch_vector(rho) -> np.ndarray:
    rho = as_density(rho)
    return np.array([np.trace(rho @ p).real for p in PAULIS[1:]])


def density_from_bloch(s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return 0.5 * (SIGMA_0 + s[0] * SIGMA_X + s[1] * SIGMA_Y + s[2] * SIGMA_Z)


def trace_distance(a, b) -> float:
    diff = as_density(a) - as_density(b)
    return 0.5 * float(np.sum(np.abs(np.linalg.eigvalsh((diff + diff.conj().T) / 2))))


def entanglement_fidelity_from_correlations(c_hv, c_da, c_rl, target: str = "phi+"):
    """Bell-state fidelity from polarization correlations in three bases.

    ``c_hv``, ``c_da`` and ``c_rl`` are the correlation coefficients
    (N_same - N_opposite)/N_total measured in the HV, DA and RL bases, i.e.
    the expectation values <ZZ>, <XX> and <YY>. For the Phi+ target the
    fidelity is (1 + C_HV + C_DA - C_RL)/4; Phi- flips the sign of both
    equatorial correlations.

    Values are returned unclamped; estimates from noisy data can fall
    outside [0, 1].
    """
    c_hv, c_da, c_rl = (np.asarray(c, dtype=float) for c in (c_hv, c_da, c_rl))
    for name, c in (("c_hv", c_hv), ("c_da", c_da), ("c_rl", c_rl)):
        if np.any(np.abs(c) > 1 + 1e-12):
            raise DomainError(f"{name} must lie in [-1, 1]")
    if target == "phi+":
        f = (1 + c_hv + c_da - c_rl) / 4
    elif target == "phi-":
        f = (1 + c_hv - c_da + c_rl) / 4
    else:
        raise DomainError(f"unknown target {target!r}")
    return float(f) if f.ndim == 0 else f
