"""State and process tomography of the teleporter.

Single-qubit channels are written in the Pauli basis
``eps(rho) = sum_mn chi[m, n] sigma_m rho sigma_n`` with
``sigma = (I, X, Y, Z)``; trace preservation reads
``sum_mn chi[m, n] sigma_n sigma_m = I``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from qrelay.errors import DomainError, InvariantViolation
from qrelay.polarization import (
    PAULI_LABELS,
    PAULIS,
    SIGMA_0,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    PolarizationState,
    check_density,
    pure_state,
)

# --- sinusoid fits -------------------------------------------------------------


@dataclass(frozen=True)
class SinusoidFit:
    """``amplitude * cos(angular_freq * t + phase) + offset``."""

    amplitude: float
    phase: float
    offset: float
    angular_freq: float
    residual_rms: float

    def __call__(self, t):
        return self.amplitude * np.cos(self.angular_freq * np.asarray(t, float) + self.phase) + self.offset

    @property
    def period_ps(self) -> float:
        return 2 * math.pi / self.angular_freq


def _wrap(phase: float) -> float:
    """Map to (-pi, pi]."""
    p = math.remainder(phase, 2 * math.pi)
    return math.pi if p <= -math.pi else p


def _linear_fit(t, y, w, omega):
    m = np.column_stack([np.cos(omega * t), np.sin(omega * t), np.ones_like(t)])
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(m * sw[:, None], y * sw, rcond=None)
    resid = y - m @ coef
    wrss = float(np.sum(w * resid**2))
    return coef, wrss, resid


def fit_oscillation(t, y, weights=None, omega: float | None = None, free: bool = False,
                    omega_seed: float | None = None, rel_range: float = 0.3) -> SinusoidFit:
    """Weighted least-squares fit of ``A cos(omega t + phi) + c``.

    With a fixed ``omega`` the model is linear in (A cos phi, -A sin phi, c)
    and solved in closed form. With ``free=True`` the frequency is scanned on
    a grid of +-``rel_range`` around ``omega_seed`` and refined with a bounded
    scalar search, each trial solving the linear problem.
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones_like(t) if weights is None else np.asarray(weights, dtype=float)
    if t.shape != y.shape or t.shape != w.shape:
        raise DomainError("t, y and weights must have equal shapes")
    keep = w > 0
    t, y, w = t[keep], y[keep], w[keep]
    if t.size < 8:
        raise DomainError("need at least 8 weighted points")
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(t))):
        raise DomainError("non-finite samples")
    if free:
        omega_seed = omega_seed if omega_seed is not None else omega
        if omega_seed is None or omega_seed <= 0:
            raise DomainError("free-frequency fit needs a positive omega_seed")
        ref = omega_seed
    else:
        if omega is None or omega <= 0:
            raise DomainError("fixed-frequency fit needs a positive omega")
        ref = omega
    span = float(t.max() - t.min())
    if span < 2 * math.pi / (ref * (1 + (rel_range if free else 0.0))):
        raise DomainError("samples must span at least one period")
    if free:
        grid = np.linspace(ref * (1 - rel_range), ref * (1 + rel_range), 241)
        rss = np.array([_linear_fit(t, y, w, om)[1] for om in grid])
        k = int(np.argmin(rss))
        lo, hi = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
        res = optimize.minimize_scalar(lambda om: _linear_fit(t, y, w, om)[1], bounds=(lo, hi),
                                       method="bounded", options={"xatol": 1e-12 * ref})
        omega = float(res.x) if res.fun <= rss[k] else float(grid[k])
    coef, _, resid = _linear_fit(t, y, w, omega)
    m = np.column_stack([np.cos(omega * t), np.sin(omega * t), np.ones_like(t)])
    if np.linalg.matrix_rank(m * np.sqrt(w)[:, None]) < 3:
        raise DomainError("degenerate sampling: fit is not determined")
    a, b, c = coef
    amp = float(math.hypot(a, b))
    phase = _wrap(math.atan2(-b, a)) if amp > 0 else 0.0
    rms = float(math.sqrt(np.sum(w * resid**2) / np.sum(w)))
    return SinusoidFit(amp, phase, float(c), float(omega), rms)


# --- state tomography ------------------------------------------------------------


def physicality_projection(rho) -> np.ndarray:
    """Nearest physical state by eigenvalue clipping and renormalization."""
    rho = np.asarray(rho, dtype=complex)
    h = (rho + rho.conj().T) / 2
    w, u = np.linalg.eigh(h)
    w = np.clip(w, 0.0, None)
    if w.sum() <= 0:
        return np.eye(rho.shape[0], dtype=complex) / rho.shape[0]
    w = w / w.sum()
    out = (u * w) @ u.conj().T
    return (out + out.conj().T) / 2


def _density_from_stokes(s) -> np.ndarray:
    return 0.5 * (SIGMA_0 + s[0] * SIGMA_X + s[1] * SIGMA_Y + s[2] * SIGMA_Z)


def state_tomography_static(p_hv: float, p_da: float, p_rl: float) -> np.ndarray:
    """State from the first-outcome fractions (H, D, R) of three projective bases."""
    p = np.array([p_da, p_rl, p_hv], dtype=float)
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise DomainError("outcome fractions must lie in [0, 1]")
    return physicality_projection(_density_from_stokes(2 * p - 1))


def state_tomography_oscillation(fit: SinusoidFit, p_hv: float, phase_offset: float = 0.0,
                                 tol: float = 1e-9) -> np.ndarray:
    """Output state at tau2 = 0 from the DA-basis oscillation and the HV fraction.

    The D fraction oscillates as 1/2 + A cos(w tau2 + phi) with
    phi = arg(V/H) of the output at tau2 = 0. A fixed offset ``phase_offset``
    (added to the teleported phase by the source) is removed, giving
    s_x = 2A cos(phi + phase_offset) and s_y = 2A sin(phi + phase_offset).
    """
    if fit.amplitude > 0.5 + tol:
        raise DomainError("oscillation amplitude above 1/2 is not physical")
    if not 0.0 <= p_hv <= 1.0:
        raise DomainError("p_hv must lie in [0, 1]")
    ang = fit.phase + phase_offset
    s = (2 * fit.amplitude * math.cos(ang), 2 * fit.amplitude * math.sin(ang), 2 * p_hv - 1)
    return physicality_projection(_density_from_stokes(s))


# --- process tomography -----------------------------------------------------------


@dataclass(frozen=True)
class ProcessMatrix:
    chi: np.ndarray

    def apply(self, rho) -> np.ndarray:
        return apply_chi(self.chi, rho)

    def trace_condition(self) -> np.ndarray:
        """sum_mn chi_mn sigma_n sigma_m; the identity for trace-preserving maps."""
        return np.einsum("mn,nab,mbc->ac", self.chi, PAULIS, PAULIS)

    def validate(self, tol_herm: float = 1e-8, tol_tp: float = 1e-6, tol_psd: float = 1e-9) -> None:
        c = self.chi
        if np.max(np.abs(c - c.conj().T)) > tol_herm:
            raise InvariantViolation("process matrix is not Hermitian")
        if np.max(np.abs(self.trace_condition() - np.eye(2))) > tol_tp:
            raise InvariantViolation("process matrix is not trace preserving")
        if np.linalg.eigvalsh((c + c.conj().T) / 2).min() < -tol_psd:
            raise InvariantViolation("process matrix is not positive semidefinite")


def apply_chi(chi, rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.einsum("mn,mab,bc,ncd->ad", np.asarray(chi), PAULIS, rho, PAULIS)


_UNITS = [np.outer(np.eye(2)[i], np.eye(2)[j]).astype(complex) for i in range(2) for j in range(2)]


def _beta_matrix() -> np.ndarray:
    """Linear map vec(chi) -> stacked vec(eps(E_j)) for the four matrix units E_j."""
    cols = []
    for m in range(4):
        for n in range(4):
            cols.append(np.concatenate([(PAULIS[m] @ e @ PAULIS[n]).ravel() for e in _UNITS]))
    return np.array(cols).T


_BETA = _beta_matrix()
_BETA_INV = np.linalg.inv(_BETA)


def _chi_from_unit_images(images) -> np.ndarray:
    return (_BETA_INV @ np.concatenate([np.asarray(x).ravel() for x in images])).reshape(4, 4)


def chi_from_choi(choi: np.ndarray) -> np.ndarray:
    blocks = [choi[2 * i:2 * i + 2, 2 * j:2 * j + 2] for i in range(2) for j in range(2)]
    return _chi_from_unit_images(blocks)


def choi_from_chi(chi: np.ndarray) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) eps(|i><j|)."""
    return sum(np.kron(e, apply_chi(chi, e)) for e in _UNITS)


def _project_tp(j: np.ndarray) -> np.ndarray:
    d = 2
    t = j.reshape(d, d, d, d)
    tr_out = np.einsum("iaja->ij", t)
    return j - np.kron(tr_out - np.eye(d), np.eye(d)) / d


def _project_psd(j: np.ndarray) -> np.ndarray:
    w, u = np.linalg.eigh((j + j.conj().T) / 2)
    return (u * np.clip(w, 0.0, None)) @ u.conj().T


def cptp_projection(chi, max_iter: int = 20000, tol: float = 1e-12) -> np.ndarray:
    """Nearest completely positive, trace-preserving chi (Frobenius norm).

    The Choi matrix is Hermitized and then projected onto the intersection of
    the PSD cone and the trace-preserving affine set with Dykstra's
    alternating projections.
    """
    j = choi_from_chi(np.asarray(chi, dtype=complex))
    x = (j + j.conj().T) / 2
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    for _ in range(max_iter):
        y = _project_tp(x + p)
        p = x + p - y
        x_new = _project_psd(y + q)
        q = y + q - x_new
        done = np.max(np.abs(x_new - x)) < tol and np.max(np.abs(_project_tp(x_new) - x_new)) < tol
        x = x_new
        if done:
            break
    x = _project_psd(x)
    out = chi_from_choi(x)
    return (out + out.conj().T) / 2


CANONICAL_INPUTS = {"H": pure_state(0.0, 0.0), "V": pure_state(math.pi, 0.0),
                    "D": pure_state(math.pi / 2, 0.0), "R": pure_state(math.pi / 2, math.pi / 2)}


def process_tomography(pairs, project: bool = True) -> ProcessMatrix:
    """Reconstruct chi from four (input, output) density-matrix pairs.

    The inputs must span the operator space (H, V, D, R in the standard
    recipe). The images of the matrix units are obtained by linear
    combination, chi by inverting the beta tensor, and the result is
    projected onto the CPTP set unless ``project`` is False.
    """
    pairs = list(pairs)
    if len(pairs) != 4:
        raise DomainError("process tomography needs exactly four input/output pairs")
    ins, outs = [], []
    for rin, rout in pairs:
        rin = np.asarray(rin.density() if isinstance(rin, PolarizationState) else rin, dtype=complex)
        rout = np.asarray(rout, dtype=complex)
        if rin.shape != (2, 2) or rout.shape != (2, 2):
            raise DomainError("inputs and outputs must be 2x2 density matrices")
        ins.append(check_density(rin))
        outs.append(rout)
    m = np.array([r.ravel() for r in ins]).T  # columns: vec(rho_in)
    if abs(np.linalg.det(m)) < 1e-9:
        raise DomainError("input states do not span the operator space")
    coeff = np.linalg.solve(m, np.array([e.ravel() for e in _UNITS]).T)  # E_j = sum_i coeff[i, j] rho_i
    images = [sum(coeff[i, j] * outs[i] for i in range(4)) for j in range(4)]
    chi = _chi_from_unit_images(images)
    chi = (chi + chi.conj().T) / 2
    if project:
        chi = cptp_projection(chi)
    return ProcessMatrix(chi)


def process_fidelity(chi, ideal=SIGMA_X) -> float:
    """Overlap of chi with the Pauli-basis vector of the ideal unitary."""
    chi = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi)
    u = np.array([np.trace(p @ np.asarray(ideal, dtype=complex)) / 2 for p in PAULIS])
    return float(np.real(u.conj() @ chi @ u))


def average_gate_fidelity(fp: float, d: int = 2) -> float:
    """(d F_p + 1)/(d + 1)."""
    return (d * fp + 1) / (d + 1)


# --- landscape -----------------------------------------------------------------


@dataclass(frozen=True)
class Landscape:
    theta: np.ndarray
    phi: np.ndarray
    fidelity: np.ndarray  # shape (n_theta, n_phi)

    @property
    def min(self) -> float:
        return float(self.fidelity.min())

    @property
    def max(self) -> float:
        return float(self.fidelity.max())


def fidelity_landscape(chi, thetas=None, phis=None, ideal=SIGMA_X) -> Landscape:
    """F(theta, phi) = <U psi| eps(|psi><psi|) |U psi> over a grid of pure inputs."""
    chi = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi)
    thetas = np.linspace(0, math.pi, 37) if thetas is None else np.asarray(thetas, float)
    phis = np.linspace(0, 2 * math.pi, 73) if phis is None else np.asarray(phis, float)
    th, ph = np.meshgrid(thetas, phis, indexing="ij")
    psi = np.stack([np.cos(th / 2), np.exp(1j * ph) * np.sin(th / 2)], axis=-1)
    rho = psi[..., :, None] * psi[..., None, :].conj()
    out = np.einsum("mn,mab,...bc,ncd->...ad", chi, PAULIS, rho, PAULIS)
    target = psi @ np.asarray(ideal, dtype=complex).T
    f = np.real(np.einsum("...a,...ab,...b->...", target.conj(), out, target))
    return Landscape(thetas, phis, f)


# --- CSV -------------------------------------------------------------------------


def write_fit_csv(rows, path) -> None:
    """``rows``: iterable of (label, basis, SinusoidFit)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["input_label", "basis_label", "amplitude_frac", "phase_rad", "offset_frac", "omega_rad_per_ps",
                    "residual_rms_frac"])
        for label, basis, fit in rows:
            w.writerow([label, basis, f"{fit.amplitude:.6f}", f"{fit.phase:.6f}", f"{fit.offset:.6f}",
                        f"{fit.angular_freq:.8f}", f"{fit.residual_rms:.6f}"])


def write_chi_csv(chi, path, sigma=None) -> None:
    chi = chi.chi if isinstance(chi, ProcessMatrix) else np.asarray(chi)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        head = ["m_label", "n_label", "re_chi_dimless", "im_chi_dimless"]
        if sigma is not None:
            head += ["sigma_re_dimless", "sigma_im_dimless"]
        w.writerow(head)
        for m in range(4):
            for n in range(4):
                row = [PAULI_LABELS[m], PAULI_LABELS[n], f"{chi[m, n].real:.6f}", f"{chi[m, n].imag:.6f}"]
                if sigma is not None:
                    row += [f"{sigma[m, n].real:.6f}", f"{sigma[m, n].imag:.6f}"]
                w.writerow(row)


def write_landscape_csv(land: Landscape, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["theta_rad", "phi_rad", "fidelity_frac"])
        for i, th in enumerate(land.theta):
            for j, ph in enumerate(land.phi):
                w.writerow([f"{th:.6f}", f"{ph:.6f}", f"{land.fidelity[i, j]:.6f}"])

