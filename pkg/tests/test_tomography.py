import csv
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import apply_kraus, random_channel_kraus
from qrelay.errors import DomainError, InvariantViolation
from qrelay.polarization import (
    PAULIS,
    SIGMA_0,
    SIGMA_X,
    D,
    H,
    L,
    R,
    V,
    bloch_vector,
    density_from_bloch,
    fidelity,
    trace_distance,
)
from qrelay.tomography import (
    CANONICAL_INPUTS,
    ProcessMatrix,
    SinusoidFit,
    apply_chi,
    average_gate_fidelity,
    chi_from_choi,
    choi_from_chi,
    cptp_projection,
    fidelity_landscape,
    fit_oscillation,
    physicality_projection,
    process_fidelity,
    process_tomography,
    state_tomography_oscillation,
    state_tomography_static,
    write_chi_csv,
    write_fit_csv,
    write_landscape_csv,
)

OMEGA = 9.05 / 658.2119569


def chi_of_kraus(ks):
    """Oracle: chi_mn = sum_k a_km conj(a_kn) with K_k = sum_m a_km P_m."""
    a = np.array([[np.trace(p.conj().T @ k) / 2 for p in PAULIS] for k in ks])
    return a.T @ a.conj()


def trace_norm(m):
    return float(np.sum(np.abs(np.linalg.eigvalsh((m + m.conj().T) / 2))))


# --- sinusoid fits ---------------------------------------------------------------


class TestFit:
    t = np.arange(0, 1008, 56) + 27.5

    def test_noiseless_cosine(self):
        f = fit_oscillation(self.t, np.cos(OMEGA * self.t), omega=OMEGA)
        assert f.amplitude == pytest.approx(1, abs=1e-12)
        assert f.phase == pytest.approx(0, abs=1e-12)
        assert f.residual_rms < 1e-12
        assert f.period_ps == pytest.approx(2 * math.pi / OMEGA)

    @given(st.floats(0.01, 0.5), st.floats(-math.pi + 1e-6, math.pi), st.floats(0.2, 0.8))
    def test_recovers_parameters(self, amp, phi, c):
        y = amp * np.cos(OMEGA * self.t + phi) + c
        f = fit_oscillation(self.t, y, omega=OMEGA)
        assert f.amplitude == pytest.approx(amp, abs=1e-9)
        assert math.remainder(f.phase - phi, 2 * math.pi) == pytest.approx(0, abs=1e-7)
        assert f(self.t) == pytest.approx(y, abs=1e-9)

    def test_linear_solution_beats_grid_search(self, rng):
        y = 0.3 * np.cos(OMEGA * self.t + 0.7) + 0.5 + rng.normal(0, 0.02, self.t.size)
        w = rng.uniform(0.5, 2, self.t.size)
        f = fit_oscillation(self.t, y, weights=w, omega=OMEGA)
        best = math.inf
        for amp in np.linspace(0.2, 0.4, 41):
            for ph in np.linspace(0.4, 1.0, 61):
                for c in np.linspace(0.45, 0.55, 21):
                    best = min(best, float(np.sum(w * (y - amp * np.cos(OMEGA * self.t + ph) - c) ** 2)))
        rss = float(np.sum(w * (y - f(self.t)) ** 2))
        assert rss <= best + 1e-12
        assert best - rss < 1e-3

    def test_free_frequency(self, rng):
        t = np.arange(0, 2016, 8) + 3.5
        y = 0.25 * np.cos(OMEGA * t - 1.0) + 0.5 + rng.normal(0, 0.01, t.size)
        f = fit_oscillation(t, y, free=True, omega_seed=OMEGA * 1.1)
        assert f.period_ps == pytest.approx(2 * math.pi / OMEGA, abs=2)

    def test_errors(self):
        with pytest.raises(DomainError):
            fit_oscillation(self.t[:7], np.ones(7), omega=OMEGA)
        with pytest.raises(DomainError):  # span shorter than a period
            t = np.linspace(0, 200, 20)
            fit_oscillation(t, np.cos(OMEGA * t), omega=OMEGA)
        with pytest.raises(DomainError):  # every sample at the same phase: rank deficient
            t = np.arange(10) * 2 * math.pi / OMEGA
            fit_oscillation(t, np.ones(10), omega=OMEGA)
        with pytest.raises(DomainError):
            fit_oscillation(self.t, np.ones_like(self.t))
        with pytest.raises(DomainError):
            fit_oscillation(self.t, np.ones(3), omega=OMEGA)

    def test_flat_signal_allowed(self):
        f = fit_oscillation(self.t, np.full(self.t.size, 0.9), omega=OMEGA)
        assert f.amplitude == pytest.approx(0, abs=1e-12) and f.offset == pytest.approx(0.9)


# --- state tomography ----------------------------------------------------------------


class TestStateTomography:
    def test_static_examples(self):
        assert np.allclose(state_tomography_static(0.5, 1.0, 0.5), D.density())
        assert np.allclose(state_tomography_static(1.0, 0.5, 0.5), H.density())
        assert np.allclose(state_tomography_static(0.5, 0.5, 1.0), R.density())

    def test_static_inverts_forward_model(self, rng):
        for _ in range(50):
            s = rng.normal(size=3)
            s *= rng.uniform(0, 1) / np.linalg.norm(s)
            rho = density_from_bloch(s)
            p_hv, p_da, p_rl = [(1 + x) / 2 for x in (s[2], s[0], s[1])]
            assert np.max(np.abs(state_tomography_static(p_hv, p_da, p_rl) - rho)) < 1e-12

    def test_static_errors(self):
        with pytest.raises(DomainError):
            state_tomography_static(1.2, 0.5, 0.5)

    def test_oscillation_examples(self):
        fit = SinusoidFit(0.5, 0.0, 0.5, OMEGA, 0.0)
        assert np.allclose(state_tomography_oscillation(fit, 0.5), D.density())
        # s_y = +2A sin(phi): phase +pi/2 is R
        fit = SinusoidFit(0.5, math.pi / 2, 0.5, OMEGA, 0.0)
        assert np.allclose(state_tomography_oscillation(fit, 0.5), R.density())
        fit = SinusoidFit(0.5, -math.pi / 2, 0.5, OMEGA, 0.0)
        assert np.allclose(state_tomography_oscillation(fit, 0.5), L.density())
        # a configured offset is removed
        fit = SinusoidFit(0.5, -0.3, 0.5, OMEGA, 0.0)
        assert np.allclose(state_tomography_oscillation(fit, 0.5, phase_offset=0.3), D.density())

    def test_oscillation_agrees_with_static(self, rng):
        # D fraction of a state whose phase rotates: 1/2 + (s_x cos wt - s_y sin wt)/2 ... sampled
        for _ in range(20):
            s = rng.normal(size=3)
            s *= rng.uniform(0.2, 1) / np.linalg.norm(s)
            t = np.arange(0, 1008, 56) + 27.5
            phi = math.atan2(s[1], s[0])
            a = math.hypot(s[0], s[1]) / 2
            y = 0.5 + a * np.cos(OMEGA * t + phi)
            fit = fit_oscillation(t, y, omega=OMEGA)
            rho_o = state_tomography_oscillation(fit, (1 + s[2]) / 2)
            rho_s = state_tomography_static((1 + s[2]) / 2, (1 + s[0]) / 2, (1 + s[1]) / 2)
            assert trace_distance(rho_o, rho_s) < 1e-9

    def test_oscillation_errors(self):
        with pytest.raises(DomainError):
            state_tomography_oscillation(SinusoidFit(0.6, 0, 0.5, OMEGA, 0), 0.5)
        with pytest.raises(DomainError):
            state_tomography_oscillation(SinusoidFit(0.1, 0, 0.5, OMEGA, 0), 1.5)


class TestPhysicality:
    def test_examples(self):
        rho = density_from_bloch([0.2, 0.1, -0.3])
        assert np.allclose(physicality_projection(rho), rho)
        assert np.allclose(np.linalg.eigvalsh(physicality_projection(np.diag([1.1, -0.1]))), [0, 1])

    def test_random_hermitian(self, rng):
        for _ in range(10_000):
            g = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
            h = (g + g.conj().T) / 2
            p = physicality_projection(h)
            assert np.linalg.eigvalsh(p).min() > -1e-12
            assert abs(np.trace(p) - 1) < 1e-12
            assert np.max(np.abs(physicality_projection(p) - p)) < 1e-12


# --- process tomography --------------------------------------------------------------


def outputs_of(ks):
    return [(CANONICAL_INPUTS[k], apply_kraus(ks, CANONICAL_INPUTS[k].density())) for k in CANONICAL_INPUTS]


class TestProcess:
    def test_identity_and_flip(self):
        pm = process_tomography([(s, s.density()) for s in CANONICAL_INPUTS.values()])
        assert np.allclose(pm.chi, np.diag([1, 0, 0, 0]), atol=1e-10)
        flip = process_tomography([(s, SIGMA_X @ s.density() @ SIGMA_X) for s in CANONICAL_INPUTS.values()])
        assert np.allclose(flip.chi, np.diag([0, 1, 0, 0]), atol=1e-10)
        assert process_fidelity(flip) == pytest.approx(1)

    def test_teleporter_at_zero_delay(self):
        from qrelay.polarization import expected_output

        pairs = [(s, expected_output(s, 0.0, 9.05).density()) for s in CANONICAL_INPUTS.values()]
        chi = process_tomography(pairs).chi
        assert chi[1, 1].real == pytest.approx(1, abs=1e-10)
        assert np.sum(np.abs(chi)) == pytest.approx(1, abs=1e-9)

    def test_round_trip_noiseless(self, rng):
        worst = 0.0
        for _ in range(100):
            ks = random_channel_kraus(rng, rng.integers(1, 5))
            chi = process_tomography(outputs_of(ks)).chi
            worst = max(worst, trace_norm(chi - chi_of_kraus(ks)))
        assert worst < 1e-10

    def test_round_trip_sampled(self, rng):
        worst = 0.0
        n = 100_000
        for _ in range(20):
            ks = random_channel_kraus(rng, 3)
            pairs = []
            for s, rho in outputs_of(ks):
                b = bloch_vector(rho)
                p = [rng.binomial(n // 12, (1 + x) / 2) / (n // 12) for x in (b[2], b[0], b[1])]
                pairs.append((s, state_tomography_static(*p)))
            chi = process_tomography(pairs).chi
            worst = max(worst, trace_norm(chi - chi_of_kraus(ks)))
        assert worst < 0.05

    def test_projection_makes_valid_chi(self, rng):
        for _ in range(50):
            g = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
            chi = cptp_projection((g + g.conj().T) / 8)
            ProcessMatrix(chi).validate()
            assert np.allclose(cptp_projection(chi), chi, atol=1e-8)

    def test_choi_round_trip(self, rng):
        chi = chi_of_kraus(random_channel_kraus(rng, 2))
        assert np.allclose(chi_from_choi(choi_from_chi(chi)), chi)

    def test_validate_rejects(self):
        with pytest.raises(InvariantViolation):
            ProcessMatrix(np.diag([1.0, 0.5, 0, 0]).astype(complex)).validate()
        with pytest.raises(InvariantViolation):
            ProcessMatrix(np.diag([1.2, -0.2, 0, 0]).astype(complex)).validate()

    def test_apply_matches_kraus(self, rng):
        ks = random_channel_kraus(rng, 3)
        chi = chi_of_kraus(ks)
        rho = density_from_bloch([0.1, 0.5, -0.2])
        assert np.allclose(apply_chi(chi, rho), apply_kraus(ks, rho))
        assert np.allclose(ProcessMatrix(chi).trace_condition(), SIGMA_0)

    def test_errors(self):
        with pytest.raises(DomainError):
            process_tomography([(H, H.density())] * 3)
        with pytest.raises(DomainError):
            process_tomography([(H, H.density()), (H, H.density()), (D, D.density()), (R, R.density())])
        with pytest.raises(DomainError):
            process_tomography([(H, np.eye(3))] + [(s, s.density()) for s in (V, D, R)])


def test_average_gate_fidelity():
    assert average_gate_fidelity(1.0) == 1.0
    assert average_gate_fidelity(0.754) == pytest.approx(0.836, abs=5e-4)
    assert average_gate_fidelity(0.25) == pytest.approx(0.5)


@given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
def test_average_gate_fidelity_affine(a, b, alpha):
    lhs = average_gate_fidelity(alpha * a + (1 - alpha) * b)
    rhs = alpha * average_gate_fidelity(a) + (1 - alpha) * average_gate_fidelity(b)
    assert lhs == pytest.approx(rhs, abs=1e-15)


class TestLandscape:
    def test_pure_flip(self):
        land = fidelity_landscape(np.diag([0, 1, 0, 0]).astype(complex))
        assert np.allclose(land.fidelity, 1)
        assert land.fidelity.shape == (37, 73)

    def test_depolarizing(self):
        land = fidelity_landscape(np.eye(4, dtype=complex) / 4)
        assert np.allclose(land.fidelity, 0.5)

    def test_consistent_with_tomography_inputs(self, rng):
        ks = random_channel_kraus(rng, 3)
        pairs = outputs_of(ks)
        chi = process_tomography(pairs).chi
        angles = {"H": (0, 0), "V": (math.pi, 0), "D": (math.pi / 2, 0), "R": (math.pi / 2, math.pi / 2)}
        for (s, out), key in zip(pairs, CANONICAL_INPUTS):
            th, ph = angles[key]
            land = fidelity_landscape(chi, [th], [ph])
            ideal = SIGMA_X @ s.vector
            ref = np.vdot(ideal, out @ ideal).real
            assert land.fidelity[0, 0] == pytest.approx(ref, abs=1e-6)
            assert fidelity(out, np.outer(ideal, ideal.conj())) == pytest.approx(ref, abs=1e-9)


def test_csv_writers(tmp_path):
    fit = SinusoidFit(0.3, 0.1, 0.5, OMEGA, 0.01)
    write_fit_csv([("D", "DA", fit)], tmp_path / "f.csv")
    chi = np.diag([0, 1, 0, 0]).astype(complex)
    write_chi_csv(chi, tmp_path / "c.csv", np.zeros((4, 4), complex))
    write_landscape_csv(fidelity_landscape(chi, [0, 1], [0, 2]), tmp_path / "l.csv")
    rows = list(csv.reader(open(tmp_path / "c.csv")))
    assert len(rows) == 17 and rows[6][:3] == ["X", "X", "1.000000"]
    assert len(list(csv.reader(open(tmp_path / "l.csv")))) == 5
