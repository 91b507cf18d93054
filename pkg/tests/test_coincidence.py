import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrelay.coincidence import (
    CoincidenceMap,
    FidelityEstimate,
    Window,
    analytic_correlations,
    analytic_fidelity,
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
from qrelay.errors import DomainError, PreconditionError
from qrelay.polarization import NAMED_STATES, D, fss_period_ps
from qrelay.relay import Grid, RelayScenario, analytic_threefold_density, expected_channel, simulate_threefold_tags
from qrelay.source import DetectorParams, QdSourceParams
from qrelay.tags import Channel, TimeTagStream

TAU1_CENTER = -0.5


def brute_force_map(tags: TimeTagStream, bin_ps, ranges):
    (lo1, hi1), (lo2, hi2) = ranges
    counts = np.zeros((2, (hi1 - lo1) // bin_ps, (hi2 - lo2) // bin_ps), dtype=np.int64)
    d1, d2 = tags.select(Channel.D1), tags.select(Channel.D2)
    for t in d1:
        for u in d2:
            if not lo1 <= u - t < hi1:
                continue
            for k, ch in enumerate((Channel.D3, Channel.D4)):
                for b in tags.select(ch):
                    if lo2 <= b - t < hi2:
                        counts[k, (u - t - lo1) // bin_ps, (b - t - lo2) // bin_ps] += 1
    return counts


class TestMap:
    def test_hand_fixture(self):
        tags = TimeTagStream.from_unsorted([1, 2, 3, 4, 2], [1000, 1016, 1040, 5000, 9000])
        cmap = build_threefold_map(tags, 8, ((0, 64), (0, 64)))
        assert cmap.total() == 1
        assert cmap.counts[0, 2, 5] == 1

    def test_no_herald_gives_empty_map(self):
        tags = TimeTagStream.from_unsorted([2, 3, 4, 3], [10, 20, 30, 40])
        cmap = build_threefold_map(tags)
        assert cmap.total() == 0 and cmap.counts.shape == (2, 51, 200)

    def test_unsorted_rejected(self):
        tags = TimeTagStream(np.array([1, 2], dtype=np.uint8), np.array([10, 5], dtype=np.int64))
        with pytest.raises(PreconditionError):
            build_threefold_map(tags)

    @settings(max_examples=40)
    @given(st.lists(st.tuples(st.integers(1, 4), st.integers(0, 3000)), max_size=300),
           st.sampled_from([1, 4, 8]))
    def test_matches_brute_force(self, events, bin_ps):
        ch, t = zip(*events) if events else ((), ())
        tags = TimeTagStream.from_unsorted(ch, t)
        ranges = ((-200, 200), (-96, 400))
        cmap = build_threefold_map(tags, bin_ps, ranges, chunk=7)
        assert np.array_equal(cmap.counts, brute_force_map(tags, bin_ps, ranges))

    def test_chunking_and_addition(self, rng):
        t = np.sort(rng.integers(0, 200_000, 3000))
        tags = TimeTagStream.from_unsorted(rng.integers(1, 5, t.size), t)
        a = build_threefold_map(tags, chunk=50)
        b = build_threefold_map(tags)
        assert np.array_equal(a.counts, b.counts)
        assert (a + b).total() == 2 * a.total()

    def test_expected_count_map(self):
        dens = analytic_threefold_density(RelayScenario(D), Grid(-48, 48, -48, 496, 8))
        m = expected_count_map(dens, 100.0)
        assert m.counts.dtype.kind == "i"
        assert abs(m.total() - dens.expected_counts(100.0).sum()) <= m.counts.size / 2


class TestFidelity:
    def test_estimates(self):
        e = FidelityEstimate.from_counts(40, 0)
        assert e.value == 1.0 and e.sigma == 0.0
        n = 10_000
        e = FidelityEstimate.from_counts(n // 2, n // 2)
        assert abs(e.value - 0.5) <= 1 / (2 * math.sqrt(n))
        assert e.sigma == pytest.approx(0.5 / math.sqrt(n))
        assert FidelityEstimate.from_counts(0, 0).empty

    def test_mean_of_four(self):
        ests = [FidelityEstimate(v, 0.01, 0, 0) for v in (0.941, 0.917, 0.831, 0.825)]
        mean, sig = mean_fidelity(ests)
        assert mean == pytest.approx(0.8785, abs=1e-12)
        assert sig == pytest.approx(0.005)

    def test_window_snapping(self):
        s1, s2 = Window(24, 16, TAU1_CENTER, 67.5).bin_slices(8, -204, -200)
        assert (s1.start, s1.stop) == (24, 27)
        assert (s2.start, s2.stop) == (33, 35)
        with pytest.raises(DomainError):
            Window(20, 16).bin_slices(8, 0, 0)
        with pytest.raises(DomainError):
            Window(0, 16)

    def test_window_counts_and_channels(self):
        counts = np.zeros((2, 4, 4), dtype=np.int64)
        counts[0, 1:3, 1:3] = 3
        counts[1, 1:3, 1:3] = 1
        cmap = CoincidenceMap(8, -16, -16, counts)
        e = teleportation_fidelity(cmap, Window(16, 16, TAU1_CENTER, -0.5), Channel.D3)
        assert (e.n_correct, e.n_wrong) == (12, 4)
        with pytest.raises(DomainError):
            teleportation_fidelity(cmap, Window(16, 16), Channel.D1)
        with pytest.raises(DomainError):
            teleportation_fidelity(cmap, Window(64, 16), Channel.D3)

    def test_binomial_sigma_matches_seed_spread(self):
        src = QdSourceParams(antibunching_ps=0.0)
        scn = RelayScenario(D, src=src, det=DetectorParams(jitter_fwhm_ps=0.0), bob_basis="DA",
                            background=False)
        g = Grid(-16, 16, 48, 88, 8)
        dens = analytic_threefold_density(scn, g)
        duration = 400 / (dens.total.sum() * 64)
        win = Window(32, 40, TAU1_CENTER, 67.5)
        ch = expected_channel(scn, 67.5)
        ests = []
        for seed in range(300):
            tags = simulate_threefold_tags(seed, scn, duration, g)
            cmap = build_threefold_map(tags, 8, ((g.t1_min, g.t1_max), (g.t2_min, g.t2_max)))
            ests.append(teleportation_fidelity(cmap, win, ch))
        spread = np.std([e.value for e in ests], ddof=1)
        assert np.mean([e.sigma for e in ests]) == pytest.approx(spread, rel=0.1)


def _bb84_densities():
    g = Grid()
    out = []
    for label, basis in (("H", "HV"), ("V", "HV"), ("D", "DA"), ("A", "DA")):
        scn = RelayScenario(NAMED_STATES[label], bob_basis=basis)
        t2 = heralded_peak_t2(analytic_threefold_density(scn, g))
        scn = compensated(scn, t2)
        out.append((analytic_threefold_density(scn, g), expected_channel(scn, t2), t2))
    return out


@pytest.fixture(scope="module")
def bb84():
    return _bb84_densities()


class TestSweep:
    def test_peak_position(self, bb84):
        assert all(t2 == 67.5 for _, _, t2 in bb84)

    def test_n_total_monotone(self, bb84):
        inputs = [(expected_count_map(d, 1e6), ch) for d, ch, _ in bb84]
        centers = [(TAU1_CENTER, t2) for _, _, t2 in bb84]
        rows = window_sweep(inputs, 8, 120, 160, centers)
        by = {(r.dt1_ps, r.dt2_ps): r for r in rows}
        for (a, c), r in by.items():
            for nxt in ((a + 8, c), (a, c + 8)):
                if nxt in by:
                    for x, y in zip(r.fidelities, by[nxt].fidelities):
                        assert y.n_total >= x.n_total
        best = highest_significance(rows)
        assert best is not None and best.all_above_75
        assert all(e.value > 0.75 for e in best.fidelities)
        assert best.significance == max(r.significance for r in rows if r.all_above_75)

    def test_sweep_validation(self):
        with pytest.raises(DomainError):
            window_sweep([])
        cmap = CoincidenceMap.empty(4, ((-8, 8), (0, 16)))
        with pytest.raises(DomainError):
            window_sweep([(cmap, Channel.D3)], 8, 8, 8)
        assert highest_significance([]) is None

    def test_shrinking_tau1_window_never_lowers_fidelity(self, bb84):
        for dens, ch, t2 in bb84:
            for dt2 in range(8, 401, 24):
                f = [analytic_fidelity(dens, Window(dt1, dt2, TAU1_CENTER, t2), ch)
                     for dt1 in range(8, 201, 16)]
                assert np.all(np.diff(f) <= 1e-12)

    def test_headline_window(self, bb84):
        f = [analytic_fidelity(d, Window(88, 120, TAU1_CENTER, t2), ch) for d, ch, t2 in bb84]
        assert f[0] > f[2] and f[1] > f[3]
        assert np.mean(f) == pytest.approx(0.8785, abs=0.03)
        single = [analytic_fidelity(d, Window(8, 8, TAU1_CENTER, t2), ch) for d, ch, t2 in bb84]
        assert max(single) == pytest.approx(0.945, abs=0.01)

    def test_write_sweep_csv(self, bb84, tmp_path):
        inputs = [(expected_count_map(d, 1e6), ch) for d, ch, _ in bb84]
        rows = window_sweep(inputs, 8, 16, 16, [(TAU1_CENTER, t2) for *_, t2 in bb84])
        write_sweep_csv(rows, tmp_path / "s.csv")
        with open(tmp_path / "s.csv") as fh:
            data = list(csv.DictReader(fh))
        assert len(data) == len(rows) == 4
        assert float(data[0]["mean_f_frac"]) == pytest.approx(rows[0].mean, abs=1e-6)


class TestDetuning:
    def test_curve(self, tmp_path):
        win = Window(24, 56, TAU1_CENTER, 67.5)
        base = RelayScenario(D, bob_basis="DA")
        base = compensated(base, 67.5)
        pts = detuning_sweep(base, [0, 1, 2, 3, 4, 5, 6], win, mc_heralds=None)
        f = [p.analytic for p in pts]
        assert np.all(np.diff(f) < 0)
        assert f[3] >= 0.78 and f[6] >= 2 / 3
        write_detuning_csv(pts, tmp_path / "d.csv")
        assert (tmp_path / "d.csv").read_text().startswith("delta_ghz,f_analytic_frac")

    def test_mc_point(self):
        win = Window(24, 56, TAU1_CENTER, 67.5)
        base = compensated(RelayScenario(D, bob_basis="DA"), 67.5)
        (p,) = detuning_sweep(base, [2.0], win, mc_heralds=4000, seed=3)
        assert abs(p.mc.n_total - 4000) < 5 * math.sqrt(4000)
        assert abs(p.mc.value - p.analytic) < 4 * p.mc.sigma

    def test_window_grid(self):
        g = window_grid(Window(24, 56, TAU1_CENTER, 67.5))
        assert (g.t1_min, g.t1_max, g.t2_min, g.t2_max) == (-12, 12, 40, 96)


class TestSeries:
    def test_rebinning(self):
        counts = np.arange(2 * 3 * 8).reshape(2, 3, 8)
        s = tau2_series(counts, 4, -6, 0, 12, TAU1_CENTER, 8, 8, 2)
        assert list(s.t2_ps) == [11.5, 19.5]
        assert list(s.d3) == [counts[0, :, 2:4].sum(), counts[0, :, 4:6].sum()]
        assert np.allclose(s.fraction, s.d3 / s.n)
        with pytest.raises(DomainError):
            tau2_series(counts, 4, -6, 0, 12, TAU1_CENTER, 8, 8, 4)
        with pytest.raises(DomainError):
            tau2_series(counts, 4, -6, 0, 12, TAU1_CENTER, 2, 8, 1)


class TestEntanglement:
    TAU = np.arange(0, 2000, 4.0) + 2

    def test_ideal_source(self):
        src = QdSourceParams(depolarization=0.0)
        det = DetectorParams(jitter_fwhm_ps=0.0)
        c = analytic_correlations(self.TAU, src, det)
        curve = entanglement_fidelity_curve(self.TAU, *c, src, det)
        assert np.allclose(curve.f_time_evolving, 1.0)
        assert curve.peak_fidelity == pytest.approx(1.0)

    def test_calibrated_source(self):
        src, det = QdSourceParams(), DetectorParams()
        c = analytic_correlations(self.TAU, src, det, bin_ps=4.0)
        curve = entanglement_fidelity_curve(self.TAU, *c, src, det, bin_ps=4.0)
        assert curve.f_time_evolving[0] == pytest.approx(0.963, abs=0.005)
        assert curve.peak_fidelity == pytest.approx(0.92, abs=0.01)
        assert np.max(curve.f_phi_plus) == pytest.approx(curve.peak_fidelity, abs=1e-3)
        assert oscillation_period_fft(self.TAU, curve.f_phi_plus) == pytest.approx(fss_period_ps(9.05), abs=2)

    def test_sampled_correlations(self):
        src, det = QdSourceParams(), DetectorParams()
        edges = np.arange(0, 3000, 16.0)
        tau = edges[:-1] + 8
        c_hv, c_da, c_rl, n = simulate_pair_correlations(np.random.default_rng(5), src, det, 400_000, edges)
        curve = entanglement_fidelity_curve(tau, c_hv, c_da, c_rl, src, det, bin_ps=16.0, weights=n)
        assert curve.f_time_evolving[0] == pytest.approx(0.963, abs=0.01)
        assert np.all(curve.f_time_evolving <= 1.0)

    def test_fft_validation(self):
        with pytest.raises(DomainError):
            oscillation_period_fft(np.arange(4.0), np.ones(4))
        with pytest.raises(DomainError):
            oscillation_period_fft(np.array([0, 1, 3, 4, 5, 6, 7, 8.0]), np.ones(8))

    def test_csv(self, tmp_path):
        src, det = QdSourceParams(), DetectorParams()
        curve = entanglement_fidelity_curve(self.TAU, *analytic_correlations(self.TAU, src, det), src, det)
        write_entanglement_csv(curve, tmp_path / "e.csv")
        rows = list(csv.reader(open(tmp_path / "e.csv")))
        assert rows[0][0] == "tau_ps" and len(rows) == self.TAU.size + 1


def test_map_csv(tmp_path):
    counts = np.zeros((2, 2, 3), dtype=np.int64)
    counts[1, 1, 2] = 7
    write_map_csv(CoincidenceMap(8, -8, 0, counts), tmp_path / "m.csv")
    rows = list(csv.reader(open(tmp_path / "m.csv")))
    assert rows == [["i_t1_idx", "i_t2_idx", "t1_ps", "t2_ps", "d3_counts", "d4_counts"],
                    ["1", "2", "0", "16", "0", "7"]]
