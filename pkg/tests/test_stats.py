"""Detector statistics: pinned values, brute-force oracles, fits."""

import math

import numpy as np
import pytest

from kipo.stats import (
    dcr,
    e_of_n,
    efficiency,
    fit_e_of_n,
    optimal_n,
    optimal_n_real,
    photons_from_energy,
    roc,
    sensitivity_fit,
    wilson_interval,
)


class TestEfficiency:
    def test_perfect_detector(self):
        s = efficiency(100, 100, 0, 100)
        assert s.e == 1.0
        assert s.p_detect == 1.0 and s.p_dark == 0.0

    def test_uninformative_detector(self):
        s = efficiency(37, 100, 37, 100)
        assert s.e == 0.0

    def test_paper_best_single_pulse(self):
        s = efficiency(9800, 10_000, 0, 10_000)
        assert s.e == pytest.approx(0.98, abs=1e-12)
        assert s.ci_low < 0.98 < s.ci_high

    def test_wilson_pinned(self):
        # hand evaluation of the score interval at k=8, n=10, z=1.95996398
        lo, hi = wilson_interval(8, 10)
        assert lo == pytest.approx(0.4901624715, abs=1e-9)
        assert hi == pytest.approx(0.9433178485, abs=1e-9)

    def test_wilson_behaved_at_edges(self):
        lo, hi = wilson_interval(0, 50)
        assert lo == 0.0 and 0.0 < hi < 0.15
        lo, hi = wilson_interval(50, 50)
        assert 0.85 < lo < 1.0 and hi == 1.0

    def test_ci_brackets_e_and_stays_in_range(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            n = int(rng.integers(1, 500))
            ks = int(rng.integers(0, n + 1))
            kn = int(rng.integers(0, n + 1))
            s = efficiency(ks, n, kn, n)
            assert -1.0 <= s.ci_low <= s.e <= s.ci_high <= 1.0

    def test_zero_shots_rejected(self):
        with pytest.raises(ValueError):
            efficiency(0, 0, 0, 10)


class TestDcr:
    def test_paper_values(self):
        # n=13 clicks in 1e4 shots of 120 us, all clicks at the window end
        out = dcr([120e-6] * 13, 10_000, 120e-6)
        assert out.rate_hz == pytest.approx(10.8333333, rel=1e-6)
        assert abs(out.rate_hz - 10.8) / 10.8 < 0.005
        assert out.floor_hz == pytest.approx(0.8333333, rel=1e-6)

    def test_zero_clicks_reports_floor(self):
        out = dcr([], 10_000, 120e-6)
        assert out.rate_hz == 0.0
        assert out.floor_hz == pytest.approx(1.0 / (10_000 * 120e-6), rel=1e-12)

    def test_single_midwindow_click(self):
        tau = 7e-5
        out = dcr([tau / 2], 1, tau)
        assert out.rate_hz == pytest.approx(2.0 / tau, rel=1e-12)

    def test_end_of_window_clicks_reduce_to_simple_rate(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            n = int(rng.integers(1, 40))
            shots = int(rng.integers(n, 5000))
            tau = rng.uniform(1e-5, 1e-3)
            out = dcr([tau] * n, shots, tau)
            assert out.rate_hz == pytest.approx(n / (shots * tau), rel=1e-12)

    def test_out_of_range_click_rejected(self):
        with pytest.raises(ValueError):
            dcr([2e-4], 10, 1e-4)


class TestRoc:
    def test_diagonal_is_random_classifier(self):
        sweep = [efficiency(k, 100, k, 100) for k in (5, 25, 50, 80)]
        assert roc(sweep).auc == pytest.approx(0.5, abs=1e-12)

    def test_single_perfect_point(self):
        assert roc([efficiency(10, 10, 0, 10)]).auc == pytest.approx(1.0, abs=1e-12)

    def test_piecewise_linear_sweep(self):
        # p_detect = min(1, 2 p_dark): area = 1/4 (triangle to the knee at
        # p_dark=0.5) + 1/2 (flat top) = 0.75, exact under the trapezoid rule
        # because the knee is a sample point.
        sweep = [
            efficiency(int(round(min(1.0, 2 * q) * 1000)), 1000, int(q * 1000), 1000)
            for q in (0.0, 0.25, 0.5, 0.75, 1.0)
        ]
        assert roc(sweep).auc == pytest.approx(0.75, abs=1e-12)

    def test_points_sorted_by_dark_probability(self):
        sweep = [efficiency(90, 100, 30, 100), efficiency(50, 100, 5, 100)]
        curve = roc(sweep)
        assert curve.points == sorted(curve.points)


class TestEOfN:
    def test_reduces_to_single_shot(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            p, q = sorted(rng.uniform(0, 1, 2))[::-1]
            assert e_of_n(1, p, q) == pytest.approx(p - q, rel=1e-12, abs=1e-12)

    def test_perfect_for_all_n(self):
        for n in (1, 2, 13, 100):
            assert e_of_n(n, 1.0, 0.0) == 1.0

    def test_pinned_example(self):
        # 0.95**10 - 0.7**10 = 0.5704894143
        assert e_of_n(10, 0.3, 0.05) == pytest.approx(0.5704894143, abs=1e-10)

    def test_bounded_and_positive_when_informative(self):
        rng = np.random.default_rng(2)
        for _ in range(200):
            p, q = rng.uniform(0, 1, 2)
            n = int(rng.integers(1, 200))
            val = e_of_n(n, p, q)
            assert -1.0 <= val <= 1.0
            if p > q:
                assert e_of_n(n, p, q) > 0.0


class TestOptimalN:
    def test_matches_brute_force(self):
        # oracle: exhaustive argmax over n in [1, 1e4]
        rng = np.random.default_rng(101)
        ns = np.arange(1, 10_001)
        for _ in range(1000):
            q = rng.uniform(1e-4, 0.6)
            p = rng.uniform(q + 1e-4, 0.999)
            vals = (1 - q) ** ns - (1 - p) ** ns
            brute = int(ns[np.argmax(vals)])
            mine = optimal_n(p, q)
            assert e_of_n(mine, p, q) == pytest.approx(
                e_of_n(brute, p, q), abs=1e-14
            )
            assert mine <= brute  # ties resolve to the smaller n

    def test_real_valued_optimum_is_stationary(self):
        # finite-difference oracle for dE/dn = 0 at the continuous optimum
        for p, q in [(0.3, 0.05), (0.9, 0.1), (0.15, 0.12)]:
            n_star = optimal_n_real(p, q)
            h = 1e-6 * n_star

            def e_cont(n):
                return (1 - q) ** n - (1 - p) ** n

            deriv = (e_cont(n_star + h) - e_cont(n_star - h)) / (2 * h)
            scale = abs(e_cont(n_star)) / n_star
            assert abs(deriv) < 1e-6 * scale

    def test_no_finite_optimum_without_dark_counts(self):
        assert optimal_n(0.4, 0.0) is None

    def test_monotone_e_when_dark_counts_vanish(self):
        vals = [e_of_n(n, 0.4, 0.0) for n in range(1, 60)]
        assert all(b > a for a, b in zip(vals, vals[1:]))

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(ValueError):
            optimal_n_real(0.2, 0.4)
        with pytest.raises(ValueError):
            optimal_n_real(0.2, 0.0)

    def test_log_ratio_scaling(self):
        # optimum grows linearly with ln(p/q): linear fit R^2 > 0.99
        for p in (0.3, 0.5, 0.9):
            eps = np.geomspace(10, 1e4, 25)
            n_star = np.array([optimal_n_real(p, p / e) for e in eps])
            x = np.log(eps)
            coeffs = np.polyfit(x, n_star, 1)
            fitted = np.polyval(coeffs, x)
            ss_res = np.sum((n_star - fitted) ** 2)
            ss_tot = np.sum((n_star - n_star.mean()) ** 2)
            assert 1 - ss_res / ss_tot > 0.99


class TestFitEOfN:
    def test_noise_free_round_trip(self):
        p_true, q_true = 0.4, 0.1
        data = [(n, e_of_n(n, p_true, q_true), 1.0) for n in (1, 2, 3, 5, 8, 13, 20)]
        p, q, res = fit_e_of_n(data)
        assert p == pytest.approx(p_true, abs=1e-4)
        assert q == pytest.approx(q_true, abs=1e-4)
        assert res < 1e-6

    def test_single_n_underdetermined(self):
        with pytest.raises(ValueError):
            fit_e_of_n([(1, 0.3, 1.0), (1, 0.31, 1.0)])

    def test_binomial_noise_calibration(self):
        # Monte-Carlo calibration: with 1e3 shots per point the fitted
        # probabilities should land within a 95% binomial interval of the
        # generator values in at least ~90% of trials.
        rng = np.random.default_rng(77)
        p_true, q_true = 0.35, 0.06
        shots = 1000
        ns = (1, 2, 4, 7, 12, 20)
        half_p = 1.96 * math.sqrt(p_true * (1 - p_true) / shots)
        half_q = 1.96 * math.sqrt(q_true * (1 - q_true) / shots)
        hits = 0
        trials = 100
        for _ in range(trials):
            data = []
            for n in ns:
                clicks_s = rng.binomial(shots, 1 - (1 - p_true) ** n)
                clicks_ns = rng.binomial(shots, 1 - (1 - q_true) ** n)
                e_meas = clicks_s / shots - clicks_ns / shots
                data.append((n, e_meas, 1.0))
            p, q, _ = fit_e_of_n(data)
            if abs(p - p_true) < half_p and abs(q - q_true) < half_q:
                hits += 1
        assert hits >= 0.9 * trials


class TestSensitivityFit:
    def test_round_trip(self):
        j_half = 3.9e-21
        k = 5.0
        x = np.log10(np.geomspace(3e-22, 6e-20, 12))
        e = 1.0 / (1.0 + np.exp(-k * (x - math.log10(j_half))))
        j, slope = sensitivity_fit(list(zip(10.0**x, e)))
        assert j == pytest.approx(j_half, rel=0.02)
        assert slope == pytest.approx(k, rel=0.05)

    def test_partial_saturation_round_trip(self):
        # detector that tops out below unity still has a 0.5 crossing
        j_half_gen = 2e-20
        a, k = 0.9, 6.0
        x = np.log10(np.geomspace(1e-21, 4e-19, 14))
        e = a / (1.0 + np.exp(-k * (x - math.log10(j_half_gen))))
        j, _ = sensitivity_fit(list(zip(10.0**x, e)))
        # crossing of 0.5 for A=0.9 sits above the logistic midpoint
        x_half = math.log10(j_half_gen) - math.log(a / 0.5 - 1.0) / k
        assert j == pytest.approx(10**x_half, rel=0.02)

    def test_decreasing_data_rejected(self):
        x = np.geomspace(1e-21, 1e-19, 8)
        e = np.linspace(0.9, 0.05, 8)
        with pytest.raises(ValueError, match="increasing"):
            sensitivity_fit(list(zip(x, e)))

    def test_too_few_points_rejected(self):
        with pytest.raises(ValueError, match="4 points"):
            sensitivity_fit([(1e-21, 0.1), (2e-21, 0.5), (4e-21, 0.9)])

    def test_no_transition_rejected(self):
        x = np.geomspace(1e-21, 1e-19, 8)
        e = np.full(8, 0.02)
        with pytest.raises((ValueError, RuntimeError)):
            sensitivity_fit(list(zip(x, e)))


class TestPhotons:
    def test_paper_anchor_values(self):
        # 3.9 zJ at 7.742 GHz -> 760.2 photons, inside the paper's quoted
        # calibration window 601..952; 0.21 zJ -> 40.9, inside 33..52.
        n = photons_from_energy(3.9e-21, 7.742e9)
        assert n == pytest.approx(760.25, abs=5)
        assert 601 <= n <= 952
        n2 = photons_from_energy(0.21e-21, 7.742e9)
        assert n2 == pytest.approx(40.94, abs=1)
        assert 33 <= n2 <= 52

    def test_zero_energy(self):
        assert photons_from_energy(0.0, 7.742e9) == 0.0

    def test_invalid_rejected(self):
        with pytest.raises(ValueError):
            photons_from_energy(-1e-21, 7e9)
        with pytest.raises(ValueError):
            photons_from_energy(1e-21, 0.0)


class TestBernoulliConsistency:
    def test_cpmg_monte_carlo_matches_closed_form(self):
        # Per-repetition Bernoulli simulation of the latched protocol: a shot
        # clicks if any of its n repetitions fires. The empirical efficiency
        # must match E(n) within 3 sigma binomial error at 1e4 trials.
        rng = np.random.default_rng(2024)
        p, q = 0.22, 0.04
        trials = 10_000
        for n in (1, 5, 13, 20):
            fired_s = rng.random((trials, n)) < p
            fired_ns = rng.random((trials, n)) < q
            e_mc = fired_s.any(axis=1).mean() - fired_ns.any(axis=1).mean()
            expected = e_of_n(n, p, q)
            sigma = math.sqrt(
                (1 - (1 - p) ** n) * (1 - p) ** n / trials
                + (1 - (1 - q) ** n) * (1 - q) ** n / trials
            )
            assert abs(e_mc - expected) < 3 * sigma + 1e-12
