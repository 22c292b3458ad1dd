import numpy as np
import pytest
from scipy import stats

from tipcast.ews import (IndicatorSeries, SmapConfig, WindowError,
                         bb_estimate, degenerate_fingerprinting, dev,
                         extrapolate_tipping, indicator_series,
                         lag1_coefficient)
from tipcast.systems import ArgumentError


def ar1(phi, n, rng, scale=1.0):
    eps = rng.standard_normal(n)
    out = np.empty(n)
    acc = 0.0
    for i in range(n):
        acc = phi * acc + eps[i]
        out[i] = acc
    return scale * out


def ar1_driven_by_ar1(phi, rho, n, rng, burn=500):
    eps = rng.standard_normal(n + burn)
    v = np.zeros(n + burn)
    x = np.zeros(n + burn)
    for i in range(1, n + burn):
        v[i] = rho * v[i - 1] + eps[i]
        x[i] = phi * x[i - 1] + v[i]
    return x[burn:]


class TestDegenerateFingerprinting:
    def test_dominant_variance_mode(self):
        rng = np.random.default_rng(0)
        big = ar1(0.9, 20_000, rng, scale=100.0)
        tiny = rng.standard_normal(20_000) * 0.01
        est = degenerate_fingerprinting(np.column_stack([big, tiny]))
        assert est == pytest.approx(0.9, abs=0.02)

    def test_duplicated_series_equals_plain_ac(self):
        rng = np.random.default_rng(1)
        x = ar1(0.7, 5_000, rng)
        dup = np.column_stack([x, x])
        assert degenerate_fingerprinting(dup) == pytest.approx(
            lag1_coefficient(x), abs=1e-10)

    def test_white_noise_near_zero(self):
        rng = np.random.default_rng(2)
        n = 10_000
        w = rng.standard_normal((n, 2))
        assert abs(degenerate_fingerprinting(w)) < 3.0 / np.sqrt(n)

    def test_univariate_equals_lag1(self):
        rng = np.random.default_rng(3)
        x = ar1(0.5, 2_000, rng)
        assert degenerate_fingerprinting(x) == pytest.approx(
            lag1_coefficient(x), abs=1e-12)

    def test_min_window(self):
        with pytest.raises(WindowError):
            degenerate_fingerprinting(np.random.default_rng(4)
                                      .standard_normal((10, 2)))


class TestBBEstimate:
    def test_white_noise_reduction(self):
        # rho = 0: phi_b already estimates phi (eq: phi_b=(phi+rho)/(1+phi rho))
        rng = np.random.default_rng(5)
        x = ar1(0.6, 100_000, rng)
        res = bb_estimate(x)
        assert res.phi == pytest.approx(res.phi_b, abs=0.03)
        assert res.phi == pytest.approx(0.6, abs=0.03)

    @pytest.mark.parametrize("phi,rho,branch", [
        (0.6, 0.3, "phi_gt_rho"),
        (0.3, 0.6, "rho_gt_phi"),
        (0.9, 0.0, "phi_gt_rho"),
    ])
    def test_recovery(self, phi, rho, branch):
        rng = np.random.default_rng(6)
        x = ar1_driven_by_ar1(phi, rho, 100_000, rng)
        res = bb_estimate(x, branch=branch)
        assert res.phi == pytest.approx(phi, abs=0.03)
        naive = (phi + rho) / (1.0 + phi * rho)
        assert res.phi_b == pytest.approx(naive, abs=0.03)

    def test_zero_phi(self):
        rng = np.random.default_rng(7)
        x = ar1_driven_by_ar1(0.0, 0.5, 100_000, rng)
        res = bb_estimate(x, branch="rho_gt_phi")
        assert res.phi == pytest.approx(0.0, abs=0.03)

    def test_scale_invariance(self):
        rng = np.random.default_rng(8)
        x = ar1_driven_by_ar1(0.5, 0.2, 5_000, rng)
        a = bb_estimate(x)
        b = bb_estimate(x * 731.0)
        assert abs(a.phi - b.phi) < 1e-9

    def test_unknown_branch(self):
        with pytest.raises(ArgumentError):
            bb_estimate(np.zeros(100), branch="both")


class TestDev:
    def test_linear_map_e1(self):
        rng = np.random.default_rng(9)
        x = ar1(0.9, 50_000, rng)
        assert dev(x, SmapConfig(E=1)) == pytest.approx(0.9, abs=0.02)

    @pytest.mark.parametrize("E", [2, 3])
    def test_linear_map_higher_e(self, E):
        rng = np.random.default_rng(10)
        x = ar1(0.9, 50_000, rng)
        assert dev(x, SmapConfig(E=E)) == pytest.approx(0.9, abs=0.02)

    def test_oscillation_complex_pair(self):
        # period-2 sinusoid (4 samples per cycle): companion roots e^{+-i pi/2}
        t = np.arange(400)
        x = np.cos(np.pi * t / 2.0) + 1e-6 * np.sin(1.0 + t)
        val = dev(x, SmapConfig(E=2))
        assert val == pytest.approx(1.0, abs=0.01)
        _, coef = _fit_companion(x, 2)
        comp = np.array([[coef[0], coef[1]], [1.0, 0.0]])
        eig = np.linalg.eigvals(comp)
        assert np.max(np.abs(eig.imag)) > 0.5

    def test_alternation_modulus_one(self):
        x = np.array([1.0, -1.0] * 200) + 1e-9 * np.arange(400)
        assert dev(x, SmapConfig(E=2)) == pytest.approx(1.0, abs=0.01)

    def test_theta_zero_equals_global_fit(self):
        rng = np.random.default_rng(11)
        x = ar1(0.8, 2_000, rng)
        cfg = SmapConfig(E=3, tau=1, theta=0.0)
        mine = dev(x, cfg)
        _, coef = _fit_companion(x, 3)
        comp = np.zeros((3, 3))
        comp[0] = coef
        comp[1, 0] = comp[2, 1] = 1.0
        oracle = np.max(np.abs(np.linalg.eigvals(comp)))
        assert mine == pytest.approx(oracle, abs=1e-9)

    def test_scale_invariance(self):
        rng = np.random.default_rng(12)
        x = ar1(0.6, 3_000, rng)
        cfg = SmapConfig(E=2, theta=1.5)
        assert abs(dev(x, cfg) - dev(x * 1e4, cfg)) < 1e-9

    def test_short_window(self):
        with pytest.raises(WindowError):
            dev(np.arange(8.0), SmapConfig(E=3))


def _fit_companion(x, E):
    """Test-local AR(E) least squares (independent of the implementation)."""
    rows, targ = [], []
    for t in range(E - 1, len(x) - 1):
        rows.append([x[t - j] for j in range(E)])
        targ.append(x[t + 1])
    coef = np.linalg.lstsq(np.asarray(rows), np.asarray(targ), rcond=None)[0]
    return None, coef


class TestIndicatorSeries:
    def test_window_frac_one_single_point(self):
        rng = np.random.default_rng(13)
        x = ar1(0.5, 200, rng)
        mu = np.linspace(0, 1, 200)
        out = indicator_series(x, mu, "dev", window_frac=1.0)
        assert len(out.mu) == 1
        assert out.mu[0] == mu[-1]

    def test_constant_indicator_input(self):
        # pure AR(1) throughout: indicator hovers near its constant value
        rng = np.random.default_rng(14)
        x = ar1(0.5, 4_000, rng)
        mu = np.linspace(0, 1, 4_000)
        out = indicator_series(x, mu, "bb", window_frac=0.25, step=100)
        assert out.value.std() < 0.08

    def test_ramped_ar1_trends_up(self):
        rng = np.random.default_rng(15)
        n = 6_000
        phis = np.linspace(0.5, 0.99, n)
        x = np.empty(n)
        acc = 0.0
        eps = rng.standard_normal(n)
        for i in range(n):
            acc = phis[i] * acc + eps[i]
            x[i] = acc
        mu = np.linspace(0, 1, n)
        out = indicator_series(x, mu, "dev", window_frac=0.25, step=50,
                               smap=SmapConfig(E=1))
        tau = stats.kendalltau(out.mu, out.value).statistic
        assert tau > 0.5

    def test_csv_export(self, tmp_path):
        ind = IndicatorSeries(mu=np.array([0.1, 0.2]),
                              value=np.array([0.5, 0.6]),
                              method="dev", window_frac=0.5)
        p = tmp_path / "ind.csv"
        ind.to_csv(p)
        lines = p.read_text().splitlines()
        assert lines[0] == "mu,value,method,window_frac"
        assert lines[1].endswith("dev,0.5")


class TestExtrapolate:
    def test_exact_parabola_root(self):
        # tangent threshold: double root, so sqrt(disc) keeps ~1e-8 accuracy
        mu = np.linspace(0.5, 1.5, 30)
        vals = 1.0 - (mu - 2.0) ** 2
        ind = IndicatorSeries(mu=mu, value=vals, method="bb", window_frac=0.5)
        assert extrapolate_tipping(ind) == pytest.approx(2.0, abs=1e-6)

    def test_constant_below_threshold_fails(self):
        ind = IndicatorSeries(mu=np.linspace(0, 1, 20),
                              value=np.full(20, 0.5),
                              method="bb", window_frac=0.5)
        assert extrapolate_tipping(ind) is None

    def test_noisy_parabola_monte_carlo(self):
        # transversal crossing of the threshold at mu=3
        rng = np.random.default_rng(16)
        mu = np.linspace(1.0, 2.5, 120)
        clean = 1.0 + 0.6 * (mu - 3.0) - 0.1 * (mu - 3.0) ** 2
        errs = []
        for _ in range(200):
            vals = clean + 0.01 * rng.standard_normal(len(mu))
            ind = IndicatorSeries(mu=mu, value=vals, method="dev",
                                  window_frac=0.5)
            errs.append(extrapolate_tipping(ind))
        errs = np.asarray(errs)
        assert np.all(np.abs(errs - 3.0) < 0.05)

    def test_decreasing_ramp_direction(self):
        mu = np.linspace(2.0, 1.2, 40)
        vals = 1.0 - (mu - 1.0) ** 2
        ind = IndicatorSeries(mu=mu, value=vals, method="bb", window_frac=0.5)
        assert extrapolate_tipping(ind) == pytest.approx(1.0, abs=1e-6)

    def test_too_few_points(self):
        ind = IndicatorSeries(mu=np.array([0.0, 1.0]),
                              value=np.array([0.2, 0.3]),
                              method="bb", window_frac=0.5)
        with pytest.raises(ArgumentError):
            extrapolate_tipping(ind)


class TestSupplementConsistency:
    def test_indicators_rise_toward_bifurcation(self):
        # linearized system with recovery rate ramped toward 0: all three
        # indicators trend upward toward 1 (Kendall tau)
        rng = np.random.default_rng(17)
        n = 40_000
        lam = np.linspace(-1.0, -0.02, n)
        dt = 0.05
        x = np.zeros(n)
        eps = rng.standard_normal(n) * 0.05 * np.sqrt(dt)
        for i in range(1, n):
            x[i] = x[i - 1] + dt * lam[i - 1] * x[i - 1] + eps[i]
        sub = slice(0, n, 10)
        xs = x[sub]
        mu = np.linspace(0, 1, n)[sub]
        for method, cfg in (("df", None), ("bb", None),
                            ("dev", SmapConfig(E=1))):
            out = indicator_series(xs, mu, method, window_frac=0.3, step=25,
                                   smap=cfg or SmapConfig())
            tau = stats.kendalltau(out.mu, out.value).statistic
            assert tau > 0.5, method
            assert out.value[-1] > 0.8
