import numpy as np
import pytest

from coinconf import StreamConfig, run_scores
from coinconf.experiments import (
    ChangepointSpec,
    coverage_metrics,
    generate_changepoint,
    local_coverage_deviation,
    online_least_squares_scores,
    random_bounded_scores,
    regret,
    rolling_mean,
    run_changepoint,
    theorem_probe,
    width_deviation,
)
from coinconf.forecasters import ols_fit


def fake_trace(covered, radius=None, score=None):
    covered = np.asarray(covered, dtype=bool)
    radius = np.ones(len(covered)) if radius is None else np.asarray(radius, float)
    return {"covered": covered, "radius": radius,
            "score": np.zeros(len(covered)) if score is None else np.asarray(score, float)}


class TestChangepoint:
    def test_defaults(self):
        spec = ChangepointSpec()
        X, y = generate_changepoint(spec)
        assert X.shape == (2000, 4) and y.shape == (2000,)
        assert spec.boundaries == [500, 1500]

    def test_noiseless_projection(self):
        X, y = generate_changepoint(ChangepointSpec(noise=0.0, seed=3))
        beta = ChangepointSpec().coefficients()
        np.testing.assert_allclose(y, np.einsum("ij,ij->i", X, beta), atol=1e-14)
        # with x = e1 the response is the first coefficient of the active segment
        assert beta[0] @ [1, 0, 0, 0] == 2 and beta[600] @ [1, 0, 0, 0] == 0

    def test_pure_function_of_seed(self):
        a = generate_changepoint(ChangepointSpec(seed=11))
        b = generate_changepoint(ChangepointSpec(seed=11))
        c = generate_changepoint(ChangepointSpec(seed=12))
        assert np.array_equal(a[1], b[1]) and not np.array_equal(a[1], c[1])

    def test_first_segment_variance(self):
        variances = [generate_changepoint(ChangepointSpec(seed=s))[1][:500].var(ddof=1)
                     for s in range(200)]
        assert abs(np.mean(variances) - 6.0) <= 0.15 * 6.0

    def test_validation(self):
        with pytest.raises(ValueError):
            ChangepointSpec(segments=())
        with pytest.raises(ValueError):
            ChangepointSpec(segments=((10, (1, 2)), (10, (1, 2, 3))))

    def test_online_scores_match_refits(self):
        X, y = generate_changepoint(ChangepointSpec(seed=1))
        y_hat, scores = online_least_squares_scores(X[:40], y[:40])
        assert np.all(y_hat[:4] == 0)
        for t in (4, 17, 39):
            assert y_hat[t] == pytest.approx(ols_fit(X[:t], y[:t]).predict(X[t]), rel=1e-9)
        np.testing.assert_array_equal(scores, np.abs(y[:40] - y_hat))

    def test_batched_scores_match_single(self):
        X, y = generate_changepoint(ChangepointSpec(seed=2))
        Xb = np.stack([X[:100], X[:100]])
        yb = np.stack([y[:100], y[:100]])
        _, sb = online_least_squares_scores(Xb, yb, decay=0.99)
        _, s1 = online_least_squares_scores(X[:100], y[:100], decay=0.99)
        np.testing.assert_allclose(sb[0], s1, rtol=1e-12)

    def test_run_requires_seeds(self):
        with pytest.raises(ValueError):
            run_changepoint([StreamConfig()], [])


class TestCoverageMetrics:
    def test_all_covered(self):
        m = coverage_metrics(fake_trace([True] * 20), window=5)
        assert m.coverage == 1.0 and np.all(m.rolling_coverage == 1.0)
        assert len(m.rolling_coverage) == 20 - 5 + 1

    def test_alternating(self):
        m = coverage_metrics(fake_trace([True, False] * 10), window=2)
        np.testing.assert_array_equal(m.rolling_coverage, 0.5)

    def test_burn_in_and_window_errors(self):
        m = coverage_metrics(fake_trace([False] * 5 + [True] * 5), window=5, burn_in=5)
        assert m.coverage == 1.0 and m.n == 5
        with pytest.raises(ValueError):
            coverage_metrics(fake_trace([True] * 3), window=4)

    def test_concatenation_is_weighted_average(self, rng):
        a = rng.random(37) < 0.8
        b = rng.random(81) < 0.9
        whole = coverage_metrics(fake_trace(np.concatenate([a, b])), window=1).coverage
        parts = (37 * coverage_metrics(fake_trace(a), window=1).coverage
                 + 81 * coverage_metrics(fake_trace(b), window=1).coverage) / 118
        assert whole == pytest.approx(parts, abs=1e-15)

    def test_mean_width_clamps_negative_radii(self):
        m = coverage_metrics(fake_trace([True] * 4, radius=[1, -1, 2, -3]), window=2)
        assert m.mean_width == pytest.approx((2 + 0 + 4 + 0) / 4)

    def test_rolling_mean_trailing(self):
        np.testing.assert_allclose(rolling_mean([1, 2, 3, 4], 2), [1.5, 2.5, 3.5])

    def test_local_deviation(self):
        dev = local_coverage_deviation(fake_trace([True, False] * 20), alpha=0.1, half_window=10)
        np.testing.assert_allclose(dev, 0.4)


class TestWidthDeviation:
    def test_constant(self):
        np.testing.assert_array_equal(width_deviation(np.full(30, 2.0)), 0.0)

    def test_alternating(self):
        dev = width_deviation(np.tile([0.0, 1.0], 10), 10)
        # five zeros and five ones, sample standard deviation
        np.testing.assert_allclose(dev, np.sqrt(10 * 0.25 / 9))
        assert dev[0] == pytest.approx(0.5270462766947299, abs=1e-12)

    def test_whole_window_is_global_std(self, rng):
        w = rng.random(25)
        assert width_deviation(w, 25)[0] == pytest.approx(w.std(ddof=1))

    def test_from_trace_and_short(self):
        tr = fake_trace([True] * 12, radius=np.full(12, 0.5))
        np.testing.assert_array_equal(width_deviation(tr), 0.0)
        with pytest.raises(ValueError):
            width_deviation(np.ones(5), 10)


class TestRegret:
    def test_constant_on_grid_radius_has_zero_regret(self, rng):
        scores = rng.uniform(0, 1, 2000)
        grid = np.linspace(0, 1.5, 1001)
        level_best = regret({"score": scores, "radius": np.zeros(2000)}, 0.1, grid)[1]
        curve, best = regret({"score": scores, "radius": np.full(2000, level_best)}, 0.1, grid)
        assert best == level_best
        np.testing.assert_array_equal(curve, 0.0)

    def test_best_fixed_is_uniform_quantile(self):
        scores = np.random.default_rng(3).uniform(0, 1, 50_000)
        grid = np.arange(0, 1.5 + 1e-9, 0.001)
        _, best = regret({"score": scores, "radius": np.zeros_like(scores)}, 0.1, grid)
        assert abs(best - 0.9) <= 0.02

    def test_ties_go_to_smaller_radius(self):
        # nine scores below and one above: the loss is flat on [9, 10] when alpha = 0.1
        scores = np.arange(1.0, 11.0)
        _, best = regret({"score": scores, "radius": np.zeros(10)}, 0.1, grid=[9.75, 9.25, 9.5])
        assert best == 9.25

    def test_grid_default(self):
        _, best = regret({"score": np.array([1.0, 2.0]), "radius": np.zeros(2)}, 0.1)
        assert 0 <= best <= 3.0


class TestProbe:
    def test_flipper_all_bounds_hold(self):
        report = theorem_probe(D=1.0, alpha=0.1, T=10_000, adversary="flipper")
        assert report.passed, report.violations
        assert report.max_step <= 3 and report.max_abs_radius <= 4 and report.min_wealth >= 0

    def test_constant_scores(self):
        assert theorem_probe(D=1.0, alpha=0.1, T=2000, adversary="constant", n_streams=20).passed

    def test_unbounded_adversary_always_misses(self):
        report = theorem_probe(D=1.0, alpha=0.1, T=10_000, adversary="unbounded")
        assert report.miscoverage == 1.0 and report.passed
        assert report.steps < 10_000  # the radius outgrows float64 first
        assert report.status("step_bound").startswith("not applicable")

    @pytest.mark.parametrize("D", [0.1, 1.0, 10.0])
    @pytest.mark.parametrize("alpha", [0.05, 0.1, 0.2])
    def test_random_bounded_streams(self, D, alpha):
        report = theorem_probe(D=D, alpha=alpha, T=2000, adversary="random", n_streams=200,
                               seed=int(D * 100 + alpha * 1000))
        assert report.passed, report.violations

    def test_detects_violations(self):
        # scores far beyond the declared D break the iterate bounds
        scores = np.full((1, 500), 50.0)
        report = theorem_probe(D=0.1, alpha=0.1, scores=scores)
        assert not report.passed
        stream, step = report.first_violation["radius_bound"]
        assert stream == 0 and step > 1

    def test_random_streams_bounded(self, rng):
        s = random_bounded_scores(50, 300, 2.5, rng)
        assert s.shape == (50, 300) and s.min() >= 0 and s.max() <= 2.5

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            theorem_probe(alpha=0.6)
        with pytest.raises(ValueError):
            theorem_probe(D=0)
        with pytest.raises(ValueError):
            theorem_probe(adversary="nope")

    def test_extrema_recorded(self):
        report = theorem_probe(T=100)
        assert set(report.extrema) == {"max_radius", "min_radius", "max_abs_step", "min_wealth"}
        assert len(report.extrema["max_radius"]) == 100


class TestUniformRuns:
    def test_long_run_coverage(self, uniform_scores):
        tr = run_scores(uniform_scores, StreamConfig())
        assert abs(coverage_metrics(tr, window=100).coverage - 0.9) <= 0.01

    def test_kt_average_regret_small(self, uniform_scores):
        tr = run_scores(uniform_scores[:50_000], StreamConfig())
        curve, _ = regret(tr, 0.1)
        assert curve[-1] / 50_000 <= 0.01
