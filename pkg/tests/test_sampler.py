import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats
from scipy.special import log_ndtr, logsumexp

from gaussys import measures as ms
from gaussys import sampler
from gaussys.analytic import PairSpec, onedim_intensity, pair_grid_law
from gaussys.processes import FBM, GridLaw, Kernel, NotPSDError, ProcessSpec, SelfSimilarDrift, StationaryKernel
from gaussys.sampler import (
    SimulationConfig,
    WindowError,
    pivoted_cholesky,
    replicate_rng,
    sample_paths,
    sample_poisson_starts,
    sampling_window,
    simulate_system,
    truncation_bound,
    write_samples_csv,
)
from gaussys.verify import CountTable, estimate_intensity


def brown_resnick():
    return PairSpec(ms.exponential(1.0), ProcessSpec(FBM(1.0, SelfSimilarDrift(1.0, 0.0))))


def frozen():
    # xi identically zero: a stationary kernel with zero variance
    return ProcessSpec(StationaryKernel(Kernel("exp", variance=0.0)))


def _log_box_prob(x, lo, hi, s):
    """log P(x + s Z in [lo, hi]) without cancellation in either tail."""
    u1, u2 = (x - hi) / s, (x - lo) / s
    if u2 < 0:
        big, small = log_ndtr(u2), log_ndtr(u1)
    else:
        big, small = log_ndtr(-u1), log_ndtr(-u2)
    return big + math.log1p(-math.exp(small - big)) if small < big else -math.inf


def exact_outside_integral(pair, times, boxes, a, b):
    """sum_j int_{R minus [a, b]} P(x + xi(t_j) in box_j) m(dx) for an exp-mixture m, by quadrature."""
    law = pair_grid_law(pair, times)
    w = np.array([t[0] for t in pair.measure.exp_terms])
    k = np.array([t[1] for t in pair.measure.exp_terms])
    total = 0.0
    for j, (lo, hi) in enumerate(boxes):
        mu, s = law.mean_vector[j], math.sqrt(law.covariance_matrix[j, j])
        if s == 0:
            # deterministic displacement: starters in [lo - mu, hi - mu] outside the window
            total += float(ms.mass_on_interval(pair.measure, lo - mu, min(hi - mu, a)) if lo - mu < a else 0.0)
            total += float(ms.mass_on_interval(pair.measure, max(lo - mu, b), hi - mu) if hi - mu > b else 0.0)
            continue

        def f(x):
            return math.exp(logsumexp(-k * x, b=w) + _log_box_prob(x + mu, lo, hi, s))

        total += integrate.quad(f, -np.inf, a, epsabs=1e-14, limit=200)[0]
        total += integrate.quad(f, b, np.inf, epsabs=1e-14, limit=200)[0]
    return total


# -- sampling window ---------------------------------------------------------------


def test_window_lebesgue_bound_matches_exact_integral():
    pair = PairSpec(ms.lebesgue(), ProcessSpec(FBM(1.0)))
    a, b, bound = sampling_window(pair, [1.0], [(0.0, 1.0)], 1e-6)
    assert a < 0 and b > 1
    assert bound <= 1e-6
    assert bound == pytest.approx(exact_outside_integral(pair, [1.0], [(0.0, 1.0)], a, b), rel=1e-6)
    # padding of order sigma times a Gaussian tail quantile
    assert 3.0 < -a < 8.0


def test_window_deterministic_paths_is_hull():
    pair = PairSpec(ms.exponential(1.0), frozen())
    a, b, bound = sampling_window(pair, [0.0, 1.0], [(0.0, 1.0), (-2.0, 0.5)], 1e-8)
    assert (a, b, bound) == (-2.0, 1.0, 0.0)


def test_window_brown_resnick_left_side_dominates():
    pair = brown_resnick()
    a, b, bound = sampling_window(pair, [0.0, 1.0], [(0.0, 1.0), (-1.0, 1.0)], 1e-4)
    assert bound <= 1e-4
    assert -a > b
    assert bound == pytest.approx(exact_outside_integral(pair, [0.0, 1.0], [(0.0, 1.0), (-1.0, 1.0)], a, b), rel=1e-6)


def test_bound_decreases_in_padding():
    pair = brown_resnick()
    boxes = [(0.0, 1.0), (-1.0, 1.0)]
    vals = [truncation_bound(pair, [0.0, 1.0], boxes, -1.0 - p, 1.0 + p) for p in np.linspace(0, 8, 17)]
    assert all(x >= y for x, y in zip(vals, vals[1:]))
    assert vals[-1] < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(0.2, 2.0), st.floats(-1.0, 1.0), st.floats(1e-7, 1e-2))
def test_window_bound_below_epsilon(rate, lam_shift, eps):
    pair = PairSpec(ms.exponential(rate), ProcessSpec(FBM(1.0, SelfSimilarDrift(rate, lam_shift))))
    _, _, bound = sampling_window(pair, [0.5, 2.0], [(0.0, 1.0), (-1.0, 0.5)], eps)
    assert 0 <= bound <= eps


def test_window_cap_raises(monkeypatch):
    monkeypatch.setattr(sampler, "PADDING_CAP_UNITS", 0.05)
    with pytest.raises(WindowError):
        sampling_window(brown_resnick(), [1.0], [(0.0, 1.0)], 1e-12)


def test_window_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        sampling_window(brown_resnick(), [0.0], [(0.0, 1.0)], 0.0)


# -- Poisson starts -----------------------------------------------------------------


def test_poisson_starts_expected_count():
    assert ms.mass_on_interval(ms.exponential(1.0), 0.0, math.log(2)) == pytest.approx(0.5, rel=1e-15)
    rng = np.random.default_rng(0)
    counts = [len(sample_poisson_starts(ms.exponential(1.0), (0.0, math.log(2)), rng)) for _ in range(20_000)]
    assert np.mean(counts) == pytest.approx(0.5, abs=3 * math.sqrt(0.5 / 20_000))


def test_poisson_starts_lebesgue_mean():
    alpha, n = 0.3, 100_000
    rng = np.random.default_rng(1)
    counts = np.array([len(sample_poisson_starts(ms.lebesgue(alpha), (0.0, 10.0), rng)) for _ in range(n)])
    assert abs(counts.mean() - 10 * alpha) <= 3 * math.sqrt(10 * alpha / n)


def test_poisson_starts_sorted_and_in_window():
    rng = np.random.default_rng(2)
    u = sample_poisson_starts(ms.lebesgue(50.0), (-1.0, 2.0), rng)
    assert np.all(np.diff(u) >= 0)
    assert u.min() >= -1.0 and u.max() <= 2.0


def test_poisson_starts_empty_window():
    assert sample_poisson_starts(ms.lebesgue(), (1.0, 1.0), np.random.default_rng(0)).size == 0


# -- Gaussian paths -----------------------------------------------------------------


def test_pivoted_cholesky_reconstructs_singular_matrix():
    v = np.array([[1.0, 2.0, 3.0]])
    cov = v.T @ v
    L = pivoted_cholesky(cov)
    np.testing.assert_allclose(L @ L.T, cov, atol=1e-12)


def test_pivoted_cholesky_rejects_indefinite():
    with pytest.raises(NotPSDError):
        pivoted_cholesky(np.array([[1.0, 2.0], [2.0, 1.0]]))


def test_zero_variance_law_returns_mean():
    law = GridLaw(np.array([[0.0], [1.0]]), np.array([0.5, -1.0]), np.zeros((2, 2)))
    x = sample_paths(law, 7, np.random.default_rng(0))
    np.testing.assert_array_equal(x, np.tile([0.5, -1.0], (7, 1)))


def test_fbm_path_covariance():
    n = 100_000
    law = pair_grid_law(PairSpec(ms.lebesgue(), ProcessSpec(FBM(1.0))), [1.0, 2.0])
    x = sample_paths(law, n, np.random.default_rng(4))
    target = np.array([[2.0, 2.0], [2.0, 4.0]])
    emp = np.cov(x.T)
    # standard error of a Gaussian sample covariance entry: sqrt((s_ii s_jj + s_ij^2) / n)
    se = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / n)
    assert np.all(np.abs(emp - target) <= 5 * se)


def test_standard_normal_ks():
    law = GridLaw(np.array([[0.0]]), np.array([0.0]), np.array([[1.0]]))
    x = sample_paths(law, 10_000, np.random.default_rng(9))[:, 0]
    assert stats.kstest(x, "norm").statistic < 1.63 / math.sqrt(10_000)


# -- simulate_system ----------------------------------------------------------------


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(brown_resnick(), [0.0], [(0.0, 1.0)], 0)
    with pytest.raises(ValueError):
        SimulationConfig(brown_resnick(), [], [], 10)
    with pytest.raises(ValueError):
        SimulationConfig(brown_resnick(), [0.0], [(0.0, 1.0), (0.0, 1.0)], 10)
    with pytest.raises(ValueError):
        SimulationConfig(brown_resnick(), [0.0], [(0.0, 1.0)], 10, method="exact")


def test_replicate_streams_differ():
    a = replicate_rng(7, 0).random(4)
    b = replicate_rng(7, 1).random(4)
    c = replicate_rng(7, 0, stream=1).random(4)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    np.testing.assert_array_equal(a, replicate_rng(7, 0).random(4))


def _fingerprint(samples):
    return [(s.replicate, s.start_points.tobytes(), s.path_values.tobytes()) for s in samples]


@pytest.mark.parametrize("method", ["window", "targeted"])
def test_identical_across_worker_counts(method):
    cfg = SimulationConfig(brown_resnick(), [0.0, 1.0], [(0.0, 1.0), (-1.0, 1.0)], 1500, seed=11, method=method)
    ref = _fingerprint(simulate_system(cfg))
    for w in (4, 8):
        assert _fingerprint(simulate_system(cfg, workers=w)) == ref
    assert [r for r, _, _ in ref] == list(range(1500))


def test_prefix_stable_in_replicate_count():
    cfg = lambda n: SimulationConfig(brown_resnick(), [0.0], [(0.0, 1.0)], n, seed=3, method="targeted")
    assert _fingerprint(simulate_system(cfg(300))) == _fingerprint(simulate_system(cfg(1000)))[:300]


def test_sample_invariants_window_method():
    pair = PairSpec(ms.exponential(1.0), ProcessSpec(FBM(1.0, SelfSimilarDrift(1.0, 0.0))), initial_shift=0.0)
    cfg = SimulationConfig(pair, [0.0, 1.0], [(0.0, 1.0), None], 50, seed=2, epsilon=1e-5)
    for s in simulate_system(cfg):
        a, b = s.window
        assert s.truncation_error_bound <= 1e-5
        assert np.all((s.start_points >= a) & (s.start_points <= b))
        # xi(0) = 0 for this process, so V(0) is the start point
        np.testing.assert_allclose(s.path_values[:, 0], s.start_points, atol=1e-12)


@pytest.mark.parametrize("method", ["window", "targeted"])
def test_brown_resnick_mean_count(method):
    cfg = SimulationConfig(brown_resnick(), [0.0], [(0.0, 1.0)], 100_000, seed=21, method=method)
    est = estimate_intensity(simulate_system(cfg), [0.0], [(0.0, 1.0)])
    assert abs(est.mean_count - (1 - math.exp(-1))) <= 3 * est.std_error


def test_start_intensity_matches_mass():
    pair = PairSpec(ms.MeasureSpec([(1.0, 0.5), (0.2, 0.0)]), ProcessSpec(FBM(1.0)))
    n = 20_000
    cfg = SimulationConfig(pair, [1.0], [(0.0, 1.0)], n, seed=8)
    sub = (-1.5, 0.5)
    counts = np.array([np.count_nonzero((s.start_points >= sub[0]) & (s.start_points <= sub[1])) for s in simulate_system(cfg)])
    exact = ms.mass_on_interval(pair.measure, *sub)
    assert abs(counts.mean() - exact) <= 3 * counts.std(ddof=1) / math.sqrt(n)


def test_disjoint_box_counts_uncorrelated():
    n = 40_000
    cfg = SimulationConfig(brown_resnick(), [0.5], [(0.0, 2.0)], n, seed=5, method="window")
    table = CountTable(simulate_system(cfg))
    a = table.counts([0.5], [(0.0, 1.0)])
    b = table.counts([0.5], [(1.0, 2.0)])
    # under independence the sample correlation is approximately N(0, 1/n)
    assert abs(np.corrcoef(a, b)[0, 1]) <= 3 / math.sqrt(n)


def test_targeted_matches_onedim_intensity_for_mixture():
    pair = PairSpec(ms.MeasureSpec([(1.0, 1.0), (0.5, -0.5)]), ProcessSpec(FBM(1.2, SelfSimilarDrift(0.4, 0.1))))
    cfg = SimulationConfig(pair, [0.7], [(-1.0, 1.5)], 50_000, seed=13, method="targeted")
    est = estimate_intensity(simulate_system(cfg), [0.7], [(-1.0, 1.5)])
    assert abs(est.mean_count - onedim_intensity(pair, 0.7, -1.0, 1.5)) <= 3 * est.std_error


def test_csv_dump():
    cfg = SimulationConfig(brown_resnick(), [0.0, 1.0], [(0.0, 1.0), (-1.0, 1.0)], 20, seed=1, method="targeted")
    text = write_samples_csv(simulate_system(cfg))
    lines = text.splitlines()
    assert lines[0] == "replicate,particle,start,V_t0,V_t1"
    rows = [tuple(map(float, line.split(","))) for line in lines[1:]]
    assert [r[:2] for r in rows] == sorted(r[:2] for r in rows)
    assert text == write_samples_csv(simulate_system(cfg, workers=4))
    buf = io.StringIO()
    assert write_samples_csv(simulate_system(cfg), buf) is None
    assert buf.getvalue() == text
