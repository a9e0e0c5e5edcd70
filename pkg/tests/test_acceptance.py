"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line with its runtime."""

import contextlib
import math
import time

import numpy as np
import pytest
from scipy import integrate

from gaussys import measures as ms
from gaussys.analytic import PairSpec, bivariate_intensity, onedim_density, pair_grid_law, psi_kappa
from gaussys.classify import FamilyLabel, canonicalize, classify_pair, equal_in_law_analytic
from gaussys.processes import (
    FBM,
    GridLaw,
    IncrementVariance,
    Kernel,
    LinearDrift,
    ProcessSpec,
    SelfSimilarDrift,
    StationaryKernel,
    StatIncrementDrift,
)
from gaussys.sampler import SimulationConfig, simulate_system
from gaussys.verify import equal_in_law_mc, stationarity_test

RESULTS = []


@contextlib.contextmanager
def criterion(number, title, limit):
    start = time.perf_counter()
    ok = False
    try:
        yield
        ok = True
    finally:
        elapsed = time.perf_counter() - start
        within = elapsed < limit
        status = "PASS" if ok and within else "FAIL"
        note = "" if within else f" (over the {limit:g} s limit)"
        line = f"[{status}] {number}. {title}: {elapsed:.2f} s{note}"
        RESULTS.append(line)
        print(line)
    assert elapsed < limit, f"criterion {number} took {elapsed:.2f} s, limit {limit} s"


def brown_resnick(offset=0.0):
    return PairSpec(ms.exponential(1.0), ProcessSpec(FBM(1.0, SelfSimilarDrift(1.0, offset))))


def bm_no_drift():
    return PairSpec(ms.exponential(1.0), ProcessSpec(StatIncrementDrift(IncrementVariance("bm"))))


def shift_pairs(extra=0.0):
    a = PairSpec(ms.gaussian(0.0, 1.5), ProcessSpec(StationaryKernel(Kernel("exp", 0.5))))
    b = PairSpec(ms.gaussian(0.0, 1.0), ProcessSpec(StationaryKernel(Kernel("exp", 0.5, 1.0, 0.5 + extra))))
    return a, b


def test_1_s3_closed_forms_are_stationary():
    with criterion(1, "Brown-Resnick closed forms are shift invariant", 1.0):
        pair = brown_resnick()
        x = np.linspace(-4, 4, 41)
        for t in (0.0, 0.5, 1.0, 2.0):
            np.testing.assert_allclose(onedim_density(pair, t, x), np.exp(-x), rtol=1e-12, atol=0)
        rect = ((0.0, 1.0), (-1.0, 1.0))
        base = bivariate_intensity(pair, 0.0, 1.0, rect)
        for h in (0.5, 1.0):
            assert bivariate_intensity(pair, h, 1.0 + h, rect) == pytest.approx(base, rel=1e-7)


def test_2_monte_carlo_matches_closed_form():
    with criterion(2, "Brown-Resnick stationarity test passes at 1e5 replicates", 120.0):
        rep = stationarity_test(brown_resnick(), replicates=100_000, alpha=0.01, seed=0, workers=4)
        assert rep.passed, rep.to_text()
        for c in rep.comparisons:
            for e, exact in ((c.est_a, c.analytic), (c.est_b, c.analytic_b)):
                assert exact is not None
                assert abs(e.mean_count - exact) <= 3 * e.std_error, rep.to_text()


def test_3_non_stationarity_detected():
    with criterion(3, "BM without drift is flagged and fails at 1e4 replicates", 30.0):
        pair = bm_no_drift()
        assert classify_pair(pair).label is FamilyLabel.NOT_STATIONARY
        rep = stationarity_test(pair, replicates=10_000, alpha=0.01, seed=0)
        assert not rep.passed
        (c,) = [c for c in rep.comparisons if c.times == (0.0,) and c.shift == 1.0 and c.box == ((0.0, 1.0),)]
        assert c.analytic == pytest.approx(1 - math.exp(-1), rel=1e-12)
        assert c.analytic_b == pytest.approx(math.exp(0.5) * (1 - math.exp(-1)), rel=1e-12)
        assert abs(c.z) > rep.critical_z


def _psi_quadrature(law, kappa, u):
    w, v = np.linalg.eigh(law.covariance_matrix)
    root = v * np.sqrt(np.clip(w, 0, None))
    coef = np.array([kappa - u, u])
    a = root.T @ coef
    f = lambda z2, z1: math.exp(a[0] * z1 + a[1] * z2 - 0.5 * (z1 * z1 + z2 * z2)) / (2 * math.pi)
    val, _ = integrate.dblquad(f, a[0] - 14, a[0] + 14, a[1] - 14, a[1] + 14, epsabs=0, epsrel=1e-11)
    return math.exp(coef @ law.mean_vector) * val


def test_4_psi_matches_quadrature():
    with criterion(4, "psi_kappa agrees with 2-D quadrature on 50 random laws", 10.0):
        rng = np.random.default_rng(44)
        for _ in range(50):
            v1, v2 = rng.uniform(0, 3, 2)
            s1, s2 = math.sqrt(v1), math.sqrt(v2)
            gamma = rng.uniform((s1 - s2) ** 2, (s1 + s2) ** 2)
            r = 0.5 * (v1 + v2 - gamma)
            law = GridLaw(np.array([[0.0], [1.0]]), rng.uniform(-2, 2, 2), np.array([[v1, r], [r, v2]]))
            k, u = rng.uniform(-2, 2, 2)
            assert psi_kappa(law, k, u) == pytest.approx(_psi_quadrature(law, k, u), rel=1e-6)


def test_5_convolution_identity():
    with criterion(5, "exponential mixtures convolve identically under matched rates", 1.0):
        rng = np.random.default_rng(55)
        for _ in range(20):
            mu1, mu2 = rng.uniform(-2, 2, 2)
            v1, v2 = np.sort(rng.uniform(0.1, 3, 2))
            lam = -2 * (mu2 - mu1) / (v2 - v1)
            alpha, beta = rng.uniform(0.1, 2, 2)
            m = ms.MeasureSpec([(alpha, lam), (beta, 0.0)])
            x = np.linspace(-5, 5, 100)
            d1 = ms.density(ms.convolve_with_gaussian(m, ms.GaussianMeasure1D(mu1, v1)), x)
            d2 = ms.density(ms.convolve_with_gaussian(m, ms.GaussianMeasure1D(mu2, v2)), x)
            np.testing.assert_allclose(d1, d2, rtol=1e-10, atol=0)


def test_6_canonical_round_trip():
    with criterion(6, "canonical pairs are idempotent and equal in law (S2, S3)", 120.0):
        s2 = PairSpec(ms.lebesgue(), ProcessSpec(FBM(1.0, LinearDrift((2.0,), 5.0))))
        s3 = brown_resnick(offset=3.0)
        for pair, label in ((s2, FamilyLabel.S2), (s3, FamilyLabel.S3)):
            c = canonicalize(pair)
            cc = canonicalize(c)
            assert cc.to_json() == c.to_json()
            assert classify_pair(c).label is label
            rep = equal_in_law_mc(pair, c, replicates=50_000, alpha=0.01, seed=6, workers=4)
            assert rep.passed, rep.to_text()


def test_7_gaussian_shift_construction():
    with criterion(7, "Gaussian shift construction: equal, and unequal once perturbed", 180.0):
        a, b = shift_pairs()
        res = equal_in_law_analytic(a, b)
        assert res.equal and res.certificate["n0"] == pytest.approx({"mean": 0.0, "var": 0.5})
        assert equal_in_law_mc(a, b, replicates=100_000, alpha=0.01, seed=7, workers=4).passed
        a, b = shift_pairs(extra=0.2)
        assert not equal_in_law_analytic(a, b).equal
        assert not equal_in_law_mc(a, b, replicates=100_000, alpha=0.01, seed=7, workers=4).passed


def test_8_sampler_calibration():
    with criterion(8, "sampler start intensity and path covariance, reproducible across threads", 120.0):
        n = 100_000
        pair = PairSpec(ms.MeasureSpec([(0.5, 0.0), (0.2, 0.4)]), ProcessSpec(FBM(1.0)))
        cfg = SimulationConfig(pair, [0.5, 1.0], [(0.0, 1.0), (0.0, 1.0)], n, seed=8)
        runs = {}
        for w in (1, 4, 8):
            runs[w] = list(simulate_system(cfg, workers=w))
        ref = runs[1]
        for w in (4, 8):
            assert all(
                x.replicate == y.replicate
                and np.array_equal(x.start_points, y.start_points)
                and np.array_equal(x.path_values, y.path_values)
                for x, y in zip(ref, runs[w])
            ) and len(runs[w]) == n

        # Poisson start counts on sub-intervals of the window
        a, b = ref[0].window
        for lo, hi in ((a, 0.0), (0.0, 1.0), (1.0, b), (-2.0, 3.0)):
            counts = np.array([np.count_nonzero((s.start_points >= lo) & (s.start_points <= hi)) for s in ref])
            exact = float(ms.mass_on_interval(pair.measure, lo, hi))
            assert abs(counts.mean() - exact) <= 3 * counts.std(ddof=1) / math.sqrt(n)

        # displacements of distinct particles are independent draws of the grid law
        xi = np.vstack([s.displacements() for s in ref])
        law = pair_grid_law(pair, [0.5, 1.0])
        target = law.covariance_matrix
        k = len(xi)
        se_mean = np.sqrt(np.diag(target) / k)
        assert np.all(np.abs(xi.mean(axis=0) - law.mean_vector) <= 3 * se_mean)
        se_cov = np.sqrt((np.outer(np.diag(target), np.diag(target)) + target**2) / k)
        assert np.all(np.abs(np.cov(xi.T) - target) <= 3 * se_cov)
