import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaussys import measures as ms
from gaussys.analytic import PairSpec, onedim_intensity
from gaussys.processes import FBM, IncrementVariance, Kernel, ProcessSpec, SelfSimilarDrift, StationaryKernel, StatIncrementDrift
from gaussys.sampler import SimulationConfig, SystemSample, simulate_system
from gaussys.verify import (
    CountTable,
    Design,
    IntensityEstimate,
    bonferroni_critical,
    default_design,
    equal_in_law_mc,
    estimate_intensity,
    stationarity_test,
    two_sample_z,
)

# bivariate intensity of the Brown-Resnick pair at times (0, 1) on [0,1]x[-1,1], frozen from
# the analytic module after cross-checking it against nested quadrature
BR_RECT = 0.3018524960760376

SMALL = Design(times=(0.0,), shifts=(0.5,), boxes=((0.0, 1.0), (-1.0, 0.0)), rectangles=())


def brown_resnick():
    return PairSpec(ms.exponential(1.0), ProcessSpec(FBM(1.0, SelfSimilarDrift(1.0, 0.0))))


def bm_no_drift():
    return PairSpec(ms.exponential(1.0), ProcessSpec(StatIncrementDrift(IncrementVariance("bm"))))


def est(mean, se):
    return IntensityEstimate((0.0,), ((0.0, 1.0),), mean, se, 100)


# -- estimates ------------------------------------------------------------------------


def test_deterministic_lebesgue_count():
    pair = PairSpec(ms.lebesgue(), ProcessSpec(StationaryKernel(Kernel("exp", variance=0.0))))
    cfg = SimulationConfig(pair, [2.0], [(0.0, 1.0)], 20_000, seed=3)
    e = estimate_intensity(simulate_system(cfg), [2.0], [(0.0, 1.0)])
    assert abs(e.mean_count - 1.0) <= 3 * e.std_error
    # Poisson(1) counts: standard error close to 1 / sqrt(R)
    assert e.std_error == pytest.approx(1 / math.sqrt(20_000), rel=0.05)


def test_brown_resnick_onedim_and_rect():
    cfg = SimulationConfig(brown_resnick(), [0.0, 1.0], [(0.0, 1.0), (-1.0, 1.0)], 100_000, seed=4, method="targeted")
    table = CountTable(simulate_system(cfg))
    e1 = table.estimate([0.0], [(0.0, 1.0)])
    assert abs(e1.mean_count - (1 - math.exp(-1))) <= 3 * e1.std_error
    e2 = table.estimate([0.0, 1.0], [(0.0, 1.0), (-1.0, 1.0)])
    assert abs(e2.mean_count - BR_RECT) <= 3 * e2.std_error


def test_empty_stream_rejected():
    with pytest.raises(ValueError):
        estimate_intensity(iter([]), [0.0], [(0.0, 1.0)])


def test_box_dimension_mismatch():
    cfg = SimulationConfig(brown_resnick(), [0.0], [(0.0, 1.0)], 10, method="targeted")
    with pytest.raises(ValueError):
        estimate_intensity(simulate_system(cfg), [0.0], [(0.0, 1.0), (0.0, 1.0)])


def test_unsimulated_time_rejected():
    cfg = SimulationConfig(brown_resnick(), [0.0], [(0.0, 1.0)], 10, method="targeted")
    with pytest.raises(ValueError):
        estimate_intensity(simulate_system(cfg), [0.5], [(0.0, 1.0)])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_counts_invariant_under_relabeling(seed):
    cfg = SimulationConfig(brown_resnick(), [0.0, 1.0], [(0.0, 1.0), (-1.0, 1.0)], 40, seed=seed, method="targeted")
    samples = list(simulate_system(cfg))
    rng = np.random.default_rng(seed)
    shuffled = []
    for s in samples:
        p = rng.permutation(s.n_particles)
        shuffled.append(SystemSample(s.replicate, s.times, s.start_points[p], s.path_values[p], s.window, 0.0))
    box = [(0.0, 1.0), (-1.0, 1.0)]
    np.testing.assert_array_equal(CountTable(samples).counts([0.0, 1.0], box), CountTable(shuffled).counts([0.0, 1.0], box))


def test_summary_independent_of_order():
    cfg = SimulationConfig(brown_resnick(), [0.0], [(-3.0, 3.0)], 3000, seed=1, method="targeted")
    samples = list(simulate_system(cfg))
    a = estimate_intensity(samples, [0.0], [(-3.0, 3.0)])
    b = estimate_intensity(samples[::-1], [0.0], [(-3.0, 3.0)])
    assert a.mean_count == b.mean_count and a.std_error == b.std_error


def test_unbiased_over_repeated_runs():
    pair = PairSpec(ms.MeasureSpec([(1.0, 1.0), (0.5, -0.5)]), ProcessSpec(FBM(1.0, SelfSimilarDrift(0.3))))
    exact = onedim_intensity(pair, 1.0, -1.0, 1.0)
    hits = 0
    for seed in range(100):
        cfg = SimulationConfig(pair, [1.0], [(-1.0, 1.0)], 1024, seed=seed, method="targeted")
        e = estimate_intensity(simulate_system(cfg), [1.0], [(-1.0, 1.0)])
        hits += abs(e.mean_count - exact) <= 4 * e.std_error
    assert hits >= 99


def test_window_epsilon_halving_shows_no_drift():
    cfg = lambda eps, seed: SimulationConfig(brown_resnick(), [1.0], [(0.0, 1.0)], 30_000, seed=seed, epsilon=eps)
    a = estimate_intensity(simulate_system(cfg(1e-3, 1)), [1.0], [(0.0, 1.0)])
    b = estimate_intensity(simulate_system(cfg(5e-4, 2)), [1.0], [(0.0, 1.0)])
    assert abs(a.mean_count - b.mean_count) <= 4 * math.hypot(a.std_error, b.std_error) + 1e-3
    assert abs(b.mean_count - (1 - math.exp(-1))) <= 4 * b.std_error + 5e-4


# -- test statistics --------------------------------------------------------------------


def test_bonferroni_values():
    assert bonferroni_critical(0.01, 20) == pytest.approx(3.48076, abs=1e-5)
    assert bonferroni_critical(0.01, 10) == pytest.approx(3.2905, abs=1e-4)
    assert bonferroni_critical(0.05, 1) == pytest.approx(1.95996, abs=1e-5)
    with pytest.raises(ValueError):
        bonferroni_critical(0.0, 3)


def test_two_sample_z():
    assert two_sample_z(est(1.0, 0.3), est(0.5, 0.4)) == pytest.approx(1.0)
    assert two_sample_z(est(1.0, 0.0), est(1.0, 0.0)) == 0.0
    assert two_sample_z(est(0.0, 0.0), est(1.0, 0.0)) == -math.inf


def test_default_design_size():
    d = default_design()
    assert len(d.queries()) == 10
    assert Design.from_json(d.to_json()) == d
    with pytest.raises(ValueError):
        Design.from_json({"times": [0.0], "depth": 3})


# -- stationarity and equality in law -----------------------------------------------------


def test_brown_resnick_passes():
    rep = stationarity_test(brown_resnick(), replicates=20_000, seed=2)
    assert rep.passed
    assert len(rep.comparisons) == 20
    assert rep.critical_z == pytest.approx(3.48076, abs=1e-5)
    rect = [c for c in rep.comparisons if len(c.times) == 2]
    assert all(c.analytic == pytest.approx(BR_RECT, rel=1e-7) for c in rect)


def test_bm_without_drift_fails():
    design = Design(times=(0.0,), shifts=(1.0,), boxes=((0.0, 1.0),), rectangles=())
    rep = stationarity_test(bm_no_drift(), design, replicates=10_000, seed=3)
    assert not rep.passed
    (c,) = rep.comparisons
    assert c.analytic == pytest.approx(1 - math.exp(-1), rel=1e-12)
    assert c.analytic_b == pytest.approx(math.exp(0.5) * (1 - math.exp(-1)), rel=1e-12)


def test_zero_shift_passes():
    design = Design(times=(0.0, 1.0), shifts=(0.0,), boxes=((0.0, 1.0), (-2.0, 2.0)), rectangles=())
    assert stationarity_test(bm_no_drift(), design, replicates=5000, seed=9).passed


def test_pair_vs_itself_passes():
    assert equal_in_law_mc(brown_resnick(), brown_resnick(), replicates=10_000, seed=4).passed


def test_brown_resnick_vs_bm_fails():
    design = Design(times=(1.0,), boxes=((0.0, 1.0), (-1.0, 0.0)), rectangles=())
    assert not equal_in_law_mc(brown_resnick(), bm_no_drift(), design, replicates=10_000, seed=5).passed


def test_calibration_under_null():
    rejections = sum(
        not stationarity_test(brown_resnick(), SMALL, replicates=512, alpha=0.05, seed=s).passed for s in range(200)
    )
    assert 2 <= rejections <= 24


def test_arms_use_independent_streams():
    rep = equal_in_law_mc(brown_resnick(), brown_resnick(), SMALL, replicates=512, seed=0)
    assert all(c.est_a.mean_count != c.est_b.mean_count for c in rep.comparisons)


def test_report_json_and_text():
    rep = stationarity_test(brown_resnick(), SMALL, replicates=256, seed=1)
    obj = json.loads(json.dumps(rep.to_json()))
    assert obj["verdict"] in ("pass", "fail")
    assert set(obj["comparisons"][0]) >= {"times", "shift", "box", "est_a", "se_a", "est_b", "se_b", "analytic", "z"}
    text = rep.to_text()
    assert text.splitlines()[-1] == f"verdict: {rep.verdict}"
    assert len(text.splitlines()) == 2 + len(rep.comparisons) + 1


def test_gaussian_measure_omits_bivariate_analytic():
    pair = PairSpec(ms.gaussian(0.0, 1.0), ProcessSpec(StationaryKernel(Kernel("exp"))))
    rep = equal_in_law_mc(pair, pair, Design(times=(0.0,), boxes=((0.0, 1.0),)), replicates=256)
    one, two = rep.comparisons
    assert one.analytic is not None and two.analytic is None
