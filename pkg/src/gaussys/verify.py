"""Monte Carlo intensity estimates and two-sample tests on box counts.

The number of particles with ``(V(t_1), ..., V(t_n))`` in a box ``B`` is
Poisson with mean ``m_{t_1..t_n}(B)``, so box counts averaged over replicates
estimate the finite-dimensional intensities. Stationarity and equality in law
are checked by comparing such estimates with two-sample z-tests under a
Bonferroni correction. Any finite design is only a partial check; reports list
the design they used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import ndtri

from . import processes as pr
from .analytic import PairSpec, bivariate_intensity, onedim_intensity
from .sampler import SimulationConfig, SystemSample, simulate_system

__all__ = [
    "IntensityEstimate",
    "CountTable",
    "Design",
    "default_design",
    "Comparison",
    "ComparisonReport",
    "StationarityReport",
    "estimate_intensity",
    "bonferroni_critical",
    "two_sample_z",
    "stationarity_test",
    "equal_in_law_mc",
]


@dataclass(frozen=True)
class IntensityEstimate:
    """Mean box count over replicates and its standard error (sample sd / sqrt(R))."""

    times: tuple
    box: tuple
    mean_count: float
    std_error: float
    replicates: int


def _summary(counts: np.ndarray) -> tuple:
    """Mean and standard error with compensated sums (order-independent to rounding)."""
    r = len(counts)
    mean = math.fsum(counts) / r
    if r < 2:
        return mean, math.nan
    var = math.fsum((counts - mean) ** 2) / (r - 1)
    return mean, math.sqrt(var / r)


class CountTable:
    """All particles of a sample stream, stacked for fast box counting."""

    def __init__(self, samples: Iterable[SystemSample]):
        labels, paths = [], []
        times = None
        index = []
        for k, s in enumerate(samples):
            if times is None:
                times = s.times
            index.append(s.replicate)
            labels.append(np.full(s.n_particles, k))
            paths.append(s.path_values)
        if times is None:
            raise ValueError("empty sample stream")
        self.times = times
        self.replicates = len(index)
        self.labels = np.concatenate(labels)
        self.paths = np.vstack(paths) if paths else np.empty((0, len(times)))

    def columns(self, times) -> list:
        """Indices of the requested time points among the simulated ones."""
        want = pr.as_times(times, self.times.shape[1])
        cols = []
        for t in want:
            hit = np.flatnonzero(np.all(np.isclose(self.times, t, rtol=0, atol=1e-12), axis=1))
            if len(hit) == 0:
                raise ValueError(f"time {t.tolist()} was not simulated")
            cols.append(int(hit[0]))
        return cols

    def counts(self, times, box) -> np.ndarray:
        cols = self.columns(times)
        if len(box) != len(cols):
            raise ValueError(f"box has {len(box)} intervals for {len(cols)} times")
        inside = np.ones(len(self.labels), dtype=bool)
        for c, (lo, hi) in zip(cols, box):
            inside &= (self.paths[:, c] >= lo) & (self.paths[:, c] <= hi)
        return np.bincount(self.labels[inside], minlength=self.replicates).astype(float)

    def estimate(self, times, box) -> IntensityEstimate:
        mean, se = _summary(self.counts(times, box))
        return IntensityEstimate(_times_key(times), _box_key(box), mean, se, self.replicates)


def estimate_intensity(samples: Iterable[SystemSample], times, box) -> IntensityEstimate:
    """Estimate ``m_{times}(box)`` from a sample stream.

    ``times`` must be a subset of the simulated times and ``box`` holds one
    closed interval per entry of ``times``.
    """
    return CountTable(samples).estimate(times, box)


def _times_key(times) -> tuple:
    arr = np.asarray(times, dtype=float)
    if arr.ndim <= 1:
        return tuple(float(x) for x in np.atleast_1d(arr))
    return tuple(tuple(float(x) for x in row) for row in arr)


def _box_key(box) -> tuple:
    return tuple((float(lo), float(hi)) for lo, hi in box)


# -- test designs ----------------------------------------------------------------


@dataclass(frozen=True)
class Design:
    """Time points, shifts and boxes to compare.

    Each 1-D box is queried at each time; each rectangle comes with its own
    pair of times. Shifts are ignored by equality-in-law tests.
    """

    times: tuple = (0.0, 0.5, 1.0)
    shifts: tuple = (0.5, 1.0)
    boxes: tuple = ((0.0, 1.0), (-1.0, 0.0), (-2.0, 2.0))
    rectangles: tuple = (((0.0, 1.0), ((0.0, 1.0), (-1.0, 1.0))),)

    def queries(self) -> list:
        """``(times, box)`` pairs, 1-D queries first."""
        out = [((t,), (b,)) for t in self.times for b in self.boxes]
        out += [(tuple(ts), tuple(rect)) for ts, rect in self.rectangles]
        return out

    def to_json(self) -> dict:
        return {
            "times": _jsonable(self.times),
            "shifts": _jsonable(self.shifts),
            "boxes": [list(b) for b in self.boxes],
            "rectangles": [{"times": _jsonable(ts), "rect": [list(r) for r in rect]} for ts, rect in self.rectangles],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Design":
        allowed = {"times", "shifts", "boxes", "rectangles"}
        unknown = set(obj) - allowed
        if unknown:
            raise ValueError(f"design: unknown field(s) {sorted(unknown)}")
        d = default_design()
        rects = d.rectangles
        if "rectangles" in obj:
            rects = tuple(
                (_tuplify(r["times"]), tuple(tuple(float(v) for v in iv) for iv in r["rect"])) for r in obj["rectangles"]
            )
        return cls(
            times=_tuplify(obj.get("times", d.times)),
            shifts=_tuplify(obj.get("shifts", d.shifts)),
            boxes=tuple(tuple(float(v) for v in b) for b in obj.get("boxes", d.boxes)),
            rectangles=rects,
        )


def default_design() -> Design:
    return Design()


def _tuplify(x):
    if isinstance(x, (list, tuple)):
        return tuple(_tuplify(v) for v in x)
    return float(x)


def _jsonable(x):
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return float(x)


def _arm_plan(design: Design, dim: int, offset) -> tuple:
    """Simulation times and per-time hull boxes covering every query."""
    points, hulls = [], []

    def add(t, box):
        t = pr.as_times([t], dim)[0] + offset
        for i, p in enumerate(points):
            if np.allclose(p, t, rtol=0, atol=1e-12):
                lo, hi = hulls[i]
                hulls[i] = (min(lo, box[0]), max(hi, box[1]))
                return
        points.append(t)
        hulls.append((float(box[0]), float(box[1])))

    for times, box in design.queries():
        for t, b in zip(times, box):
            add(t, b)
    return np.array(points), hulls


def _simulate_arm(pair, design, offset, replicates, seed, stream, method, workers, epsilon) -> CountTable:
    times, hulls = _arm_plan(design, pair.dim, offset)
    cfg = SimulationConfig(pair, times, hulls, replicates, seed=seed, method=method, epsilon=epsilon)
    return CountTable(simulate_system(cfg, workers=workers, stream=stream))


def _analytic(pair: PairSpec, times, box):
    """Closed-form intensity where one exists (n = 1, or n = 2 for exponential mixtures)."""
    if len(times) == 1:
        return onedim_intensity(pair, times[0], *box[0])
    if len(times) == 2 and pair.measure.is_exp_mixture and math.isfinite(box[0][0]) and math.isfinite(box[0][1]):
        return bivariate_intensity(pair, times[0], times[1], box)
    return None


def bonferroni_critical(alpha: float, k: int) -> float:
    """Two-sided normal quantile for ``k`` simultaneous tests at family level ``alpha``."""
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    return float(ndtri(1 - alpha / (2 * max(k, 1))))


def two_sample_z(a: IntensityEstimate, b: IntensityEstimate) -> float:
    se = math.hypot(a.std_error, b.std_error)
    diff = a.mean_count - b.mean_count
    if se == 0:
        return 0.0 if diff == 0 else math.copysign(math.inf, diff)
    return diff / se


# -- reports -------------------------------------------------------------------


@dataclass(frozen=True)
class Comparison:
    times: tuple
    shift: object
    box: tuple
    est_a: IntensityEstimate
    est_b: IntensityEstimate
    analytic: float | None
    analytic_b: float | None
    z: float

    def to_json(self) -> dict:
        return {
            "times": _jsonable(self.times),
            "shift": None if self.shift is None else _jsonable(self.shift),
            "box": [list(b) for b in self.box],
            "est_a": self.est_a.mean_count,
            "se_a": self.est_a.std_error,
            "est_b": self.est_b.mean_count,
            "se_b": self.est_b.std_error,
            "analytic": self.analytic,
            "analytic_b": self.analytic_b,
            "z": _finite_or_str(self.z),
        }


def _finite_or_str(x: float):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


@dataclass(frozen=True)
class ComparisonReport:
    """Outcome of a family of two-sample tests.

    ``verdict`` is ``"fail"`` exactly when some ``|z|`` exceeds the
    Bonferroni critical value for ``alpha`` over all comparisons.
    """

    kind: str
    comparisons: tuple
    alpha: float
    critical_z: float
    replicates: int
    seed: int
    design: Design
    pair: PairSpec | None = None
    pair_b: PairSpec | None = None

    @property
    def verdict(self) -> str:
        return "fail" if any(abs(c.z) > self.critical_z for c in self.comparisons) else "pass"

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    @property
    def max_abs_z(self) -> float:
        return max((abs(c.z) for c in self.comparisons), default=0.0)

    def to_json(self) -> dict:
        return {
            "test": self.kind,
            "comparisons": [c.to_json() for c in self.comparisons],
            "verdict": self.verdict,
            "alpha": self.alpha,
            "critical_z": self.critical_z,
            "replicates": self.replicates,
            "seed": self.seed,
            "design": self.design.to_json(),
        }

    def to_text(self) -> str:
        head = f"{'times':<16}{'shift':>7}  {'box':<24}{'est_a':>10}{'se_a':>9}{'est_b':>10}{'se_b':>9}{'analytic':>11}{'z':>10}"
        lines = [f"{self.kind}: {len(self.comparisons)} comparisons, alpha={self.alpha}, critical |z|={self.critical_z:.3f}", head]
        for c in self.comparisons:
            times = ",".join(_fmt_time(t) for t in c.times)
            shift = "-" if c.shift is None else _fmt_time(c.shift)
            box = "x".join(f"[{lo:g},{hi:g}]" for lo, hi in c.box)
            analytic = "-" if c.analytic is None else f"{c.analytic:.5f}"
            lines.append(
                f"{times:<16}{shift:>7}  {box:<24}{c.est_a.mean_count:>10.5f}{c.est_a.std_error:>9.5f}"
                f"{c.est_b.mean_count:>10.5f}{c.est_b.std_error:>9.5f}{analytic:>11}{c.z:>10.3f}"
            )
        lines.append(f"verdict: {self.verdict}")
        return "\n".join(lines) + "\n"


StationarityReport = ComparisonReport


def _fmt_time(t) -> str:
    if isinstance(t, tuple):
        return "(" + ",".join(f"{v:g}" for v in t) + ")"
    return f"{t:g}"


def _shift_times(times: tuple, h, dim: int) -> tuple:
    shifted = pr.as_times(list(times), dim) + pr.as_times([h], dim)[0]
    return _times_key(shifted if dim > 1 else shifted[:, 0])


def stationarity_test(
    pair: PairSpec,
    design: Design | None = None,
    replicates: int = 10_000,
    alpha: float = 0.01,
    seed: int = 0,
    method: str = "targeted",
    workers: int = 1,
    epsilon: float | None = None,
) -> ComparisonReport:
    """Compare box intensities at the design times with those at the times shifted by each ``h``.

    The unshifted arm uses sampler stream 0 and the arm for the ``k``-th shift
    stream ``k + 1``, so the arms are independent. Analytic values are attached
    where a closed form exists and omitted otherwise.
    """
    design = design or default_design()
    dim = pair.dim
    base = _simulate_arm(pair, design, 0.0, replicates, seed, 0, method, workers, epsilon)
    comps = []
    queries = design.queries()
    for k, h in enumerate(design.shifts):
        offset = pr.as_times([h], dim)[0]
        shifted = _simulate_arm(pair, design, offset, replicates, seed, k + 1, method, workers, epsilon)
        for times, box in queries:
            times_b = _shift_times(times, h, dim)
            ea = base.estimate(times, box)
            eb = shifted.estimate(times_b, box)
            comps.append(
                Comparison(
                    _times_key(times), h, _box_key(box), ea, eb,
                    _analytic(pair, times, box), _analytic(pair, times_b, box), two_sample_z(ea, eb),
                )
            )
    crit = bonferroni_critical(alpha, len(comps))
    return ComparisonReport("stationarity", tuple(comps), alpha, crit, replicates, seed, design, pair)


def equal_in_law_mc(
    pair_a: PairSpec,
    pair_b: PairSpec,
    design: Design | None = None,
    replicates: int = 10_000,
    alpha: float = 0.01,
    seed: int = 0,
    method: str = "targeted",
    workers: int = 1,
    epsilon: float | None = None,
) -> ComparisonReport:
    """Compare box intensities of two systems at the same times (shifts unused).

    System A uses sampler stream 0 and system B stream 1.
    """
    design = design or default_design()
    if pair_a.dim != pair_b.dim:
        raise ValueError("pairs live on different time domains")
    a = _simulate_arm(pair_a, design, 0.0, replicates, seed, 0, method, workers, epsilon)
    b = _simulate_arm(pair_b, design, 0.0, replicates, seed, 1, method, workers, epsilon)
    comps = []
    for times, box in design.queries():
        ea, eb = a.estimate(times, box), b.estimate(times, box)
        comps.append(
            Comparison(
                _times_key(times), None, _box_key(box), ea, eb,
                _analytic(pair_a, times, box), _analytic(pair_b, times, box), two_sample_z(ea, eb),
            )
        )
    crit = bonferroni_critical(alpha, len(comps))
    return ComparisonReport("equal_in_law", tuple(comps), alpha, crit, replicates, seed, design, pair_a, pair_b)
