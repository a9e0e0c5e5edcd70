"""Seed-reproducible Monte Carlo generation of Gaussian particle systems.

Replicates come in fixed-size blocks, each drawing from its own
counter-based Philox stream keyed by ``(seed, stream, block)`` through
:class:`numpy.random.SeedSequence`, so output is identical whatever the order
or number of worker threads.

Two generation methods produce :class:`SystemSample` objects:

``"window"``
    Poisson starting points on a finite window ``[a, b]`` chosen so the
    expected number of particles from outside that reach any observation box
    is below ``epsilon``; every particle on the window is kept.

``"targeted"``
    Exact generation of only those particles that visit at least one
    observation box. For box ``j`` the visitors form a Poisson process whose
    time-``t_j`` positions have intensity ``m_{t_j}`` restricted to the box;
    the start point and the rest of the path are drawn from their Gaussian
    conditional law, and a particle generated for box ``j`` is kept only if it
    misses boxes ``0..j-1`` so nothing is counted twice. Nothing is truncated,
    which matters for exponential measures whose mass explodes to one side.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.special import log_ndtr, ndtr

from . import measures as ms
from . import processes as pr
from .analytic import PairSpec, pair_grid_law
from .measures import GaussianMeasure1D, MeasureSpec
from .processes import GridLaw, NotPSDError

__all__ = [
    "WindowError",
    "SimulationConfig",
    "SystemSample",
    "replicate_rng",
    "pivoted_cholesky",
    "truncation_bound",
    "sampling_window",
    "sample_poisson_starts",
    "sample_paths",
    "simulate_system",
    "write_samples_csv",
]

EPS_PER_BOX = 1e-4
PADDING_CAP_UNITS = 60.0


class WindowError(RuntimeError):
    """No sampling window within the padding cap meets the truncation target."""


def replicate_rng(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    """Independent Philox generator for one block of replicates."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class SimulationConfig:
    """What to simulate.

    ``boxes[j]`` is the observation interval at ``times[j]`` (or None). A
    ``window_padding`` of None means the window is sized automatically so the
    truncation bound stays below ``epsilon`` (default ``1e-4`` per box).
    """

    pair: PairSpec
    times: tuple
    boxes: tuple
    replicates: int
    seed: int = 0
    window_padding: float | None = None
    epsilon: float | None = None
    method: str = "window"

    def __post_init__(self):
        times = pr.as_times(self.times, self.pair.dim)
        object.__setattr__(self, "times", times)
        if len(times) == 0:
            raise ValueError("times must be nonempty")
        boxes = tuple(None if b is None else (float(b[0]), float(b[1])) for b in self.boxes)
        if len(boxes) != len(times):
            raise ValueError(f"got {len(boxes)} boxes for {len(times)} times")
        for b in boxes:
            if b is not None and not (math.isfinite(b[0]) and math.isfinite(b[1]) and b[0] <= b[1]):
                raise ValueError(f"observation box {b} must be a bounded ordered interval")
        object.__setattr__(self, "boxes", boxes)
        if int(self.replicates) != self.replicates or self.replicates < 1:
            raise ValueError("replicates must be a positive integer")
        if not (0 <= int(self.seed) < 2**64):
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.method not in ("window", "targeted"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.window_padding is not None and not self.window_padding > 0:
            raise ValueError("window_padding must be > 0")
        if self.method == "targeted" and all(b is None for b in boxes):
            raise ValueError("targeted sampling needs at least one observation box")

    @property
    def n_boxes(self) -> int:
        return sum(b is not None for b in self.boxes)


@dataclass(frozen=True, eq=False)
class SystemSample:
    """One replicate: start points ``U_i`` and path values ``V_i(t_j)`` (one row per particle)."""

    replicate: int
    times: np.ndarray
    start_points: np.ndarray
    path_values: np.ndarray
    window: tuple
    truncation_error_bound: float

    @property
    def n_particles(self) -> int:
        return len(self.start_points)

    def displacements(self) -> np.ndarray:
        return self.path_values - self.start_points[:, None]


# -- Gaussian factorization ----------------------------------------------------


def pivoted_cholesky(cov: np.ndarray, rtol: float = pr.PSD_RTOL) -> np.ndarray:
    """Factor ``L`` with ``L @ L.T == cov`` for a PSD (possibly singular) matrix.

    Diagonal pivoting; pivots within ``rtol * trace`` of zero end the
    factorization, a more negative pivot raises NotPSDError.
    """
    cov = np.asarray(cov, dtype=float)
    n = cov.shape[0]
    L = np.zeros((n, n))
    d = np.diag(cov).copy()
    tol = rtol * max(float(np.trace(cov)), 0.0)
    perm = np.arange(n)
    for k in range(n):
        j = k + int(np.argmax(d[perm[k:]]))
        perm[[k, j]] = perm[[j, k]]
        p = perm[k]
        if d[p] <= tol:
            if d[perm[k:]].min() < -tol:
                raise NotPSDError(f"negative pivot {d[perm[k:]].min():.6g}")
            break
        L[p, k] = math.sqrt(d[p])
        rest = perm[k + 1:]
        L[rest, k] = (cov[rest, p] - L[rest, :k] @ L[p, :k]) / L[p, k]
        d[rest] -= L[rest, k] ** 2
    return L


def sample_paths(law: GridLaw, count: int, rng: np.random.Generator, factor: np.ndarray | None = None) -> np.ndarray:
    """``count`` independent draws of the grid law, one row each."""
    if factor is None:
        factor = pivoted_cholesky(law.covariance_matrix)
    z = rng.standard_normal((count, law.n))
    return law.mean_vector + z @ factor.T


# -- truncation window ---------------------------------------------------------


def _tail_left(k: float, a: float, c: float, s: float) -> float:
    """``int_{-inf}^{a} e^{-k x} P(x + s Z > c) dx`` for s > 0."""
    q = (c - a) / s
    if k == 0:
        return s * math.exp(-0.5 * q * q) / math.sqrt(2 * math.pi) - (c - a) * float(ndtr(-q))
    log_hi = -k * c + 0.5 * k * k * s * s + float(log_ndtr(k * s - q))
    log_lo = -k * a + float(log_ndtr(-q))
    big, small = (log_hi, log_lo) if k > 0 else (log_lo, log_hi)
    if big == -math.inf:
        return 0.0
    log_val = big + math.log(-math.expm1(small - big)) - math.log(abs(k)) if small < big else -math.inf
    if log_val > ms.MAX_EXPONENT:
        raise ms.MeasureOverflowError("truncation bound overflows")
    return math.exp(log_val)


def _tail_right(k: float, b: float, c: float, s: float) -> float:
    """``int_{b}^{inf} e^{-k x} P(x + s Z < c) dx`` by reflection."""
    return _tail_left(-k, -b, -c, s)


def _exp_term_bound(w, k, a, b, mu, s, lo, hi) -> tuple:
    """Expected visitors of [lo, hi] from ``w e^{-k x}`` starting left of a / right of b."""
    if s <= 0:
        # deterministic displacement mu: starters in [lo - mu, hi - mu] outside [a, b]
        left = _safe_mass(w, k, lo - mu, min(hi - mu, a))
        right = _safe_mass(w, k, max(lo - mu, b), hi - mu)
        return left, right
    left = w * max(_tail_left(k, a, lo - mu, s) - _tail_left(k, a, hi - mu, s), 0.0)
    right = w * max(_tail_right(k, b, hi - mu, s) - _tail_right(k, b, lo - mu, s), 0.0)
    return left, right


def _safe_mass(w, k, lo, hi):
    return float(ms._exp_mass(w, k, lo, hi)) if hi > lo else 0.0


def _gauss_term_bound(g: GaussianMeasure1D, a, b) -> tuple:
    """Mass of a Gaussian component outside [a, b] (bounds its visitors to any box)."""
    if g.is_dirac:
        return (g.total_mass if g.mean < a else 0.0), (g.total_mass if g.mean > b else 0.0)
    return g.total_mass * float(ndtr((a - g.mean) / g.std)), g.total_mass * float(ndtr((g.mean - b) / g.std))


def _box_moments(pair: PairSpec, times, boxes):
    law = pair_grid_law(pair, times)
    out = []
    for j, box in enumerate(boxes):
        if box is None:
            continue
        s = math.sqrt(max(float(law.covariance_matrix[j, j]), 0.0))
        out.append((float(law.mean_vector[j]), s, box))
    return out


def _side_bounds(measure: MeasureSpec, moments, a: float, b: float) -> tuple:
    left = right = 0.0
    for w, k in measure.exp_terms:
        for mu, s, (lo, hi) in moments:
            l_, r_ = _exp_term_bound(w, k, a, b, mu, s, lo, hi)
            left += l_
            right += r_
    for g in measure.gaussian_terms:
        l_, r_ = _gauss_term_bound(g, a, b)
        left += l_
        right += r_
    return left, right


def truncation_bound(pair: PairSpec, times, boxes, a: float, b: float) -> float:
    """Upper bound on expected particles from outside [a, b] that visit some box.

    Exponential terms are integrated exactly per box (Gaussian tail CDFs and
    exponential closed forms); the union over boxes is bounded by the sum.
    Gaussian measure components contribute their whole mass outside the window.
    """
    times = pr.as_times(times, pair.dim)
    left, right = _side_bounds(pair.measure, _box_moments(pair, times, boxes), a, b)
    return left + right


def sampling_window(pair: PairSpec, times, boxes, epsilon: float) -> tuple:
    """Smallest padded window ``(a, b, bound)`` around the box hull with bound <= epsilon.

    Each side is padded independently (doubling, then bisection) until its
    share of the bound is at most ``epsilon / 2``. Raises WindowError past the
    cap of 60 units of (max |mean| + 10 max sd), where Gaussian measure
    components also count toward the unit.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be > 0")
    times = pr.as_times(times, pair.dim)
    moments = _box_moments(pair, times, boxes)
    if not moments:
        raise ValueError("sampling_window needs at least one observation box")
    hull_lo = min(lo for _, _, (lo, _) in moments)
    hull_hi = max(hi for _, _, (_, hi) in moments)
    unit = max(abs(mu) for mu, _, _ in moments) + 10 * max(s for _, s, _ in moments)
    for g in pair.measure.gaussian_terms:
        unit = max(unit, abs(g.mean - hull_lo), abs(g.mean - hull_hi)) + 10 * g.std
    cap = PADDING_CAP_UNITS * max(unit, 1e-12)

    def left_of(p):
        return _side_bounds(pair.measure, moments, hull_lo - p, hull_hi)[0]

    def right_of(p):
        return _side_bounds(pair.measure, moments, hull_lo, hull_hi + p)[1]

    pads = []
    for side in (left_of, right_of):
        pads.append(_minimal_padding(side, epsilon / 2, cap, max(unit, 1e-12)))
    a, b = hull_lo - pads[0], hull_hi + pads[1]
    bound = truncation_bound(pair, times, boxes, a, b)
    return a, b, bound


def _minimal_padding(side_bound, target, cap, unit) -> float:
    if side_bound(0.0) <= target:
        return 0.0
    hi = unit / 4
    while side_bound(hi) > target:
        hi *= 2
        if hi > cap:
            raise WindowError(f"padding exceeds cap {cap:.6g} before reaching epsilon")
    lo = hi / 2 if hi > unit / 4 else 0.0
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if side_bound(mid) <= target:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-9 * max(1.0, hi):
            break
    return hi


# -- per-replicate generation ----------------------------------------------------


def sample_poisson_starts(m: MeasureSpec, window: tuple, rng: np.random.Generator) -> np.ndarray:
    """Poisson points of ``m`` on the window, sorted ascending."""
    a, b = window
    mass = ms.mass_on_interval(m, a, b)
    if not mass > 0:
        return np.empty(0)
    count = int(rng.poisson(mass))
    return np.sort(ms.sample_on_window(m, a, b, count, rng))


@dataclass(eq=False)
class _WindowPlan:
    pair: PairSpec
    times: np.ndarray
    law: GridLaw
    factor: np.ndarray
    window: tuple
    bound: float

    block_size = 64

    def run_block(self, block: int, rng: np.random.Generator) -> list:
        size = self.block_size
        a, b = self.window
        mass = float(ms.mass_on_interval(self.pair.measure, a, b))
        counts = rng.poisson(mass, size) if mass > 0 else np.zeros(size, dtype=int)
        u = ms.sample_on_window(self.pair.measure, a, b, int(counts.sum()), rng)
        xi = sample_paths(self.law, len(u), rng, self.factor)
        cuts = np.cumsum(counts)[:-1]
        out = []
        for i, (u_i, xi_i) in enumerate(zip(np.split(u, cuts), np.split(xi, cuts))):
            order = np.argsort(u_i, kind="stable")
            u_i = u_i[order]
            out.append(SystemSample(block * size + i, self.times, u_i, u_i[:, None] + xi_i[order], self.window, self.bound))
        return out


@dataclass(eq=False)
class _BoxComponent:
    """Precomputed pieces for generating the visitors of one observation box."""

    index: int
    box: tuple
    hit_measure: MeasureSpec
    hit_mass: float
    mu: float
    var: float
    coef: np.ndarray
    cond_mean: np.ndarray
    cond_factor: np.ndarray
    earlier: list = field(default_factory=list)


@dataclass(eq=False)
class _TargetedPlan:
    pair: PairSpec
    times: np.ndarray
    components: list

    block_size = 256

    def run_block(self, block: int, rng: np.random.Generator) -> list:
        """All replicates of one block, generated together."""
        size = self.block_size
        n_times = len(self.times)
        labels, starts, paths = [], [], []
        for comp in self.components:
            counts = rng.poisson(comp.hit_mass, size) if comp.hit_mass > 0 else np.zeros(size, dtype=int)
            total = int(counts.sum())
            if total == 0:
                continue
            lo, hi = comp.box
            v = ms.sample_on_window(comp.hit_measure, lo, hi, total, rng)
            u = _conditional_starts(self.pair.measure, v, comp.mu, comp.var, rng)
            xi_j = v - u
            z = rng.standard_normal((total, n_times))
            xi = comp.cond_mean + np.outer(xi_j - comp.mu, comp.coef) + z @ comp.cond_factor.T
            xi[:, comp.index] = xi_j
            pv = u[:, None] + xi
            keep = np.ones(total, dtype=bool)
            for k, (blo, bhi) in comp.earlier:
                keep &= ~((pv[:, k] >= blo) & (pv[:, k] <= bhi))
            labels.append(np.repeat(np.arange(size), counts)[keep])
            starts.append(u[keep])
            paths.append(pv[keep])
        if labels:
            lab = np.concatenate(labels)
            order = np.argsort(lab, kind="stable")
            lab, u_all, p_all = lab[order], np.concatenate(starts)[order], np.vstack(paths)[order]
        else:
            lab, u_all, p_all = np.empty(0, dtype=int), np.empty(0), np.empty((0, n_times))
        cuts = np.searchsorted(lab, np.arange(1, size))
        window = (-math.inf, math.inf)
        return [
            SystemSample(block * size + i, self.times, u_i, p_i, window, 0.0)
            for i, (u_i, p_i) in enumerate(zip(np.split(u_all, cuts), np.split(p_all, cuts)))
        ]


def _conditional_starts(m: MeasureSpec, v: np.ndarray, mu: float, var: float, rng) -> np.ndarray:
    """Draw ``U`` given ``U + xi(t_j) = v`` with ``xi(t_j) ~ N(mu, var)`` and ``U ~ m``."""
    count = len(v)
    if var <= 0:
        return v - mu
    terms = len(m.exp_terms) + len(m.gaussian_terms)
    # log-weight of each term in the convolved density at v, and its conditional law of U
    logw = np.empty((count, terms))
    means = np.empty((count, terms))
    sds = np.empty(terms)
    for i, (w, k) in enumerate(m.exp_terms):
        logw[:, i] = math.log(w) + k * mu + 0.5 * k * k * var - k * v
        means[:, i] = v - mu - k * var
        sds[i] = math.sqrt(var)
    off = len(m.exp_terms)
    for i, g in enumerate(m.gaussian_terms):
        tot = g.variance + var
        logw[:, off + i] = (
            math.log(g.total_mass) - 0.5 * math.log(2 * math.pi * tot) - 0.5 * (v - g.mean - mu) ** 2 / tot
        )
        means[:, off + i] = g.mean + g.variance / tot * (v - g.mean - mu)
        sds[off + i] = math.sqrt(g.variance * var / tot)
    pick = rng.random(count)
    if terms == 1:
        which = np.zeros(count, dtype=int)
    else:
        logw -= logw.max(axis=1, keepdims=True)
        p = np.exp(logw)
        cum = np.cumsum(p, axis=1) / p.sum(axis=1, keepdims=True)
        which = np.minimum((cum < pick[:, None]).sum(axis=1), terms - 1)
    z = rng.standard_normal(count)
    rows = np.arange(count)
    return means[rows, which] + sds[which] * z


def _targeted_plan(pair: PairSpec, times: np.ndarray, boxes) -> _TargetedPlan:
    law = pair_grid_law(pair, times)
    cov, mean = law.covariance_matrix, law.mean_vector
    n = len(times)
    tol = pr.PSD_RTOL * max(float(np.trace(cov)), 0.0)
    comps = []
    earlier = []
    for j, box in enumerate(boxes):
        if box is None:
            continue
        var = max(float(cov[j, j]), 0.0)
        if var > tol:
            coef = cov[:, j] / var
            cond_cov = cov - np.outer(cov[:, j], cov[j, :]) / var
        else:
            var = 0.0
            coef = np.zeros(n)
            cond_cov = cov.copy()
        coef[j] = 0.0
        cond_cov[j, :] = 0.0
        cond_cov[:, j] = 0.0
        cond_cov = 0.5 * (cond_cov + cond_cov.T)
        cond_mean = mean.copy()
        cond_mean[j] = 0.0
        hit = ms.convolve_with_gaussian(pair.measure, GaussianMeasure1D(float(mean[j]), var))
        comps.append(
            _BoxComponent(
                index=j,
                box=box,
                hit_measure=hit,
                hit_mass=float(ms.mass_on_interval(hit, box[0], box[1])),
                mu=float(mean[j]),
                var=var,
                coef=coef,
                cond_mean=cond_mean,
                cond_factor=pivoted_cholesky(cond_cov),
                earlier=list(earlier),
            )
        )
        earlier.append((j, box))
    return _TargetedPlan(pair, times, comps)


def _window_plan(config: SimulationConfig) -> _WindowPlan:
    law = pair_grid_law(config.pair, config.times)
    boxed = [b for b in config.boxes if b is not None]
    if config.window_padding is not None:
        if not boxed:
            raise ValueError("an explicit padding needs at least one observation box")
        a = min(lo for lo, _ in boxed) - config.window_padding
        b = max(hi for _, hi in boxed) + config.window_padding
        bound = truncation_bound(config.pair, config.times, config.boxes, a, b)
    else:
        eps = config.epsilon if config.epsilon is not None else EPS_PER_BOX * max(config.n_boxes, 1)
        a, b, bound = sampling_window(config.pair, config.times, config.boxes, eps)
    return _WindowPlan(config.pair, config.times, law, pivoted_cholesky(law.covariance_matrix), (a, b), bound)


def make_plan(config: SimulationConfig):
    if config.method == "targeted":
        return _targeted_plan(config.pair, config.times, config.boxes)
    return _window_plan(config)


def simulate_system(config: SimulationConfig, workers: int = 1, stream: int = 0) -> Iterator[SystemSample]:
    """Yield ``config.replicates`` independent samples in replicate order.

    Replicates are generated in fixed-size blocks (64 replicates per block for
    the window method, 256 for the targeted method); block ``k`` draws from
    :func:`replicate_rng` ``(seed, k, stream)``. Block size does not depend on
    ``workers`` or on ``config.replicates``, so replicate ``r`` is the same
    whatever the thread count and however many replicates are requested.
    """
    plan = make_plan(config)
    size = plan.block_size
    n_blocks = -(-config.replicates // size)

    def one(k):
        return plan.run_block(k, replicate_rng(config.seed, k, stream))

    def emit(blocks):
        for samples in blocks:
            for s in samples:
                if s.replicate < config.replicates:
                    yield s

    if workers <= 1:
        yield from emit(map(one, range(n_blocks)))
        return
    batch = max(4 * workers, 64 // size)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        for start in range(0, n_blocks, batch):
            yield from emit(pool.map(one, range(start, min(start + batch, n_blocks))))


def write_samples_csv(samples, out=None) -> str | None:
    """Raw dump ``replicate,particle,start,V_t0,...``; returns the text when ``out`` is None."""
    buf = io.StringIO() if out is None else out
    writer = csv.writer(buf, lineterminator="\n")
    header_written = False
    for s in samples:
        if not header_written:
            writer.writerow(["replicate", "particle", "start"] + [f"V_t{j}" for j in range(len(s.times))])
            header_written = True
        for i in range(s.n_particles):
            writer.writerow([s.replicate, i, repr(float(s.start_points[i]))] + [repr(float(v)) for v in s.path_values[i]])
    if out is None:
        return buf.getvalue()
    return None
