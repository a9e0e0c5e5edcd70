"""Intensity measures on the real line.

A measure is kept symbolically as a finite sum of exponential densities
``w * exp(-rate * x)`` (rate 0 is Lebesgue measure) and Gaussian components
(variance 0 is a point mass). The family is closed under convolution with
Gaussian laws, so every identity used downstream is exact in this
representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

__all__ = [
    "MAX_EXPONENT",
    "MeasureOverflowError",
    "GaussianMeasure1D",
    "MeasureSpec",
    "exponential",
    "lebesgue",
    "gaussian",
    "check_integrability",
    "gaussian_envelope_integral",
    "laplace_gaussian",
    "convolve_with_gaussian",
    "deconvolve_gaussian",
    "shift",
    "density",
    "mass_on_interval",
    "inverse_cdf_on_window",
    "sample_on_window",
]

# exponents beyond this raise instead of producing inf
MAX_EXPONENT = 700.0
CANONICAL_RTOL = 1e-12
BISECTION_ATOL = 1e-12


class MeasureOverflowError(OverflowError):
    """Raised when a closed form leaves the representable range."""


def _guard(log_value, what: str = "value"):
    if np.any(np.asarray(log_value) > MAX_EXPONENT):
        raise MeasureOverflowError(
            f"{what} overflows: log-magnitude {np.max(log_value):.6g} > {MAX_EXPONENT}"
        )


@dataclass(frozen=True)
class GaussianMeasure1D:
    """``total_mass`` times the normal law N(mean, variance); variance 0 is a Dirac mass."""

    mean: float
    variance: float
    total_mass: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean", float(self.mean))
        object.__setattr__(self, "variance", float(self.variance))
        object.__setattr__(self, "total_mass", float(self.total_mass))
        if not (math.isfinite(self.mean) and math.isfinite(self.variance)):
            raise ValueError("mean and variance must be finite")
        if self.variance < 0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")
        if not (self.total_mass > 0 and math.isfinite(self.total_mass)):
            raise ValueError(f"total_mass must be finite and > 0, got {self.total_mass}")

    @property
    def is_dirac(self) -> bool:
        return self.variance == 0.0

    @property
    def std(self) -> float:
        return math.sqrt(self.variance)

    def to_json(self) -> dict:
        return {"mean": self.mean, "var": self.variance, "mass": self.total_mass}

    @classmethod
    def from_json(cls, obj: dict) -> "GaussianMeasure1D":
        _check_keys(obj, {"mean", "var"}, {"mass"}, "gauss term")
        return cls(obj["mean"], obj["var"], obj.get("mass", 1.0))


def _check_keys(obj, required, optional, what):
    if not isinstance(obj, dict):
        raise ValueError(f"{what}: expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ValueError(f"{what}: unknown field(s) {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ValueError(f"{what}: missing field(s) {sorted(missing)}")


def _canonical_exp(terms) -> tuple:
    merged: dict[float, float] = {}
    for weight, rate in terms:
        weight, rate = float(weight), float(rate)
        if not (weight > 0 and math.isfinite(weight)):
            raise ValueError(f"exponential weight must be finite and > 0, got {weight}")
        if not math.isfinite(rate):
            raise ValueError(f"rate must be finite, got {rate}")
        rate = rate + 0.0  # folds -0.0 into 0.0
        merged[rate] = merged.get(rate, 0.0) + weight
    return tuple((merged[r], r) for r in sorted(merged))


def _canonical_gauss(terms) -> tuple:
    merged: dict[tuple, float] = {}
    for g in terms:
        if not isinstance(g, GaussianMeasure1D):
            g = GaussianMeasure1D(*g)
        key = (g.mean + 0.0, g.variance)
        merged[key] = merged.get(key, 0.0) + g.total_mass
    return tuple(GaussianMeasure1D(m, v, c) for (m, v), c in sorted(merged.items()))


@dataclass(frozen=True, eq=False)
class MeasureSpec:
    """Sum of ``weight * e_rate`` terms and Gaussian components.

    Terms are stored in canonical form: exponential terms sorted by rate with
    equal rates merged, Gaussian terms sorted by (mean, variance) with exact
    duplicates merged. Equality compares canonical forms with a relative
    tolerance of 1e-12 on weights and masses.
    """

    exp_terms: tuple = ()
    gaussian_terms: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "exp_terms", _canonical_exp(self.exp_terms))
        object.__setattr__(self, "gaussian_terms", _canonical_gauss(self.gaussian_terms))
        if not self.exp_terms and not self.gaussian_terms:
            raise ValueError("the zero measure is not a valid intensity measure")

    # -- structure ---------------------------------------------------------
    @property
    def rates(self) -> tuple:
        return tuple(r for _, r in self.exp_terms)

    @property
    def is_exp_mixture(self) -> bool:
        return not self.gaussian_terms

    @property
    def is_lebesgue_multiple(self) -> bool:
        return self.is_exp_mixture and self.rates == (0.0,)

    @property
    def single_exp(self) -> tuple | None:
        """``(weight, rate)`` when the measure is one exponential term, else None."""
        if self.is_exp_mixture and len(self.exp_terms) == 1:
            return self.exp_terms[0]
        return None

    @property
    def has_atoms(self) -> bool:
        return any(g.is_dirac for g in self.gaussian_terms)

    def close_to(self, other: "MeasureSpec", rtol: float = CANONICAL_RTOL, atol: float = 0.0) -> bool:
        if not isinstance(other, MeasureSpec):
            return NotImplemented
        if len(self.exp_terms) != len(other.exp_terms):
            return False
        if len(self.gaussian_terms) != len(other.gaussian_terms):
            return False
        for (w1, r1), (w2, r2) in zip(self.exp_terms, other.exp_terms):
            if not math.isclose(r1, r2, rel_tol=rtol, abs_tol=max(atol, rtol)):
                return False
            if not math.isclose(w1, w2, rel_tol=rtol, abs_tol=atol):
                return False
        for g1, g2 in zip(self.gaussian_terms, other.gaussian_terms):
            # locations compare on an absolute scale too, so 0 matches rounding noise
            for a, b in ((g1.mean, g2.mean), (g1.variance, g2.variance)):
                if not math.isclose(a, b, rel_tol=rtol, abs_tol=max(atol, rtol)):
                    return False
            if not math.isclose(g1.total_mass, g2.total_mass, rel_tol=rtol, abs_tol=atol):
                return False
        return True

    def __eq__(self, other):
        if not isinstance(other, MeasureSpec):
            return NotImplemented
        return self.close_to(other)

    __hash__ = None

    def __repr__(self):
        parts = [f"{w:.6g}*e_{r:g}" for w, r in self.exp_terms]
        parts += [f"{g.total_mass:.6g}*N({g.mean:g},{g.variance:g})" for g in self.gaussian_terms]
        return f"MeasureSpec({' + '.join(parts)})"

    def scaled(self, factor: float) -> "MeasureSpec":
        return MeasureSpec(
            [(w * factor, r) for w, r in self.exp_terms],
            [GaussianMeasure1D(g.mean, g.variance, g.total_mass * factor) for g in self.gaussian_terms],
        )

    def __add__(self, other: "MeasureSpec") -> "MeasureSpec":
        return MeasureSpec(self.exp_terms + other.exp_terms, self.gaussian_terms + other.gaussian_terms)

    # -- serialization -----------------------------------------------------
    def to_json(self) -> dict:
        return {
            "exp": [{"weight": w, "rate": r} for w, r in self.exp_terms],
            "gauss": [g.to_json() for g in self.gaussian_terms],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "MeasureSpec":
        _check_keys(obj, set(), {"exp", "gauss"}, "measure")
        exp = []
        for t in obj.get("exp", []):
            _check_keys(t, {"weight", "rate"}, set(), "exp term")
            exp.append((t["weight"], t["rate"]))
        gauss = [GaussianMeasure1D.from_json(g) for g in obj.get("gauss", [])]
        return cls(exp, gauss)


def exponential(rate: float, weight: float = 1.0) -> MeasureSpec:
    """``weight * e_rate``, the measure with density ``weight * exp(-rate * x)``."""
    return MeasureSpec([(weight, rate)])


def lebesgue(weight: float = 1.0) -> MeasureSpec:
    return MeasureSpec([(weight, 0.0)])


def gaussian(mean: float, variance: float, mass: float = 1.0) -> MeasureSpec:
    return MeasureSpec((), [GaussianMeasure1D(mean, variance, mass)])


def gaussian_envelope_integral(m: MeasureSpec, eps: float) -> float:
    """Closed form of ``int exp(-eps x^2) m(dx)``.

    Exponential terms give ``w sqrt(pi/eps) exp(rate^2 / (4 eps))``; a Gaussian
    component N(a, v) of mass c gives ``c exp(-eps a^2 / (1 + 2 eps v)) / sqrt(1 + 2 eps v)``.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    total = 0.0
    for w, r in m.exp_terms:
        log_term = math.log(w) + 0.5 * math.log(math.pi / eps) + r * r / (4 * eps)
        total += math.exp(log_term) if log_term < 709 else math.inf
    for g in m.gaussian_terms:
        k = 1 + 2 * eps * g.variance
        total += g.total_mass * math.exp(-eps * g.mean**2 / k) / math.sqrt(k)
    return total


def check_integrability(m: MeasureSpec) -> bool:
    """True iff ``int exp(-eps x^2) m(dx) < inf`` for every ``eps > 0``.

    Decided term by term from the closed forms in
    :func:`gaussian_envelope_integral`: an exponential term is finite for all
    eps exactly when its weight and rate are finite, and a Gaussian component
    is bounded by its (finite) total mass.
    """
    for w, r in m.exp_terms:
        # log of the integral: log w + log(pi/eps)/2 + r^2/(4 eps), finite for each eps > 0
        if not (math.isfinite(w) and math.isfinite(r) and w > 0):
            return False
    for g in m.gaussian_terms:
        if not (math.isfinite(g.total_mass) and math.isfinite(g.mean) and math.isfinite(g.variance)):
            return False
    return True


def laplace_gaussian(n: GaussianMeasure1D, y: float) -> float:
    """``int exp(y x) n(dx) = mass * exp(mean*y + variance*y^2/2)``."""
    log_value = math.log(n.total_mass) + n.mean * y + 0.5 * n.variance * y * y
    _guard(log_value, "Laplace transform")
    return math.exp(log_value)


def convolve_with_gaussian(m: MeasureSpec, n: GaussianMeasure1D) -> MeasureSpec:
    """Convolution ``m * n``.

    ``e_rate * N(mu, v)`` is ``exp(rate*mu + rate^2 v/2) e_rate`` and Gaussian
    components add means and variances. A non-unit ``n.total_mass`` scales the
    result.
    """
    exp_terms = []
    for w, r in m.exp_terms:
        log_w = math.log(w) + math.log(n.total_mass) + r * n.mean + 0.5 * r * r * n.variance
        _guard(log_w, "convolved weight")
        exp_terms.append((math.exp(log_w), r))
    gauss = [
        GaussianMeasure1D(g.mean + n.mean, g.variance + n.variance, g.total_mass * n.total_mass)
        for g in m.gaussian_terms
    ]
    return MeasureSpec(exp_terms, gauss)


def deconvolve_gaussian(m: MeasureSpec, n: GaussianMeasure1D) -> MeasureSpec:
    """The unique measure ``m0`` in the family with ``m0 * n == m``.

    Raises ValueError if some Gaussian component of ``m`` is narrower than ``n``.
    """
    exp_terms = []
    for w, r in m.exp_terms:
        log_w = math.log(w) - math.log(n.total_mass) - r * n.mean - 0.5 * r * r * n.variance
        _guard(log_w, "deconvolved weight")
        exp_terms.append((math.exp(log_w), r))
    gauss = []
    for g in m.gaussian_terms:
        v = g.variance - n.variance
        if v < -1e-12 * max(1.0, g.variance):
            raise ValueError(f"cannot deconvolve N(., {g.variance}) by N(., {n.variance})")
        gauss.append(GaussianMeasure1D(g.mean - n.mean, max(v, 0.0), g.total_mass / n.total_mass))
    return MeasureSpec(exp_terms, gauss)


def shift(m: MeasureSpec, c: float) -> MeasureSpec:
    """``m * delta_c``: the measure translated by ``c``."""
    return convolve_with_gaussian(m, GaussianMeasure1D(c, 0.0))


def density(m: MeasureSpec, x):
    """Density of the absolutely continuous part of ``m`` (point masses are skipped)."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for w, r in m.exp_terms:
        log_d = math.log(w) - r * x
        _guard(log_d, "density")
        out = out + np.exp(log_d)
    for g in m.gaussian_terms:
        if g.is_dirac:
            continue
        z = (x - g.mean) / g.std
        out = out + g.total_mass * np.exp(-0.5 * z * z) / (g.std * math.sqrt(2 * math.pi))
    return out if out.ndim else float(out)


def _exp_mass(w: float, r: float, a, b):
    """``int_a^b w exp(-r x) dx`` for arrays a <= b (infinite ends allowed when convergent)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if r == 0.0:
        if np.any(np.isinf(a) | np.isinf(b)) and np.any(b > a):
            raise ValueError("Lebesgue mass of an unbounded interval is infinite")
        return w * (b - a)
    if r > 0:
        if np.any(np.isneginf(a) & (b > a)):
            raise ValueError("e_rate with rate > 0 has infinite mass on (-inf, b]")
        width = b - a
        # w e^{-ra} (1 - e^{-r(b-a)}) / r, with the last factor kept together so tiny r stays finite
        with np.errstate(invalid="ignore", over="ignore", divide="ignore"):
            factor = np.where(np.isinf(width), 1.0 / r, -np.expm1(-r * width) / r)
            log_mass = np.where(width > 0, math.log(w) - r * a + np.log(np.where(width > 0, factor, 1.0)), -np.inf)
        _guard(log_mass, "interval mass")
        return np.where(width > 0, np.exp(log_mass), 0.0)
    # r < 0: reflect x -> -x
    return _exp_mass(w, -r, -b, -a)


def _gauss_cdf(g: GaussianMeasure1D, x):
    x = np.asarray(x, dtype=float)
    if g.is_dirac:
        return g.total_mass * (x >= g.mean)
    return g.total_mass * ndtr((x - g.mean) / g.std)


def _gauss_mass(g: GaussianMeasure1D, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if g.is_dirac:
        return g.total_mass * ((a <= g.mean) & (g.mean <= b))
    za = (a - g.mean) / g.std
    zb = (b - g.mean) / g.std
    # take the difference in whichever tail keeps precision
    upper = za > 0
    lower_diff = ndtr(zb) - ndtr(za)
    upper_diff = ndtr(-za) - ndtr(-zb)
    return g.total_mass * np.where(upper, upper_diff, lower_diff)


def mass_on_interval(m: MeasureSpec, a, b):
    """Exact ``m([a, b])``; broadcasts over array endpoints."""
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(a_arr > b_arr):
        raise ValueError("mass_on_interval requires a <= b")
    total = np.zeros(np.broadcast(a_arr, b_arr).shape)
    for w, r in m.exp_terms:
        total = total + _exp_mass(w, r, a_arr, b_arr)
    for g in m.gaussian_terms:
        total = total + _gauss_mass(g, a_arr, b_arr)
    return total if total.ndim else float(total)


def _single_exp_inverse(r: float, a: float, b: float, u):
    """Closed-form inverse CDF of ``e_r`` restricted to [a, b]."""
    u = np.asarray(u, dtype=float)
    if r == 0.0:
        return a + u * (b - a)
    if r < 0:
        return -_single_exp_inverse(-r, -b, -a, 1.0 - u)
    q = -math.expm1(-r * (b - a)) if math.isfinite(b) else 1.0
    x = a - np.log1p(-u * q) / r
    return np.clip(x, a, b)


def inverse_cdf_on_window(m: MeasureSpec, a: float, b: float, u):
    """Point ``x`` in [a, b] with ``m([a, x]) = u * m([a, b])``.

    Closed form when ``m`` is a single exponential term; otherwise bisection on
    the monotone CDF to absolute tolerance 1e-12. ``u`` may be an array.
    """
    u_arr = np.asarray(u, dtype=float)
    if np.any((u_arr < 0) | (u_arr > 1)) or np.any(np.isnan(u_arr)):
        raise ValueError("u must lie in [0, 1]")
    total = mass_on_interval(m, a, b)
    if not total > 0:
        raise ValueError(f"measure has no mass on [{a}, {b}]")
    single = m.single_exp
    if single is not None:
        x = _single_exp_inverse(single[1], a, b, u_arr)
        return x if x.ndim else float(x)
    if not (math.isfinite(a) and math.isfinite(b)):
        raise ValueError("bisection inversion needs a bounded window")
    target = u_arr * total
    lo = np.full(u_arr.shape, float(a))
    hi = np.full(u_arr.shape, float(b))
    n_iter = max(1, math.ceil(math.log2(max(b - a, BISECTION_ATOL) / BISECTION_ATOL)) + 1)
    for _ in range(n_iter):
        mid = 0.5 * (lo + hi)
        below = mass_on_interval(m, np.full(mid.shape, a), mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    x = np.where(u_arr <= 0, a, 0.5 * (lo + hi))
    return x if x.ndim else float(x)


def _truncated_normal(g: GaussianMeasure1D, a: float, b: float, u):
    if g.is_dirac:
        return np.full(np.shape(u), g.mean)
    alpha = (a - g.mean) / g.std
    beta = (b - g.mean) / g.std
    if alpha > 0:  # sample the mirror image from the lower tail, where ndtr keeps precision
        z = -_std_truncated(-beta, -alpha, 1.0 - np.asarray(u))
    else:
        z = _std_truncated(alpha, beta, u)
    return np.clip(g.mean + g.std * z, a, b)


def _std_truncated(alpha: float, beta: float, u):
    lo, hi = ndtr(alpha), ndtr(beta)
    return np.clip(ndtri(lo + np.asarray(u) * (hi - lo)), alpha, beta)


def sample_on_window(m: MeasureSpec, a: float, b: float, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` i.i.d. draws from ``m`` restricted to [a, b].

    A single exponential term is inverted in closed form
    (:func:`inverse_cdf_on_window`); mixtures pick a term in proportion to its
    mass on the window and invert that term exactly.
    """
    if count == 0:
        return np.empty(0)
    single = m.single_exp
    if single is not None:
        return np.atleast_1d(inverse_cdf_on_window(m, a, b, rng.random(count)))
    masses = [float(_exp_mass(w, r, a, b)) for w, r in m.exp_terms]
    masses += [float(_gauss_mass(g, a, b)) for g in m.gaussian_terms]
    masses = np.asarray(masses)
    total = masses.sum()
    if not total > 0:
        raise ValueError(f"measure has no mass on [{a}, {b}]")
    which = np.searchsorted(np.cumsum(masses / total), rng.random(count), side="right")
    which = np.minimum(which, len(masses) - 1)
    u = rng.random(count)
    out = np.empty(count)
    n_exp = len(m.exp_terms)
    for k in np.unique(which):
        sel = which == k
        if k < n_exp:
            out[sel] = _single_exp_inverse(m.exp_terms[k][1], a, b, u[sel])
        else:
            out[sel] = _truncated_normal(m.gaussian_terms[k - n_exp], a, b, u[sel])
    return out

