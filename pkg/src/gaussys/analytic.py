"""Closed-form intensities of a Gaussian particle system for one and two times.

Particles start at the points ``U_i`` of a Poisson process with intensity
``m`` and move as ``V_i(t) = U_i + xi_i(t)``. The positions at times
``t_1..t_n`` form a Poisson process on R^n whose intensity of a set ``B`` is
``int P[(xi(t_1), ..., xi(t_n)) in B - x] m(dx)``.

For n = 1 this is the convolution ``m * N(mu(t), sigma^2(t))``, which stays
inside :mod:`gaussys.measures`. For n = 2 and an exponential term
``w e^{-k x}``, the intensity is an exponentially weighted diagonal smear of a
Gaussian layer sitting on the line ``x1 = 0``; :func:`decompose_layer` returns
that layer and :func:`bivariate_intensity` integrates it over a rectangle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from . import measures as ms
from . import processes as pr
from .measures import GaussianMeasure1D, MeasureSpec, MeasureOverflowError
from .processes import GridLaw, ProcessSpec

__all__ = [
    "QuadratureError",
    "PairSpec",
    "DiagonalGaussianLayer",
    "pair_grid_law",
    "onedim_measure",
    "onedim_density",
    "onedim_intensity",
    "psi_kappa",
    "decompose_layer",
    "bivariate_intensity",
    "LAYER_CHECK_POINTS",
]

LAYER_CHECK_POINTS = (-1.0, 0.0, 0.5, 1.0, 2.0)
QUAD_EPSREL = 1e-9


class QuadratureError(RuntimeError):
    """Adaptive quadrature did not reach the requested tolerance."""


@dataclass(frozen=True, eq=False)
class PairSpec:
    """A driving pair: intensity measure, process law, and a constant initial shift.

    The particle displacement is ``xi(t) = xi0(t) + initial_shift`` with ``xi0``
    distributed as ``process``. Construction validates the measure and checks
    that the process yields PSD covariances on the default lattice.
    """

    measure: MeasureSpec
    process: ProcessSpec
    initial_shift: float = 0.0
    validate: bool = field(default=True, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "initial_shift", float(self.initial_shift))
        if not ms.check_integrability(self.measure):
            raise ValueError("measure violates the Gaussian integrability condition")
        if self.validate:
            pr.grid_law(self.process, pr.default_lattice(self.process.dim))

    @property
    def dim(self) -> int:
        return self.process.dim

    def mean(self, times) -> np.ndarray:
        t = pr.as_times(times, self.dim)
        return pr.mean_vector(self.process, t) + self.initial_shift

    def variance(self, times) -> np.ndarray:
        return pr.variance_vector(self.process, pr.as_times(times, self.dim))

    def to_json(self) -> dict:
        return {
            "measure": self.measure.to_json(),
            "process": self.process.to_json(),
            "initial_shift": self.initial_shift,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PairSpec":
        if not isinstance(obj, dict):
            raise ValueError("pair: expected an object")
        unknown = set(obj) - {"measure", "process", "initial_shift"}
        if unknown:
            raise ValueError(f"pair: unknown field(s) {sorted(unknown)}")
        if "measure" not in obj or "process" not in obj:
            raise ValueError("pair: 'measure' and 'process' are required")
        return cls(
            MeasureSpec.from_json(obj["measure"]),
            ProcessSpec.from_json(obj["process"]),
            obj.get("initial_shift", 0.0),
        )


def pair_grid_law(pair: PairSpec, times) -> GridLaw:
    """Law of ``(xi(t_1), ..., xi(t_n))`` including the initial shift."""
    law = pr.grid_law(pair.process, times)
    return GridLaw(law.times, law.mean_vector + pair.initial_shift, law.covariance_matrix)


def onedim_measure(pair: PairSpec, t) -> MeasureSpec:
    """The one-time intensity ``m_t = m * N(mu(t), sigma^2(t))``."""
    law = pair_grid_law(pair, [t] if pair.dim > 1 else np.atleast_1d(t)[:1])
    mu = float(law.mean_vector[0])
    var = max(float(law.covariance_matrix[0, 0]), 0.0)
    return ms.convolve_with_gaussian(pair.measure, GaussianMeasure1D(mu, var))


def onedim_density(pair: PairSpec, t, x):
    """Density of ``m_t`` at ``x``.

    Each term ``w e^{-k x}`` becomes ``w e^{-k x} exp(k mu(t) + k^2 sigma^2(t) / 2)``;
    Gaussian components convolve exactly. Point masses of ``m_t`` (a Dirac
    component with deterministic ``xi(t)``) carry no density.
    """
    return ms.density(onedim_measure(pair, t), x)


def onedim_intensity(pair: PairSpec, t, a: float, b: float) -> float:
    """Expected number of particles with ``V(t)`` in [a, b]."""
    return ms.mass_on_interval(onedim_measure(pair, t), a, b)


def psi_kappa(law2: GridLaw, kappa: float, u: float) -> float:
    """Laplace transform at ``u`` of the diagonal layer of a two-time law.

    ``exp{(k - u)(mu1 + k s1/2) + u (mu2 + k s2/2) + u (u - k) gamma / 2}``
    """
    mu1, mu2, s1, s2, gamma = law2.two_time_moments()
    a1 = mu1 + 0.5 * kappa * s1
    a2 = mu2 + 0.5 * kappa * s2
    log_psi = (kappa - u) * a1 + u * a2 + 0.5 * u * (u - kappa) * gamma
    if log_psi > ms.MAX_EXPONENT:
        raise MeasureOverflowError(f"psi overflows: exponent {log_psi:.6g}")
    return math.exp(log_psi)


@dataclass(frozen=True)
class DiagonalGaussianLayer:
    """``total_mass * delta_0(x1) (x) N(profile_mean, profile_variance)(x2)``.

    The two-time intensity of ``e^{-kappa x} dx`` smeared by a bivariate normal
    law equals ``int e^{-kappa z} layer(B - z) dz``.
    """

    kappa: float
    total_mass: float
    profile_mean: float
    profile_variance: float

    def laplace(self, u: float) -> float:
        log_v = math.log(self.total_mass) + self.profile_mean * u + 0.5 * self.profile_variance * u * u
        if log_v > ms.MAX_EXPONENT:
            raise MeasureOverflowError(f"layer Laplace transform overflows: {log_v:.6g}")
        return math.exp(log_v)

    @cached_property
    def log_mass(self) -> float:
        return math.log(self.total_mass)

    def profile_mass(self, lo, hi):
        """Mass of the profile law (without total_mass) on [lo, hi], vectorized."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        if self.profile_variance <= 0:
            return ((lo <= self.profile_mean) & (self.profile_mean <= hi)).astype(float)
        sd = math.sqrt(self.profile_variance)
        za = (lo - self.profile_mean) / sd
        zb = (hi - self.profile_mean) / sd
        return np.where(za > 0, ndtr(-za) - ndtr(-zb), ndtr(zb) - ndtr(za))


def decompose_layer(law2: GridLaw, kappa: float) -> DiagonalGaussianLayer:
    """The unique layer whose Laplace transform is :func:`psi_kappa`.

    Matching ``log psi(u)`` as a quadratic in ``u`` gives mass
    ``exp(kappa (mu1 + kappa s1 / 2))``, profile mean
    ``(mu2 + kappa s2/2) - (mu1 + kappa s1/2) - kappa gamma / 2`` and
    profile variance ``gamma``.
    """
    mu1, mu2, s1, s2, gamma = law2.two_time_moments()
    a1 = mu1 + 0.5 * kappa * s1
    a2 = mu2 + 0.5 * kappa * s2
    log_mass = kappa * a1
    if log_mass > ms.MAX_EXPONENT:
        raise MeasureOverflowError(f"layer mass overflows: exponent {log_mass:.6g}")
    layer = DiagonalGaussianLayer(kappa, math.exp(log_mass), a2 - a1 - 0.5 * kappa * gamma, gamma)
    for u in LAYER_CHECK_POINTS:
        expected = psi_kappa(law2, kappa, u)
        got = layer.laplace(u)
        if not math.isclose(expected, got, rel_tol=1e-10, abs_tol=0.0):
            raise ArithmeticError(f"layer self-check failed at u={u}: {got} vs {expected}")
    return layer


def _exp_integral(k: float, lo: float, hi: float) -> float:
    """int_lo^hi e^{-k z} dz."""
    if hi <= lo:
        return 0.0
    if k == 0:
        return hi - lo
    return float(ms._exp_mass(1.0, k, lo, hi))


def _layer_rect(layer: DiagonalGaussianLayer, k: float, rect) -> float:
    """``int_{x1l}^{x1u} e^{-k z} layer-profile([x2l - z, x2u - z]) dz`` times the layer mass."""
    (x1l, x1u), (x2l, x2u) = rect
    pm, pv = layer.profile_mean, layer.profile_variance
    if pv <= 0:
        # profile is a point mass: the z-range where pm + z lands in [x2l, x2u]
        lo = max(x1l, x2l - pm)
        hi = min(x1u, x2u - pm)
        return layer.total_mass * _exp_integral(k, lo, hi)

    def integrand(z):
        return math.exp(layer.log_mass - k * z) * float(layer.profile_mass(x2l - z, x2u - z))

    # kinks of the integrand sit where the profile window crosses its mean
    breaks = sorted({p for p in (x2l - pm, x2u - pm) if x1l < p < x1u})
    total = 0.0
    edges = [x1l, *breaks, x1u]
    for lo, hi in zip(edges[:-1], edges[1:]):
        val, err, info = _quad(integrand, lo, hi)
        total += val
    return total


def _quad(f, lo, hi):
    val, err, info = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=QUAD_EPSREL, limit=200, full_output=1)[:3]
    if abs(err) > max(10 * QUAD_EPSREL * abs(val), 1e-300) and abs(val) > 0:
        raise QuadratureError(f"quadrature did not converge on [{lo}, {hi}]: value {val}, error {err}")
    return val, err, info


def bivariate_intensity(pair: PairSpec, t1, t2, rect) -> float:
    """Expected number of particles with ``(V(t1), V(t2))`` in ``rect``.

    ``rect = ((x1l, x1u), (x2l, x2u))`` must be bounded in the first
    coordinate. Only exponential-mixture measures have this closed form;
    Gaussian components raise ValueError.
    """
    if not pair.measure.is_exp_mixture:
        raise ValueError("bivariate closed form needs an exponential-mixture measure")
    (x1l, x1u), (x2l, x2u) = rect
    if not (math.isfinite(x1l) and math.isfinite(x1u)):
        raise ValueError("rectangle must be bounded in the first coordinate")
    if x1l > x1u or x2l > x2u:
        raise ValueError("rectangle bounds must be ordered")
    law2 = pair_grid_law(pair, _two_times(pair, t1, t2))
    total = 0.0
    for w, k in pair.measure.exp_terms:
        layer = decompose_layer(law2, k)
        total += w * _layer_rect(layer, k, rect)
    return total


def _two_times(pair: PairSpec, t1, t2) -> np.ndarray:
    a = pr.as_times([t1], pair.dim) if pair.dim > 1 else np.array([[float(np.ravel(t1)[0])]])
    b = pr.as_times([t2], pair.dim) if pair.dim > 1 else np.array([[float(np.ravel(t2)[0])]])
    return np.vstack([a, b])
