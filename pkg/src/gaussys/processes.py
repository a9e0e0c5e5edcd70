"""Driving Gaussian processes and their finite-grid laws.

Three families are built in:

* ``StationaryKernel`` -- stationary covariance ``k(t1 - t2)`` plus a constant mean;
* ``StatIncrementDrift`` -- zero-mean stationary-increment ``W`` with ``W(0) = 0``,
  given by its incremental variance ``gamma``, plus an optional drift;
* ``FBM`` -- fractional Brownian motion with covariance
  ``|t1|^k + |t2|^k - |t1 - t2|^k`` plus an optional drift.

Time points live in R^d; for d > 1 ``|t|`` is the Euclidean norm.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np

__all__ = [
    "NotPSDError",
    "Kernel",
    "IncrementVariance",
    "LinearDrift",
    "SelfSimilarDrift",
    "StationaryKernel",
    "StatIncrementDrift",
    "FBM",
    "ProcessSpec",
    "GridLaw",
    "as_times",
    "mean_at",
    "variance_at",
    "cov_at",
    "incremental_variance_at",
    "grid_law",
    "validate_psd",
    "stationary_increments_check",
    "additive_check",
    "default_lattice",
    "default_shift_triples",
    "default_additive_pairs",
]

PSD_RTOL = 1e-9


class NotPSDError(ValueError):
    """A covariance matrix built on a grid is not positive semidefinite."""


def _norm(t):
    return np.linalg.norm(np.asarray(t, dtype=float), axis=-1)


@dataclass(frozen=True)
class Kernel:
    """Stationary covariance ``k(h)`` from the named registry.

    ``exp``:   ``variance * exp(-|h| / scale) + constant``
    ``gauss``: ``variance * exp(-|h|^2 / (2 scale^2)) + constant``

    A nonnegative ``constant`` adds one shared N(0, constant) offset to the path.
    """

    name: str = "exp"
    variance: float = 1.0
    scale: float = 1.0
    constant: float = 0.0

    def __post_init__(self):
        if self.name not in ("exp", "gauss"):
            raise ValueError(f"unknown kernel {self.name!r}; expected 'exp' or 'gauss'")
        if self.variance < 0 or self.constant < 0:
            raise ValueError("kernel variance and constant must be >= 0")
        if not self.scale > 0:
            raise ValueError("kernel scale must be > 0")

    def __call__(self, lag):
        r = _norm(lag)
        if self.name == "exp":
            return self.variance * np.exp(-r / self.scale) + self.constant
        return self.variance * np.exp(-0.5 * (r / self.scale) ** 2) + self.constant

    @property
    def at_zero(self) -> float:
        return self.variance + self.constant

    def to_json(self) -> dict:
        return {"name": self.name, "variance": self.variance, "scale": self.scale, "constant": self.constant}

    @classmethod
    def from_json(cls, obj: dict) -> "Kernel":
        _strict(obj, {"name"}, {"variance", "scale", "constant"}, "kernel")
        return cls(**obj)


@dataclass(frozen=True)
class IncrementVariance:
    """Translation-invariant incremental variance ``gamma(t1, t2)`` from the registry.

    ``bm``:         ``scale * |t1 - t2|``
    ``fbm``:        ``scale * |t1 - t2|^kappa``
    ``stationary``: ``2 (k(0) - k(t1 - t2))`` for a stationary kernel ``k``; this is
                    the law of ``X(t) - X(0)`` for stationary ``X``.
    """

    name: str = "bm"
    scale: float = 1.0
    kappa: float = 1.0
    kernel: Kernel | None = None

    def __post_init__(self):
        if self.name not in ("bm", "fbm", "stationary"):
            raise ValueError(f"unknown incremental variance {self.name!r}")
        if self.name == "stationary" and self.kernel is None:
            raise ValueError("'stationary' incremental variance needs a kernel")
        if self.name == "fbm" and not (0 < self.kappa <= 2):
            raise ValueError("kappa must lie in (0, 2]")
        if self.scale < 0:
            raise ValueError("scale must be >= 0")

    def __call__(self, t1, t2):
        lag = np.asarray(t1, dtype=float) - np.asarray(t2, dtype=float)
        if self.name == "bm":
            return self.scale * _norm(lag)
        if self.name == "fbm":
            return self.scale * _norm(lag) ** self.kappa
        return 2.0 * (self.kernel.at_zero - self.kernel(lag))

    def to_json(self) -> dict:
        out = {"name": self.name}
        if self.name in ("bm", "fbm"):
            out["scale"] = self.scale
        if self.name == "fbm":
            out["kappa"] = self.kappa
        if self.name == "stationary":
            out["kernel"] = self.kernel.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "IncrementVariance":
        _strict(obj, {"name"}, {"scale", "kappa", "kernel"}, "gamma")
        obj = dict(obj)
        if "kernel" in obj:
            obj["kernel"] = Kernel.from_json(obj["kernel"])
        return cls(**obj)


@dataclass(frozen=True)
class LinearDrift:
    """Additive drift ``<coeffs, t> + offset``."""

    coeffs: tuple
    offset: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in np.atleast_1d(self.coeffs)))

    def to_json(self) -> dict:
        return {"type": "linear", "coeffs": list(self.coeffs), "offset": self.offset}


@dataclass(frozen=True)
class SelfSimilarDrift:
    """Drift ``-lam * sigma^2(t) / 2 + offset`` tied to the process variance."""

    lam: float
    offset: float = 0.0

    def __post_init__(self):
        if self.lam == 0:
            raise ValueError("SelfSimilarDrift needs lam != 0")

    def to_json(self) -> dict:
        return {"type": "self_similar", "lambda": self.lam, "offset": self.offset}


Drift = Union[None, LinearDrift, SelfSimilarDrift]


def _drift_from_json(obj) -> Drift:
    if obj is None:
        return None
    kind = obj.get("type") if isinstance(obj, dict) else None
    if kind == "none":
        _strict(obj, {"type"}, set(), "drift")
        return None
    if kind == "linear":
        _strict(obj, {"type", "coeffs"}, {"offset"}, "drift")
        return LinearDrift(tuple(obj["coeffs"]), obj.get("offset", 0.0))
    if kind == "self_similar":
        _strict(obj, {"type", "lambda"}, {"offset"}, "drift")
        return SelfSimilarDrift(obj["lambda"], obj.get("offset", 0.0))
    raise ValueError(f"unknown drift {obj!r}")


def _drift_to_json(drift: Drift):
    return {"type": "none"} if drift is None else drift.to_json()


@dataclass(frozen=True)
class StationaryKernel:
    kernel: Kernel
    mean_const: float = 0.0


@dataclass(frozen=True)
class StatIncrementDrift:
    """``W(t) + drift(t)`` with ``Var(W(t1) - W(t2)) = gamma(t1, t2)`` and ``W(0) = 0``.

    ``gamma`` is a registry :class:`IncrementVariance` or any callable of two
    time points; callables are only checked on grids.
    """

    gamma: Union[IncrementVariance, Callable]
    drift: Drift = None


@dataclass(frozen=True)
class FBM:
    kappa: float
    drift: Drift = None

    def __post_init__(self):
        if not (0 < self.kappa <= 2):
            raise ValueError(f"kappa must lie in (0, 2], got {self.kappa}")


Family = Union[StationaryKernel, StatIncrementDrift, FBM]


@dataclass(frozen=True)
class ProcessSpec:
    """Law of the driving Gaussian process on R^dim."""

    family: Family
    dim: int = 1

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError("dim must be a positive integer")
        drift = getattr(self.family, "drift", None)
        if isinstance(drift, LinearDrift) and len(drift.coeffs) != self.dim:
            raise ValueError(f"linear drift has {len(drift.coeffs)} coefficients, dim is {self.dim}")

    @property
    def drift(self) -> Drift:
        return getattr(self.family, "drift", None)

    @property
    def is_serializable(self) -> bool:
        fam = self.family
        return not isinstance(fam, StatIncrementDrift) or isinstance(fam.gamma, IncrementVariance)

    def to_json(self) -> dict:
        fam = self.family
        if isinstance(fam, StationaryKernel):
            body = {"type": "stationary_kernel", "kernel": fam.kernel.to_json(), "mean": fam.mean_const}
        elif isinstance(fam, FBM):
            body = {"type": "fbm", "kappa": fam.kappa, "drift": _drift_to_json(fam.drift)}
        else:
            if not isinstance(fam.gamma, IncrementVariance):
                raise TypeError("a user-supplied gamma callable cannot be serialized")
            body = {"type": "stat_increment", "gamma": fam.gamma.to_json(), "drift": _drift_to_json(fam.drift)}
        return {"dim": self.dim, "family": body}

    @classmethod
    def from_json(cls, obj: dict) -> "ProcessSpec":
        _strict(obj, {"family"}, {"dim"}, "process")
        fam = obj["family"]
        kind = fam.get("type") if isinstance(fam, dict) else None
        if kind == "stationary_kernel":
            _strict(fam, {"type", "kernel"}, {"mean"}, "stationary_kernel family")
            family = StationaryKernel(Kernel.from_json(fam["kernel"]), fam.get("mean", 0.0))
        elif kind == "fbm":
            _strict(fam, {"type", "kappa"}, {"drift"}, "fbm family")
            family = FBM(fam["kappa"], _drift_from_json(fam.get("drift")))
        elif kind == "stat_increment":
            _strict(fam, {"type", "gamma"}, {"drift"}, "stat_increment family")
            family = StatIncrementDrift(IncrementVariance.from_json(fam["gamma"]), _drift_from_json(fam.get("drift")))
        else:
            raise ValueError(f"unknown process family {kind!r}")
        return cls(family, obj.get("dim", 1))


def _strict(obj, required, optional, what):
    if not isinstance(obj, dict):
        raise ValueError(f"{what}: expected an object")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        raise ValueError(f"{what}: unknown field(s) {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        raise ValueError(f"{what}: missing field(s) {sorted(missing)}")


# -- evaluation ---------------------------------------------------------------


def as_times(times, dim: int) -> np.ndarray:
    """Normalize a list of time points to an array of shape (n, dim)."""
    arr = np.asarray(times, dtype=float)
    if dim == 1 and arr.ndim <= 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim == 1 and arr.shape[0] == dim:
        arr = arr.reshape(1, dim)
    if arr.ndim != 2 or arr.shape[1] != dim:
        raise ValueError(f"time points must have dimension {dim}, got array of shape {np.shape(times)}")
    return arr


def _point(p: ProcessSpec, t) -> np.ndarray:
    arr = np.asarray(t, dtype=float).reshape(-1)
    if arr.shape[0] != p.dim:
        raise ValueError(f"time point {t!r} does not have dimension {p.dim}")
    return arr


def _gamma_pairs(gamma, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    """gamma on broadcast arrays of points (..., d)."""
    if isinstance(gamma, IncrementVariance):
        return np.asarray(gamma(t1, t2), dtype=float)
    t1, t2 = np.broadcast_arrays(t1, t2)
    flat1 = t1.reshape(-1, t1.shape[-1])
    flat2 = t2.reshape(-1, t2.shape[-1])
    vals = np.array([_scalar(gamma(a, b)) for a, b in zip(flat1, flat2)])
    return vals.reshape(t1.shape[:-1])


def _variance_w(p: ProcessSpec, t: np.ndarray) -> np.ndarray:
    """Variance of the centred process at points (..., d)."""
    fam = p.family
    if isinstance(fam, StationaryKernel):
        return np.full(t.shape[:-1], fam.kernel.at_zero)
    if isinstance(fam, FBM):
        return 2.0 * _norm(t) ** fam.kappa
    return _gamma_pairs(fam.gamma, np.zeros_like(t), t)


def _gamma_w(p: ProcessSpec, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    fam = p.family
    if isinstance(fam, StationaryKernel):
        lag = t1 - t2
        return 2.0 * (fam.kernel.at_zero - fam.kernel(lag))
    if isinstance(fam, FBM):
        return 2.0 * _norm(t1 - t2) ** fam.kappa
    return _gamma_pairs(fam.gamma, t1, t2)


def _cov_w(p: ProcessSpec, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    fam = p.family
    if isinstance(fam, StationaryKernel):
        return fam.kernel(t1 - t2)
    if isinstance(fam, FBM):
        k = fam.kappa
        return _norm(t1) ** k + _norm(t2) ** k - _norm(t1 - t2) ** k
    return 0.5 * (_variance_w(p, t1) + _variance_w(p, t2) - _gamma_w(p, t1, t2))


def _mean_w(p: ProcessSpec, t: np.ndarray) -> np.ndarray:
    fam = p.family
    if isinstance(fam, StationaryKernel):
        return np.full(t.shape[:-1], float(fam.mean_const))
    drift = fam.drift
    if drift is None:
        return np.zeros(t.shape[:-1])
    if isinstance(drift, LinearDrift):
        return t @ np.asarray(drift.coeffs) + drift.offset
    return -0.5 * drift.lam * _variance_w(p, t) + drift.offset


def mean_at(p: ProcessSpec, t) -> float:
    """Mean ``E xi(t)``."""
    return float(_mean_w(p, _point(p, t)))


def variance_at(p: ProcessSpec, t) -> float:
    return float(_variance_w(p, _point(p, t)))


def cov_at(p: ProcessSpec, t1, t2) -> float:
    """Covariance ``r(t1, t2)``; the drift never enters."""
    return float(_cov_w(p, _point(p, t1), _point(p, t2)))


def incremental_variance_at(p: ProcessSpec, t1, t2) -> float:
    return float(_gamma_w(p, _point(p, t1), _point(p, t2)))


def mean_vector(p: ProcessSpec, times: np.ndarray) -> np.ndarray:
    return np.asarray(_mean_w(p, times), dtype=float)


def variance_vector(p: ProcessSpec, times: np.ndarray) -> np.ndarray:
    return np.asarray(_variance_w(p, times), dtype=float)


def covariance_matrix(p: ProcessSpec, times: np.ndarray) -> np.ndarray:
    c = np.asarray(_cov_w(p, times[:, None, :], times[None, :, :]), dtype=float)
    return 0.5 * (c + c.T)


def gamma_matrix(p: ProcessSpec, t1: np.ndarray, t2: np.ndarray) -> np.ndarray:
    return np.asarray(_gamma_w(p, t1, t2), dtype=float)


@dataclass(frozen=True, eq=False)
class GridLaw:
    """Law of ``(xi(t_1), ..., xi(t_n))``: mean vector and PSD covariance."""

    times: np.ndarray
    mean_vector: np.ndarray
    covariance_matrix: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return len(self.mean_vector)

    def two_time_moments(self) -> tuple:
        """``(mu1, mu2, var1, var2, gamma)`` for a two-time law."""
        if self.n != 2:
            raise ValueError(f"expected a two-time law, got {self.n} times")
        c = self.covariance_matrix
        mu1, mu2 = self.mean_vector
        gamma = c[0, 0] + c[1, 1] - 2 * c[0, 1]
        return float(mu1), float(mu2), float(c[0, 0]), float(c[1, 1]), max(float(gamma), 0.0)


def validate_psd(cov: np.ndarray, rtol: float = PSD_RTOL) -> None:
    """Raise NotPSDError unless the smallest eigenvalue is >= -rtol * trace."""
    diag = np.diag(cov)
    trace = float(np.sum(diag))
    tol = rtol * max(trace, 0.0)
    if np.any(diag < -tol):
        raise NotPSDError(f"negative variance on the grid (min {diag.min():.6g})")
    if cov.shape[0] == 0:
        return
    lam_min = float(np.linalg.eigvalsh(cov).min())
    if lam_min < -tol:
        raise NotPSDError(f"covariance not PSD: smallest eigenvalue {lam_min:.6g} < {-tol:.3g}")


def grid_law(p: ProcessSpec, times) -> GridLaw:
    """Mean vector and covariance matrix of the process at ``times``."""
    t = as_times(times, p.dim)
    if len(t) == 0:
        raise ValueError("grid_law needs at least one time point")
    cov = covariance_matrix(p, t)
    validate_psd(cov)
    return GridLaw(t, mean_vector(p, t), cov)


# -- structural grid checks ---------------------------------------------------


def _scalar(x) -> float:
    return float(np.asarray(x, dtype=float).reshape(-1)[0])


def stationary_increments_check(gamma: Callable, grid, tol: float = 1e-9) -> bool:
    """True iff ``|gamma(t1, t2) - gamma(t1 + h, t2 + h)| <= tol`` on every (t1, t2, h)."""
    return max_increment_residual(gamma, grid) <= tol


def max_increment_residual(gamma: Callable, grid) -> float:
    worst = 0.0
    for t1, t2, h in grid:
        t1, t2, h = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (t1, t2, h))
        worst = max(worst, abs(_scalar(gamma(t1, t2)) - _scalar(gamma(t1 + h, t2 + h))))
    return worst


def additive_check(f: Callable, grid, tol: float = 1e-9) -> bool:
    """True iff ``|f(t1 + t2) - f(t1) - f(t2)| <= tol`` on every pair."""
    worst = 0.0
    for t1, t2 in grid:
        t1, t2 = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (t1, t2))
        worst = max(worst, abs(_scalar(f(t1 + t2)) - _scalar(f(t1)) - _scalar(f(t2))))
    return worst <= tol


def default_lattice(dim: int, step: float = 0.5, half_width: float = 2.0) -> np.ndarray:
    """Lattice of spacing ``step`` covering [-half_width, half_width]^dim."""
    axis = np.arange(-half_width, half_width + step / 2, step)
    return np.array(list(itertools.product(axis, repeat=dim)), dtype=float)


def default_shifts(dim: int, step: float = 0.5) -> np.ndarray:
    """All lattice shifts in d = 1; axis and diagonal steps for d > 1 to keep the grid finite."""
    if dim == 1:
        return default_lattice(1)
    eye = np.eye(dim) * step
    return np.vstack([eye, -eye, np.full((1, dim), step), 2 * eye])


def default_shift_triples(dim: int) -> list:
    pts = default_lattice(dim)
    return [(a, b, h) for a in pts for b in pts for h in default_shifts(dim)]


def default_additive_pairs(dim: int) -> list:
    pts = default_lattice(dim)
    return [(a, b) for a in pts for b in pts]


def _grid_arrays(dim: int):
    """Broadcast-ready arrays (t1, t2, h) for the default shift grid."""
    pts = default_lattice(dim)
    shifts = default_shifts(dim)
    t1 = pts[:, None, None, :]
    t2 = pts[None, :, None, :]
    h = shifts[None, None, :, :]
    return t1, t2, h


def increment_residual(p: ProcessSpec) -> float:
    """Max violation of translation invariance of gamma on the default grid."""
    t1, t2, h = _grid_arrays(p.dim)
    a = gamma_matrix(p, t1, t2)
    b = gamma_matrix(p, t1 + h, t2 + h)
    return float(np.max(np.abs(a - b)))


def covariance_shift_residual(p: ProcessSpec) -> float:
    """Max violation of ``r(t1, t2) = r(t1 + h, t2 + h)`` on the default grid."""
    t1, t2, h = _grid_arrays(p.dim)
    a = np.asarray(_cov_w(p, t1, t2))
    b = np.asarray(_cov_w(p, t1 + h, t2 + h))
    return float(np.max(np.abs(a - b)))


def fit_linear(f_values: np.ndarray, pts: np.ndarray) -> tuple:
    """Least-squares coefficients of ``f(t) = <c, t>`` on ``pts`` and the max residual."""
    coef, *_ = np.linalg.lstsq(pts, f_values, rcond=None)
    resid = float(np.max(np.abs(pts @ coef - f_values))) if len(pts) else 0.0
    return tuple(float(c) for c in coef), resid
