"""Stationarity classification of driving pairs, canonical forms and equality in law.

A pair ``(m, xi)`` generates a stationary system exactly when it falls in one
of three families:

``S1``
    ``xi`` is stationary (constant mean, shift-invariant covariance); any ``m``.
``S2``
    ``m = alpha * Lebesgue``; ``xi`` has stationary increments plus an
    additive (here linear) drift.
``S3``
    ``m = alpha * e_lambda`` with ``lambda != 0``; ``xi`` has stationary
    increments and ``E xi(t) = -lambda sigma^2(t) / 2 + c``.

A stationary ``xi`` with a Lebesgue or single-exponential measure also
satisfies the S2 or S3 conditions. Overlaps are resolved with priority
S3 > S2 > S1, so the labels S1*, S2 and S3 are disjoint and pairs with
different labels never generate the same system. ``S1*`` is S1 outside
S2 and S3; the plain ``S1`` label is never produced.

All structural equalities are decided from mean and covariance functions on a
finite grid with an absolute tolerance.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from . import measures as ms
from . import processes as pr
from .analytic import PairSpec
from .measures import GaussianMeasure1D
from .processes import (
    FBM,
    IncrementVariance,
    LinearDrift,
    ProcessSpec,
    SelfSimilarDrift,
    StationaryKernel,
    StatIncrementDrift,
)

__all__ = [
    "DEFAULT_TOL",
    "FamilyLabel",
    "ClassificationReport",
    "EqualInLawResult",
    "Grid",
    "classify_pair",
    "canonicalize",
    "equal_in_law_analytic",
]

DEFAULT_TOL = 1e-9


class FamilyLabel(str, enum.Enum):
    S1 = "S1"
    S1_STAR = "S1*"
    S2 = "S2"
    S3 = "S3"
    NOT_STATIONARY = "not_stationary"

    @property
    def is_stationary(self) -> bool:
        return self is not FamilyLabel.NOT_STATIONARY


@dataclass(frozen=True, eq=False)
class Grid:
    """Validation points and the shifts applied to them."""

    points: np.ndarray
    shifts: np.ndarray

    @classmethod
    def default(cls, dim: int) -> "Grid":
        return cls(pr.default_lattice(dim), pr.default_shifts(dim))

    @classmethod
    def coerce(cls, grid, dim: int) -> "Grid":
        if grid is None:
            return cls.default(dim)
        if isinstance(grid, Grid):
            return grid
        pts = pr.as_times(grid, dim)
        # in one dimension the grid doubles as its own shift set
        return cls(pts, pts if dim == 1 else pr.default_shifts(dim))


# -- grid residuals --------------------------------------------------------------


def _pair_mean(pair: PairSpec, t: np.ndarray) -> np.ndarray:
    return np.asarray(pr._mean_w(pair.process, t), dtype=float) + pair.initial_shift


def _increment_residual(p: ProcessSpec, g: Grid) -> float:
    t1 = g.points[:, None, None, :]
    t2 = g.points[None, :, None, :]
    h = g.shifts[None, None, :, :]
    a = pr.gamma_matrix(p, t1, t2)
    b = pr.gamma_matrix(p, t1 + h, t2 + h)
    return float(np.max(np.abs(a - b)))


def _covariance_shift_residual(p: ProcessSpec, g: Grid) -> float:
    t1 = g.points[:, None, None, :]
    t2 = g.points[None, :, None, :]
    h = g.shifts[None, None, :, :]
    a = np.asarray(pr._cov_w(p, t1, t2), dtype=float)
    b = np.asarray(pr._cov_w(p, t1 + h, t2 + h), dtype=float)
    return float(np.max(np.abs(a - b)))


def _constant_mean_residual(pair: PairSpec, g: Grid) -> tuple:
    mu = _pair_mean(pair, g.points)
    c = float(np.mean(mu))
    return float(np.max(np.abs(mu - c))), c


def _additive_residual(pair: PairSpec, g: Grid) -> float:
    zero = np.zeros((1, pair.dim))
    mu0 = float(_pair_mean(pair, zero)[0])

    def f(t):
        return _pair_mean(pair, t) - mu0

    t1 = g.points[:, None, :]
    t2 = g.points[None, :, :]
    return float(np.max(np.abs(f(t1 + t2) - f(t1) - f(t2))))


def _self_similar_residual(pair: PairSpec, lam: float, g: Grid) -> tuple:
    """Least-squares ``c`` in ``mu(t) = -lam sigma^2(t) / 2 + c`` and the max residual."""
    v = _pair_mean(pair, g.points) + 0.5 * lam * pr.variance_vector(pair.process, g.points)
    c = float(np.mean(v))
    return float(np.max(np.abs(v - c))), c


# -- reports -------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClassificationReport:
    """Label, its parameters, and the grid checks behind it.

    When the label is not ``not_stationary`` every residual in ``evidence``
    is at most ``tol``. For ``not_stationary`` the evidence lists the
    violated checks and ``params["reason"]`` names the first one.
    """

    label: FamilyLabel
    params: dict
    evidence: tuple
    canonical: PairSpec | None
    tol: float

    def to_json(self) -> dict:
        canonical = None
        if self.canonical is not None and self.canonical.process.is_serializable:
            canonical = self.canonical.to_json()
        return {
            "label": self.label.value,
            "params": self.params,
            "evidence": [dict(e) for e in self.evidence],
            "canonical": canonical,
        }

    def to_text(self) -> str:
        lines = [f"label: {self.label.value}"]
        for k, v in self.params.items():
            lines.append(f"  {k}: {v}")
        lines.append("evidence:")
        for e in self.evidence:
            note = f"  ({e['note']})" if "note" in e else ""
            lines.append(f"  {e['check']:<24}{e['residual']:.3e}{note}")
        if self.canonical is not None:
            lines.append(f"canonical: {self.canonical.measure!r}, initial_shift={self.canonical.initial_shift:g}")
        return "\n".join(lines) + "\n"


def _check(name: str, residual: float, note: str | None = None) -> dict:
    out = {"check": name, "residual": residual}
    if note:
        out["note"] = note
    return out


def _kernel_id(p: ProcessSpec) -> str:
    fam = p.family
    if isinstance(fam, StationaryKernel):
        return fam.kernel.name
    return "grid"


def classify_pair(pair: PairSpec, grid=None, tol: float = DEFAULT_TOL) -> ClassificationReport:
    """Decide which stationary family, if any, the pair belongs to.

    S3 is tried first (single exponential measure with nonzero rate), then S2
    (multiple of Lebesgue), then S1 (stationary ``xi``). The ``lambda`` of S3
    is the measure rate; ``c`` is fitted by least squares and residual-checked.
    """
    g = Grid.coerce(grid, pair.dim)
    p = pair.process
    m = pair.measure
    cache = {}

    def inc():
        if "inc" not in cache:
            cache["inc"] = _increment_residual(p, g)
        return cache["inc"]

    def s1_checks():
        if "s1" not in cache:
            cov = _covariance_shift_residual(p, g)
            const, c = _constant_mean_residual(pair, g)
            cache["s1"] = (cov, const, c)
        return cache["s1"]

    violations = []
    single = m.single_exp

    if single is not None and single[1] != 0:
        alpha, lam = single
        ss, c = _self_similar_residual(pair, lam, g)
        route = [("stationary_increments", inc()), ("self_similar_drift", ss)]
        if all(r <= tol for _, r in route):
            evidence = [_check(n, r) for n, r in route]
            evidence += _overlap_evidence(s1_checks(), tol, "S3")
            params = {"alpha": alpha, "lambda": lam, "c": c}
            return ClassificationReport(FamilyLabel.S3, params, tuple(evidence), _canonical_s3(pair, alpha, lam, c), tol)
        violations += [("S3", n, r) for n, r in route if r > tol]

    if m.is_lebesgue_multiple:
        alpha = m.exp_terms[0][0]
        add = _additive_residual(pair, g)
        route = [("stationary_increments", inc()), ("additive_drift", add)]
        if all(r <= tol for _, r in route):
            coeffs = _linear_coeffs(pair)
            zero = np.zeros((1, pair.dim))
            c = float(_pair_mean(pair, zero)[0])
            evidence = [_check(n, r) for n, r in route]
            evidence += _overlap_evidence(s1_checks(), tol, "S2")
            params = {"alpha": alpha, "drift_coeffs": list(coeffs), "c": c}
            return ClassificationReport(FamilyLabel.S2, params, tuple(evidence), _canonical_s2(pair, coeffs), tol)
        violations += [("S2", n, r) for n, r in route if r > tol]

    cov, const, c = s1_checks()
    route = [("stationary_covariance", cov), ("constant_mean", const)]
    if all(r <= tol for _, r in route):
        var = float(pr.variance_vector(p, np.zeros((1, pair.dim)))[0])
        params = {"kernel": _kernel_id(p), "c": c, "variance": var}
        return ClassificationReport(FamilyLabel.S1_STAR, params, tuple(_check(n, r) for n, r in route), None, tol)
    violations += [("S1", n, r) for n, r in route if r > tol]

    first = violations[0]
    params = {"reason": f"{first[0]} route: {first[1]} residual {first[2]:.3e} exceeds {tol:g}"}
    evidence = tuple(_check(name, r, note=f"{route_name} route") for route_name, name, r in violations)
    return ClassificationReport(FamilyLabel.NOT_STATIONARY, params, evidence, None, tol)


def _overlap_evidence(s1, tol, label) -> list:
    cov, const, _ = s1
    if cov <= tol and const <= tol:
        note = f"xi is stationary: pair also lies in S1, resolved to {label}"
        return [_check("overlap_S1", max(cov, const), note)]
    return []


def _linear_coeffs(pair: PairSpec) -> tuple:
    """Coefficients of the additive drift ``f(t) = mu(t) - mu(0)``."""
    drift = pair.process.drift
    if isinstance(drift, LinearDrift):
        return drift.coeffs
    pts = pr.default_lattice(pair.dim)
    zero = np.zeros((1, pair.dim))
    f = _pair_mean(pair, pts) - _pair_mean(pair, zero)[0]
    coeffs, _ = pr.fit_linear(f, pts)
    return coeffs


def _increments_of(p: ProcessSpec):
    """The incremental variance of ``p`` in a form usable for a W(0) = 0 process."""
    fam = p.family
    if isinstance(fam, StationaryKernel):
        return IncrementVariance("stationary", kernel=fam.kernel)
    return fam.gamma


def _with_drift(p: ProcessSpec, drift) -> ProcessSpec:
    fam = p.family
    if isinstance(fam, FBM):
        return ProcessSpec(FBM(fam.kappa, drift), p.dim)
    return ProcessSpec(StatIncrementDrift(_increments_of(p), drift), p.dim)


def _canonical_s3(pair: PairSpec, alpha: float, lam: float, c: float) -> PairSpec:
    """``(alpha e^{lam c} e_lam, W~ - lam sigma~^2 / 2)`` with ``W~(0) = 0``.

    Tilting the law of ``xi(0)`` by ``e^{lam xi(0)}`` moves the mean of the
    increment path by ``-lam gamma(0, t) / 2``, so the canonical process keeps
    the incremental variance and gets the self-similar drift with offset 0.
    ``c`` here is ``mu(0) + lam sigma^2(0) / 2``, the fitted constant.
    """
    log_w = math.log(alpha) + lam * c
    if log_w > ms.MAX_EXPONENT:
        raise ms.MeasureOverflowError(f"canonical weight overflows: exponent {log_w:.6g}")
    measure = ms.exponential(lam, math.exp(log_w))
    return PairSpec(measure, _with_drift(pair.process, SelfSimilarDrift(lam, 0.0)), 0.0, validate=False)


def _canonical_s2(pair: PairSpec, coeffs: tuple) -> PairSpec:
    drift = LinearDrift(coeffs, 0.0) if any(c != 0 for c in coeffs) else None
    return PairSpec(pair.measure, _with_drift(pair.process, drift), 0.0, validate=False)


def canonicalize(pair: PairSpec, grid=None, tol: float = DEFAULT_TOL) -> PairSpec:
    """The canonical representative (``xi(0) = 0``) of an S2 or S3 pair."""
    report = classify_pair(pair, grid, tol)
    if report.label not in (FamilyLabel.S2, FamilyLabel.S3):
        raise ValueError(f"canonicalize needs an S2 or S3 pair, got {report.label.value}")
    return report.canonical


# -- equality in law -----------------------------------------------------------


@dataclass(frozen=True)
class EqualInLawResult:
    equal: bool
    label_a: FamilyLabel
    label_b: FamilyLabel
    reason: str
    certificate: dict | None = None

    def __bool__(self) -> bool:
        return self.equal

    def to_json(self) -> dict:
        return {
            "equal": self.equal,
            "label_a": self.label_a.value,
            "label_b": self.label_b.value,
            "reason": self.reason,
            "certificate": self.certificate,
        }


def _process_law_residual(a: PairSpec, b: PairSpec, g: Grid) -> float:
    pts = g.points
    dm = np.abs(_pair_mean(a, pts) - _pair_mean(b, pts))
    dc = np.abs(pr.covariance_matrix(a.process, pts) - pr.covariance_matrix(b.process, pts))
    return float(max(dm.max(), dc.max()))


def equal_in_law_analytic(pair_a: PairSpec, pair_b: PairSpec, grid=None, tol: float = DEFAULT_TOL) -> EqualInLawResult:
    """Decide whether two stationary pairs generate the same system in law.

    Different labels give False. S2 and S3 pairs are compared through their
    canonical forms. Two S1* pairs are equal in law iff, after ordering them
    so ``sigma_a^2 <= sigma_b^2``, ``m_a = m_b * n0`` and
    ``r_b = r_a + sigma0^2`` with ``n0 = N(mu_b - mu_a, sigma_b^2 - sigma_a^2)``
    (``xi_b`` is ``xi_a`` plus an independent N0 ~ n0). The certificate
    records ``n0`` and which pair carries the added variable.

    Raises ValueError when a pair is not stationary, unless both pairs are
    literally the same object description.
    """
    if pair_a.dim != pair_b.dim:
        return EqualInLawResult(False, FamilyLabel.NOT_STATIONARY, FamilyLabel.NOT_STATIONARY, "different time domains")
    g = Grid.coerce(grid, pair_a.dim)
    ra, rb = classify_pair(pair_a, g, tol), classify_pair(pair_b, g, tol)
    la, lb = ra.label, rb.label
    if not (la.is_stationary and lb.is_stationary):
        if _same_description(pair_a, pair_b):
            return EqualInLawResult(True, la, lb, "identical pairs", _certificate(0.0, 0.0, "a_to_b"))
        raise ValueError("equal_in_law_analytic needs stationary pairs")
    if la is not lb:
        return EqualInLawResult(False, la, lb, f"different families {la.value} and {lb.value}")

    if la in (FamilyLabel.S2, FamilyLabel.S3):
        ca, cb = ra.canonical, rb.canonical
        if not ca.measure.close_to(cb.measure):
            return EqualInLawResult(False, la, lb, "canonical measures differ")
        resid = _process_law_residual(ca, cb, g)
        if resid > tol:
            return EqualInLawResult(False, la, lb, f"canonical process laws differ (residual {resid:.3e})")
        return EqualInLawResult(True, la, lb, "canonical pairs coincide")

    zero = np.zeros((1, pair_a.dim))
    var_a = float(pr.variance_vector(pair_a.process, zero)[0])
    var_b = float(pr.variance_vector(pair_b.process, zero)[0])
    lo, hi, direction = (pair_a, pair_b, "a_to_b") if var_a <= var_b else (pair_b, pair_a, "b_to_a")
    mu0 = float(_pair_mean(hi, zero)[0] - _pair_mean(lo, zero)[0])
    var0 = abs(var_b - var_a)
    n0 = GaussianMeasure1D(mu0, var0)
    if not lo.measure.close_to(ms.convolve_with_gaussian(hi.measure, n0)):
        return EqualInLawResult(False, la, lb, "measure condition m' = m'' * n0 fails")
    pts = g.points
    resid = float(
        np.max(np.abs(pr.covariance_matrix(hi.process, pts) - pr.covariance_matrix(lo.process, pts) - var0))
    )
    if resid > tol:
        return EqualInLawResult(False, la, lb, f"covariance condition r'' = r' + var0 fails (residual {resid:.3e})")
    return EqualInLawResult(True, la, lb, "Gaussian shift construction holds", _certificate(mu0, var0, direction))


def _certificate(mean: float, var: float, direction: str) -> dict:
    return {"n0": {"mean": mean, "var": var}, "direction": direction}


def _same_description(a: PairSpec, b: PairSpec) -> bool:
    if a is b:
        return True
    if not (a.process.is_serializable and b.process.is_serializable):
        return False
    return a.to_json() == b.to_json()
