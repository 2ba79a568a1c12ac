"""Truncation functions: smooth, concave transforms of a nonnegative loss.

Three families are provided:

``log``
    ``alpha * log(1 + u/alpha)``. Composed with the square loss this is the
    Cauchy loss.
``catoni``
    ``alpha * log(1 + sum_{k=1..m} (u/alpha)^k / k!)``; ``m=1`` coincides with
    ``log`` and ``m=2`` is the Catoni-type function.
``cubic``
    ``alpha/3 * (1 - (1 - u/alpha)^3)`` below ``alpha`` and the constant
    ``alpha/3`` above it (hard truncation with a smooth shoulder).

All evaluation functions are vectorised over ``u`` and return floats for
scalar input.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError

KINDS = ("log", "catoni", "cubic")


@dataclass(frozen=True)
class TruncationConstants:
    """Per-family constants used by the optimisation and error bounds.

    M bounds the quadratic gap ``|phi(u) - u| <= M u^2 / alpha``; ``kappa``
    bounds ``|x^2 phi''(x^2)|`` and does not depend on alpha; ``L_alpha``
    bounds ``|phi''|``.
    """

    M: float
    kappa: float
    L_alpha: float


@dataclass(frozen=True)
class Truncation:
    kind: str = "log"
    alpha: float = 1.0
    m: int = 2

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown truncation kind {self.kind!r}; expected one of {KINDS}")
        if not (self.alpha > 0) or not np.isfinite(self.alpha):
            raise ValueError(f"alpha must be positive and finite, got {self.alpha}")
        if self.kind == "catoni" and (int(self.m) != self.m or self.m < 1):
            raise ValueError(f"catoni order m must be a positive integer, got {self.m}")

    def phi(self, u):
        return phi(self, u)

    def phi_prime(self, u):
        return phi_prime(self, u)

    def phi_second(self, u):
        return phi_second(self, u)

    def constants(self) -> TruncationConstants:
        return constants_of(self)

    def with_alpha(self, alpha: float) -> "Truncation":
        return Truncation(self.kind, alpha, self.m)


def _as_nonneg(u):
    arr = np.asarray(u, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise DomainError("truncation functions are defined on u >= 0 only")
    return arr


def _out(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


def _catoni_terms(t, m):
    """Return log S, phi' and S''/S for S(t) = sum_{k=0..m} t^k/k!.

    Works in log space so that large ``t`` does not overflow.
    """
    ks = np.arange(0, m + 1)
    log_fact = np.array([lgamma(k + 1) for k in ks])
    with np.errstate(divide="ignore", invalid="ignore"):
        logt = np.log(t)
        # k * log t with the convention 0 * log 0 = 0 for the constant term
        terms = np.where(ks == 0, 0.0, ks * logt[..., None]) - log_fact
    log_s = logsumexp(terms, axis=-1)
    small = t < 1e-3
    if np.any(small):
        ts = t[small]
        acc = np.zeros_like(ts)
        for k in range(m, 0, -1):  # Horner for sum_{k=1..m} t^k/k!
            acc = ts / k * (1.0 + acc)
        log_s[small] = np.log1p(acc)
    # S'/S = 1 - (t^m/m!)/S,  S''/S = S'/S - (t^(m-1)/(m-1)!)/S
    with np.errstate(invalid="ignore"):
        tail_m = np.exp(np.where(t > 0, m * logt, -np.inf) - log_fact[m] - log_s)
        tail_m1 = np.exp(np.where(t > 0, (m - 1) * logt, -np.inf) - log_fact[m - 1] - log_s) if m > 1 else np.exp(-log_s)
    dphi = 1.0 - tail_m
    s2 = dphi - tail_m1
    return log_s, dphi, s2


def phi(spec: Truncation, u):
    """Truncated value ``phi_alpha(u)``; always within ``[0, u]``."""
    arr = _as_nonneg(u)
    a = spec.alpha
    t = arr / a
    if spec.kind == "log":
        out = a * np.log1p(t)
    elif spec.kind == "catoni":
        log_s, _, _ = _catoni_terms(np.atleast_1d(t), spec.m)
        out = a * log_s.reshape(t.shape)
    else:
        # u (1 - t + t^2/3) equals alpha/3 (1 - (1-t)^3) without cancellation
        out = np.where(t < 1.0, arr * (1.0 - t + t * t / 3.0), a / 3.0)
    return _out(out, u)


def phi_prime(spec: Truncation, u):
    """First derivative; equals 1 at 0, non-increasing, tends to 0."""
    arr = _as_nonneg(u)
    t = arr / spec.alpha
    if spec.kind == "log":
        out = 1.0 / (1.0 + t)
    elif spec.kind == "catoni":
        _, dphi, _ = _catoni_terms(np.atleast_1d(t), spec.m)
        out = dphi.reshape(t.shape)
    else:
        out = np.where(t < 1.0, (1.0 - t) ** 2, 0.0)
    return _out(out, u)


def phi_second(spec: Truncation, u):
    """Second derivative; nonpositive, bounded by ``L_alpha`` in magnitude.

    For ``cubic`` the value at the kink ``u = alpha`` is the left limit, 0.
    """
    arr = _as_nonneg(u)
    a = spec.alpha
    t = arr / a
    if spec.kind == "log":
        out = -(1.0 / a) / (1.0 + t) ** 2
    elif spec.kind == "catoni":
        _, dphi, s2 = _catoni_terms(np.atleast_1d(t), spec.m)
        # log S is concave, so clip the rounding residue of the cancellation
        out = (np.minimum(s2 - dphi * dphi, 0.0) / a).reshape(t.shape)
    else:
        out = np.where(t < 1.0, -(2.0 / a) * (1.0 - t), 0.0)
    return _out(out, u)


def constants_of(spec: Truncation) -> TruncationConstants:
    """Return ``(M, kappa, L_alpha)`` for the family.

    kappa is the sharp alpha-free maximum of ``|u phi''(u)|`` for ``log`` (1/4)
    and ``cubic`` (1/2, attained at ``u = alpha/2``); ``catoni`` uses 1.
    """
    a = spec.alpha
    if spec.kind == "log":
        return TruncationConstants(M=0.5, kappa=0.25, L_alpha=1.0 / a)
    if spec.kind == "catoni":
        return TruncationConstants(M=0.5, kappa=1.0, L_alpha=1.0 / a)
    return TruncationConstants(M=1.0, kappa=0.5, L_alpha=2.0 / a)


@dataclass
class AxiomResult:
    name: str
    passed: bool
    worst: float  # largest violation seen (<= 0 when passing)
    where: tuple = ()


@dataclass
class AxiomReport:
    spec: Truncation
    results: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, name):
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    def failures(self):
        return [r for r in self.results if not r.passed]


def check_axioms(spec: Truncation, grid, alpha_grid, tol: float = 1e-10) -> AxiomReport:
    """Check the truncation-function axioms and appendix bounds on grids.

    ``spec.alpha`` is ignored in favour of every value in ``alpha_grid``;
    ``spec.kind`` and ``spec.m`` select the family. A violation counts when
    it exceeds ``tol * (1 + |bound|)``.
    """
    u = np.asarray(grid, dtype=float)
    alphas = np.asarray(alpha_grid, dtype=float)
    if u.size == 0 or alphas.size == 0:
        raise ValueError("grids must be non-empty")
    report = AxiomReport(spec)
    worst = {}

    def record(name, excess, bound, where):
        scaled = excess - tol * (1.0 + np.abs(bound))
        k = int(np.argmax(scaled))
        val = float(excess.flat[k])
        prev = worst.get(name)
        if prev is None or scaled.flat[k] > prev[0]:
            worst[name] = (float(scaled.flat[k]), val, where(k))

    dprev = None
    for a in alphas:
        s = Truncation(spec.kind, float(a), spec.m)
        c = constants_of(s)
        f = phi(s, u)
        d = np.atleast_1d(phi_prime(s, u))
        d2 = np.atleast_1d(phi_second(s, u))
        f = np.atleast_1d(f)
        d0 = phi_prime(s, 0.0)
        record("slope_at_zero", np.atleast_1d(abs(d0 - 1.0)), np.ones(1), lambda k, a=a: (a, 0.0))
        record("slope_in_unit_interval", np.maximum(d - 1.0, -d), np.ones_like(d), lambda k, a=a: (a, u[k]))
        if u.size > 1:
            inc = np.diff(d)
            record("slope_nonincreasing_in_u", inc, d[1:], lambda k, a=a: (a, u[k + 1]))
        if dprev is not None:
            record("slope_nondecreasing_in_alpha", dprev - d, d, lambda k, a=a: (a, u[k]))
        dprev = d
        bound = c.M * u * u / a
        record("quadratic_gap", np.abs(f - u) - bound, bound, lambda k, a=a: (a, u[k]))
        record("value_in_range", np.maximum(-f, f - u), u, lambda k, a=a: (a, u[k]))
        record("curvature_bound", np.abs(d2) - c.L_alpha, np.full_like(d2, c.L_alpha), lambda k, a=a: (a, u[k]))
        # x^2 phi''(x^2) on x = sqrt(u) is u phi''(u)
        record("kappa_bound", np.abs(u * d2) - c.kappa, np.full_like(d2, c.kappa), lambda k, a=a: (a, u[k]))

    for name, (scaled, val, where) in worst.items():
        report.results.append(AxiomResult(name, scaled <= 0.0, val, where))
    return report
