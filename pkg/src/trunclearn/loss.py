"""Per-sample regression losses and their truncated compositions."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .truncation import Truncation, constants_of, phi, phi_prime

BASE_KINDS = ("square", "absolute", "huber", "eps_insensitive", "pinball")


@dataclass(frozen=True)
class BaseLoss:
    """A convex loss ``l(z, y)`` in the prediction ``z``.

    ``param`` is the Huber transition ``delta``, the epsilon-insensitive
    width ``eps`` or the pinball quantile ``tau``; it is ignored otherwise.
    """

    kind: str = "square"
    param: float | None = None

    def __post_init__(self):
        if self.kind not in BASE_KINDS:
            raise ValueError(f"unknown base loss {self.kind!r}; expected one of {BASE_KINDS}")
        p = self.param
        if self.kind == "huber" and not (p is not None and p > 0):
            raise ValueError("huber loss needs delta > 0")
        if self.kind == "eps_insensitive" and not (p is not None and p >= 0):
            raise ValueError("eps-insensitive loss needs eps >= 0")
        if self.kind == "pinball" and not (p is not None and 0 < p < 1):
            raise ValueError("pinball loss needs tau in (0, 1)")

    @property
    def lipschitz(self) -> float:
        """Lipschitz constant in ``z`` (infinite for the square loss)."""
        if self.kind == "square":
            return np.inf
        if self.kind == "huber":
            return float(self.param)
        if self.kind == "pinball":
            return max(self.param, 1.0 - self.param)
        return 1.0

    def value(self, z, y):
        return base_value(self, z, y)

    def subgrad(self, z, y):
        return base_subgrad(self, z, y)


def _ret(out, z, y):
    return float(out) if np.ndim(z) == 0 and np.ndim(y) == 0 else out


def base_value(base: BaseLoss, z, y):
    r = np.asarray(z, dtype=float) - np.asarray(y, dtype=float)
    k = base.kind
    if k == "square":
        out = r * r
    elif k == "absolute":
        out = np.abs(r)
    elif k == "huber":
        d = base.param
        a = np.abs(r)
        out = np.where(a <= d, 0.5 * r * r, d * (a - 0.5 * d))
    elif k == "eps_insensitive":
        out = np.maximum(np.abs(r) - base.param, 0.0)
    else:
        tau = base.param
        out = tau * np.maximum(-r, 0.0) + (1.0 - tau) * np.maximum(r, 0.0)
    return _ret(out, z, y)


def base_subgrad(base: BaseLoss, z, y):
    """A subgradient in ``z``; 0 is returned wherever 0 is a valid choice."""
    r = np.asarray(z, dtype=float) - np.asarray(y, dtype=float)
    k = base.kind
    if k == "square":
        out = 2.0 * r
    elif k == "absolute":
        out = np.sign(r)
    elif k == "huber":
        out = np.clip(r, -base.param, base.param)
    elif k == "eps_insensitive":
        out = np.where(np.abs(r) > base.param, np.sign(r), 0.0)
    else:
        tau = base.param
        out = np.where(r > 0, 1.0 - tau, np.where(r < 0, -tau, 0.0))
    return _ret(out * 1.0, z, y)


@dataclass(frozen=True)
class TruncatedLoss:
    base: BaseLoss
    trunc: Truncation

    def value(self, z, y):
        return trunc_value(self, z, y)

    def dz(self, z, y):
        return trunc_dz(self, z, y)

    def weak_convexity(self, input_norm: float = 1.0) -> float:
        """Weak-convexity modulus ``G^2 L_alpha`` of ``w -> phi(l(w.x, y))``.

        ``G`` is the gradient bound in parameter space, i.e. the loss's
        Lipschitz constant times the input norm bound.
        """
        g = self.base.lipschitz * input_norm
        return g * g * constants_of(self.trunc).L_alpha


def trunc_value(tl: TruncatedLoss, z, y):
    return phi(tl.trunc, base_value(tl.base, z, y))


def trunc_dz(tl: TruncatedLoss, z, y):
    """Chain rule: ``phi'(l(z, y)) * dl/dz``."""
    return phi_prime(tl.trunc, base_value(tl.base, z, y)) * base_subgrad(tl.base, z, y)


def square_log(alpha: float) -> TruncatedLoss:
    return TruncatedLoss(BaseLoss("square"), Truncation("log", alpha))


def absolute_log(alpha: float) -> TruncatedLoss:
    return TruncatedLoss(BaseLoss("absolute"), Truncation("log", alpha))
