"""Seeded stochastic gradient descent with stationarity tracking.

Sample indices are drawn i.i.d. uniformly with replacement from a PCG64
stream seeded by ``SgdConfig.seed`` (see :func:`trunclearn.datagen.rng_for`),
all ``T x batch_size`` of them up front, so a run is a deterministic
function of ``(problem, init, config)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datagen import rng_for
from .errors import NumericalError


class Problem:
    """Finite-sum objective ``F(w) = mean_i f_i(w)`` over a flat parameter vector.

    Subclasses implement ``n_samples``, ``dim``, ``objective``, ``gradient``
    and ``sample_gradients`` (one row per requested index, each an unbiased
    estimate of ``gradient``). ``advance`` runs a block of SGD steps in place
    and may be overridden with a faster kernel.
    """

    n_samples: int
    dim: int

    def objective(self, w) -> float:
        raise NotImplementedError

    def gradient(self, w) -> np.ndarray:
        raise NotImplementedError

    def sample_gradients(self, w, idx) -> np.ndarray:
        raise NotImplementedError

    def curvature_scale(self) -> float:
        """Normaliser ``L`` for the data-driven step rules (steps are ``<= 1/L``)."""
        raise NotImplementedError(f"{type(self).__name__} defines no curvature scale")

    def advance(self, w, idx, etas) -> int:
        """Apply ``w -= eta_t * mean(sample_gradients(w, idx[t]))`` for each t.

        Returns the offset of the first non-finite step, or -1.
        """
        for t in range(len(etas)):
            g = self.sample_gradients(w, idx[t]).mean(axis=0)
            w -= etas[t] * g
            if not np.all(np.isfinite(w)):
                return t
        return -1


@dataclass(frozen=True)
class StepRule:
    """Step-size rule.

    ``constant``: ``eta``. ``prop_one``: ``1 / (L sqrt(T))`` capped at
    ``1 / L``, where ``L = problem.curvature_scale()`` is ``(2 kappa + 1) R^2``
    for the truncated square loss. ``smooth_cap``: the cap ``1 / L`` alone.
    ``scale`` multiplies the result of the two data-driven rules.
    """

    kind: str = "prop_one"
    eta: float | None = None
    scale: float = 1.0

    def __post_init__(self):
        if self.kind not in ("constant", "prop_one", "smooth_cap"):
            raise ValueError(f"unknown step rule {self.kind!r}")
        if self.kind == "constant" and not (self.eta is not None and self.eta > 0):
            raise ValueError("constant step rule needs eta > 0")
        if self.scale <= 0:
            raise ValueError("scale must be positive")

    def step_size(self, problem: Problem, total_steps: int) -> float:
        if self.kind == "constant":
            return float(self.eta)
        L = problem.curvature_scale()
        cap = 1.0 / L
        if self.kind == "smooth_cap":
            return self.scale * cap
        return self.scale * min(1.0 / (L * np.sqrt(max(total_steps, 1))), cap)


@dataclass(frozen=True)
class SgdConfig:
    total_steps: int = 1000
    step_rule: StepRule = field(default_factory=StepRule)
    batch_size: int = 1
    seed: int = 0
    record_every: int = 100

    def __post_init__(self):
        if self.total_steps < 0:
            raise ValueError("total_steps must be nonnegative")
        if self.batch_size < 1 or self.record_every < 1:
            raise ValueError("batch_size and record_every must be positive")


@dataclass
class TrainReport:
    final_model: np.ndarray
    grad_norm_trace: list  # (step, ||grad F||^2)
    objective_trace: list  # (step, F)
    wall_steps: int
    sampled_iterate: np.ndarray
    sampled_step: int
    step_size: float

    @property
    def min_grad_norm_sq(self) -> float:
        return min(g for _, g in self.grad_norm_trace)


def record_steps(total_steps: int, record_every: int) -> list:
    steps = list(range(0, total_steps + 1, record_every))
    if steps[-1] != total_steps:
        steps.append(total_steps)
    return steps


def sgd(problem: Problem, init, config: SgdConfig) -> TrainReport:
    """Run ``config.total_steps`` SGD updates from ``init``.

    The full gradient and objective are recorded at step 0, every
    ``record_every`` steps and at the end. ``sampled_iterate`` is the
    iterate at one recorded step ``>= 1`` chosen uniformly at random.
    """
    T = config.total_steps
    n = problem.n_samples
    if config.batch_size > n:
        raise ValueError(f"batch_size {config.batch_size} exceeds n={n}")
    w = np.array(init, dtype=float, copy=True)
    if w.shape != (problem.dim,):
        raise ValueError(f"init has shape {w.shape}, problem dimension is {problem.dim}")
    rng = rng_for(config.seed)
    idx = rng.integers(0, n, size=(T, config.batch_size))
    steps = record_steps(T, config.record_every)
    eligible = [s for s in steps if s >= 1] or [0]
    pick = eligible[int(rng.integers(0, len(eligible)))]
    eta = config.step_rule.step_size(problem, T) if T > 0 else 0.0
    etas = np.full(T, eta)

    grad_trace, obj_trace = [], []
    sampled = w.copy()
    prev = 0
    for s in steps:
        if s > prev:
            bad = problem.advance(w, idx[prev:s], etas[prev:s])
            if bad >= 0:
                step = prev + bad
                raise NumericalError(
                    f"non-finite iterate at step {step + 1} (sample indices {idx[step].tolist()})"
                )
            prev = s
        g = problem.gradient(w)
        gn = float(g @ g)
        if not np.isfinite(gn):
            raise NumericalError(f"non-finite gradient at step {s}")
        grad_trace.append((s, gn))
        obj_trace.append((s, float(problem.objective(w))))
        if s == pick:
            sampled = w.copy()
    return TrainReport(w, grad_trace, obj_trace, T, sampled, pick, float(eta))


def grad_variance(problem: Problem, w, sample_count: int | None = None, seed: int = 0) -> float:
    """Mean squared deviation of sample gradients from the full gradient.

    With ``sample_count=None`` the average runs over every sample exactly;
    otherwise over ``sample_count`` indices drawn with replacement.
    """
    w = np.asarray(w, dtype=float)
    if sample_count is None:
        idx = np.arange(problem.n_samples)
    else:
        if sample_count < 2:
            raise ValueError("sample_count must be at least 2")
        idx = rng_for(seed).integers(0, problem.n_samples, size=sample_count)
    G = problem.sample_gradients(w, idx)
    dev = G - problem.gradient(w)
    return float(np.mean(np.einsum("ij,ij->i", dev, dev)))
