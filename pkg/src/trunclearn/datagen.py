"""Synthetic regression data with heavy-tailed noise and corruptions, plus libsvm I/O.

All generators are pure functions of their parameters and a seed. Random
streams come from numpy's PCG64 bit generator seeded through
``numpy.random.SeedSequence``; see :func:`rng_for`.

The noise parameters are stored in their natural form. Where experiments
quote a noise level ``beta`` through ``1/beta``, the mapping is
``df = 1/beta`` for Student-t and ``tail = 1/beta`` for Pareto.
"""
from __future__ import annotations

import io
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import DataError, DimensionError

NOISE_KINDS = ("gaussian", "student_t", "pareto", "sparse_output", "input_corruption")


def rng_for(seed: int, *stream: int) -> np.random.Generator:
    """PCG64 generator for ``(seed, *stream)``.

    The entropy words are fed to ``SeedSequence`` in order, so
    ``rng_for(s)`` equals ``numpy.random.default_rng(s)`` and independent
    sub-streams are addressed by extra integer keys (e.g. trial index).
    """
    if stream:
        return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, stream)])))
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class Dataset:
    X: np.ndarray
    y: np.ndarray
    w_star: np.ndarray | None = None
    provenance: dict = field(default_factory=dict)
    corrupted: np.ndarray | None = None  # indices of corrupted labels, if any

    def __post_init__(self):
        self.X = np.ascontiguousarray(self.X, dtype=float)
        self.y = np.ascontiguousarray(self.y, dtype=float).reshape(-1)
        if self.X.ndim != 2:
            raise DimensionError(f"X must be 2-d, got shape {self.X.shape}")
        if self.X.shape[0] != self.y.shape[0]:
            raise DimensionError(f"X has {self.X.shape[0]} rows but y has {self.y.shape[0]} entries")
        if self.w_star is not None:
            self.w_star = np.asarray(self.w_star, dtype=float)
            if self.w_star.shape != (self.X.shape[1],):
                raise DimensionError("w_star length does not match the number of columns of X")
        if not (np.all(np.isfinite(self.X)) and np.all(np.isfinite(self.y))):
            raise DataError("dataset contains non-finite entries")

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        corrupted = None
        if self.corrupted is not None:
            mask = np.zeros(self.n, dtype=bool)
            mask[self.corrupted] = True
            corrupted = np.flatnonzero(mask[idx])
        return Dataset(self.X[idx], self.y[idx], self.w_star, dict(self.provenance), corrupted)


@dataclass(frozen=True)
class NoiseModel:
    """Output-noise or corruption model.

    ``gaussian``: N(0, sigma^2). ``student_t``: Student-t with ``df``.
    ``pareto``: Pareto(x_m=1, ``tail``) shifted by its mean ``tail/(tail-1)``.
    ``sparse_output``: Gaussian(sigma) plus, on ``round(fraction*n)``
    random labels, U[-beta, beta]. ``input_corruption``: inputs observed as
    ``x + U[-beta, beta]^d`` while labels use the clean inputs and
    Gaussian(sigma) noise.
    """

    kind: str = "gaussian"
    sigma: float = 1.0
    df: float | None = None
    tail: float | None = None
    beta: float | None = None
    fraction: float = 0.2

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError(f"unknown noise kind {self.kind!r}; expected one of {NOISE_KINDS}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")
        if self.kind == "student_t" and not (self.df is not None and self.df > 0):
            raise ValueError("student_t noise needs df > 0")
        if self.kind == "pareto" and not (self.tail is not None and self.tail > 1):
            raise ValueError("pareto noise needs tail > 1 so that it can be recentred")
        if self.kind in ("sparse_output", "input_corruption") and not (self.beta is not None and self.beta > 0):
            raise ValueError(f"{self.kind} needs beta > 0")
        if self.kind == "sparse_output" and not (0 < self.fraction < 1):
            raise ValueError("fraction must lie in (0, 1)")

    @property
    def level(self) -> float:
        """The scalar that a sweep varies for this kind."""
        return {
            "gaussian": self.sigma,
            "student_t": self.df,
            "pareto": self.tail,
            "sparse_output": self.beta,
            "input_corruption": self.beta,
        }[self.kind]

    def at_level(self, level: float) -> "NoiseModel":
        key = {"gaussian": "sigma", "student_t": "df", "pareto": "tail"}.get(self.kind, "beta")
        return replace(self, **{key: float(level)})

    def describe(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


def _draw(noise: NoiseModel, n: int, rng: np.random.Generator) -> np.ndarray:
    k = noise.kind
    if k == "student_t":
        z = rng.standard_normal(n)
        chi2 = rng.chisquare(noise.df, n)
        return z / np.sqrt(chi2 / noise.df)
    if k == "pareto":
        # numpy's pareto is the Lomax law, i.e. Pareto(x_m=1) - 1
        a = noise.tail
        return rng.pareto(a, n) + 1.0 - a / (a - 1.0)
    return noise.sigma * rng.standard_normal(n)


def sample_noise(noise: NoiseModel, n: int, seed: int) -> np.ndarray:
    """I.i.d. additive output noise (the Gaussian part for corruption models)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    return _draw(noise, n, rng_for(seed))


def gen_linear(n: int, d: int, noise: NoiseModel, seed: int) -> Dataset:
    """Draw ``y = X w* + noise`` with ``X ~ N(0, 1)`` and ``w* ~ U[0, 1]``."""
    if n < 1 or d < 1:
        raise ValueError(f"need n, d >= 1, got n={n}, d={d}")
    rng = rng_for(seed)
    X = rng.standard_normal((n, d))
    w_star = rng.uniform(0.0, 1.0, d)
    eps = _draw(noise, n, rng)
    y = X @ w_star + eps
    corrupted = None
    if noise.kind == "sparse_output":
        m = int(round(noise.fraction * n))
        corrupted = np.sort(rng.choice(n, size=m, replace=False))
        y[corrupted] += rng.uniform(-noise.beta, noise.beta, m)
    elif noise.kind == "input_corruption":
        X = X + rng.uniform(-noise.beta, noise.beta, (n, d))
    prov = {"generator": "linear", "seed": int(seed), "n": n, "d": d, **noise.describe()}
    return Dataset(X, y, w_star, prov, corrupted)


def test_set_for(w_star, n_test: int = 1000, seed: int = 0, input_beta: float | None = None) -> Dataset:
    """Noise-free evaluation data ``y = X w*`` on fresh Gaussian inputs.

    ``input_beta`` additionally corrupts the returned inputs with
    U[-beta, beta] (labels stay clean); training-only corruption is the
    default.
    """
    w_star = np.asarray(w_star, dtype=float)
    rng = rng_for(seed)
    X = rng.standard_normal((n_test, w_star.shape[0]))
    y = X @ w_star
    if input_beta is not None:
        X = X + rng.uniform(-input_beta, input_beta, X.shape)
    return Dataset(X, y, w_star, {"generator": "test", "seed": int(seed), "n": n_test})


test_set_for.__test__ = False  # keep pytest from collecting it


def _open_text(source):
    if isinstance(source, (bytes, bytearray)):
        return io.StringIO(bytes(source).decode("utf-8")), None
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8"), str(source)
    if hasattr(source, "read"):
        data = source.read()
        if isinstance(data, bytes):
            data = data.decode("utf-8")
        return io.StringIO(data), getattr(source, "name", None)
    raise TypeError(f"cannot read libsvm data from {type(source).__name__}")


def parse_libsvm(source) -> Dataset:
    """Parse ``label idx:val ...`` lines (1-based indices) into a dense dataset.

    ``source`` may be a path, a bytes object or a readable stream. Blank
    lines and ``#`` comments are skipped; absent features are zero and the
    dimension is the largest index seen.
    """
    fh, name = _open_text(source)
    labels, rows = [], []
    max_idx = 0
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            try:
                label = float(parts[0])
                feats = {}
                for tok in parts[1:]:
                    i, v = tok.split(":")
                    i = int(i)
                    if i < 1:
                        raise ValueError(f"feature index {i} is not 1-based")
                    feats[i] = float(v)
            except ValueError as exc:
                raise DataError(f"{name or '<libsvm>'}:{lineno}: malformed line: {exc}") from None
            labels.append(label)
            rows.append(feats)
            if feats:
                max_idx = max(max_idx, max(feats))
    if not labels:
        raise DataError(f"{name or '<libsvm>'}: no samples found")
    X = np.zeros((len(rows), max_idx))
    for r, feats in enumerate(rows):
        for i, v in feats.items():
            X[r, i - 1] = v
    return Dataset(X, np.array(labels), provenance={"source": name or "<stream>"})


def write_libsvm(dataset: Dataset, target) -> None:
    """Write the dataset in libsvm format; zeros are omitted, floats round-trip."""
    lines = []
    for row, label in zip(dataset.X, dataset.y):
        nz = np.flatnonzero(row)
        feats = " ".join(f"{i + 1}:{float(row[i])!r}" for i in nz)
        lines.append(f"{float(label)!r} {feats}".rstrip() + "\n")
    text = "".join(lines)
    if hasattr(target, "write"):
        target.write(text)
    else:
        with open(target, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


def train_test_split(dataset: Dataset, n_train: int, seed: int) -> tuple[Dataset, Dataset]:
    """Random disjoint split into ``n_train`` training rows and the rest."""
    if not (1 <= n_train < dataset.n):
        raise ValueError(f"n_train must be in [1, {dataset.n - 1}], got {n_train}")
    perm = rng_for(seed).permutation(dataset.n)
    return dataset.subset(np.sort(perm[:n_train])), dataset.subset(np.sort(perm[n_train:]))
