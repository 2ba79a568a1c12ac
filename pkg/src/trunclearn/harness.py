"""Experiment orchestration: noise sweeps, cross-validation, rate checks, Q-Q data.

Every experiment is a deterministic function of its configuration. Random
streams are derived from ``(seed, *keys)`` through :func:`rng_for`, so
cells of a sweep can be recomputed independently and in any order.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import norm

from . import mlp
from .datagen import Dataset, NoiseModel, gen_linear, parse_libsvm, rng_for, test_set_for, train_test_split
from .errors import DataError, TruncLearnError
from .linmodel import LinearProblem, ObjectiveSpec, ridge_oracle, statistical_error, test_metrics
from .loss import BaseLoss, TruncatedLoss
from .optim import SgdConfig, StepRule, sgd
from .truncation import Truncation

log = logging.getLogger(__name__)

DEFAULT_ALPHAS = (0.1, 0.5, 1.0, 5.0, 10.0, 50.0, 100.0, 1e9)
DEFAULT_LAMBDAS = (0.0, 1e-4, 1e-3, 1e-2, 1e-1)
UNTRUNCATED_ALPHA = 1e9


def derive_seed(seed: int, *keys: int) -> int:
    return int(rng_for(seed, *keys).integers(0, 2**63 - 1))


@dataclass(frozen=True)
class FitOptions:
    """How a single linear model is trained.

    ``T = steps_per_sample * n`` SGD steps from ``w = 0`` with the given
    step rule. The data-driven rules are multiplied by ``step_scale`` for
    the square base and by ``lipschitz_step_scale`` otherwise, so a
    Lipschitz base with ``smooth_cap`` steps by ``lipschitz_step_scale / (G R^2)``.
    """

    steps_per_sample: float = 50.0
    step_rule: str = "smooth_cap"
    step_scale: float = 1.0
    lipschitz_step_scale: float = 10.0
    batch_size: int = 1
    total_steps: int | None = None  # overrides steps_per_sample

    def sgd_config(self, n: int, seed: int, base: str = "square") -> SgdConfig:
        T = self.total_steps if self.total_steps is not None else int(round(self.steps_per_sample * n))
        rule = StepRule(self.step_rule, scale=self.step_scale if base == "square" else self.lipschitz_step_scale)
        return SgdConfig(total_steps=T, step_rule=rule, batch_size=self.batch_size, seed=seed, record_every=max(T, 1))


def make_loss(base: str, trunc: str, alpha: float, m: int = 2) -> TruncatedLoss:
    params = {"huber": 1.0, "eps_insensitive": 0.1, "pinball": 0.5}
    return TruncatedLoss(BaseLoss(base, params.get(base)), Truncation(trunc, alpha, m))


def fit_linear(train: Dataset, tl: TruncatedLoss, lam: float, options: FitOptions, seed: int) -> np.ndarray:
    problem = LinearProblem(ObjectiveSpec(tl, lam), train)
    return sgd(problem, np.zeros(train.d), options.sgd_config(train.n, seed, tl.base.kind)).final_model


def _metric_name(base: str) -> str:
    return "mse" if base == "square" else "mae"


def kfold_indices(n: int, k: int, seed: int) -> list:
    if k < 2 or k > n:
        raise ValueError(f"need 2 <= k <= n for k-fold CV, got k={k}, n={n}")
    perm = rng_for(seed).permutation(n)
    return [np.sort(f) for f in np.array_split(perm, k)]


def _is_tie(score: float, best: float) -> bool:
    return score <= best + 1e-9 + 1e-6 * abs(best)


def cross_validate(
    dataset: Dataset,
    base: str = "square",
    trunc_kind: str = "log",
    alpha_grid=DEFAULT_ALPHAS,
    lambda_grid=DEFAULT_LAMBDAS,
    k: int = 5,
    seed: int = 0,
    options: FitOptions = FitOptions(),
):
    """k-fold grid search over ``(alpha, lambda)``.

    The score is mean validation MSE for the square base and MAE otherwise.
    Scores within ``1e-9 + 1e-6 |best|`` of the best count as ties, which
    are broken toward larger alpha, then larger lambda. Returns
    ``(alpha, lam, table)`` with table rows ``(alpha, lam, mean, std)``.
    """
    alphas, lams = list(alpha_grid), list(lambda_grid)
    if not alphas or not lams:
        raise ValueError("alpha and lambda grids must be non-empty")
    folds = kfold_indices(dataset.n, k, seed)
    metric = _metric_name(base)
    table = []
    for ai, a in enumerate(alphas):
        for li, lam in enumerate(lams):
            scores = []
            for fi, val_idx in enumerate(folds):
                train_idx = np.setdiff1d(np.arange(dataset.n), val_idx, assume_unique=True)
                w = fit_linear(dataset.subset(train_idx), make_loss(base, trunc_kind, a), lam, options, derive_seed(seed, fi))
                scores.append(test_metrics(w, dataset.subset(val_idx))[metric])
            sd = float(np.std(scores, ddof=1)) if len(scores) > 1 else 0.0
            table.append((float(a), float(lam), float(np.mean(scores)), sd))
    best = min(row[2] for row in table)
    if not math.isfinite(best):
        raise TruncLearnError("cross-validation produced no finite score")
    tied = [row for row in table if _is_tie(row[2], best)]
    chosen = max(tied, key=lambda row: (row[0], row[1]))
    return chosen[0], chosen[1], table


@dataclass(frozen=True)
class ExperimentConfig:
    task: str = "sweep"
    loss: str = "square"
    trunc: str = "log"
    noise: str = "sparse_output"
    levels: tuple = (10.0, 20.0, 30.0, 40.0, 50.0)
    fraction: float = 0.2
    sigma: float = 1.0
    n: int = 1000
    d: int = 1000
    n_test: int = 1000
    trials: int = 5
    alpha_grid: tuple = DEFAULT_ALPHAS
    lambda_grid: tuple = DEFAULT_LAMBDAS
    folds: int = 5
    fit: FitOptions = field(default_factory=FitOptions)
    seed: int = 0

    def noise_model(self, level: float) -> NoiseModel:
        build = {
            "gaussian": lambda: NoiseModel("gaussian", sigma=level),
            "student_t": lambda: NoiseModel("student_t", df=level),
            "pareto": lambda: NoiseModel("pareto", tail=level),
            "sparse_output": lambda: NoiseModel("sparse_output", beta=level, fraction=self.fraction, sigma=self.sigma),
            "input_corruption": lambda: NoiseModel("input_corruption", beta=level, sigma=self.sigma),
        }
        if self.noise not in build:
            raise ValueError(f"unknown noise kind {self.noise!r}")
        return build[self.noise]()

    def digest(self) -> str:
        return config_hash(asdict(self))


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, default=str).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:12]


@dataclass
class SweepRow:
    noise_level: float
    method: str
    trials: int
    ok_trials: int
    test_mse_mean: float
    test_mse_std: float
    test_mae_mean: float
    test_mae_std: float
    stat_err_mean: float
    stat_err_std: float
    ridge_mse_mean: float
    alphas: str
    lambdas: str


@dataclass
class CellResult:
    level: float
    trial: int
    method: str
    ok: bool
    test_mse: float = math.nan
    test_mae: float = math.nan
    stat_err: float = math.nan
    ridge_mse: float = math.nan
    alpha: float = math.nan
    lam: float = math.nan
    error: str = ""


def run_cell(config: ExperimentConfig, li: int, level: float, trial: int) -> list:
    """Train both methods on one (noise level, trial) realisation."""
    cell_seed = derive_seed(config.seed, li, trial)
    train = gen_linear(config.n, config.d, config.noise_model(level), derive_seed(cell_seed, 0))
    test = test_set_for(train.w_star, config.n_test, derive_seed(cell_seed, 1))
    cv_seed, fit_seed = derive_seed(cell_seed, 2), derive_seed(cell_seed, 3)
    a_tr, l_tr, _ = cross_validate(train, config.loss, config.trunc, config.alpha_grid, config.lambda_grid, config.folds, cv_seed, config.fit)
    _, l_un, _ = cross_validate(train, config.loss, config.trunc, [UNTRUNCATED_ALPHA], config.lambda_grid, config.folds, cv_seed, config.fit)
    try:
        ridge = test_metrics(ridge_oracle(train, l_un), test)["mse"]
    except TruncLearnError:
        ridge = math.nan
    out = []
    for method, a, lam in (("truncated", a_tr, l_tr), ("untruncated", UNTRUNCATED_ALPHA, l_un)):
        w = fit_linear(train, make_loss(config.loss, config.trunc, a), lam, config.fit, fit_seed)
        m = test_metrics(w, test)
        out.append(CellResult(level, trial, method, True, m["mse"], m["mae"], statistical_error(w, train.w_star), ridge, a, lam))
    return out


def _mean_std(vals):
    vals = [v for v in vals if math.isfinite(v)]
    if not vals:
        return math.nan, math.nan
    return float(np.mean(vals)), float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0


def run_sweep(config: ExperimentConfig):
    """Compare truncated and untruncated SGD across noise levels.

    Returns ``(rows, cells)``: one aggregated :class:`SweepRow` per (level,
    method) and the per-trial :class:`CellResult` list. A failing cell is
    recorded with ``ok=False`` and does not stop the sweep.
    """
    if not config.levels or config.trials < 1:
        raise ValueError("need at least one noise level and one trial")
    cells = []
    for li, level in enumerate(config.levels):
        for trial in range(config.trials):
            try:
                cells.extend(run_cell(config, li, float(level), trial))
            except (TruncLearnError, FloatingPointError, np.linalg.LinAlgError) as exc:
                log.warning("cell level=%s trial=%d failed: %s", level, trial, exc)
                for method in ("truncated", "untruncated"):
                    cells.append(CellResult(float(level), trial, method, False, error=str(exc)))
    rows = []
    for level in config.levels:
        for method in ("truncated", "untruncated"):
            mine = [c for c in cells if c.level == float(level) and c.method == method]
            ok = [c for c in mine if c.ok]
            mse = _mean_std([c.test_mse for c in ok])
            mae = _mean_std([c.test_mae for c in ok])
            err = _mean_std([c.stat_err for c in ok])
            ridge = _mean_std([c.ridge_mse for c in ok])[0]
            rows.append(
                SweepRow(
                    float(level), method, len(mine), len(ok), *mse, *mae, *err, ridge,
                    ";".join(fmt(c.alpha) for c in ok), ";".join(fmt(c.lam) for c in ok),
                )
            )
    return rows, cells


def rate_check(
    noise: NoiseModel,
    d: int = 20,
    n_grid=(500, 2000, 8000),
    trials: int = 10,
    alpha: float = 10.0,
    lam: float = 0.0,
    seed: int = 0,
    options: FitOptions = FitOptions(step_rule="prop_one", total_steps=2_000_000),
    base: str = "square",
    trunc: str = "log",
):
    """Median statistical error ``||w - w*||`` over trials for each n.

    Returns ``(table, slope)`` where table rows are
    ``(n, median_error, mean_error)`` and ``slope`` is the least-squares
    slope of log(median error) against log(n).
    """
    n_grid = [int(n) for n in n_grid]
    if len(n_grid) < 3 or sorted(n_grid) != n_grid:
        raise ValueError("n_grid must be ascending with at least three entries")
    tl = make_loss(base, trunc, alpha)
    table = []
    for ni, n in enumerate(n_grid):
        errs = []
        for trial in range(trials):
            ds = gen_linear(n, d, noise, derive_seed(seed, ni, trial))
            w = fit_linear(ds, tl, lam, options, derive_seed(seed, ni, trial, 1))
            errs.append(statistical_error(w, ds.w_star))
        table.append((n, float(np.median(errs)), float(np.mean(errs))))
    med = np.array([r[1] for r in table])
    if np.all(med > 0):
        slope = float(np.polyfit(np.log(n_grid), np.log(med), 1)[0])
    else:
        slope = math.nan
    return table, slope


def qq_data(residuals, reference: str = "normal") -> np.ndarray:
    """Pairs ``(theoretical, empirical)`` of normal quantiles vs standardised residuals.

    Plotting positions are ``(i - 0.5) / n``; residuals are standardised
    by their sample mean and sample standard deviation (``ddof=1``).
    """
    if reference != "normal":
        raise ValueError("only the normal reference distribution is supported")
    r = np.sort(np.asarray(residuals, dtype=float).ravel())
    n = r.size
    if n < 2:
        raise ValueError("need at least two residuals")
    sd = np.std(r, ddof=1)
    if not sd > 0:
        raise DataError("residuals have zero variance")
    emp = (r - r.mean()) / sd
    theo = norm.ppf((np.arange(1, n + 1) - 0.5) / n)
    return np.column_stack([theo, emp])


def standardize(train: Dataset, test: Dataset, add_bias: bool = True):
    """Scale columns by training mean/std and optionally append a constant column."""
    mu = train.X.mean(axis=0)
    sd = train.X.std(axis=0)
    sd[sd == 0] = 1.0

    def tx(ds):
        X = (ds.X - mu) / sd
        if add_bias:
            X = np.hstack([X, np.ones((ds.n, 1))])
        return Dataset(X, ds.y, None, dict(ds.provenance))

    return tx(train), tx(test)


@dataclass(frozen=True)
class HousingConfig:
    trials: int = 5
    n_train: int = 253
    alpha_grid: tuple = DEFAULT_ALPHAS
    lambda_grid: tuple = DEFAULT_LAMBDAS
    folds: int = 5
    fit: FitOptions = field(default_factory=lambda: FitOptions(steps_per_sample=200.0))
    seed: int = 0


def run_housing(path, config: HousingConfig = HousingConfig()):
    """Random train/test splits of a libsvm regression file.

    For each split, features are standardised on the training half and a
    bias column appended; both methods are tuned by CV on the training half.
    The square base is scored by test MSE and the absolute base by test MAE.
    Returns rows ``{base, method, metric, mean, std, per_trial}``.
    """
    data = parse_libsvm(path)
    if not (1 <= config.n_train < data.n):
        raise DataError(f"n_train={config.n_train} is incompatible with n={data.n}")
    results = {}
    for trial in range(config.trials):
        tr, te = train_test_split(data, config.n_train, derive_seed(config.seed, trial))
        tr, te = standardize(tr, te)
        for base in ("square", "absolute"):
            cv_seed = derive_seed(config.seed, trial, 1)
            fit_seed = derive_seed(config.seed, trial, 2)
            a, lam, _ = cross_validate(tr, base, "log", config.alpha_grid, config.lambda_grid, config.folds, cv_seed, config.fit)
            _, lam_u, _ = cross_validate(tr, base, "log", [UNTRUNCATED_ALPHA], config.lambda_grid, config.folds, cv_seed, config.fit)
            for method, aa, ll in (("truncated", a, lam), ("untruncated", UNTRUNCATED_ALPHA, lam_u)):
                w = fit_linear(tr, make_loss(base, "log", aa), ll, config.fit, fit_seed)
                m = test_metrics(w, te)
                results.setdefault((base, method), []).append((m[_metric_name(base)], aa, ll))
    rows = []
    for (base, method), vals in results.items():
        scores = [v[0] for v in vals]
        mean, sd = _mean_std(scores)
        rows.append({
            "base": base, "method": method, "metric": _metric_name(base), "mean": mean, "std": sd,
            "per_trial": scores, "alphas": [v[1] for v in vals], "lambdas": [v[2] for v in vals],
        })
    return rows


@dataclass(frozen=True)
class MlpDemoConfig:
    d: int = 10
    hidden: tuple = (32, 32)
    n_train: int = 1000
    n_test: int = 1000
    beta: float = 50.0
    fraction: float = 0.2
    sigma: float = 0.1
    corrupt: bool = True
    alpha: float = 1.0
    lam: float = 0.0
    steps: int = 6000
    batch_size: int = 32
    eta: float = 0.05
    seed: int = 0


def run_mlp_demo(config: MlpDemoConfig = MlpDemoConfig()) -> dict:
    """Student MLPs fit a fixed random teacher under sparse label corruption.

    Returns ``{method: {"mse": ..., "mae": ...}}`` on clean test data.
    """
    dims = [config.d, *config.hidden, 1]
    teacher = mlp.init(dims, derive_seed(config.seed, 0))
    rng = rng_for(config.seed, 1)
    X = rng.standard_normal((config.n_train, config.d))
    Xt = rng.standard_normal((config.n_test, config.d))
    f, ft = mlp.forward_batch(teacher, X), mlp.forward_batch(teacher, Xt)
    scale = 1.0 / max(float(np.std(f)), 1e-12)
    f, ft = f * scale, ft * scale
    y = f + config.sigma * rng.standard_normal(config.n_train)
    if config.corrupt:
        m = int(round(config.fraction * config.n_train))
        bad = rng.choice(config.n_train, size=m, replace=False)
        y[bad] += rng.uniform(-config.beta, config.beta, m)
    student0 = mlp.init(dims, derive_seed(config.seed, 2)).flatten()
    cfg = SgdConfig(config.steps, StepRule("constant", config.eta), config.batch_size, derive_seed(config.seed, 3), max(config.steps, 1))
    out = {}
    for method, a in (("truncated", config.alpha), ("untruncated", UNTRUNCATED_ALPHA)):
        problem = mlp.MlpProblem(dims, X, y, make_loss("square", "log", a), config.lam)
        rep = sgd(problem, student0, cfg)
        r = mlp.forward_batch(problem.model(rep.final_model), Xt) - ft
        out[method] = {"mse": float(np.mean(r * r)), "mae": float(np.mean(np.abs(r)))}
    return out


def fmt(v) -> str:
    """CSV cell text: 9 significant digits for floats."""
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".9g")
    return str(v)


def write_csv(target, header, rows) -> None:
    """Write ``rows`` (sequences aligned with ``header``) as UTF-8 CSV with LF endings."""
    if hasattr(target, "write"):
        w = csv.writer(target, lineterminator="\n")
        w.writerow(header)
        w.writerows([fmt(v) for v in row] for row in rows)
        return
    with open(target, "w", encoding="utf-8", newline="") as fh:
        write_csv(fh, header, rows)
