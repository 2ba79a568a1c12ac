"""Housing prices: random half splits and the tails of the residuals.

Run: python3 demos/03_housing_qq.py [path/to/housing]
"""
import sys
from pathlib import Path

import numpy as np

from trunclearn import parse_libsvm
from trunclearn.harness import FitOptions, HousingConfig, fit_linear, make_loss, qq_data, run_housing, standardize

path = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "data" / "housing"

# five 253/253 splits, each method tuned by CV on the training half
for r in run_housing(path, HousingConfig(trials=5)):
    print(f"{r['base']:<9} {r['method']:<12} test {r['metric']} {r['mean']:8.3f} +- {r['std']:.3f}")

# residuals of a least-squares fit on all rows; heavy tails show up as
# empirical quantiles running away from the normal ones at both ends
ds = parse_libsvm(path)
ds, _ = standardize(ds, ds)
w = fit_linear(ds, make_loss("square", "log", 1e9), 0.0, FitOptions(steps_per_sample=200), seed=0)
q = qq_data(ds.X @ w - ds.y)
print()
print("normal quantile  residual quantile")
for i in np.r_[0:3, len(q) // 2, len(q) - 3:len(q)]:
    print(f"{q[i, 0]:15.3f}  {q[i, 1]:17.3f}")
