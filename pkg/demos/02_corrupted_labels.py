"""Truncated vs plain least squares when a fifth of the labels are corrupted.

A desk-sized version of the corrupted-output sweep: n=400 and d=50 instead of 1000,
three trials, so it runs in well under a minute.

Run: python3 demos/02_corrupted_labels.py
"""
import sys

from trunclearn.harness import ExperimentConfig, SweepRow, run_sweep, write_csv

config = ExperimentConfig(noise="sparse_output", levels=(5.0, 20.0, 50.0), n=400, d=50, n_test=500, trials=3)
rows, cells = run_sweep(config)

# clean-test MSE; alpha = 1e9 is the untruncated baseline on the same data
print(f"{'beta':>6}  {'truncated':>10}  {'untruncated':>11}  {'ridge':>8}")
for level in config.levels:
    t, u = [r for r in rows if r.noise_level == level]
    print(f"{level:6g}  {t.test_mse_mean:10.4f}  {u.test_mse_mean:11.4f}  {t.ridge_mse_mean:8.4f}")

# the CV-selected alphas shrink as corruption grows
print()
for r in rows:
    if r.method == "truncated":
        print(f"beta={r.noise_level:g}: alphas chosen {r.alphas}")

# the same table as CSV
print()
fields = list(SweepRow.__dataclass_fields__)
write_csv(sys.stdout, fields, [[getattr(r, f) for f in fields] for r in rows])
