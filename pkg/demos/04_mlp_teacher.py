"""A small ReLU network learning from a random teacher with corrupted labels.

Run: python3 demos/04_mlp_teacher.py
"""
from trunclearn.harness import MlpDemoConfig, run_mlp_demo

for corrupt in (False, True):
    rep = run_mlp_demo(MlpDemoConfig(corrupt=corrupt))
    label = "20% labels shifted by up to 50" if corrupt else "clean labels"
    print(label)
    for method, m in rep.items():
        print(f"  {method:<12} test mse {m['mse']:.4f}  mae {m['mae']:.4f}")

# truncation changes little on clean data and a lot once outliers appear
