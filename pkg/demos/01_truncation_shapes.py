"""How the three truncation functions bend a loss.

Run: python3 demos/01_truncation_shapes.py
"""
import numpy as np

from trunclearn import Truncation, constants_of, phi, phi_prime

alpha = 10.0
u = np.array([0.0, 0.1, 1.0, 10.0, 100.0, 1000.0, 1e4])

# near zero every truncation is the identity; far out it flattens
print("u        " + "  ".join(f"{v:>9g}" for v in u))
for kind in ("log", "catoni", "cubic"):
    t = Truncation(kind, alpha)
    print(f"{kind:<8} " + "  ".join(f"{v:9.4g}" for v in phi(t, u)))

# the slope is the weight a sample's gradient gets; large losses are damped
print()
print("slope at u (weight given to a sample with loss u)")
for kind in ("log", "catoni", "cubic"):
    t = Truncation(kind, alpha)
    print(f"{kind:<8} " + "  ".join(f"{v:9.4g}" for v in phi_prime(t, u)))

# alpha controls where the bend happens; a huge alpha gives back the plain loss
print()
for a in (1.0, 10.0, 100.0, 1e9):
    t = Truncation("log", a)
    print(f"log, alpha={a:<6g}: phi(100) = {float(phi(t, 100.0)):.6g}")

print()
for kind in ("log", "catoni", "cubic"):
    c = constants_of(Truncation(kind, alpha))
    print(f"{kind:<8} M={c.M:g}  kappa={c.kappa:g}  L_alpha={c.L_alpha:g}")
