"""Analytic gradient of the surrogate cost against central differences."""
import numpy as np

from metaoc import DacDomain, QuadraticCost, SurrogateContext, SystemMatrices, surrogate_cost_g, surrogate_grad
from metaoc.surrogate import finite_difference_grad

rng = np.random.default_rng(1)
sys = SystemMatrices(np.eye(2) / 4 + rng.random((2, 2)) / 10, [[0.5], [0.5]])
H, T = 4, 30
w = rng.uniform(-0.7, 0.7, (T, 2))
ctx = SurrogateContext(np.array([[0.2, 0.1]]), sys, w, H)
dom = DacDomain(H, 1, 2, kappa=np.sqrt(2), kappa_B=1.0, gamma=0.5)
cost = QuadraticCost(np.diag([0.5, 0.4]), np.diag([0.6]))

worst = 0.0
for t in (1, 5, 17, 30):
    M = dom.sample(rng)
    g = surrogate_grad(ctx, M, cost, t)
    fd = finite_difference_grad(lambda Z: surrogate_cost_g(ctx, Z, cost, t), M)
    rel = np.linalg.norm(g - fd) / max(np.linalg.norm(fd), 1e-12)
    worst = max(worst, rel)
    print(f"t={t:2d}  |grad|={np.linalg.norm(g):.4f}  relative error {rel:.1e}")
print(f"worst relative error {worst:.1e}")
