"""Disturbance-action parameters: the feasible set and the control law."""
import numpy as np

from metaoc import DacDomain, DisturbanceHistory, control_action, horizon, project

T, gamma = 200, 0.5
H = horizon(T, gamma)
dom = DacDomain(H=H, m=1, n=2, kappa=np.sqrt(2), kappa_B=1.0, gamma=gamma)
print(f"T={T} gives history length H={H}")
print("block radii:", dom.radii.round(4))
print(f"diameter {dom.diameter:.4f}")

rng = np.random.default_rng(0)
M = 3 * rng.standard_normal(dom.shape)
P = project(M, dom)
print("block norms before:", np.linalg.norm(M.reshape(H, -1), axis=1).round(3))
print("block norms after: ", np.linalg.norm(P.reshape(H, -1), axis=1).round(3))
print("projection is idempotent:", np.allclose(project(P, dom), P))

hist = DisturbanceHistory(H, 2)
for w in rng.uniform(-1, 1, (5, 2)):
    hist.push(w)
K = np.array([[0.3, 0.2]])
x = np.array([1.0, -0.5])
print("u =", control_action(K, P, x, hist))
