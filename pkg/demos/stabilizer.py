"""Synthesize a strongly stable gain for a random 2x2 system and check it."""
import numpy as np

from metaoc import SystemBounds, SystemMatrices, synthesize_stabilizer, verify_strong_stability

rng = np.random.default_rng(3)
A = np.eye(2) / 4 + rng.random((2, 2)) / 10
B = np.full((2, 1), 0.5)
bounds = SystemBounds.default_for(2, 1)
sys = SystemMatrices(A, B, bounds)

cert = synthesize_stabilizer(sys, bounds)
print("K =", cert.K.round(4))
print(f"achieved kappa {cert.kappa_achieved:.4f} (limit {bounds.kappa:.4f})")
print(f"achieved gamma {cert.gamma_achieved:.4f} (need >= {bounds.gamma})")
print("spectral radius of A - BK:", np.max(np.abs(np.linalg.eigvals(A - B @ cert.K))).round(4))
print("reconstruction error:", f"{cert.reconstruction_error(sys):.2e}")

again = verify_strong_stability(sys, cert.K, bounds.kappa, bounds.gamma)
print("re-verified with method", again.method)
