"""Learning an initialization across a stream of similar tasks."""
import numpy as np

from metaoc.bench import run_independent_oc
from metaoc.harness import ExperimentConfig, generate_task_suite
from metaoc.harness.experiment import suite_constants
from metaoc.meta import hindsight_optima, run_moc1, run_moc2, similarity_diameter

cfg = ExperimentConfig(N=12, T=[25], seeds=[0])
tasks, _ = generate_task_suite(cfg, seed=0)
consts = suite_constants(cfg, 25)
print(f"H={consts.H}  G_f={consts.G_f:.3f}  L={consts.L:.3f}  G~={consts.G_tilde:.3f}")

D_star = max(similarity_diameter(hindsight_optima(tasks, consts)), cfg.epsilon)
print(f"tasks' optima lie within {D_star:.4f} of each other (domain diameter {consts.D_diameter:.3f})")

ind = run_independent_oc(tasks, consts)
m1 = run_moc1(tasks, D_star, consts)
m2 = run_moc2(tasks, cfg.epsilon, consts)
print("task  independent  known-D  doubling-D  guess")
for i in range(len(tasks)):
    print(f"{i:4d}  {ind.regrets[i]:11.4f}  {m1.regrets[i]:7.4f}  {m2.regrets[i]:10.4f}  {m2.D_trace[i]:.4f}")
print(f"meta-regret: independent {ind.meta_regret:.4f}, known-D {m1.meta_regret:.4f}, doubling-D {m2.meta_regret:.4f}")
print(f"doubling-D grew its guess {m2.increments} times")
print(f"distance of last initialization to the mean optimum: "
      f"{np.linalg.norm(m1.M_inits[-1] - np.mean(m1.M_stars[:-1], axis=0)):.2e}")
