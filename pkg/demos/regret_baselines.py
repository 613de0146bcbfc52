"""Task regret against two comparators on a scalar system."""
import numpy as np

from metaoc import ComparatorChoice, QuadraticCost, SystemMatrices, TaskSpec, hindsight_optimum, task_regret
from metaoc.bench import run_non_adaptive
from metaoc.dac import DacDomain

T = 40
sys = SystemMatrices([[0.3]], [[1.0]])
rng = np.random.default_rng(2)
w = rng.uniform(-1, 1, T)
task = TaskSpec.with_disturbances(sys, [QuadraticCost([[1.0]], [[0.5]])] * T, w)

rec = run_non_adaptive(task, [[0.0]], H=2)
dom = DacDomain(2, 1, 1, kappa=1.0, kappa_B=1.0, gamma=0.5)
rec.M_star = hindsight_optimum(rec.context(task), task.costs, dom).M
print("hindsight DAC parameters:", rec.M_star.ravel().round(4))
print(f"regret vs hindsight DAC:        {task_regret(rec, task):.4f}")
grid = ComparatorChoice("grid-linear-feedback", resolution=41, kappa=1.0, gamma=0.5)
print(f"regret vs best fixed gain grid: {task_regret(rec, task, grid):.4f}")
