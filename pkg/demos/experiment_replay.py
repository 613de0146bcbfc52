"""A small paired experiment, written to disk and replayed from its stored suites."""
import sys
import tempfile
from pathlib import Path

from metaoc.harness import ExperimentConfig, replay, run_experiment

cfg = ExperimentConfig(N=6, T=[25], seeds=[0, 1], methods=["non-adaptive", "independent-oc", "moc1", "moc2"])
with tempfile.TemporaryDirectory() as tmp:
    first = Path(tmp) / "first"
    report = run_experiment(cfg, out_dir=first)
    for method, stats in report.summary()["by_T"]["25"]["methods"].items():
        print(f"{method:15s} meta-regret {stats['meta_regret_mean']:.4f} +- {stats['meta_regret_se']:.4f}")
    print("files:", sorted(p.name for p in first.iterdir()))
    _, same = replay(first, Path(tmp) / "again")
    print("replayed CSV identical:", same)
    sys.exit(0 if same else 1)
