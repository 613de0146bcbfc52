from .config import ExperimentConfig
from .experiment import ExperimentReport, replay, run_experiment
from .suite import SuiteArtifact, generate_task_suite

__all__ = ["ExperimentConfig", "ExperimentReport", "SuiteArtifact", "generate_task_suite", "replay", "run_experiment"]
