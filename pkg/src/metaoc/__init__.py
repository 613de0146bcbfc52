"""Online control of linear systems with meta-learned initializations."""
from .bench import ComparatorChoice, meta_regret, run_independent_oc, run_non_adaptive, task_regret
from .dac import DacDomain, DisturbanceHistory, control_action, horizon, project
from .errors import (
    DivergenceError,
    InvalidArgument,
    InvalidConfiguration,
    MetaOCError,
    NumericFailure,
    StabilityRejected,
    SynthesisFailed,
)
from .lds import (
    DisturbanceSource,
    StabilityCertificate,
    SystemBounds,
    SystemMatrices,
    emit_disturbance,
    synthesize_stabilizer,
    verify_strong_stability,
)
from .meta import (
    ConstantsBundle,
    MetaReport,
    compute_constants,
    empirical_constants,
    hindsight_optimum,
    meta_update,
    run_moc1,
    run_moc2,
)
from .oc import OcConfig, TaskRecord, TaskSpec, default_step_size, make_config, run_oc
from .surrogate import (
    CostFunction,
    QuadraticCost,
    SurrogateContext,
    ideal_action,
    ideal_cost_f,
    ideal_state,
    surrogate_cost_g,
    surrogate_grad,
)

__version__ = "0.1.0"

__all__ = [
    "ComparatorChoice",
    "ConstantsBundle",
    "CostFunction",
    "DacDomain",
    "DisturbanceHistory",
    "DisturbanceSource",
    "DivergenceError",
    "InvalidArgument",
    "InvalidConfiguration",
    "MetaOCError",
    "MetaReport",
    "NumericFailure",
    "OcConfig",
    "QuadraticCost",
    "StabilityCertificate",
    "StabilityRejected",
    "SurrogateContext",
    "SynthesisFailed",
    "SystemBounds",
    "SystemMatrices",
    "TaskRecord",
    "TaskSpec",
    "compute_constants",
    "control_action",
    "default_step_size",
    "emit_disturbance",
    "empirical_constants",
    "hindsight_optimum",
    "horizon",
    "ideal_action",
    "ideal_cost_f",
    "ideal_state",
    "make_config",
    "meta_regret",
    "meta_update",
    "project",
    "run_independent_oc",
    "run_moc1",
    "run_moc2",
    "run_non_adaptive",
    "run_oc",
    "surrogate_cost_g",
    "surrogate_grad",
    "synthesize_stabilizer",
    "task_regret",
    "verify_strong_stability",
]
