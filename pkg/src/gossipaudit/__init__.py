"""gossipaudit: decentralized SGD over gossip networks with a validation
phase that either certifies the learned consensus or detects Byzantine
interference.

Deterministic by construction: fixed-point arithmetic end to end, counter
based random streams, and an experiment harness whose outputs reproduce
byte-exactly from (config, seed).
"""

from .adversary import AttackSpec, build_strategy, calibrate_sigma_strong
from .fixed import FRAC_BITS, SCALE, FixedOverflowError, ModelVec
from .harness import (
    ConfigError,
    Resolved,
    RunRecord,
    coordinate_median_baseline,
    emit_metrics,
    emit_sweep,
    execute,
    load_config,
    resolve,
    run_experiment,
    run_sweep,
)
from .hashing import MERSENNE61, draw_key, poly_hash
from .learning import (
    EdgeTranscript,
    LearningResult,
    ScheduleError,
    StepSchedule,
    mix_step,
    perturbation_divergence,
    run_learning,
    sgd_step,
)
from .losses import (
    AgentDataSource,
    CustomLoss,
    LogisticLoss,
    QuadraticLoss,
    UnsupportedOracle,
    check_admissible,
    global_minimizer,
    heterogeneity,
    stochastic_gradient,
)
from .topology import (
    GenerationFailed,
    Graph,
    check_source_component,
    complete,
    erdos_renyi,
    make_graph,
    ring,
    two_clique_bridge,
)
from .validation import (
    BoundSchedule,
    CalibrationFailed,
    Cause,
    InvalidParameter,
    Outcome,
    ValidationParams,
    ValidationReport,
    ValidationState,
    calibrate_bounds,
    calibrate_epsilon,
    calibrate_gamma_max,
    classify_outcome,
    estimate_final_gradients,
    global_validate,
    local_validate,
    state_agreement,
    validate_model,
    validated_broadcast,
)

__version__ = "0.1.0"
