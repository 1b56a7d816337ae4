"""Approximate pre-opacity verification for finite metric systems and
grid abstractions of incrementally stable control systems."""

from .abstraction import (
    AbstractionError,
    BoxUnion,
    ControlSystemSpec,
    QuantizationParams,
    build_abstraction,
    check_delta_iss_empirical,
    check_quantization,
    grid,
    inflate_secret,
    load_spec,
    sample_relation_witness,
    simulate,
    span,
)
from .dsl import ComparisonFunction, alpha_inverse, eval_beta, eval_gamma, evaluate, parse_expression
from .estimator import EstimatorState, Observer, build_observer, estimate_of_run, initial_observer_states, observer_step
from .indicator import IndicatorSet, Verdict, backward_operator, extract_witness, indicator, verify_preopacity
from .oracle import OracleQuery, oracle_verify
from .relation import RelationPairs, candidate_relation, check_relation, max_akp_relation, transfer_verdict
from .system import (
    MetricSystem,
    ModelError,
    enabled_inputs,
    load_system,
    output_distance,
    successors,
    validate_system,
)

__version__ = "0.1.0"
