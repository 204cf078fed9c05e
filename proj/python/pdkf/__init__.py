"""Projected distributed Kalman filtering (time-based and event-triggered)."""

from ._pdkf import (  # noqa: F401
    Mode,
    NumericalError,
    Scenario,
    ValidationError,
    case1,
    case2,
    ci_fuse,
    communication_rate,
    eco_check,
    eig_pos,
    load_scenario,
    measurement_update,
    metropolis_weights,
    parse_scenario,
    pilot_beta,
    predict,
    project,
    rate_bound,
    run,
    run_ckf,
    run_consensus,
    threshold_bound,
    trigger,
)

__version__ = "0.1.0"
