"""Optimal negative-sequence voltage attenuation by grid-connected inverters.

Library layout:
  grid_model  network physics: voltage, power, stability, feasibility
  solver      regime classification and the three-stage analytical optimum
  oracle      brute-force grid searches for optimality certification
  control     controller state machine, baselines, frame transformations
  sim         quasi-static closed-loop simulator and the builtin cases
  cli         command-line front end
"""

from .grid_model import (
    FEASIBILITY_SLACK,
    FeasibilityReport,
    GridParams,
    InvalidParams,
    InverterLimits,
    LossOfSynchronism,
    NetworkState,
    OperatingPoint,
    active_power,
    check_feasibility,
    pcc_voltage,
    recover_theta,
    stability_margin,
)
from .solver import (
    Classification,
    KktPoint,
    NoRootBracketed,
    OutOfRange,
    OvuaSolution,
    Regime,
    RegimeMismatch,
    bracket_o3_roots,
    classify,
    p1_kkt_points,
    p3_closed_form,
    solve,
    solve_o1,
    solve_o2,
    solve_o3,
)
from .oracle import (
    CertificationReport,
    EmptyFeasibleSet,
    OracleConfig,
    OracleResult,
    certify_solution,
    grid_search_p0,
    grid_search_p0prime,
)
from .control import (
    ControllerMode,
    ControllerState,
    CurrentRefNeg,
    EstimateUnavailable,
    FrameAngles,
    Measurements,
    OvuaConfig,
    PiState,
    dqneg_to_dqpos,
    droop_reference,
    ovua_step,
    pi_reference,
    synthesize_three_phase,
    vua_reference,
    wrap_angle,
)
from .sim import (
    ConfigError,
    Scenario,
    SimRow,
    SimTrace,
    apply_losses,
    builtin_scenarios,
    network_solve,
    run,
)

__version__ = "0.1.0"
