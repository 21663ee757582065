"""Quasi-static closed-loop phasor simulation.

Each step is one fundamental cycle: the controller produces a current
reference from the previous cycle's measurements, the network is solved
algebraically, and the result is recorded. A commanded current with no
power-flow equilibrium is recorded as a loss-of-synchronism row with the
voltage withheld, which is the phasor-level signature of the sustained
oscillation a switching-level model would show.

A series-resistance loss model shifts the ac/dc power balance, so the dc
side can be held at its rating while the PCC absorbs more; this is what
enables the one-shot promotion recheck in the controller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .control import (
    ControllerMode,
    ControllerState,
    CurrentRefNeg,
    Measurements,
    OvuaConfig,
    PiState,
    droop_reference,
    ovua_step,
    phase_voltage_magnitudes,
    pi_reference,
    trigger_active,
    vua_reference,
)
from .grid_model import (
    FEASIBILITY_SLACK,
    LOS_TOL,
    GridParams,
    InverterLimits,
    NetworkState,
    OperatingPoint,
    pcc_voltage,
    recover_theta,
    stability_margin,
)

CYCLE_SECONDS = 1.0 / 60.0


class ConfigError(ValueError):
    """Inconsistent scenario definition."""


@dataclass(frozen=True)
class Scenario:
    """One closed-loop experiment: post-event grid, limits and controller choice."""

    name: str
    g: GridParams
    lim: InverterLimits
    controller: str = "ovua"
    controller_params: Dict[str, float] = field(default_factory=dict)
    event_cycle: int = 0
    duration_cycles: int = 40
    loss_resistance: float = 0.0
    v_pos: float = 0.5
    v_pos_pre: float = 1.0
    neg_angle: float = 0.0

    def __post_init__(self) -> None:
        if not self.duration_cycles > self.event_cycle >= 0:
            raise ConfigError(
                f"need duration_cycles > event_cycle >= 0, got "
                f"{self.duration_cycles}, {self.event_cycle}"
            )
        if self.loss_resistance < 0.0:
            raise ConfigError(f"loss_resistance must be >= 0, got {self.loss_resistance}")
        if self.v_pos < 0.0 or self.v_pos_pre < 0.0:
            raise ConfigError("positive-sequence magnitudes must be >= 0")
        if self.controller not in ("ovua", "droop", "pi", "vua"):
            raise ConfigError(f"unknown controller {self.controller!r}")


@dataclass(frozen=True)
class SimRow:
    cycle: int
    mode: str
    ref: OperatingPoint
    v_neg: Optional[float]
    theta: Optional[float]
    p_pcc: Optional[float]
    p_dc: Optional[float]
    stable: bool


@dataclass(frozen=True)
class SimTrace:
    scenario: Scenario
    rows: List[SimRow]

    def final_row(self) -> SimRow:
        return self.rows[-1]

    def reached_equilibrium(self, tol: float = 1e-12) -> bool:
        """True when the trace ends on a repeated stable operating point."""
        if len(self.rows) < 2:
            return False
        a, b = self.rows[-2], self.rows[-1]
        return (
            a.stable
            and b.stable
            and a.mode == b.mode
            and abs(a.ref.i_d - b.ref.i_d) <= tol
            and abs(a.ref.i_q - b.ref.i_q) <= tol
        )

    def rows_in_mode(self, mode: str) -> List[SimRow]:
        return [r for r in self.rows if r.mode == mode]


def network_solve(ref: OperatingPoint, g: GridParams) -> Optional[NetworkState]:
    """Algebraic power-flow solve; None when no equilibrium exists."""
    if stability_margin(ref, g) > LOS_TOL:
        return None
    v = pcc_voltage(ref, g)
    if v < -FEASIBILITY_SLACK:
        return None
    return NetworkState(v=v, theta=recover_theta(ref, g), p=1.5 * v * ref.i_d)


def apply_losses(p_pcc: float, ref: OperatingPoint, r_loss: float) -> float:
    """dc-side power for a given PCC power under the series loss model.

    Losses are dissipated between the PCC and the dc link, so the dc side
    absorbs less than the PCC exports to the inverter:
    p_dc = p_pcc + 1.5 * |ref|^2 * r_loss.
    """
    if r_loss < 0.0:
        raise ValueError("r_loss must be >= 0")
    mag2 = ref.i_d * ref.i_d + ref.i_q * ref.i_q
    return p_pcc + 1.5 * mag2 * r_loss


def builtin_scenarios() -> List[Scenario]:
    """The five standard cases at the common desk-scale parameter set.

    Grid: z = 0.1 pu (post-event short-circuit ratio 10), r/x = 2,
    i_max = 1.5 pu, positive sequence 0.5 pu at angle 0 after the event,
    negative-sequence source angle 50 degrees. The storage rating sets the
    power floor per case; the series loss coefficient is the same physical
    plant in every case.
    """
    z = 0.1
    r_over_x = 2.0
    i_max = 1.5
    neg_angle = math.radians(50.0)
    r_loss = 0.012

    def grid(vg: float) -> GridParams:
        return GridParams.from_impedance(vg, z, r_over_x)

    def lim(p_min: float) -> InverterLimits:
        return InverterLimits(i_max=i_max, p_min=p_min, p_max=1.0)

    common = dict(
        event_cycle=0,
        duration_cycles=60,
        loss_resistance=r_loss,
        v_pos=0.5,
        v_pos_pre=1.0,
        neg_angle=neg_angle,
    )
    return [
        Scenario(name="A1", g=grid(0.1), lim=lim(0.0), **common),
        Scenario(name="A2", g=grid(0.1), lim=lim(-0.3), **common),
        Scenario(name="B", g=grid(0.3), lim=lim(-0.3), **common),
        Scenario(name="C", g=grid(0.3), lim=lim(-0.1), **common),
        Scenario(name="D", g=grid(0.3), lim=lim(-0.19), **common),
    ]


def _ref_point(ref: CurrentRefNeg) -> OperatingPoint:
    return ref.as_neg_frame_point()


def run(scenario: Scenario) -> SimTrace:
    """Run the per-cycle loop. Deterministic for a fixed scenario."""
    g_post = scenario.g
    g_pre = GridParams(vg=0.0, r=g_post.r, x=g_post.x)
    lim = scenario.lim
    params = scenario.controller_params

    ovua_state = ControllerState()
    ovua_config = OvuaConfig(
        m=int(params.get("m", 3)),
        n=int(params.get("n", 20)),
        kp_dc=float(params.get("kp_dc", 0.5)),
        ki_dc=float(params.get("ki_dc", 3.0)),
    )
    pi_state = PiState()
    droop_gain = float(params.get("gain", 2.0))
    pi_kp = float(params.get("kp", 5.0))
    pi_ki = float(params.get("ki", 50.0))
    allow_absorption = bool(params.get("allow_absorption", lim.p_min < 0.0))

    triggered = False
    rows: List[SimRow] = []
    # Held measurements: last stable network solution (pre-event steady state
    # to begin with). During loss of synchronism the controller keeps acting
    # on the last valid phasor estimate.
    held_v, held_theta = 0.0, 0.0
    prev_v_pos = scenario.v_pos_pre
    prev_v_neg, prev_theta_abs = 0.0, 0.0
    prev_p_pcc, prev_p_dc, prev_los = 0.0, 0.0, False

    for cycle in range(scenario.duration_cycles):
        g = g_post if cycle >= scenario.event_cycle else g_pre
        phase_mags = phase_voltage_magnitudes(prev_v_pos, 0.0, prev_v_neg, prev_theta_abs)
        if not triggered and trigger_active(phase_mags):
            triggered = True

        # With no equilibrium the PCC voltage oscillates around the
        # uncompensated level, so the sequence extractor reports the source
        # unbalance, not the last stable value.
        v_meas = g_post.vg if prev_los else held_v

        if not triggered:
            mode = ControllerMode.NORMAL.value
            pt = OperatingPoint(0.0, 0.0)
        elif scenario.controller == "ovua":
            meas = Measurements(
                v_neg=v_meas,
                theta_neg=scenario.neg_angle + held_theta,
                theta_pos=0.0,
                p_pcc=prev_p_pcc,
                p_dc=prev_p_dc,
                phase_voltages=phase_mags,
                los=prev_los,
            )
            ovua_state, ref = ovua_step(ovua_state, meas, g_post, lim, ovua_config)
            mode = ovua_state.mode.value
            pt = _ref_point(ref)
        elif scenario.controller == "droop":
            mode = "DROOP"
            pt = droop_reference(held_v, droop_gain, lim)
        elif scenario.controller == "pi":
            mode = "PI"
            pt = pi_reference(held_v, pi_state, pi_kp, pi_ki, CYCLE_SECONDS, lim)
        else:
            mode = "VUA"
            pt = vua_reference(allow_absorption, g_post, lim)

        ns = network_solve(pt, g)
        if ns is None:
            rows.append(
                SimRow(cycle=cycle, mode=mode, ref=pt, v_neg=None, theta=None,
                       p_pcc=None, p_dc=None, stable=False)
            )
            prev_los = True
        else:
            p_dc = apply_losses(ns.p, pt, scenario.loss_resistance)
            rows.append(
                SimRow(cycle=cycle, mode=mode, ref=pt, v_neg=ns.v, theta=ns.theta,
                       p_pcc=ns.p, p_dc=p_dc, stable=True)
            )
            held_v, held_theta = ns.v, ns.theta
            prev_p_pcc, prev_p_dc, prev_los = ns.p, p_dc, False
            prev_v_neg, prev_theta_abs = ns.v, scenario.neg_angle + ns.theta

        prev_v_pos = scenario.v_pos if cycle >= scenario.event_cycle else scenario.v_pos_pre

    return SimTrace(scenario=scenario, rows=rows)
