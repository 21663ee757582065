"""Controller strategies and reference-frame transformations.

The main controller is a cycle-indexed state machine: a short estimation
window with zero current references, an open-loop dispatch for the two
regimes whose optimum is known in closed form, a closed power-balance loop
for the third, and a one-shot promotion recheck once PCC power
measurements are available. Droop, PI and maximum-reactive baselines are
included for comparison runs.

Conventions: the positive-sequence PCC angle is the phase reference of a
scenario; frame angles are wrapped to (-pi, pi].
"""

from __future__ import annotations

import cmath
import enum
import math
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .grid_model import GridParams, InverterLimits, OperatingPoint
from .solver import Regime, classify

TRIGGER_THRESHOLD = 0.85  # any phase voltage at or below this arms the controller


class EstimateUnavailable(RuntimeError):
    """Dispatch was requested before the estimation window produced data."""


def wrap_angle(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = math.fmod(a + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


class ControllerMode(str, enum.Enum):
    NORMAL = "NORMAL"
    ESTIMATE = "ESTIMATE"
    DISPATCH_O1 = "DISPATCH_O1"
    DISPATCH_O2 = "DISPATCH_O2"
    DISPATCH_O3 = "DISPATCH_O3"
    PROMOTED_O2 = "PROMOTED_O2"


@dataclass(frozen=True)
class FrameAngles:
    """Positive/negative-sequence PCC angles and the memorized grid-side difference."""

    theta_pos: float
    theta_neg: float
    delta_theta_g: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "theta_pos", wrap_angle(self.theta_pos))
        object.__setattr__(self, "theta_neg", wrap_angle(self.theta_neg))
        object.__setattr__(self, "delta_theta_g", wrap_angle(self.delta_theta_g))


@dataclass(frozen=True)
class CurrentRefNeg:
    """Negative-sequence current reference in both frames."""

    i_mag: float
    phi_neg: float
    id_pos_frame: float
    iq_pos_frame: float

    def as_neg_frame_point(self) -> OperatingPoint:
        return OperatingPoint(self.i_mag * math.cos(self.phi_neg), self.i_mag * math.sin(self.phi_neg))


@dataclass(frozen=True)
class Measurements:
    """One cycle of controller inputs, sampled from the previous network state."""

    v_neg: float
    theta_neg: float
    theta_pos: float
    p_pcc: float
    p_dc: float
    phase_voltages: Tuple[float, float, float]
    los: bool = False


@dataclass(frozen=True)
class ControllerState:
    """Value-type state of the optimum-selection loop."""

    mode: ControllerMode = ControllerMode.NORMAL
    cycle_counter: int = 0
    pi_integrator: float = 0.0
    p_min_effective: Optional[float] = None
    delta_theta_g: Optional[float] = None
    promotion_checked: bool = False
    last_p_pcc: Optional[float] = None


@dataclass(frozen=True)
class OvuaConfig:
    """Cycle counts of the staging logic and gains of the dc power-balance loop."""

    m: int = 3
    n: int = 20
    kp_dc: float = 0.5
    ki_dc: float = 3.0


def phase_voltage_magnitudes(
    v_pos: float, theta_pos: float, v_neg: float, theta_neg: float
) -> Tuple[float, float, float]:
    """Per-phase fundamental voltage magnitudes of the sequence superposition."""
    shift = 2.0 * math.pi / 3.0
    pos = v_pos * cmath.exp(1j * theta_pos)
    neg = v_neg * cmath.exp(1j * theta_neg)
    a = abs(pos + neg)
    b = abs(pos * cmath.exp(-1j * shift) + neg * cmath.exp(1j * shift))
    c = abs(pos * cmath.exp(1j * shift) + neg * cmath.exp(-1j * shift))
    return a, b, c


def trigger_active(phase_mags: Tuple[float, float, float]) -> bool:
    return min(phase_mags) <= TRIGGER_THRESHOLD


def dqneg_to_dqpos(pt: OperatingPoint, angles: FrameAngles) -> CurrentRefNeg:
    """Re-express a negative-frame dq current in the positive-sequence frame.

    The instantaneous phase currents are identical in both frames, so the
    transformation is an isometry; only the angle difference between the
    frames enters.
    """
    i_mag = pt.magnitude
    phi_neg = math.atan2(pt.i_q, pt.i_d)
    d_theta = wrap_angle(angles.theta_neg - angles.theta_pos)
    return CurrentRefNeg(
        i_mag=i_mag,
        phi_neg=phi_neg,
        id_pos_frame=-i_mag * math.cos(d_theta + phi_neg),
        iq_pos_frame=i_mag * math.sin(d_theta + phi_neg),
    )


def synthesize_three_phase(
    pos: Tuple[float, float],
    neg: Tuple[float, float],
    t_grid: np.ndarray,
    omega: float,
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Instantaneous phase voltages from sequence phasors (magnitude, angle).

    The negative-sequence component rotates opposite to the positive one,
    so its +-120 degree shifts are mirrored between phases b and c.
    """
    v_pos, th_pos = pos
    v_neg, th_neg = neg
    if v_pos < 0.0 or v_neg < 0.0:
        raise ValueError("sequence magnitudes must be non-negative")
    shift = 2.0 * math.pi / 3.0
    wt = omega * np.asarray(t_grid)
    v_a = v_pos * np.sin(wt + th_pos) + v_neg * np.sin(wt + th_neg)
    v_b = v_pos * np.sin(wt + th_pos - shift) + v_neg * np.sin(wt + th_neg + shift)
    v_c = v_pos * np.sin(wt + th_pos + shift) + v_neg * np.sin(wt + th_neg - shift)
    return v_a, v_b, v_c


def droop_reference(v_neg_meas: float, gain: float, lim: InverterLimits) -> OperatingPoint:
    """Pure reactive support proportional to the measured unbalance."""
    if gain < 0.0:
        raise ValueError("droop gain must be >= 0")
    return OperatingPoint(0.0, min(gain * v_neg_meas, lim.i_max))


@dataclass
class PiState:
    integrator: float = 0.0


def pi_reference(
    v_neg_meas: float, state: PiState, kp: float, ki: float, dt: float, lim: InverterLimits
) -> OperatingPoint:
    """Integrating reactive support driving the measured unbalance to zero.

    Anti-windup clamps the reference (and freezes the integrator) at
    [0, i_max]; when full mitigation is impossible the reference therefore
    saturates at the current cap.
    """
    if kp < 0.0 or ki < 0.0:
        raise ValueError("PI gains must be >= 0")
    integ = state.integrator + ki * v_neg_meas * dt
    i_q = kp * v_neg_meas + integ
    if i_q > lim.i_max:
        i_q = lim.i_max
        integ = state.integrator  # hold on saturation
    elif i_q < 0.0:
        i_q = 0.0
        integ = state.integrator
    state.integrator = integ
    return OperatingPoint(0.0, i_q)


def vua_reference(allow_absorption: bool, g: GridParams, lim: InverterLimits) -> OperatingPoint:
    """Maximum-current attenuation baseline.

    Without absorption capability it injects pure reactive current; with it,
    the current-limited zero-angle point (identical to the O2 optimum).
    """
    if not allow_absorption:
        return OperatingPoint(0.0, lim.i_max)
    return OperatingPoint(-(g.r / g.z) * lim.i_max, (g.x / g.z) * lim.i_max)


def _open_loop_ref(point: OperatingPoint, theta_pos: float, delta_theta_g: float) -> CurrentRefNeg:
    angles = FrameAngles(
        theta_pos=theta_pos, theta_neg=theta_pos + delta_theta_g, delta_theta_g=delta_theta_g
    )
    return dqneg_to_dqpos(point, angles)


def _zero_ref() -> CurrentRefNeg:
    return CurrentRefNeg(i_mag=0.0, phi_neg=0.0, id_pos_frame=0.0, iq_pos_frame=0.0)


def ovua_step(
    state: ControllerState,
    meas: Measurements,
    g_estimate: GridParams,
    lim: InverterLimits,
    config: OvuaConfig,
) -> Tuple[ControllerState, CurrentRefNeg]:
    """One cycle of the optimum-selection loop.

    Cycles 1..m emit zero current while the grid voltage is observed; the
    angle difference between the sequence frames is memorized at cycle m.
    The regime is then dispatched once: the closed-form stages run
    open-loop from the memorized grid frame, the power-floor stage runs the
    dc power-balance loop with live angles. At cycle n a promoted dispatch
    is considered exactly once, using the notch-equivalent two-cycle mean
    of the PCC power measurement.
    """
    counter = state.cycle_counter + 1
    p_min_eff = state.p_min_effective if state.p_min_effective is not None else lim.p_min

    if state.mode in (ControllerMode.NORMAL, ControllerMode.ESTIMATE) and counter <= config.m:
        delta_theta_g = state.delta_theta_g
        if counter == config.m:
            delta_theta_g = wrap_angle(meas.theta_neg - meas.theta_pos)
        new_state = replace(
            state,
            mode=ControllerMode.ESTIMATE,
            cycle_counter=counter,
            p_min_effective=p_min_eff,
            delta_theta_g=delta_theta_g,
        )
        return new_state, _zero_ref()

    mode = state.mode
    if mode in (ControllerMode.NORMAL, ControllerMode.ESTIMATE):
        if state.delta_theta_g is None:
            raise EstimateUnavailable(
                f"dispatch at cycle {counter} before the {config.m}-cycle estimation window"
            )
        lim_eff = InverterLimits(i_max=lim.i_max, p_min=p_min_eff, p_max=lim.p_max)
        regime = classify(g_estimate, lim_eff).regime
        mode = {
            Regime.O1: ControllerMode.DISPATCH_O1,
            Regime.O2: ControllerMode.DISPATCH_O2,
            Regime.O3: ControllerMode.DISPATCH_O3,
        }[regime]

    integrator = state.pi_integrator
    promotion_checked = state.promotion_checked

    if mode is ControllerMode.DISPATCH_O3 and counter == config.n and not promotion_checked:
        promotion_checked = True
        if state.last_p_pcc is not None:
            p_filtered = 0.5 * (meas.p_pcc + state.last_p_pcc)
        else:
            p_filtered = meas.p_pcc
        p_min_eff = p_filtered
        p_b = classify(g_estimate, lim).p_b
        if p_filtered <= p_b:
            mode = ControllerMode.PROMOTED_O2

    g = g_estimate
    if mode is ControllerMode.DISPATCH_O1:
        i_b = g.vg / g.z if g.z > 0.0 else 0.0
        point = OperatingPoint(-(g.r / g.z) * i_b, (g.x / g.z) * i_b)
        ref = _open_loop_ref(point, meas.theta_pos, state.delta_theta_g)
    elif mode in (ControllerMode.DISPATCH_O2, ControllerMode.PROMOTED_O2):
        point = OperatingPoint(-(g.r / g.z) * lim.i_max, (g.x / g.z) * lim.i_max)
        ref = _open_loop_ref(point, meas.theta_pos, state.delta_theta_g)
    else:
        # Power-balance loop: drive the dc-side power to the storage rating.
        err = meas.p_dc - lim.p_min
        integ_new = integrator + err
        i_d = -(config.kp_dc * err + config.ki_dc * integ_new)
        if i_d < -lim.i_max or i_d > 0.0:
            i_d = min(max(i_d, -lim.i_max), 0.0)
            integ_new = integrator  # anti-windup: freeze while clamped
        integrator = integ_new
        i_q = math.sqrt(lim.i_max * lim.i_max - i_d * i_d)
        point = OperatingPoint(i_d, i_q)
        angles = FrameAngles(
            theta_pos=meas.theta_pos,
            theta_neg=meas.theta_neg,
            delta_theta_g=state.delta_theta_g,
        )
        ref = dqneg_to_dqpos(point, angles)

    new_state = replace(
        state,
        mode=mode,
        cycle_counter=counter,
        pi_integrator=integrator,
        p_min_effective=p_min_eff,
        promotion_checked=promotion_checked,
        last_p_pcc=meas.p_pcc,
    )
    return new_state, ref
