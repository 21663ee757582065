"""Negative-sequence phasor network model of a grid-connected inverter.

All quantities are per-unit; angles are radians. The grid is a Thevenin
equivalent (vg, r + jx) seen from the point of common coupling (PCC), and
the inverter is a controlled current source described by its dq current
pair in the frame aligned with the negative-sequence PCC voltage.

Everything here is a pure function over immutable value types, so the
module is safe to use from any number of threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

# Constraint-slack tolerance for feasibility classification (pu) and the
# threshold above which a positive stability margin is declared a loss of
# synchronism rather than roundoff.
FEASIBILITY_SLACK = 1e-9
LOS_TOL = 1e-12


class InvalidParams(ValueError):
    """Raised when grid or inverter parameters violate their invariants."""


class LossOfSynchronism(RuntimeError):
    """Raised when a voltage is requested for a point outside the stability region."""


@dataclass(frozen=True)
class GridParams:
    """Thevenin equivalent of the negative-sequence grid.

    vg is the source voltage magnitude, r and x the series resistance and
    reactance. A resistive-inductive grid is assumed: r > 0 and x > 0.
    """

    vg: float
    r: float
    x: float

    def __post_init__(self) -> None:
        if not (self.r > 0.0 and self.x > 0.0):
            raise InvalidParams(f"need r > 0 and x > 0, got r={self.r}, x={self.x}")
        if not (self.vg >= 0.0 and math.isfinite(self.vg)):
            raise InvalidParams(f"need vg >= 0, got {self.vg}")

    @property
    def z(self) -> float:
        """Impedance magnitude sqrt(r^2 + x^2)."""
        return math.hypot(self.r, self.x)

    @property
    def phi(self) -> float:
        """Impedance angle atan2(x, r), in (0, pi/2)."""
        return math.atan2(self.x, self.r)

    @classmethod
    def from_impedance(cls, vg: float, z: float, r_over_x: float) -> "GridParams":
        """Build from impedance magnitude and r/x ratio."""
        if z <= 0.0 or r_over_x <= 0.0:
            raise InvalidParams(f"need z > 0 and r_over_x > 0, got z={z}, r_over_x={r_over_x}")
        x = z / math.hypot(r_over_x, 1.0)
        return cls(vg=vg, r=r_over_x * x, x=x)


@dataclass(frozen=True)
class InverterLimits:
    """Current cap and average active-power window of the inverter."""

    i_max: float
    p_min: float
    p_max: float

    def __post_init__(self) -> None:
        if not self.i_max > 0.0:
            raise InvalidParams(f"need i_max > 0, got {self.i_max}")
        if not (self.p_min <= 0.0 < self.p_max):
            raise InvalidParams(
                f"need p_min <= 0 < p_max, got p_min={self.p_min}, p_max={self.p_max}"
            )


@dataclass(frozen=True)
class OperatingPoint:
    """dq current pair in the negative-sequence PCC voltage frame."""

    i_d: float
    i_q: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.i_d) and math.isfinite(self.i_q)):
            raise InvalidParams(f"non-finite operating point ({self.i_d}, {self.i_q})")

    @property
    def magnitude(self) -> float:
        return math.hypot(self.i_d, self.i_q)


@dataclass(frozen=True)
class NetworkState:
    """PCC voltage magnitude, its angle relative to the grid source, and power."""

    v: float
    theta: float
    p: float


@dataclass(frozen=True)
class FeasibilityReport:
    """Constraint-by-constraint evaluation of an operating point."""

    current_ok: bool
    stable: bool
    voltage_ok: bool
    power_ok: bool
    i: float
    s: float
    v: float
    p: float

    @property
    def feasible(self) -> bool:
        return self.current_ok and self.stable and self.voltage_ok and self.power_ok


def stability_margin(pt: OperatingPoint, g: GridParams) -> float:
    """Signed synchronization-stability margin S = |r*i_q + x*i_d| - vg.

    S <= 0 means a real PCC voltage solution exists; S > 0 means the
    commanded current admits no power-flow equilibrium (loss of synchronism).
    """
    return abs(g.r * pt.i_q + g.x * pt.i_d) - g.vg


def pcc_voltage(pt: OperatingPoint, g: GridParams) -> float:
    """Raw PCC voltage sqrt(vg^2 - (r*i_q + x*i_d)^2) + r*i_d - x*i_q.

    The value may be negative; physical feasibility (v >= 0) is checked
    separately by callers that need it. Raises LossOfSynchronism when the
    stability margin is positive.
    """
    s = stability_margin(pt, g)
    if s > LOS_TOL:
        raise LossOfSynchronism(f"stability margin {s:+.3e} > 0 at ({pt.i_d}, {pt.i_q})")
    u = g.r * pt.i_q + g.x * pt.i_d
    # max() guards the sqrt against roundoff when S is within tolerance of 0
    return math.sqrt(max(g.vg * g.vg - u * u, 0.0)) + g.r * pt.i_d - g.x * pt.i_q


def active_power(pt: OperatingPoint, g: GridParams) -> float:
    """Average active power 1.5 * v * i_d (peak-value dq convention)."""
    return 1.5 * pcc_voltage(pt, g) * pt.i_d


def recover_theta(pt: OperatingPoint, g: GridParams) -> float:
    """PCC voltage angle arcsin((r*i_q + x*i_d)/vg), restricted to [-pi/2, pi/2].

    By convention theta = 0 when vg = 0 (degenerate full-mitigation source).
    """
    s = stability_margin(pt, g)
    if s > LOS_TOL:
        raise LossOfSynchronism(f"stability margin {s:+.3e} > 0 at ({pt.i_d}, {pt.i_q})")
    if g.vg == 0.0:
        return 0.0
    u = g.r * pt.i_q + g.x * pt.i_d
    return math.asin(min(max(u / g.vg, -1.0), 1.0))


def check_feasibility(pt: OperatingPoint, g: GridParams, lim: InverterLimits) -> FeasibilityReport:
    """Evaluate every constraint at pt. Infeasibility is data, not an error."""
    i = pt.magnitude
    s = stability_margin(pt, g)
    stable = s <= LOS_TOL
    if stable:
        v = pcc_voltage(pt, g)
        p = 1.5 * v * pt.i_d
        voltage_ok = v >= -FEASIBILITY_SLACK
        power_ok = lim.p_min - FEASIBILITY_SLACK <= p <= lim.p_max + FEASIBILITY_SLACK
    else:
        v = math.nan
        p = math.nan
        voltage_ok = False
        power_ok = False
    return FeasibilityReport(
        current_ok=i <= lim.i_max + FEASIBILITY_SLACK,
        stable=stable,
        voltage_ok=voltage_ok,
        power_ok=power_ok,
        i=i,
        s=s,
        v=v,
        p=p,
    )
