"""Analytical optima for minimum negative-sequence PCC voltage.

The attenuation problem has a three-stage optimum governed by two boundary
conditions evaluated from the grid and inverter parameters:

  C1: i_max >= i_b = vg/z      full mitigation is achievable (regime O1)
  C2: p_min <= p_b             the current-limited point on the zero-angle
                               line is power-feasible (regime O2)

with p_b = 1.5*(-(r/z)*vg*i_max + i_max^2*r). When neither holds, the
optimum rides the current circle at the polar angle where the active power
hits its floor (regime O3); that angle is found by a dense scan plus
bisection, never by a general-purpose NLP solver.

The module also exposes the auxiliary machinery used for self-verification:
the single KKT point of the current-limit-only relaxation, the closed form
of the power-constrained relaxation, and the O3 root brackets.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .grid_model import (
    GridParams,
    InverterLimits,
    OperatingPoint,
    active_power,
    pcc_voltage,
    recover_theta,
)

# O3 root finding: bracket scan step (rad) and residual target on P - p_min.
O3_SCAN_STEP = 1e-3
O3_ROOT_TOL = 1e-12


class RegimeMismatch(ValueError):
    """Raised when a stage-specific routine is called outside its regime."""


class OutOfRange(ValueError):
    """Raised when a power target lies outside the admissible range."""


class NoRootBracketed(RuntimeError):
    """Internal-consistency failure: the guaranteed O3 root was not found."""


class Regime(enum.Enum):
    O1 = "O1"
    O2 = "O2"
    O3 = "O3"


@dataclass(frozen=True)
class Classification:
    """Regime decision together with the boundary values it was based on."""

    regime: Regime
    i_b: float
    p_b: float
    c1: bool
    c2: bool


@dataclass(frozen=True)
class OvuaSolution:
    """Certified optimum: point, voltage, angle, power and regime tag.

    phi_star is the polar current angle, populated only for O3.
    """

    point: OperatingPoint
    v_star: float
    theta_star: float
    p_star: float
    regime: Regime
    i_b: float
    p_b: float
    phi_star: Optional[float] = None


@dataclass(frozen=True)
class KktPoint:
    point: OperatingPoint
    multiplier: float


def current_boundary(g: GridParams) -> float:
    """Full-mitigation current magnitude i_b = vg/z."""
    return g.vg / g.z


def power_boundary(g: GridParams, lim: InverterLimits) -> float:
    """Active power at the current-limited zero-angle point."""
    return 1.5 * (-(g.r / g.z) * g.vg * lim.i_max + lim.i_max * lim.i_max * g.r)


def classify(g: GridParams, lim: InverterLimits) -> Classification:
    """Decide the active regime. Boundary ties go to the open-loop stages:
    i_max = i_b counts as C1, p_min = p_b counts as C2."""
    i_b = current_boundary(g)
    p_b = power_boundary(g, lim)
    c1 = lim.i_max >= i_b
    c2 = lim.p_min <= p_b
    if c1:
        regime = Regime.O1
    elif c2:
        regime = Regime.O2
    else:
        regime = Regime.O3
    return Classification(regime=regime, i_b=i_b, p_b=p_b, c1=c1, c2=c2)


def solve_o1(g: GridParams, lim: InverterLimits) -> OvuaSolution:
    """Full mitigation: the zero-angle representative of the optimal family.

    Any point of magnitude i_b on the stability boundary achieves v = 0;
    the member with theta = 0 is returned because it is the one the
    controller can realize open-loop from the grid-voltage frame.
    """
    cls = classify(g, lim)
    if not cls.c1:
        raise RegimeMismatch(f"C1 fails: i_max={lim.i_max} < i_b={cls.i_b}")
    point = OperatingPoint(-(g.r / g.z) * cls.i_b, (g.x / g.z) * cls.i_b)
    return OvuaSolution(
        point=point,
        v_star=0.0,
        theta_star=0.0,
        p_star=0.0,
        regime=Regime.O1,
        i_b=cls.i_b,
        p_b=cls.p_b,
    )


def solve_o2(g: GridParams, lim: InverterLimits) -> OvuaSolution:
    """Current-limited optimum on the zero-angle line."""
    cls = classify(g, lim)
    if cls.regime is not Regime.O2:
        raise RegimeMismatch(f"regime is {cls.regime.value}, not O2")
    point = OperatingPoint(-(g.r / g.z) * lim.i_max, (g.x / g.z) * lim.i_max)
    return OvuaSolution(
        point=point,
        v_star=g.vg - g.z * lim.i_max,
        theta_star=0.0,
        p_star=cls.p_b,
        regime=Regime.O2,
        i_b=cls.i_b,
        p_b=cls.p_b,
    )


def _power_at_angle(phi: float, g: GridParams, i_max: float) -> float:
    pt = OperatingPoint(i_max * math.cos(phi), i_max * math.sin(phi))
    return active_power(pt, g)


def bracket_o3_roots(g: GridParams, lim: InverterLimits) -> List[Tuple[float, float]]:
    """Sign-change brackets of P(x(phi)) - p_min over [pi/2, pi - phi].

    At least one bracket exists in the O3 regime by the intermediate value
    theorem: P is 0 at pi/2 and p_b < p_min at pi - phi. An exact zero at a
    scan node is returned as a degenerate (phi, phi) bracket.
    """
    cls = classify(g, lim)
    if cls.regime is not Regime.O3:
        raise RegimeMismatch(f"regime is {cls.regime.value}, not O3")
    lo, hi = 0.5 * math.pi, math.pi - g.phi
    brackets: List[Tuple[float, float]] = []
    phi_prev = lo
    f_prev = _power_at_angle(lo, g, lim.i_max) - lim.p_min
    if f_prev == 0.0:
        brackets.append((lo, lo))
    n = int(math.ceil((hi - lo) / O3_SCAN_STEP))
    for k in range(1, n + 1):
        phi = min(lo + k * O3_SCAN_STEP, hi)
        f = _power_at_angle(phi, g, lim.i_max) - lim.p_min
        if f == 0.0:
            brackets.append((phi, phi))
        elif f_prev * f < 0.0:
            brackets.append((phi_prev, phi))
        phi_prev, f_prev = phi, f
        if phi >= hi:
            break
    if not brackets:
        raise NoRootBracketed(
            f"no sign change of P - p_min on [{lo}, {hi}]; "
            "this contradicts the intermediate value theorem guarantee"
        )
    return brackets


def _bisect_power_root(g: GridParams, lim: InverterLimits, lo: float, hi: float) -> float:
    """Bisection on f(phi) = P(x(phi)) - p_min until |f| < O3_ROOT_TOL."""
    if lo == hi:
        return lo
    f_lo = _power_at_angle(lo, g, lim.i_max) - lim.p_min
    a, b = lo, hi
    for _ in range(300):
        m = 0.5 * (a + b)
        f_m = _power_at_angle(m, g, lim.i_max) - lim.p_min
        if abs(f_m) < O3_ROOT_TOL or (b - a) < 1e-16:
            return m
        if f_lo * f_m < 0.0:
            b = m
        else:
            a, f_lo = m, f_m
    return 0.5 * (a + b)


def solve_o3(g: GridParams, lim: InverterLimits) -> OvuaSolution:
    """Current-limited optimum with the power floor binding.

    Among multiple roots of P(x(phi)) = p_min the one with the smallest
    i_d (largest phi) is the minimizer.
    """
    cls = classify(g, lim)
    if cls.regime is not Regime.O3:
        raise RegimeMismatch(f"regime is {cls.regime.value}, not O3")
    roots = [_bisect_power_root(g, lim, a, b) for a, b in bracket_o3_roots(g, lim)]
    phi_star = max(roots)
    point = OperatingPoint(lim.i_max * math.cos(phi_star), lim.i_max * math.sin(phi_star))
    return OvuaSolution(
        point=point,
        v_star=pcc_voltage(point, g),
        theta_star=recover_theta(point, g),
        p_star=active_power(point, g),
        regime=Regime.O3,
        i_b=cls.i_b,
        p_b=cls.p_b,
        phi_star=phi_star,
    )


def solve(g: GridParams, lim: InverterLimits) -> OvuaSolution:
    """Classify and dispatch to the matching stage."""
    regime = classify(g, lim).regime
    if regime is Regime.O1:
        return solve_o1(g, lim)
    if regime is Regime.O2:
        return solve_o2(g, lim)
    return solve_o3(g, lim)


def p1_kkt_points(g: GridParams, lim: InverterLimits) -> List[KktPoint]:
    """The unique KKT point of the current-limit-only relaxation.

    Only defined away from C1, where the constraint set contains no
    nondifferentiable point of the voltage surface.
    """
    cls = classify(g, lim)
    if cls.c1:
        raise RegimeMismatch("C1 holds: the relaxation analysis does not apply")
    point = OperatingPoint(-(g.r / g.z) * lim.i_max, (g.x / g.z) * lim.i_max)
    return [KktPoint(point=point, multiplier=g.z / (2.0 * lim.i_max))]


def p3_closed_form(rho: float, g: GridParams) -> OperatingPoint:
    """Minimizer of the raw voltage subject only to P = rho.

    Valid for rho_floor < rho <= 0 with rho_floor = -3*vg^2/(8*r). The
    solution has two branches split at seam = (x/z)^2 * rho_floor:

      rho in [seam, 0]        boundary point of the stability region with
                              the smallest positive i_d (raw voltage < 0)
      rho in (rho_floor, seam)  the better of the two stationary points
                              (raw voltage > 0)

    The seam itself is owned by the boundary branch, which achieves the
    lower voltage there; the two branches do not meet.
    """
    rho_floor = -3.0 * g.vg * g.vg / (8.0 * g.r)
    if rho <= rho_floor or rho > 0.0:
        raise OutOfRange(f"rho={rho} outside admissible range ({rho_floor}, 0]")
    seam = (g.x * g.x) / (g.z * g.z) * rho_floor
    if rho >= seam:
        inner = (g.x / g.z) * g.vg - math.sqrt(
            max(((g.x / g.z) * g.vg) ** 2 + (8.0 / 3.0) * g.r * rho, 0.0)
        )
        i_d = inner / (2.0 * g.z)
        i_q = -(g.x / (2.0 * g.r * g.z)) * inner + g.vg / g.r
    else:
        root = math.sqrt(g.vg * g.vg + (8.0 / 3.0) * g.r * rho)
        i_d = -(g.vg + root) / (2.0 * g.z)
        i_q = -(g.x / (2.0 * g.r * g.z)) * (g.vg - root)
    return OperatingPoint(i_d, i_q)
