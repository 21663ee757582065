"""Brute-force optimality certification by exhaustive grid search.

Two searches are provided. The polar search works on the reduced program
whose objective is the closed-form raw voltage of the operating point; the
3-D search keeps the voltage angle as an explicit unknown and enforces the
power-flow equality by residual tolerance, so it stays logically
independent of the algebra that eliminated the angle. Both report a
resolution bound derived from the exact Lipschitz constant of the voltage
surface, |grad V| = z*vg/sqrt(vg^2 - u^2), over an inflated neighborhood
of the incumbent.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .grid_model import GridParams, InverterLimits, OperatingPoint
from .solver import OvuaSolution, RegimeMismatch, classify

# Cap used when the incumbent sits against the stability boundary, where
# the Lipschitz constant diverges; the voltage range itself bounds the gap.
def _bound_cap(g: GridParams, lim: InverterLimits) -> float:
    return g.vg + 2.0 * g.z * lim.i_max


class EmptyFeasibleSet(RuntimeError):
    """No grid point satisfied the constraints: pathological inputs."""


@dataclass(frozen=True)
class OracleConfig:
    """Sampling resolution of the searches.

    Defaults give a sub-1e-3 pu resolution bound at interactive runtimes.
    """

    n_radial: int = 400
    n_angular: int = 2880
    n_theta: int = 721
    feasibility_slack: float = 1e-9

    def __post_init__(self) -> None:
        if self.n_radial < 2 or self.n_angular < 8 or self.n_theta < 3:
            raise ValueError("grid too coarse: need n_radial>=2, n_angular>=8, n_theta>=3")
        if self.feasibility_slack < 0.0:
            raise ValueError("feasibility_slack must be >= 0")


@dataclass(frozen=True)
class OracleResult:
    best_point: OperatingPoint
    best_v: float
    n_feasible: int
    resolution_bound: float


@dataclass(frozen=True)
class CertificationReport:
    """Outcome of checking an analytical solution against the polar search."""

    ok: bool
    gap: float            # best_v - v_star; negative means the oracle won
    resolution_bound: float
    best_v: float
    v_star: float
    # The analytical optimum must never be beaten by more than this margin,
    # which covers slack-induced displacement of grid points off the
    # feasible set.
    soundness_margin: float = 1e-6


def _polar_grid(lim: InverterLimits, cfg: OracleConfig):
    c = np.linspace(0.0, lim.i_max, cfg.n_radial)
    alpha = np.linspace(0.0, 2.0 * math.pi, cfg.n_angular, endpoint=False)
    cc, aa = np.meshgrid(c, alpha, indexing="ij")
    return cc * np.cos(aa), cc * np.sin(aa)


def _lipschitz_bound(g: GridParams, lim: InverterLimits, u_best: float, d: float) -> float:
    # Inflate |u| by the worst change across one cell: |grad u| = z exactly.
    u_w = abs(u_best) + g.z * d
    cap = _bound_cap(g, lim)
    if u_w >= g.vg:
        return cap
    lip = g.z * g.vg / math.sqrt(g.vg * g.vg - u_w * u_w)
    return min(lip * d, cap)


def grid_search_p0prime(
    g: GridParams, lim: InverterLimits, cfg: OracleConfig | None = None
) -> OracleResult:
    """Polar grid search of the reduced program (angle eliminated).

    Refuses to run when full mitigation is achievable, because the reduced
    program is only equivalent to the original one outside that regime.
    """
    cfg = cfg or OracleConfig()
    if classify(g, lim).c1:
        raise RegimeMismatch("full-mitigation regime: the reduced program does not apply")
    i_d, i_q = _polar_grid(lim, cfg)
    slack = cfg.feasibility_slack
    u = g.r * i_q + g.x * i_d
    stable = np.abs(u) - g.vg <= slack
    root = np.sqrt(np.maximum(g.vg * g.vg - u * u, 0.0))
    v = root + g.r * i_d - g.x * i_q
    p = 1.5 * v * i_d
    feasible = stable & (v >= -slack) & (p >= lim.p_min - slack) & (p <= lim.p_max + slack)
    if not feasible.any():
        raise EmptyFeasibleSet("no feasible grid point in the polar search")
    v_masked = np.where(feasible, v, np.inf)
    k = int(np.argmin(v_masked))
    ki, kj = np.unravel_index(k, v.shape)
    best = OperatingPoint(float(i_d[ki, kj]), float(i_q[ki, kj]))
    d_cell = math.hypot(lim.i_max / (cfg.n_radial - 1), lim.i_max * 2.0 * math.pi / cfg.n_angular)
    bound = _lipschitz_bound(g, lim, float(u[ki, kj]), d_cell)
    return OracleResult(
        best_point=best,
        best_v=float(v[ki, kj]),
        n_feasible=int(feasible.sum()),
        resolution_bound=bound,
    )


def grid_search_p0(
    g: GridParams, lim: InverterLimits, cfg: OracleConfig | None = None
) -> OracleResult:
    """Coarse 3-D search over (i_d, i_q, theta) of the original program.

    The voltage is obtained from the in-phase power-flow equation,
    v = vg*cos(theta) + r*i_d - x*i_q, and the quadrature equation is
    enforced as a residual |r*i_q + x*i_d - vg*sin(theta)| <= tol. The
    tolerance scales with the theta grid so every feasible current pair
    keeps at least one admissible theta sample.
    """
    cfg = cfg or OracleConfig()
    slack = cfg.feasibility_slack
    i_d, i_q = _polar_grid(lim, cfg)
    u = g.r * i_q + g.x * i_d
    thetas = np.linspace(-math.pi, math.pi, cfg.n_theta)
    d_theta = thetas[1] - thetas[0]
    d_cell = math.hypot(lim.i_max / (cfg.n_radial - 1), lim.i_max * 2.0 * math.pi / cfg.n_angular)
    tol_eq = max(slack, 0.5 * g.vg * d_theta + g.z * d_cell)

    best_v = math.inf
    best_idx = None
    n_feasible = 0
    for theta in thetas:
        v = g.vg * math.cos(theta) + g.r * i_d - g.x * i_q
        p = 1.5 * v * i_d
        feasible = (
            (np.abs(u - g.vg * math.sin(theta)) <= tol_eq)
            & (v >= -slack)
            & (p >= lim.p_min - slack)
            & (p <= lim.p_max + slack)
        )
        n_feasible += int(feasible.sum())
        if feasible.any():
            v_masked = np.where(feasible, v, np.inf)
            k = int(np.argmin(v_masked))
            if v.flat[k] < best_v:
                best_v = float(v.flat[k])
                best_idx = np.unravel_index(k, v.shape)
    if best_idx is None:
        raise EmptyFeasibleSet("no feasible grid point in the 3-D search")
    best = OperatingPoint(float(i_d[best_idx]), float(i_q[best_idx]))
    # Gap budget: current-plane cell, theta displacement on the power-flow
    # manifold (sqrt term: the equality slack rotates cos(theta) by at most
    # sqrt(3*vg*tol) near the poles), plus the voltage slack itself.
    bound = g.z * d_cell + math.sqrt(3.0 * g.vg * tol_eq) + slack
    return OracleResult(
        best_point=best,
        best_v=best_v,
        n_feasible=n_feasible,
        resolution_bound=min(bound, _bound_cap(g, lim)),
    )


def certify_solution(
    sol: OvuaSolution, g: GridParams, lim: InverterLimits, cfg: OracleConfig | None = None
) -> CertificationReport:
    """Check an analytical solution against the polar search.

    ok means both directions hold: no feasible grid point beats v_star
    beyond the soundness margin, and the grid comes within the resolution
    bound of v_star (the claimed optimum is actually attained).
    """
    res = grid_search_p0prime(g, lim, cfg)
    gap = res.best_v - sol.v_star
    report = CertificationReport(
        ok=True, gap=gap, resolution_bound=res.resolution_bound, best_v=res.best_v, v_star=sol.v_star
    )
    ok = gap >= -report.soundness_margin and gap <= res.resolution_bound
    if ok:
        return report
    return CertificationReport(
        ok=False,
        gap=gap,
        resolution_bound=res.resolution_bound,
        best_v=res.best_v,
        v_star=sol.v_star,
    )
