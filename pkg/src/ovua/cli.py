"""Command-line front end.

Commands: classify | solve | sweep | simulate | certify. Parameters come
from an optional JSON config file, overridden by flags. Human-facing output
prints angles in degrees; JSON reports keep radians and round-trip
bit-for-bit. CSV output is deterministic: fixed column order, repr floats.

Exit codes: 0 success or stable equilibrium, 2 invalid configuration,
3 no stable equilibrium reached, 4 internal-consistency failure (the
brute-force search beat an analytical optimum beyond its gap bound).
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from typing import Dict, List, Optional, Sequence

import numpy as np

from .control import synthesize_three_phase
from .grid_model import (
    GridParams,
    InvalidParams,
    InverterLimits,
    OperatingPoint,
    check_feasibility,
    stability_margin,
)
from .oracle import EmptyFeasibleSet, OracleConfig, certify_solution
from .sim import ConfigError, Scenario, SimTrace, builtin_scenarios, run
from .solver import NoRootBracketed, classify, solve

EXIT_OK = 0
EXIT_INVALID_CONFIG = 2
EXIT_NO_EQUILIBRIUM = 3
EXIT_INCONSISTENT = 4

TRACE_COLUMNS = ["cycle", "mode", "id_ref", "iq_ref", "v_neg", "theta_deg", "p_pcc", "stable"]


def _load_config(path: Optional[str]) -> Dict:
    if path is None:
        return {}
    with open(path, "r", encoding="utf-8") as fh:
        cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise ConfigError("config root must be a JSON object")
    return cfg


def _merged(section: Dict, args: argparse.Namespace, keys: Dict[str, str]) -> Dict[str, float]:
    """Config section values overridden by CLI flags where given."""
    out = dict(section)
    for attr, key in keys.items():
        val = getattr(args, attr, None)
        if val is not None:
            out[key] = val
    return out


def _grid_from(cfg: Dict, args: argparse.Namespace) -> GridParams:
    vals = _merged(cfg.get("grid", {}), args, {"vg": "vg", "z": "z", "r_over_x": "r_over_x",
                                               "r": "r", "x": "x"})
    if "vg" not in vals:
        raise ConfigError("missing grid.vg")
    if "r" in vals and "x" in vals:
        return GridParams(vg=float(vals["vg"]), r=float(vals["r"]), x=float(vals["x"]))
    if "z" in vals and "r_over_x" in vals:
        return GridParams.from_impedance(
            float(vals["vg"]), float(vals["z"]), float(vals["r_over_x"])
        )
    raise ConfigError("grid needs either (r, x) or (z, r_over_x)")


def _limits_from(cfg: Dict, args: argparse.Namespace) -> InverterLimits:
    vals = _merged(cfg.get("limits", {}), args, {"i_max": "i_max", "p_min": "p_min",
                                                 "p_max": "p_max"})
    for key in ("i_max", "p_min", "p_max"):
        if key not in vals:
            raise ConfigError(f"missing limits.{key}")
    return InverterLimits(
        i_max=float(vals["i_max"]), p_min=float(vals["p_min"]), p_max=float(vals["p_max"])
    )


def _oracle_cfg_from(cfg: Dict) -> OracleConfig:
    sec = cfg.get("oracle", {})
    return OracleConfig(
        n_radial=int(sec.get("n_radial", 400)),
        n_angular=int(sec.get("n_angular", 2880)),
        n_theta=int(sec.get("n_theta", 721)),
        feasibility_slack=float(sec.get("feasibility_slack", 1e-9)),
    )


def _emit(payload: Dict, args: argparse.Namespace) -> None:
    if getattr(args, "format", "text") == "json":
        text = json.dumps(payload, indent=2, sort_keys=True)
    else:
        lines = []
        for key, val in payload.items():
            if isinstance(val, float) and key.startswith("theta"):
                lines.append(f"{key}_deg = {math.degrees(val):.6f}")
            elif isinstance(val, dict):
                inner = ", ".join(f"{k}={v}" for k, v in val.items())
                lines.append(f"{key}: {inner}")
            else:
                lines.append(f"{key} = {val}")
        text = "\n".join(lines)
    out_path = getattr(args, "out", None)
    if out_path:
        with open(out_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)


def _write_csv(path: Optional[str], header: List[str], rows: List[List]) -> None:
    def fmt(v):
        if v is None:
            return ""
        if isinstance(v, float):
            return repr(v)
        return str(v)

    if path:
        fh = open(path, "w", newline="", encoding="utf-8")
    else:
        fh = sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    finally:
        if path:
            fh.close()


def cmd_classify(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    g = _grid_from(cfg, args)
    lim = _limits_from(cfg, args)
    cls = classify(g, lim)
    _emit(
        {
            "regime": cls.regime.value,
            "i_b": cls.i_b,
            "p_b": cls.p_b,
            "c1": cls.c1,
            "c2": cls.c2,
        },
        args,
    )
    return EXIT_OK


def cmd_solve(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    g = _grid_from(cfg, args)
    lim = _limits_from(cfg, args)
    sol = solve(g, lim)
    rep = check_feasibility(sol.point, g, lim)
    payload = {
        "regime": sol.regime.value,
        "point": {"i_d": sol.point.i_d, "i_q": sol.point.i_q},
        "v_star": sol.v_star,
        "theta_star": sol.theta_star,
        "p_star": sol.p_star,
        "phi_star": sol.phi_star,
        "i_b": sol.i_b,
        "p_b": sol.p_b,
        "feasibility": {
            "feasible": rep.feasible,
            "current_ok": rep.current_ok,
            "stable": rep.stable,
            "voltage_ok": rep.voltage_ok,
            "power_ok": rep.power_ok,
        },
    }
    status = EXIT_OK
    if args.certify:
        cert = certify_solution(sol, g, lim, _oracle_cfg_from(cfg))
        payload["certification"] = {
            "ok": cert.ok,
            "gap": cert.gap,
            "resolution_bound": cert.resolution_bound,
            "oracle_best_v": cert.best_v,
        }
        if not cert.ok:
            status = EXIT_INCONSISTENT
    _emit(payload, args)
    return status


def cmd_certify(args: argparse.Namespace) -> int:
    args.certify = True
    return cmd_solve(args)


def cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    g = _grid_from(cfg, args)
    lim = _limits_from(cfg, args)
    if args.contour:
        id_lo, id_hi = args.id_range
        iq_lo, iq_hi = args.iq_range
        rows = []
        for i_d in np.linspace(id_lo, id_hi, args.n_id):
            for i_q in np.linspace(iq_lo, iq_hi, args.n_iq):
                pt = OperatingPoint(float(i_d), float(i_q))
                s = stability_margin(pt, g)
                if s <= 0.0:
                    u = g.r * pt.i_q + g.x * pt.i_d
                    v = math.sqrt(max(g.vg**2 - u * u, 0.0)) + g.r * pt.i_d - g.x * pt.i_q
                    rows.append([pt.i_d, pt.i_q, v, 1.5 * v * pt.i_d, s])
                else:
                    rows.append([pt.i_d, pt.i_q, None, None, s])
        _write_csv(args.out, ["i_d", "i_q", "v", "p", "s"], rows)
        return EXIT_OK

    if args.param is None:
        raise ConfigError("sweep needs --param or --contour")
    values = np.linspace(args.start, args.stop, args.steps)
    rows = []
    for val in values:
        if args.param == "i_max":
            lim_k = InverterLimits(i_max=float(val), p_min=lim.p_min, p_max=lim.p_max)
        else:
            lim_k = InverterLimits(i_max=lim.i_max, p_min=float(val), p_max=lim.p_max)
        sol = solve(g, lim_k)
        rows.append([args.param, float(val), sol.regime.value, sol.v_star, sol.p_star])
    _write_csv(args.out, ["param", "value", "regime", "v_star", "p_star"], rows)
    return EXIT_OK


def _scenario_from(cfg: Dict, args: argparse.Namespace) -> Scenario:
    sec = dict(cfg.get("scenario", {}))
    case = args.case or sec.get("case")
    if case is not None:
        by_name = {s.name: s for s in builtin_scenarios()}
        if case not in by_name:
            raise ConfigError(f"unknown case {case!r}; choices: {sorted(by_name)}")
        base = by_name[case]
    else:
        g = _grid_from(cfg, args)
        lim = _limits_from(cfg, args)
        base = Scenario(
            name=sec.get("name", "custom"),
            g=g,
            lim=lim,
            event_cycle=int(sec.get("event_cycle", 0)),
            duration_cycles=int(sec.get("duration_cycles", 40)),
            loss_resistance=float(sec.get("loss_resistance", 0.0)),
            v_pos=float(sec.get("v_pos", 0.5)),
            v_pos_pre=float(sec.get("v_pos_pre", 1.0)),
            neg_angle=math.radians(float(sec.get("neg_angle_deg", 0.0))),
        )
    overrides: Dict = {}
    if args.controller is not None:
        overrides["controller"] = args.controller
    if args.duration is not None:
        overrides["duration_cycles"] = args.duration
    params = dict(sec.get("controller_params", {}))
    if args.gain is not None:
        params["gain"] = args.gain
    if params:
        overrides["controller_params"] = params
    if overrides:
        from dataclasses import replace

        base = replace(base, **overrides)
    return base


def _trace_rows(trace: SimTrace) -> List[List]:
    rows = []
    for r in trace.rows:
        rows.append(
            [
                r.cycle,
                r.mode,
                r.ref.i_d,
                r.ref.i_q,
                r.v_neg,
                math.degrees(r.theta) if r.theta is not None else None,
                r.p_pcc,
                r.stable,
            ]
        )
    return rows


def _write_waveform(path: str, trace: SimTrace, samples_per_cycle: int = 64) -> None:
    sc = trace.scenario
    omega = 2.0 * math.pi * 60.0
    rows: List[List] = []
    for r in trace.rows:
        t0 = r.cycle / 60.0
        t = t0 + np.arange(samples_per_cycle) / (60.0 * samples_per_cycle)
        v_pos = sc.v_pos if r.cycle >= sc.event_cycle else sc.v_pos_pre
        if r.stable:
            v_a, v_b, v_c = synthesize_three_phase(
                (v_pos, 0.0), (r.v_neg, sc.neg_angle + r.theta), t, omega
            )
            for k in range(samples_per_cycle):
                rows.append([float(t[k]), float(v_a[k]), float(v_b[k]), float(v_c[k])])
        else:
            for k in range(samples_per_cycle):
                rows.append([float(t[k]), None, None, None])
    _write_csv(path, ["t", "v_a", "v_b", "v_c"], rows)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load_config(args.config)
    scenario = _scenario_from(cfg, args)
    trace = run(scenario)
    _write_csv(args.out, TRACE_COLUMNS, _trace_rows(trace))
    if args.waveform:
        _write_waveform(args.waveform, trace)
    return EXIT_OK if trace.reached_equilibrium() else EXIT_NO_EQUILIBRIUM


def _add_param_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file")
    p.add_argument("--vg", type=float, help="negative-sequence source voltage (pu)")
    p.add_argument("--z", type=float, help="impedance magnitude (pu)")
    p.add_argument("--r-over-x", dest="r_over_x", type=float, help="resistance/reactance ratio")
    p.add_argument("--r", type=float, help="resistance (pu)")
    p.add_argument("--x", type=float, help="reactance (pu)")
    p.add_argument("--i-max", dest="i_max", type=float, help="current cap (pu)")
    p.add_argument("--p-min", dest="p_min", type=float, help="lower power bound (pu, <= 0)")
    p.add_argument("--p-max", dest="p_max", type=float, help="upper power bound (pu, > 0)")
    p.add_argument("--format", choices=["text", "json"], default="text")
    p.add_argument("--out", help="write output to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ovua",
        description="Optimal negative-sequence voltage attenuation: classify, solve, "
        "certify, sweep and simulate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="report the active regime and its boundaries")
    _add_param_flags(p)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("solve", help="compute the optimal operating point")
    _add_param_flags(p)
    p.add_argument("--certify", action="store_true", help="cross-check with the grid search")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("certify", help="solve and certify against the grid search")
    _add_param_flags(p)
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("sweep", help="sweep a limit parameter or emit contour data")
    _add_param_flags(p)
    p.add_argument("--param", choices=["i_max", "p_min"])
    p.add_argument("--start", type=float)
    p.add_argument("--stop", type=float)
    p.add_argument("--steps", type=int, default=50)
    p.add_argument("--contour", action="store_true")
    p.add_argument("--n-id", dest="n_id", type=int, default=41)
    p.add_argument("--n-iq", dest="n_iq", type=int, default=41)
    p.add_argument("--id-range", dest="id_range", nargs=2, type=float, default=[-2.0, 2.0])
    p.add_argument("--iq-range", dest="iq_range", nargs=2, type=float, default=[-2.0, 2.0])
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="run a closed-loop scenario and export the trace")
    _add_param_flags(p)
    p.add_argument("--case", help="builtin case name (A1, A2, B, C, D)")
    p.add_argument("--controller", choices=["ovua", "droop", "pi", "vua"])
    p.add_argument("--duration", type=int, help="override duration in cycles")
    p.add_argument("--gain", type=float, help="droop gain override")
    p.add_argument("--waveform", help="also write a three-phase waveform CSV here")
    p.set_defaults(func=cmd_simulate)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, InvalidParams, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID_CONFIG
    except (NoRootBracketed, EmptyFeasibleSet) as exc:
        print(f"internal consistency failure: {exc}", file=sys.stderr)
        return EXIT_INCONSISTENT


if __name__ == "__main__":
    sys.exit(main())
