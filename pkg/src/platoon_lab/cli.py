"""Command-line interface: simulate | stability | sweep | tune | perturb.

Exit codes: 0 success (simulate: run completed), 1 configuration error,
2 collision, 3 divergence. Parallel fan-out for sweeps and tuning is capped
by the PLATOON_LAB_THREADS environment variable (default 1).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from importlib import resources
from pathlib import Path

import numpy as np

from . import metrics
from .domain import (ControlGains, DEFAULT_ASYMMETRIC_GAINS, DEFAULT_SYMMETRIC_GAINS,
                     ValidationError, load_scenario)
from .simulator import PerturbationSpec, apply_perturbation, run_platoon
from .stability import local_conditions, string_stability_check
from .tuner import GAConfig, design_scenario, ga_optimize

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_COLLISION = 2
EXIT_DIVERGED = 3

# Published minimum-time-gap reference per (lag, delay) cell for the
# asymmetric model; sweep reports flag deviations beyond this slack.
REFERENCE_MIN_TG = {
    (0.1, 0.1): 0.8, (0.1, 0.2): 1.0, (0.2, 0.1): 1.0, (0.2, 0.2): 1.5,
    (0.2, 0.3): 1.9, (0.3, 0.2): 2.1, (0.3, 0.3): 2.5,
}
REFERENCE_SLACK = 0.2


def _thread_count() -> int:
    raw = os.environ.get("PLATOON_LAB_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _resolve_scenario(path_str: str) -> Path:
    """Accept a filesystem path or the name of a bundled scenario."""
    path = Path(path_str)
    if path.exists():
        return path
    bundled = resources.files("platoon_lab") / "scenarios" / path_str
    if bundled.is_file():
        return Path(str(bundled))
    raise FileNotFoundError(f"scenario not found: {path_str}")


def _write_json(path: Path, payload) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    try:
        scenario = load_scenario(_resolve_scenario(args.scenario))
    except (ValidationError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    trace = run_platoon(scenario, record_stride=args.record_stride)
    trace.to_csv(out / "trace.csv")

    tg = trace.time_gaps()
    summary = {
        "status": trace.status,
        "max_sste_s2": trace.summary["max_sste"],
        "max_sste_post_warmup_s2": trace.summary["max_sste_post_warmup"],
        "max_ssse_mps2": trace.summary["max_ssse"],
        "warmup_s": trace.summary["warmup_s"],
        "final_time_gaps_s": [float(x) for x in tg[-1]],
        "final_gaps_m": [float(x) for x in trace.gaps()[-1]],
        "backend": trace.summary["backend"],
    }
    _write_json(out / "metrics.json", summary)
    if args.plots:
        from .plots import plot_trace
        plot_trace(trace, out)
    print(f"{trace.status}: trace and metrics written to {out}")
    return {"completed": EXIT_OK, "collision": EXIT_COLLISION,
            "diverged": EXIT_DIVERGED}[trace.status]


def _load_gains(path: str) -> ControlGains:
    if path == "asymmetric":
        return DEFAULT_ASYMMETRIC_GAINS
    if path == "symmetric":
        return DEFAULT_SYMMETRIC_GAINS
    data = json.loads(Path(path).read_text())
    return ControlGains(**data)


def cmd_stability(args) -> int:
    try:
        gains = _load_gains(args.gains)
        if args.te <= 0 or args.delta < 0 or args.tg <= 0:
            raise ValidationError(["te must be > 0, delta >= 0, tg > 0"])
    except (ValidationError, ValueError, OSError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    local = local_conditions(gains, args.te, args.tg)
    string = string_stability_check(gains, args.te, args.delta, args.tg)

    with open(out / "string_response.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["omega_rad_s", "magnitude", "X", "Y"])
        for row in zip(string.omega, string.magnitude, string.X, string.Y):
            writer.writerow([repr(float(x)) for x in row])

    summary = {
        "local": {
            "x1": local.x1,
            "x2": local.x2,
            "eig_real_parts": list(local.eig_real_parts),
            "condition_i_holds": local.condition_i_holds,
            "condition_ii_holds": local.condition_ii_holds,
            "degenerate": local.degenerate,
            "eigenvalue_sum": local.eigenvalue_sum,
        },
        "string": {
            "sup_magnitude": string.sup_magnitude,
            "sup_omega_rad_s": string.sup_omega,
            "margin": string.margin,
            "stable": string.stable,
            "min_Y": string.min_Y,
            "dc_magnitude": float(string.magnitude[0]),
            "params": string.params,
        },
    }
    _write_json(out / "stability_summary.json", summary)
    print(f"string stable: {string.stable} (sup |G| = {string.sup_magnitude:.6f} "
          f"at {string.sup_omega:.4g} rad/s)")
    return EXIT_OK


def _sweep_cell(model: str, te: float, delta: float, base_scenario) -> dict:
    gains = DEFAULT_ASYMMETRIC_GAINS if model == "asym" else DEFAULT_SYMMETRIC_GAINS
    scenario = replace(base_scenario,
                       powertrain=replace(base_scenario.powertrain, lag=te, delay=delta),
                       gains=gains)
    runner = metrics.scenario_tg_runner(scenario)
    result = metrics.min_achievable_tg(runner)
    best = None
    if result.min_tg is not None:
        for pt in result.grid:
            if pt.tg_des == result.min_tg:
                best = pt.quasi_steady_sste
    return {
        "te": te, "delta": delta, "model": model,
        "min_tg": result.min_tg, "max_sste": best,
        "grid": [(p.tg_des, p.status, p.quasi_steady_sste) for p in result.grid],
    }


def cmd_sweep(args) -> int:
    try:
        te_list = [float(x) for x in args.te.split(",") if x]
        delta_list = [float(x) for x in args.delta.split(",") if x]
        if not te_list or not delta_list:
            raise ValueError("te and delta lists must be non-empty")
        base = load_scenario(_resolve_scenario(args.scenario))
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    cells = [(te, d) for te in te_list for d in delta_list]
    if args.cells == "paired":
        cells = list(zip(te_list, delta_list))

    with ThreadPoolExecutor(max_workers=_thread_count()) as pool:
        rows = list(pool.map(lambda c: _sweep_cell(args.model, c[0], c[1], base), cells))

    flags = []
    with open(out / "sweep.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["T_e_s", "delta_s", "model", "min_tg_s", "max_sste_s2"])
        for row in rows:
            writer.writerow([row["te"], row["delta"], row["model"],
                             "" if row["min_tg"] is None else row["min_tg"],
                             "" if row["max_sste"] is None else repr(row["max_sste"])])
            ref = REFERENCE_MIN_TG.get((row["te"], row["delta"]))
            if args.model == "asym" and ref is not None:
                got = row["min_tg"]
                dev = None if got is None else round(got - ref, 3)
                off = got is None or abs(got - ref) > REFERENCE_SLACK + 1e-12
                if off:
                    flags.append({"te": row["te"], "delta": row["delta"],
                                  "reference_min_tg": ref, "measured_min_tg": got,
                                  "deviation_s": dev})
    _write_json(out / "sweep_flags.json", {
        "reference": {f"{k[0]},{k[1]}": v for k, v in REFERENCE_MIN_TG.items()},
        "slack_s": REFERENCE_SLACK,
        "flagged_cells": flags,
    })
    print(f"sweep complete: {len(rows)} cells, {len(flags)} flagged "
          f"(see {out / 'sweep_flags.json'})")
    return EXIT_OK


def cmd_tune(args) -> int:
    try:
        config = GAConfig(population_size=args.population, generations=args.generations,
                          seed=args.seed)
        model_kind = {"asym": "asymmetric", "sym": "symmetric"}[args.model]
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    workers = _thread_count()
    scenario = design_scenario(model_kind)
    if workers > 1:
        pool = ThreadPoolExecutor(max_workers=workers)
        map_fn = pool.map
    else:
        pool = None
        map_fn = map
    try:
        result = ga_optimize(config, model_kind, scenario=scenario, map_fn=map_fn)
    finally:
        if pool is not None:
            pool.shutdown()

    g = result.best.gains
    report = {
        "config": {
            "population_size": config.population_size,
            "generations": config.generations,
            "tournament_size": config.tournament_size,
            "crossover_rate": config.crossover_rate,
            "mutation_rate": config.mutation_rate,
            "mutation_scale": config.mutation_scale,
            "elitism_count": config.elitism_count,
            "gain_bounds": [list(b) for b in config.gain_bounds],
            "w1": config.w1, "w2": config.w2, "seed": config.seed,
        },
        "model_kind": result.model_kind,
        "design_profile_knots": scenario.leader_profile.knot_pairs(),
        "best_fitness": result.best.fitness,
        "best_feasible": result.best.feasible,
        "best_y1": result.best.y1,
        "best_y2": result.best.y2,
        "best_fitness_per_generation": result.best_history,
        "mean_fitness_per_generation": result.mean_history,
        "gains": {"k_d1": g.k_d1, "k_d2": g.k_d2, "k_v": g.k_v, "k_c": g.k_c,
                  "model_kind": g.model_kind},
    }
    _write_json(out / "tuning_report.json", report)
    print(f"tuned {result.model_kind} gains: k_d1={g.k_d1:.4f} k_d2={g.k_d2:.4f} "
          f"k_v={g.k_v:.4f} k_c={g.k_c:.6f} (fitness {result.best.fitness:.6f})")
    return EXIT_OK


def cmd_perturb(args) -> int:
    try:
        scenario = load_scenario(_resolve_scenario(args.scenario))
        pulses = []
        for spec in args.pulse:
            t0, mag, width = (float(x) for x in spec.split(":"))
            pulses.append((t0, mag, width))
        if not pulses:
            raise ValueError("at least one --pulse T0:MAG:WIDTH is required")
        spec = PerturbationSpec(onsets=tuple(p[0] for p in pulses),
                                magnitudes=tuple(p[1] for p in pulses),
                                ramp_durations=tuple(p[2] for p in pulses))
    except (ValidationError, ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    profile = apply_perturbation(scenario.leader_profile, spec, scenario.policy.v_max)
    perturbed = replace(scenario, leader_profile=profile, initial_gap_offset=0.0)
    trace = run_platoon(perturbed, record_stride=args.record_stride)
    trace.to_csv(out / "trace.csv")

    onset = min(spec.onsets)
    t = trace.times
    after = t >= onset
    base_v = scenario.leader_profile.speed_at(t[after])
    peaks = [float(np.abs(trace.v[after, j] - base_v).max())
             for j in range(1, trace.v.shape[1])]
    non_increasing = all(peaks[j] <= peaks[j - 1] + 1e-9 for j in range(1, len(peaks)))
    _write_json(out / "perturbation_report.json", {
        "status": trace.status,
        "pulses": [{"onset_s": p[0], "magnitude_mps": p[1], "width_s": p[2]}
                   for p in pulses],
        "peak_speed_deviation_mps_by_truck": peaks,
        "attenuates_along_platoon": bool(non_increasing),
    })
    print(f"{trace.status}: peak deviations {['%.3f' % p for p in peaks]} "
          f"attenuating={non_increasing}")
    return {"completed": EXIT_OK, "collision": EXIT_COLLISION,
            "diverged": EXIT_DIVERGED}[trace.status]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="platoon-lab",
        description="Truck-platoon simulation and analysis toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run one scenario and emit trace/metrics")
    p.add_argument("--scenario", required=True,
                   help="scenario JSON path or bundled scenario name")
    p.add_argument("--out", required=True)
    p.add_argument("--plots", action="store_true", help="emit SVG plots")
    p.add_argument("--record-stride", type=int, default=100)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("stability", help="local and string stability reports")
    p.add_argument("--gains", required=True,
                   help="gains JSON path, or 'asymmetric'/'symmetric' for the defaults")
    p.add_argument("--te", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--tg", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_stability)

    p = sub.add_parser("sweep", help="minimum achievable time gap per (lag, delay) cell")
    p.add_argument("--model", choices=["asym", "sym"], required=True)
    p.add_argument("--te", required=True, help="comma-separated lag list, s")
    p.add_argument("--delta", required=True, help="comma-separated delay list, s")
    p.add_argument("--cells", choices=["grid", "paired"], default="grid",
                   help="grid = full cross product; paired = zip the two lists")
    p.add_argument("--scenario", default="table3_asym_te01_d01.json",
                   help="base scenario (time gap and powertrain fields are overridden)")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_sweep)

    p = sub.add_parser("tune", help="genetic-algorithm gain estimation")
    p.add_argument("--model", choices=["asym", "sym"], required=True)
    p.add_argument("--population", type=int, default=50)
    p.add_argument("--generations", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("perturb", help="leader speed pulses on an equilibrium platoon")
    p.add_argument("--scenario", required=True)
    p.add_argument("--pulse", action="append", default=[],
                   help="T0:MAG:WIDTH, repeatable (s, m/s signed, s)")
    p.add_argument("--out", required=True)
    p.add_argument("--record-stride", type=int, default=100)
    p.set_defaults(fn=cmd_perturb)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


def console_entry() -> None:
    sys.exit(main())
