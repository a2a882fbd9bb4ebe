"""Command-line front end: solve, evaluate, simulate, export-map.

All randomness flows from the single master seed through derived streams;
there is no ambient entropy, so identical invocations produce identical
output bytes. Every output file embeds the config hash and master seed.

Exit codes: 0 success, 2 configuration error, 3 solver/runtime error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import parallel
from .config import ConfigError, RunConfig, load_config
from .costs import immediate_cost
from .reduced import ModelVariant, ReducedState
from .rng import RngStream
from .sir import MultiPoolState, PoolState, outbreak_time, simulate_interval
from .solver import DetectionMap, MapSequence, solve
from .strategy import (
    MapPolicy,
    Policy,
    StrategyReport,
    ThresholdP,
    ThresholdT,
    evaluate_on,
    paired_compare,
    simulate_paths,
)

# Stream addresses reserved for CLI-level simulation (solver owns t >= 1).
EVAL_STREAM = (0, 0)
SIM_REDUCED_STREAM = (0, 1)
SIM_TWO_POOL_STREAM = (0, 2)


def _provenance_line(config_hash: str, master_seed: int) -> str:
    return f"# config_hash={config_hash} master_seed={master_seed}"


def _write_csv(path: Path, header: Sequence[str], rows, config_hash: str, seed: int) -> None:
    with path.open("w", newline="") as fh:
        fh.write(_provenance_line(config_hash, seed) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


# ---------------------------------------------------------------- solve --


def cmd_solve(cfg: RunConfig, workers: int) -> None:
    out = cfg.output_dir
    maps_dir = out / "maps"
    maps_dir.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()

    method = "SRMC (sequential)" if cfg.srmc.sequential else "RMC (non-sequential)"
    print(f"solve: variant={cfg.variant.value} method={method} "
          f"n_end={cfg.srmc.n_end} t_max={cfg.srmc.t_max} seed={cfg.master_seed}")

    def progress(t: int, sup: float) -> None:
        if np.isnan(sup):
            print(f"  iteration {t:3d}")
        else:
            print(f"  iteration {t:3d}  sup|q - q_prev| = {sup:.4f}")

    result = solve(
        cfg.srmc, cfg.epidemic, cfg.costs, cfg.variant,
        workers=workers, progress=progress,
    )

    for dmap in result.maps:
        doc = dmap.to_dict()
        doc["config_hash"] = chash
        (maps_dir / f"map_t{dmap.iteration:02d}.json").write_text(json.dumps(doc))

    rows = []
    for dmap, trace in zip(result.maps, result.traces):
        for i1, p in zip(result.trace_i_values, trace):
            if cfg.variant is ModelVariant.FULL3D:
                rows.append([dmap.iteration, _fmt(result.trace_s_value), _fmt(float(i1)),
                             "" if np.isnan(p) else _fmt(float(p))])
            else:
                rows.append([dmap.iteration, _fmt(float(i1)),
                             "" if np.isnan(p) else _fmt(float(p))])
    header = (["t", "s1", "i1", "p_boundary"] if cfg.variant is ModelVariant.FULL3D
              else ["t", "i1", "p_boundary"])
    _write_csv(out / "boundaries.csv", header, rows, chash, cfg.master_seed)

    report = {
        "config_hash": chash,
        "master_seed": cfg.master_seed,
        "variant": cfg.variant.value,
        "method": method,
        "iterations": result.iterations,
        "converged": result.converged,
        "tol": cfg.srmc.tol,
        "sup_diffs": result.sup_diffs,
        "warning": result.warning,
        "final_map": f"maps/map_t{result.final().iteration:02d}.json",
        "config": cfg.raw,
    }
    (out / "convergence.json").write_text(json.dumps(report, indent=2))
    if result.warning:
        print(f"warning: {result.warning}")
    print(f"solve: wrote {result.iterations} maps to {maps_dir}")


# ------------------------------------------------------------- evaluate --


def _params_match(dmap: DetectionMap, cfg: RunConfig,
                  ignore_costs: bool = False) -> Optional[str]:
    """None when compatible, else a message citing both parameter sets."""
    map_epi = dmap.epidemic
    map_costs = dmap.costs
    same_epi = (
        map_epi.beta == cfg.epidemic.beta
        and map_epi.gamma == cfg.epidemic.gamma
        and map_epi.alpha == cfg.epidemic.alpha
        and map_epi.pool_sizes == cfg.epidemic.pool_sizes
        and map_epi.sigma_delta == cfg.epidemic.sigma_delta
    )
    same_costs = ignore_costs or map_costs == cfg.costs
    if same_epi and same_costs:
        return None
    return (
        "map was built under different parameters than the config: "
        f"map epidemic={map_epi}, costs={map_costs}; "
        f"config epidemic={cfg.epidemic}, costs={cfg.costs} "
        "(pass --allow-param-mismatch to evaluate anyway)"
    )


def _build_policies(cfg: RunConfig, map_paths: Sequence[str],
                    allow_mismatch: bool, per_map_costs: bool) -> list[Policy]:
    policies: list[Policy] = []
    specs = list(cfg.evaluate.policies) if cfg.evaluate else []

    def load_map(path, label):
        dmap = DetectionMap.load(path)
        mismatch = _params_match(dmap, cfg, ignore_costs=per_map_costs)
        if mismatch and not allow_mismatch:
            raise ConfigError(mismatch)
        return MapPolicy(dmap, label=label)

    for spec in specs:
        kind = str(spec.get("kind", "")).lower()
        if kind == "map":
            if "path" not in spec:
                raise ConfigError(f"map policy entry needs a 'path': {spec}")
            policies.append(load_map(spec["path"], spec.get("name")))
        elif kind == "threshold_p":
            if "p_bar" not in spec:
                raise ConfigError(f"threshold_p policy entry needs 'p_bar': {spec}")
            policies.append(ThresholdP(float(spec["p_bar"])))
        elif kind == "threshold_t":
            if "t_bar" not in spec:
                raise ConfigError(f"threshold_t policy entry needs 't_bar': {spec}")
            policies.append(ThresholdT(int(spec["t_bar"])))
        else:
            raise ConfigError(f"unknown policy kind {spec.get('kind')!r} in {spec}")
    for path in map_paths:
        policies.append(load_map(path, Path(path).stem))
    if not policies:
        raise ConfigError("no policies to evaluate: config 'evaluate.policies' "
                          "is empty and no --map was given")
    return policies


def cmd_evaluate(cfg: RunConfig, map_paths: Sequence[str], allow_mismatch: bool,
                 per_map_costs: bool, workers: int) -> None:
    if cfg.evaluate is None:
        raise ConfigError("config has no 'evaluate' section")
    policies = _build_policies(cfg, map_paths, allow_mismatch, per_map_costs)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()

    ev = cfg.evaluate
    print(f"evaluate: {len(policies)} policies on {ev.n_paths} frozen paths "
          f"(variant={cfg.variant.value}, horizon={ev.horizon})")
    rng = RngStream(cfg.master_seed).derive(*EVAL_STREAM)
    paths = simulate_paths(
        ev.x0, ev.n_paths, ev.horizon, cfg.epidemic, cfg.variant, rng, workers=workers
    )

    reports: list[StrategyReport] = []
    for policy in policies:
        # penalty sweeps score each map under the costs it was solved for
        costs = (policy.dmap.costs
                 if per_map_costs and isinstance(policy, MapPolicy) else cfg.costs)
        report = evaluate_on(policy, paths, costs)
        reports.append(report)
        print(f"  {report.policy_name:>20s}: mean_tau={report.mean_tau:.2f} "
              f"sd_tau={report.sd_tau:.2f} mean_cost={report.mean_cost:.3f} "
              f"sd_cost={report.sd_cost:.2f} pfa={100 * report.pfa:.1f}% "
              f"cap_hits={report.cap_hits}")

    header = ["policy", "n_paths", "mean_tau", "sd_tau", "mean_cost", "sd_cost",
              "pfa", "cap_hits", "horizon"]
    rows = [[r.policy_name, r.n_paths, _fmt(r.mean_tau), _fmt(r.sd_tau),
             _fmt(r.mean_cost), _fmt(r.sd_cost), _fmt(r.pfa), r.cap_hits, r.horizon]
            for r in reports]
    _write_csv(out / "eval_summary.csv", header, rows, chash, cfg.master_seed)

    # scenario-by-scenario comparison of the first policy against the rest
    paired = []
    for other in reports[1:]:
        cmp = paired_compare(reports[0], other)
        paired.append({
            "a": cmp.name_a,
            "b": cmp.name_b,
            "frac_a_better": cmp.frac_a_better,
            "frac_b_better": cmp.frac_b_better,
            "mean_diff": cmp.mean_diff,
        })
        print(f"  paired {cmp.name_a} vs {cmp.name_b}: "
              f"a strictly better on {100 * cmp.frac_a_better:.1f}% "
              f"(mean diff {cmp.mean_diff:+.3f})")

    summary = {
        "config_hash": chash,
        "master_seed": cfg.master_seed,
        "variant": cfg.variant.value,
        "x0": [ev.x0.s1, ev.x0.i1, ev.x0.p],
        "n_paths": ev.n_paths,
        "horizon": ev.horizon,
        "policies": [r.summary_dict() for r in reports],
        "paired": paired,
        "config": cfg.raw,
    }
    (out / "eval_summary.json").write_text(json.dumps(summary, indent=2))

    for report in reports:
        rows = [[n, _fmt(float(report.taus[n])), _fmt(float(report.costs[n])),
                 _fmt(float(report.p_taus[n]))]
                for n in range(report.n_paths)]
        _write_csv(out / f"paths_{report.policy_name}.csv",
                   ["path", "tau", "cost", "p_tau"], rows, chash, cfg.master_seed)
    print(f"evaluate: wrote summary and per-path records to {out}")


# ------------------------------------------------------------- simulate --


def cmd_simulate(cfg: RunConfig, workers: int) -> None:
    if cfg.simulate is None:
        raise ConfigError("config has no 'simulate' section")
    sim = cfg.simulate
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    chash = cfg.config_hash()

    rng = RngStream(cfg.master_seed).derive(*SIM_REDUCED_STREAM)
    frozen = simulate_paths(
        sim.x0, sim.n_paths, sim.horizon, cfg.epidemic, cfg.variant, rng, workers=workers
    )
    rows = []
    for n, path in enumerate(frozen.paths):
        for t, st in enumerate(path):
            rows.append([n, t, st.s1, st.i1, _fmt(st.p)])
    _write_csv(out / "trajectories.csv", ["path", "t", "s1", "i1", "p"],
               rows, chash, cfg.master_seed)
    print(f"simulate: wrote {sim.n_paths} reduced trajectories to {out / 'trajectories.csv'}")

    if sim.two_pool:
        if cfg.epidemic.n_pools < 2:
            raise ConfigError("two_pool simulation needs at least two pool_sizes")
        m2 = cfg.epidemic.pool_sizes[1]
        rows = []
        root = RngStream(cfg.master_seed).derive(*SIM_TWO_POOL_STREAM)
        for n in range(sim.n_paths):
            stream = root.derive(n)
            state = MultiPoolState(
                (PoolState(sim.x0.s1, sim.x0.i1), PoolState(m2, 0)), 0.0
            )
            traj = [state]
            for _ in range(sim.horizon):
                state = simulate_interval(state, cfg.epidemic, 1.0, stream)
                traj.append(state)
            theta = outbreak_time(traj)
            for t, st in enumerate(traj):
                rows.append([
                    n, t,
                    st.pools[0].susceptible, st.pools[0].infected,
                    st.pools[1].susceptible, st.pools[1].infected,
                    "" if theta is None else theta,
                ])
        _write_csv(out / "two_pool.csv",
                   ["path", "t", "s1", "i1", "s2", "i2", "theta"],
                   rows, chash, cfg.master_seed)
        print(f"simulate: wrote ground-truth trajectories to {out / 'two_pool.csv'}")


# ----------------------------------------------------------- export-map --


def cmd_export_map(map_path: str, out_dir: str, grid_n: int) -> None:
    dmap = DetectionMap.load(map_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    doc_hash = hashlib.sha256(Path(map_path).read_bytes()).hexdigest()[:16]

    axes = [np.linspace(lo, hi, grid_n) for lo, hi in
            zip(dmap.domain.lower, dmap.domain.upper)]
    mesh = np.meshgrid(*axes, indexing="ij")
    grid = np.column_stack([m.ravel() for m in mesh])

    rows = []
    for loc in grid:
        pred = dmap.surrogate.predict(loc)
        d = immediate_cost(float(loc[-1]), dmap.costs)
        rows.append([*(_fmt(float(v)) for v in loc), _fmt(pred.mean), _fmt(pred.stderr),
                     _fmt(d), int(pred.mean - d > 0)])
    coord_names = (["s1", "i1", "p"] if dmap.variant is ModelVariant.FULL3D
                   else ["i1", "p"])
    name = Path(map_path).stem
    _write_csv(out / f"{name}_grid.csv",
               coord_names + ["qhat", "stderr", "d", "announce"],
               rows, doc_hash, dmap.master_seed)
    print(f"export-map: wrote {out / (name + '_grid.csv')}")


# ----------------------------------------------------------------- main --


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to the JSON run config")
    p.add_argument("--seed", type=int, default=None,
                   help="master seed (overrides the config)")
    p.add_argument("--out", default=None, help="output directory (overrides the config)")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: available cores)")
    p.add_argument("--variant", choices=["full3d", "lp2d"], default=None,
                   help="model variant (overrides the config)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="epidetect",
        description="Optimal epidemic-detection policies for a two-pool "
                    "stochastic SIR model.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="build detection maps")
    _add_common(p_solve)

    p_eval = sub.add_parser("evaluate", help="score policies on frozen scenarios")
    _add_common(p_eval)
    p_eval.add_argument("--map", action="append", default=[], dest="maps",
                        help="detection-map JSON to evaluate (repeatable)")
    p_eval.add_argument("--allow-param-mismatch", action="store_true",
                        help="evaluate maps built under different parameters")
    p_eval.add_argument("--per-map-costs", action="store_true",
                        help="score each map under the costs stored in it "
                             "(penalty sweeps over shared scenarios)")

    p_sim = sub.add_parser("simulate", help="write sample trajectories")
    _add_common(p_sim)

    p_exp = sub.add_parser("export-map", help="export a map as a prediction grid CSV")
    p_exp.add_argument("--map", required=True, help="detection-map JSON")
    p_exp.add_argument("--out", default="out", help="output directory")
    p_exp.add_argument("--grid", type=int, default=20, help="grid points per axis")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export-map":
            cmd_export_map(args.map, args.out, args.grid)
            return 0
        cfg = load_config(
            args.config,
            seed_override=args.seed,
            out_override=args.out,
            variant_override=args.variant,
        )
        workers = args.workers if args.workers is not None else parallel.default_workers()
        cfg.output_dir.mkdir(parents=True, exist_ok=True)
        if args.command == "solve":
            cmd_solve(cfg, workers)
        elif args.command == "evaluate":
            cmd_evaluate(cfg, args.maps, args.allow_param_mismatch,
                         args.per_map_costs, workers)
        elif args.command == "simulate":
            cmd_simulate(cfg, workers)
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # solver/runtime failure
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
