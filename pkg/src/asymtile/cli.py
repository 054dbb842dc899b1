"""Command-line entry point: evaluate, search, and simulate from one place.

Subcommands
-----------
``eval``      two-sided performance estimate for one tile configuration.
``search``    design-space exploration with ranked output and the
              symmetric-vs-asymmetric gain.
``simulate``  run the movement oracle or the microkernel scheduler, either on
              one configuration or as a randomized verification sweep against
              the closed forms.

Configuration comes from an optional JSON file (``--config``) plus flags;
flags win. Reports are deterministic: identical inputs produce identical
bytes. Exit codes: 0 success, 2 infeasible/empty result, 3 configuration
error, 4 verification failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, replace
from fractions import Fraction

from asymtile.arch import (
    DEFAULT_ARCH,
    ArchSpec,
    ConfigError,
    PrecisionSpec,
    ProblemSpec,
    TileConfig,
    arch_from_dict,
    precision_from_value,
    problem_from_value,
    tile_from_value,
)
from asymtile.movement import (
    BOUNDARIES,
    measured_ai,
    simulate_movement,
    trace_to_csv,
    verify_movement_equivalence,
)
from asymtile.perf import (
    EFF_SOURCE_CALIBRATION,
    perf_array,
)
from asymtile.pipeline import (
    DEFAULT_MICROKERNEL,
    MicrokernelSpec,
    microkernel_for_tile,
    microkernel_from_dict,
    total_latency,
)
from asymtile.schedule import (
    build_microkernel_dag,
    dump_schedule_csv,
    measure,
    schedule,
    slots_for,
    verify_random_specs,
)
from asymtile.search import (
    RANK_CSV_COLUMNS,
    SearchSpace,
    enumerate_feasible,
    estimate_csv_row,
    rank,
    ranked_to_csv,
    ranked_to_markdown,
    search_space_from_dict,
)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_CONFIG_ERROR = 3
EXIT_VERIFY_FAILURE = 4

_CONFIG_KEYS = {
    "arch",
    "precision",
    "problem",
    "tile",
    "search",
    "microkernel",
    "eff_source",
    "eff_micro",
}


class _Parser(argparse.ArgumentParser):
    """Argument parser that reports usage problems as ConfigError (exit 3)
    instead of exiting the process directly."""

    def error(self, message: str):
        raise ConfigError(message)


@dataclass
class RunConfig:
    arch: ArchSpec
    prec: PrecisionSpec
    problem: ProblemSpec | None
    tile: TileConfig | None
    space: SearchSpace
    microkernel: MicrokernelSpec | None
    eff_source: str
    eff_micro: Fraction | None


def _load_json_config(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config file must hold a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return raw


def _build_run_config(args: argparse.Namespace) -> RunConfig:
    raw = _load_json_config(args.config) if args.config else {}

    arch = arch_from_dict(raw["arch"]) if "arch" in raw else DEFAULT_ARCH

    prec_value = args.precision if args.precision else raw.get("precision", "config1")
    if isinstance(prec_value, str) and prec_value.lstrip().startswith("{"):
        try:
            prec_value = json.loads(prec_value)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"bad inline precision spec: {exc}") from exc
    prec = precision_from_value(prec_value)

    problem_value = args.problem if args.problem else raw.get("problem")
    problem = problem_from_value(problem_value) if problem_value is not None else None

    tile_value = getattr(args, "tile", None) or raw.get("tile")
    tile = tile_from_value(tile_value) if tile_value is not None else None

    space = search_space_from_dict(raw.get("search", {}))
    overrides = {}
    for flag, field_name in (
        ("t_mc_max", "t_mc_max"),
        ("t_k_min", "t_k_min"),
        ("t_k_max", "t_k_max"),
        ("t_n_max", "t_n_max"),
        ("step", "step"),
    ):
        value = getattr(args, flag, None)
        if value is not None:
            overrides[field_name] = value
    rho = getattr(args, "rho", None)
    if rho:
        try:
            overrides["rho_candidates"] = tuple(int(r) for r in rho.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --rho value {rho!r}: {exc}") from exc
    if getattr(args, "eff_source", None):
        overrides["eff_source"] = args.eff_source
    elif "eff_source" in raw:
        overrides["eff_source"] = raw["eff_source"]
    if overrides:
        space = replace(space, **overrides)

    microkernel = (
        microkernel_from_dict(raw["microkernel"]) if "microkernel" in raw else None
    )

    eff_micro_value = getattr(args, "eff_micro", None)
    if eff_micro_value is None:
        eff_micro_value = raw.get("eff_micro")
    eff_micro = Fraction(str(eff_micro_value)) if eff_micro_value is not None else None

    return RunConfig(
        arch=arch,
        prec=prec,
        problem=problem,
        tile=tile,
        space=space,
        microkernel=microkernel,
        eff_source=space.eff_source,
        eff_micro=eff_micro,
    )


def _tflops(value: float) -> str:
    return f"{value / 1e12:.3g}"


def _kb(value) -> str:
    return f"{float(value) / 1024:.1f}"


def _require(value, what: str):
    if value is None:
        raise ConfigError(f"{what} is required for this command")
    return value


def cmd_eval(cfg: RunConfig, fmt: str, out) -> int:
    tile = _require(cfg.tile, "a tile (--tile or config)")
    problem = _require(cfg.problem, "a problem size (--problem or config)")
    est = perf_array(
        tile,
        problem,
        cfg.prec,
        cfg.arch,
        eff_micro=cfg.eff_micro,
        eff_source=cfg.eff_source,
    )
    if fmt == "csv":
        out.write(RANK_CSV_COLUMNS + "\n")
        out.write(estimate_csv_row(tile, est) + "\n")
    else:
        out.write(
            f"tile: {tile.t_mc}x{tile.t_k}x{tile.t_n} (t_ma={tile.t_ma}, rho={tile.rho})\n"
            f"precision: {cfg.prec.accum_label} accumulate, byte costs "
            f"a={float(cfg.prec.byte_cost_a)} b={float(cfg.prec.byte_cost_b)} "
            f"c={float(cfg.prec.byte_cost_c)}\n"
            f"buffer: {_kb(est.buffer_bytes)} KB of {_kb(cfg.arch.l1_capacity)} KB\n"
            f"feasible: {'yes' if est.feasible else 'no'}\n"
        )
        if est.feasible:
            out.write(
                f"ai_array: {float(est.ai_array):.1f} op/B\n"
                f"eff_micro: {float(est.eff_micro):.3f}\n"
                f"eff_core: {float(est.eff_core):.3f}\n"
                f"memory_bound: {_tflops(est.memory_bound)} TFLOPS\n"
                f"compute_bound: {_tflops(est.compute_bound)} TFLOPS\n"
                f"perf_array: {_tflops(est.perf_array)} TFLOPS\n"
                f"bound_kind: {est.bound_kind}\n"
            )
    if not est.feasible:
        out.write(
            f"infeasible: buffer {_kb(est.buffer_bytes)} KB exceeds capacity "
            f"{_kb(cfg.arch.l1_capacity)} KB\n"
        )
        return EXIT_INFEASIBLE
    return EXIT_OK


def cmd_search(cfg: RunConfig, emit: str, limit: int, out) -> int:
    problem = _require(cfg.problem, "a problem size (--problem or config)")
    space = replace(cfg.space, divisibility_problem=problem)
    configs = enumerate_feasible(space, cfg.prec, cfg.arch)
    if not configs:
        out.write(
            "no feasible tile configuration in the search space "
            "(buffer capacity and divisibility filters removed everything)\n"
        )
        return EXIT_INFEASIBLE
    result = rank(configs, problem, cfg.prec, cfg.arch, space.eff_source)
    if emit == "csv":
        out.write(ranked_to_csv(result))
    elif emit == "table2":
        out.write(ranked_to_markdown(result, problem, cfg.prec, cfg.arch, limit=limit))
    else:
        out.write(f"evaluated {len(result.entries)} feasible configurations\n")
        for tile, est in result.entries[:limit]:
            out.write(
                f"  {tile.t_mc}x{tile.t_k}x{tile.t_n} rho={tile.rho}: "
                f"{_tflops(est.perf_array)} TFLOPS ({est.bound_kind}-bound, "
                f"buffer {_kb(est.buffer_bytes)} KB)\n"
            )
        best_tile, best_est = result.best_overall
        out.write(
            f"best_overall: {best_tile.t_mc}x{best_tile.t_k}x{best_tile.t_n} "
            f"rho={best_tile.rho} at {_tflops(best_est.perf_array)} TFLOPS\n"
        )
        if result.best_symmetric is not None:
            sym_tile, sym_est = result.best_symmetric
            out.write(
                f"best_symmetric: {sym_tile.t_mc}x{sym_tile.t_k}x{sym_tile.t_n} "
                f"at {_tflops(sym_est.perf_array)} TFLOPS\n"
            )
            out.write(f"atb_gain: {result.atb_gain:.2f}\n")
        else:
            out.write("best_symmetric: none in space\natb_gain: n/a\n")
    return EXIT_OK


def cmd_simulate_movement(cfg: RunConfig, args, out) -> int:
    if args.verify:
        failures = verify_movement_equivalence(args.verify, seed=args.seed)
        if failures:
            first = failures[0]
            out.write(
                f"FAIL: {len(failures)} discrepancies in {args.verify} configs; "
                f"first: boundary={first['boundary']} tile={first['tile']} "
                f"measured={first['measured']} closed_form={first['closed_form']}\n"
            )
            return EXIT_VERIFY_FAILURE
        out.write(f"PASS: {args.verify} random configs, 0 discrepancies\n")
        return EXIT_OK
    tile = _require(cfg.tile, "a tile (--tile or config)")
    problem = _require(cfg.problem, "a problem size (--problem or config)")
    trace = simulate_movement(
        problem, tile, cfg.prec, cfg.arch, boundary=args.boundary
    )
    if args.format == "csv":
        out.write(trace_to_csv(trace, args.boundary))
    else:
        out.write(
            f"boundary: {args.boundary}\n"
            f"bytes_a: {float(trace.bytes_a):.0f}\n"
            f"bytes_b: {float(trace.bytes_b):.0f}\n"
            f"bytes_c: {float(trace.bytes_c):.0f}\n"
            f"total_bytes: {float(trace.total_bytes):.0f}\n"
            f"flops: {trace.flops}\n"
            f"measured_ai: {float(measured_ai(trace)):.4f} op/B\n"
            f"peak_occupancy: {trace.peak_l1_occupancy} B\n"
            f"evictions_a: {trace.evictions_a}\n"
        )
    return EXIT_OK


def cmd_simulate_schedule(cfg: RunConfig, args, out) -> int:
    if args.verify:
        failures = verify_random_specs(args.verify, seed=args.seed)
        if failures:
            first = failures[0]
            out.write(
                f"FAIL: {len(failures)} specs beat a bound out of {args.verify}; "
                f"first violations: {first['violations']}\n"
            )
            return EXIT_VERIFY_FAILURE
        out.write(
            f"PASS: {args.verify} random microkernel specs, all schedule cycle "
            f"counts within the analytic bounds\n"
        )
        return EXIT_OK
    if cfg.microkernel is not None:
        spec = cfg.microkernel
    elif cfg.tile is not None:
        spec = microkernel_for_tile(cfg.tile)
    else:
        spec = DEFAULT_MICROKERNEL
    dag = build_microkernel_dag(spec)
    result = schedule(dag, slots_for(spec))
    metrics = measure(result)
    bounds = total_latency(spec)
    ii = metrics["ii_observed"]
    ii_line = f"ii_observed: {float(ii):.3f}\n" if ii is not None else "ii_observed: n/a\n"
    out.write(
        f"instructions: {len(dag)}\n"
        f"first_vmac_cycle: {result.phase_times[0]}\n"
        f"total_cycles: {result.total_cycles}\n"
        f"bound_sequential: {bounds.l_total_sequential}\n"
        f"bound_overlapped: {bounds.l_total_overlapped}\n"
        f"eff_micro_sim: {float(metrics['eff_micro_sim']):.4f}\n"
        + ii_line
    )
    if args.dump:
        with open(args.dump, "w", encoding="utf-8") as handle:
            handle.write(dump_schedule_csv(dag, result))
        out.write(f"schedule written to {args.dump}\n")
    return EXIT_OK


def _make_parser() -> _Parser:
    parser = _Parser(prog="asymtile", description=__doc__)
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def add_common(p: _Parser) -> None:
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--precision", help="preset name or inline spec")
        p.add_argument("--problem", help="problem size MxKxN")
        p.add_argument("--eff-source", dest="eff_source", help="eff_micro source")

    p_eval = sub.add_parser("eval", help="evaluate one tile configuration")
    add_common(p_eval)
    p_eval.add_argument("--tile", help="tile as t_ma,t_mc,t_k,t_n")
    p_eval.add_argument("--eff-micro", dest="eff_micro", help="explicit efficiency")
    p_eval.add_argument("--format", choices=("text", "csv"), default="text")

    p_search = sub.add_parser("search", help="explore the tile design space")
    add_common(p_search)
    p_search.add_argument("--rho", help="comma-separated rho candidates")
    p_search.add_argument("--t-mc-max", dest="t_mc_max", type=int)
    p_search.add_argument("--t-k-min", dest="t_k_min", type=int)
    p_search.add_argument("--t-k-max", dest="t_k_max", type=int)
    p_search.add_argument("--t-n-max", dest="t_n_max", type=int)
    p_search.add_argument("--step", type=int)
    p_search.add_argument("--emit", choices=("text", "csv", "table2"), default="text")
    p_search.add_argument("--limit", type=int, default=10)

    p_sim = sub.add_parser("simulate", help="run an oracle simulation")
    sim_sub = p_sim.add_subparsers(dest="which", parser_class=_Parser)

    p_move = sim_sub.add_parser("movement", help="byte-count the tiled loop nest")
    add_common(p_move)
    p_move.add_argument("--tile", help="tile as t_ma,t_mc,t_k,t_n")
    p_move.add_argument("--boundary", choices=BOUNDARIES, default="core")
    p_move.add_argument("--format", choices=("text", "csv"), default="text")
    p_move.add_argument("--verify", type=int, metavar="N", help="random equivalence sweep")
    p_move.add_argument("--seed", type=int, default=0)

    p_sched = sim_sub.add_parser("schedule", help="schedule the microkernel DAG")
    add_common(p_sched)
    p_sched.add_argument("--tile", help="derive the kernel from this tile")
    p_sched.add_argument("--dump", metavar="FILE", help="write schedule CSV here")
    p_sched.add_argument("--verify", type=int, metavar="N", help="random soundness sweep")
    p_sched.add_argument("--seed", type=int, default=0)

    return parser


def main(argv=None, out=None) -> int:
    out = out if out is not None else sys.stdout
    parser = _make_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise ConfigError("a subcommand is required (eval, search, simulate)")
        if args.command == "simulate" and args.which is None:
            raise ConfigError("simulate needs a target: movement or schedule")
        cfg = _build_run_config(args)
        if args.command == "eval":
            return cmd_eval(cfg, args.format, out)
        if args.command == "search":
            return cmd_search(cfg, args.emit, args.limit, out)
        if args.which == "movement":
            return cmd_simulate_movement(cfg, args, out)
        return cmd_simulate_schedule(cfg, args, out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR


if __name__ == "__main__":
    sys.exit(main())
