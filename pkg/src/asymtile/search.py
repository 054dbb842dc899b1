"""Design-space exploration over tile configurations.

Enumerates the feasible tile grid under the buffer-capacity constraint,
evaluates each candidate with the two-sided performance model, and ranks the
results — surfacing the best overall configuration, the best symmetric
(row-subtile factor 1) configuration, and their ratio. Emitters render the
ranking as CSV and as a markdown table in the reference-report column
layout (problem, tile, rho, buffers, both bounds, the predicted bound).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, replace
from fractions import Fraction

from asymtile.arch import (
    DEFAULT_ARCH,
    ArchSpec,
    ConfigError,
    PrecisionSpec,
    ProblemSpec,
    TileConfig,
    buffer_footprint,
    check_feasible,
    derive_l2_tiles,
)
from asymtile.perf import (
    EFF_SOURCE_CALIBRATION,
    EFF_SOURCES,
    PerfEstimate,
    calibrated_eff_micro,
    eff_core,
    perf_array,
    resolve_eff_micro,
)

MICROTILE = 8


@dataclass(frozen=True)
class SearchSpace:
    """Tile enumeration ranges (inclusive, stepped) and candidate row-subtile
    factors. ``t_k_min`` defaults to the smallest contraction depth with a
    calibrated efficiency entry at full steady-state benefit."""

    t_mc_min: int = 8
    t_mc_max: int = 512
    t_k_min: int = 64
    t_k_max: int = 512
    t_n_min: int = 8
    t_n_max: int = 512
    step: int = 8
    rho_candidates: tuple[int, ...] = (1, 2, 4, 6, 8)
    divisibility_problem: ProblemSpec | None = None
    eff_source: str = EFF_SOURCE_CALIBRATION

    def __post_init__(self) -> None:
        if self.step < MICROTILE or self.step % MICROTILE != 0:
            raise ConfigError(f"step must be a positive multiple of {MICROTILE}")
        for lo, hi, name in (
            (self.t_mc_min, self.t_mc_max, "t_mc"),
            (self.t_k_min, self.t_k_max, "t_k"),
            (self.t_n_min, self.t_n_max, "t_n"),
        ):
            if lo < self.step or lo % self.step != 0 or hi < lo:
                raise ConfigError(
                    f"{name} range [{lo}, {hi}] must start at a positive "
                    f"multiple of step={self.step} and be nonempty"
                )
        if not self.rho_candidates or any(r < 1 for r in self.rho_candidates):
            raise ConfigError("rho_candidates must be a nonempty set of positive ints")
        if self.eff_source not in EFF_SOURCES:
            raise ConfigError(
                f"unknown eff_source {self.eff_source!r}; expected one of {EFF_SOURCES}"
            )


def _divisible(problem: ProblemSpec, tile: TileConfig, arch: ArchSpec) -> bool:
    t_mc_l2, t_k_l2, t_n_l2 = derive_l2_tiles(tile, arch)
    return (
        problem.m % t_mc_l2 == 0
        and problem.k % t_k_l2 == 0
        and problem.n % t_n_l2 == 0
    )


def enumerate_feasible(
    space: SearchSpace,
    prec: PrecisionSpec,
    arch: ArchSpec = DEFAULT_ARCH,
) -> list[TileConfig]:
    """All tile configs in ``space`` that fit the buffer (and divide the
    space's problem, when one is set), in deterministic grid order."""
    out: list[TileConfig] = []
    for t_mc in range(space.t_mc_min, space.t_mc_max + 1, space.step):
        for t_k in range(space.t_k_min, space.t_k_max + 1, space.step):
            for t_n in range(space.t_n_min, space.t_n_max + 1, space.step):
                for rho in sorted(set(space.rho_candidates)):
                    if t_mc % rho != 0:
                        continue
                    t_ma = t_mc // rho
                    if t_ma % MICROTILE != 0:
                        continue
                    tile = TileConfig(t_ma=t_ma, t_mc=t_mc, t_k=t_k, t_n=t_n)
                    if space.divisibility_problem is not None and not _divisible(
                        space.divisibility_problem, tile, arch
                    ):
                        continue
                    if not check_feasible(tile, prec, arch):
                        continue
                    out.append(tile)
    return out


@dataclass(frozen=True)
class RankedResult:
    """Evaluated configurations ordered best-first."""

    entries: tuple[tuple[TileConfig, PerfEstimate], ...]
    best_overall: tuple[TileConfig, PerfEstimate]
    best_symmetric: tuple[TileConfig, PerfEstimate] | None
    atb_gain: float | None


def _rank_key(item: tuple[TileConfig, PerfEstimate]):
    tile, est = item
    # Best performance first; among exact ties prefer fewer kernel switches
    # (smaller rho), then the smaller buffer, then lexicographic dims.
    return (-est.perf_array, tile.rho, est.buffer_bytes, tile.as_tuple())


def rank(
    configs: list[TileConfig],
    problem: ProblemSpec,
    prec: PrecisionSpec,
    arch: ArchSpec = DEFAULT_ARCH,
    eff_source: str = EFF_SOURCE_CALIBRATION,
) -> RankedResult:
    """Evaluate and order ``configs``; derive the symmetric-vs-asymmetric
    performance ratio from the best of each group."""
    if not configs:
        raise ConfigError("rank needs at least one tile config")
    evaluated = [
        (tile, perf_array(tile, problem, prec, arch, eff_source=eff_source))
        for tile in configs
    ]
    evaluated.sort(key=_rank_key)
    best = evaluated[0]
    symmetric = [item for item in evaluated if item[0].rho == 1]
    best_symmetric = symmetric[0] if symmetric else None
    gain = (
        best[1].perf_array / best_symmetric[1].perf_array
        if best_symmetric is not None and best_symmetric[1].perf_array > 0
        else None
    )
    return RankedResult(
        entries=tuple(evaluated),
        best_overall=best,
        best_symmetric=best_symmetric,
        atb_gain=gain,
    )


def explore(
    space: SearchSpace,
    problem: ProblemSpec,
    prec: PrecisionSpec,
    arch: ArchSpec = DEFAULT_ARCH,
) -> RankedResult:
    """Enumerate, evaluate, and rank in one step over ``space``, constrained
    to tiles that divide ``problem`` exactly."""
    space = replace(space, divisibility_problem=problem)
    configs = enumerate_feasible(space, prec, arch)
    if not configs:
        raise ConfigError("no feasible tile configuration in the search space")
    return rank(configs, problem, prec, arch, space.eff_source)


@dataclass(frozen=True)
class SweepRow:
    t_k: int
    rho: int
    eff_micro: Fraction
    eff_core: Fraction


def sweep_grid(
    tk_values,
    rho_values,
    fixed_t_mc: int,
    fixed_t_n: int,
    arch: ArchSpec = DEFAULT_ARCH,
    eff_source: str = EFF_SOURCE_CALIBRATION,
) -> list[SweepRow]:
    """Model efficiencies over a (t_k, rho) grid at fixed output-tile dims.

    Rows appear in t_k-major order. Each rho must divide ``fixed_t_mc`` into
    a whole microtile multiple.
    """
    rows: list[SweepRow] = []
    for t_k in tk_values:
        for rho in rho_values:
            if fixed_t_mc % rho != 0 or (fixed_t_mc // rho) % MICROTILE != 0:
                raise ConfigError(
                    f"rho={rho} does not divide t_mc={fixed_t_mc} into microtiles"
                )
            tile = TileConfig(fixed_t_mc // rho, fixed_t_mc, t_k, fixed_t_n)
            eff = (
                calibrated_eff_micro(t_k)
                if eff_source == EFF_SOURCE_CALIBRATION
                else resolve_eff_micro(tile, eff_source)
            )
            rows.append(SweepRow(t_k, rho, eff, eff_core(tile, eff, arch)))
    return rows


# -- emitters ------------------------------------------------------------------

RANK_CSV_COLUMNS = (
    "t_ma,t_mc,t_k,t_n,rho,buffer_bytes,feasible,ai_array,eff_micro,eff_core,"
    "memory_bound_tflops,compute_bound_tflops,perf_tflops,bound_kind"
)


def _sig3(value: float) -> str:
    return f"{value:.3g}"


def _kb1(value) -> str:
    return f"{float(value) / 1024:.1f}"


def estimate_csv_row(tile: TileConfig, est: PerfEstimate) -> str:
    return (
        f"{tile.t_ma},{tile.t_mc},{tile.t_k},{tile.t_n},{tile.rho},"
        f"{est.buffer_bytes},{est.feasible},{float(est.ai_array):.4f},"
        f"{float(est.eff_micro):.4f},{float(est.eff_core):.4f},"
        f"{_sig3(est.memory_bound / 1e12)},{_sig3(est.compute_bound / 1e12)},"
        f"{_sig3(est.perf_array / 1e12)},{est.bound_kind}"
    )


def ranked_to_csv(result: RankedResult) -> str:
    out = io.StringIO()
    out.write(RANK_CSV_COLUMNS + "\n")
    for tile, est in result.entries:
        out.write(estimate_csv_row(tile, est) + "\n")
    return out.getvalue()


def ranked_to_markdown(
    result: RankedResult,
    problem: ProblemSpec,
    prec: PrecisionSpec,
    arch: ArchSpec = DEFAULT_ARCH,
    limit: int | None = 10,
) -> str:
    """Markdown table in the reference-report layout: problem size, tile,
    rho, used buffer, buffer at rho=1, compute bound, intensity, memory
    bound, predicted bound."""
    header = (
        "| Problem (MxKxN) | L1 tile (T_MC x T_K x T_N) | rho | Used buffer (KB) | "
        "Buffer if rho=1 (KB) | Compute-bound (TFLOPS) | AI (op/B) | "
        "Memory-bound (TFLOPS) | Predicted bound (TFLOPS) |"
    )
    rule = "|" + "---|" * 9
    lines = [header, rule]
    entries = result.entries[:limit] if limit is not None else result.entries
    for tile, est in entries:
        flat = TileConfig(tile.t_mc, tile.t_mc, tile.t_k, tile.t_n)
        lines.append(
            f"| {problem.m}x{problem.k}x{problem.n} "
            f"| {tile.t_mc}x{tile.t_k}x{tile.t_n} "
            f"| {tile.rho} "
            f"| {_kb1(est.buffer_bytes)} "
            f"| {_kb1(buffer_footprint(flat, prec))} "
            f"| {_sig3(est.compute_bound / 1e12)} "
            f"| {float(est.ai_array):.0f} "
            f"| {_sig3(est.memory_bound / 1e12)} "
            f"| {_sig3(est.perf_array / 1e12)} |"
        )
    return "\n".join(lines) + "\n"


def sweep_to_csv(rows: list[SweepRow]) -> str:
    out = io.StringIO()
    out.write("t_k,rho,eff_micro,eff_core\n")
    for row in rows:
        out.write(
            f"{row.t_k},{row.rho},{float(row.eff_micro):.4f},{float(row.eff_core):.4f}\n"
        )
    return out.getvalue()


def search_space_from_dict(raw: dict) -> SearchSpace:
    """Build a SearchSpace from JSON-style data, rejecting unknown keys."""
    if not isinstance(raw, dict):
        raise ConfigError("search space must be a mapping")
    known = {
        "t_mc_min",
        "t_mc_max",
        "t_k_min",
        "t_k_max",
        "t_n_min",
        "t_n_max",
        "step",
        "rho_candidates",
        "eff_source",
    }
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown search space keys: {sorted(unknown)}")
    kwargs = dict(raw)
    if "rho_candidates" in kwargs:
        rhos = kwargs["rho_candidates"]
        if not isinstance(rhos, (list, tuple)):
            raise ConfigError("rho_candidates must be a list")
        kwargs["rho_candidates"] = tuple(int(r) for r in rhos)
    return SearchSpace(**kwargs)
