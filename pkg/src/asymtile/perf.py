"""End-to-end performance model for asymmetric tile buffering.

Combines the intensity closed form with microkernel efficiency into the
two-sided bound: off-chip bandwidth times achieved intensity on one side,
aggregate core throughput derated by kernel-switch overhead on the other.
All internal arithmetic is exact (flops per cycle as rationals); the clock
rate is applied exactly once when converting to flops per second.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from asymtile.arch import (
    DEFAULT_ARCH,
    ArchSpec,
    ConfigError,
    PrecisionSpec,
    ProblemSpec,
    TileConfig,
    buffer_footprint,
    derive_l2_tiles,
)
from asymtile.intensity import ai_array
from asymtile.pipeline import (
    DEFAULT_MICROKERNEL,
    MicrokernelSpec,
    eff_micro as closed_form_eff_micro,
    microkernel_for_tile,
)

BOUND_MEMORY = "memory"
BOUND_COMPUTE = "compute"

EFF_SOURCE_CALIBRATION = "calibration"
EFF_SOURCE_CLOSED_FORM = "closed_form"
EFF_SOURCE_SIMULATED = "simulated"
EFF_SOURCES = (EFF_SOURCE_CALIBRATION, EFF_SOURCE_CLOSED_FORM, EFF_SOURCE_SIMULATED)

# Measured microkernel efficiency by contraction tile depth, from the modeled
# machine; linear interpolation between entries, clamped at the ends.
EFF_MICRO_CALIBRATION: dict[int, Fraction] = {
    8: Fraction(1, 5),
    16: Fraction(9, 25),
    32: Fraction(41, 100),
    64: Fraction(63, 100),
}


def calibrated_eff_micro(t_k: int) -> Fraction:
    if t_k < 1:
        raise ConfigError("t_k must be positive")
    points = sorted(EFF_MICRO_CALIBRATION.items())
    if t_k <= points[0][0]:
        return points[0][1]
    if t_k >= points[-1][0]:
        return points[-1][1]
    for (x0, y0), (x1, y1) in zip(points, points[1:]):
        if x0 <= t_k <= x1:
            return y0 + (y1 - y0) * Fraction(t_k - x0, x1 - x0)
    raise AssertionError("unreachable: calibration points cover the range")


def _coerce_eff(value) -> Fraction:
    eff = Fraction(value)
    if not 0 < eff <= 1:
        raise ConfigError(f"eff_micro must lie in (0, 1], got {value}")
    return eff


def resolve_eff_micro(
    tile: TileConfig,
    source: str = EFF_SOURCE_CALIBRATION,
    base: MicrokernelSpec = DEFAULT_MICROKERNEL,
) -> Fraction:
    """Microkernel efficiency for ``tile`` from the chosen source:
    the measured calibration table, the closed-form phase model, or a
    scheduled run of the constructed kernel DAG."""
    if source == EFF_SOURCE_CALIBRATION:
        return calibrated_eff_micro(tile.t_k)
    if source == EFF_SOURCE_CLOSED_FORM:
        return closed_form_eff_micro(microkernel_for_tile(tile, base))
    if source == EFF_SOURCE_SIMULATED:
        from asymtile.schedule import build_microkernel_dag, schedule, slots_for

        spec = microkernel_for_tile(tile, base)
        result = schedule(build_microkernel_dag(spec), slots_for(spec))
        return result.vmac_issue_rate
    raise ConfigError(f"unknown eff_micro source {source!r}; expected one of {EFF_SOURCES}")


def t_asym(
    tile: TileConfig,
    k: int,
    eff_micro,
    arch: ArchSpec = DEFAULT_ARCH,
) -> Fraction:
    """Cycles for one core to finish its t_mc x k x t_n slab: compute time at
    the derated MAC rate plus one switch penalty per row-subtile kernel
    launch (``rho`` launches per contraction step)."""
    eff = _coerce_eff(eff_micro)
    if k < 1 or k % tile.t_k != 0:
        raise ConfigError(f"k={k} must be a positive multiple of t_k={tile.t_k}")
    compute = Fraction(2 * tile.t_mc * k * tile.t_n) / (
        arch.peak_flops_per_cycle * eff
    )
    switch = arch.switch_overhead_delta * tile.rho * (k // tile.t_k)
    return compute + switch


def eff_core(
    tile: TileConfig,
    eff_micro,
    arch: ArchSpec = DEFAULT_ARCH,
) -> Fraction:
    """Core efficiency after kernel-switch overhead: the harmonic combination
    of microkernel efficiency with the per-launch penalty amortized over the
    tile's useful work."""
    eff = _coerce_eff(eff_micro)
    overhead = Fraction(
        arch.switch_overhead_delta * tile.rho * arch.peak_flops_per_cycle,
        2 * tile.t_mc * tile.t_n * tile.t_k,
    )
    return 1 / (1 / eff + overhead)


@dataclass(frozen=True)
class PerfEstimate:
    """Two-sided performance bound for one (tile, problem, precision) choice."""

    ai_array: Fraction
    memory_bound: float
    compute_bound: float
    eff_micro: Fraction
    eff_core: Fraction
    perf_array: float
    bound_kind: str
    buffer_bytes: int
    feasible: bool

    @property
    def perf_tflops(self) -> float:
        return self.perf_array / 1e12


def perf_array(
    tile: TileConfig,
    problem: ProblemSpec,
    prec: PrecisionSpec,
    arch: ArchSpec = DEFAULT_ARCH,
    eff_micro=None,
    *,
    eff_source: str = EFF_SOURCE_CALIBRATION,
) -> PerfEstimate:
    """Full two-sided estimate: min(intensity x bandwidth, derated compute).

    ``eff_micro`` may be given directly; otherwise it is resolved from
    ``eff_source``. A tile whose staging buffers exceed capacity comes back
    with ``feasible=False`` and zeroed rates rather than a silent number.
    Ties between the two sides are classified as memory-bound.
    """
    eff = _coerce_eff(eff_micro) if eff_micro is not None else resolve_eff_micro(tile, eff_source)
    t_mc_l2, t_k_l2, t_n_l2 = derive_l2_tiles(tile, arch)
    for dim, size, name in (
        (problem.m, t_mc_l2, "m"),
        (problem.k, t_k_l2, "k"),
        (problem.n, t_n_l2, "n"),
    ):
        if dim % size != 0:
            raise ConfigError(
                f"problem dim {name}={dim} is not divisible by its array-level tile {size}"
            )
    buffer_bytes = buffer_footprint(tile, prec)
    feasible = buffer_bytes <= arch.l1_capacity
    ai = ai_array(tile, problem.k, prec, arch).ai
    ec = eff_core(tile, eff, arch)
    if feasible:
        memory_bound = float(ai) * arch.offchip_bw
        compute_bound = float(ec) * arch.peak_array_flops
        perf = min(memory_bound, compute_bound)
        bound_kind = BOUND_MEMORY if memory_bound <= compute_bound else BOUND_COMPUTE
    else:
        memory_bound = compute_bound = perf = 0.0
        bound_kind = BOUND_MEMORY
    return PerfEstimate(
        ai_array=ai,
        memory_bound=memory_bound,
        compute_bound=compute_bound,
        eff_micro=eff,
        eff_core=ec,
        perf_array=perf,
        bound_kind=bound_kind,
        buffer_bytes=buffer_bytes,
        feasible=feasible,
    )
