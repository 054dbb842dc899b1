"""Asymmetric tile buffering models for tiled GEMM on VLIW core arrays.

Module map:

- ``arch``      hardware, precision, problem, and tile descriptions.
- ``intensity`` closed-form arithmetic intensity at the core and array level.
- ``pipeline``  analytic latency bounds for the VLIW microkernel phases.
- ``schedule``  list-scheduling simulator that stress-tests those bounds.
- ``movement``  data-movement oracle that byte-counts the tiled loop nest.
- ``gemm``      functional tiled GEMM executor and the BFP16 block codec.
- ``perf``      two-sided (memory/compute) performance estimates.
- ``search``    feasible-space enumeration, ranking, and report emitters.
- ``cli``       ``asymtile`` command-line entry point.
"""

from asymtile.arch import (
    DEFAULT_ARCH,
    KIB,
    PRECISION_PRESETS,
    ArchSpec,
    ConfigError,
    PrecisionSpec,
    ProblemSpec,
    TileConfig,
    buffer_footprint,
    check_feasible,
    derive_l2_tiles,
)
from asymtile.gemm import (
    Bfp16Block,
    Matrix,
    bfp16_decode,
    bfp16_encode,
    bfp16_error_bound,
    naive_gemm,
    quantize_bfp16,
    tiled_gemm,
)
from asymtile.intensity import AiResult, ai_array, ai_tile
from asymtile.movement import (
    BufferOverflowError,
    MovementTrace,
    measured_ai,
    simulate_movement,
    verify_movement_equivalence,
)
from asymtile.perf import (
    PerfEstimate,
    calibrated_eff_micro,
    eff_core,
    perf_array,
    resolve_eff_micro,
    t_asym,
)
from asymtile.pipeline import (
    DEFAULT_MICROKERNEL,
    LatencyBounds,
    LoadClass,
    MicrokernelSpec,
    eff_micro,
    microkernel_for_tile,
    total_latency,
)
from asymtile.schedule import (
    ScheduleResult,
    build_microkernel_dag,
    schedule,
    slots_for,
    verify_random_specs,
)
from asymtile.search import (
    RankedResult,
    SearchSpace,
    enumerate_feasible,
    explore,
    rank,
    ranked_to_csv,
    ranked_to_markdown,
    sweep_grid,
)

__all__ = [
    "AiResult",
    "ArchSpec",
    "Bfp16Block",
    "BufferOverflowError",
    "ConfigError",
    "DEFAULT_ARCH",
    "DEFAULT_MICROKERNEL",
    "KIB",
    "LatencyBounds",
    "LoadClass",
    "Matrix",
    "MicrokernelSpec",
    "MovementTrace",
    "PRECISION_PRESETS",
    "PerfEstimate",
    "PrecisionSpec",
    "ProblemSpec",
    "RankedResult",
    "ScheduleResult",
    "SearchSpace",
    "TileConfig",
    "ai_array",
    "ai_tile",
    "bfp16_decode",
    "bfp16_encode",
    "bfp16_error_bound",
    "buffer_footprint",
    "build_microkernel_dag",
    "calibrated_eff_micro",
    "check_feasible",
    "derive_l2_tiles",
    "eff_core",
    "eff_micro",
    "enumerate_feasible",
    "explore",
    "measured_ai",
    "microkernel_for_tile",
    "naive_gemm",
    "perf_array",
    "quantize_bfp16",
    "rank",
    "ranked_to_csv",
    "ranked_to_markdown",
    "resolve_eff_micro",
    "schedule",
    "simulate_movement",
    "slots_for",
    "sweep_grid",
    "t_asym",
    "tiled_gemm",
    "total_latency",
    "verify_movement_equivalence",
    "verify_random_specs",
]
