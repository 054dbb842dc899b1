"""Closed-form arithmetic intensity of the tiled GEMM dataflow.

With an output-stationary t_mc x t_n tile reduced over the full K dimension,
each A element is re-read once per column tile and each B element once per row
tile, so per-element traffic is a/t_n + b/t_mc + c/K bytes per output
flop pair. Intensity is exact (Fraction) and notably independent of both the
reduction tile depth t_k and the buffering asymmetry rho.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from asymtile.arch import DEFAULT_ARCH, ArchSpec, ConfigError, PrecisionSpec, TileConfig


@dataclass(frozen=True)
class AiResult:
    """Arithmetic intensity with its exact flop and byte legs."""

    ai: Fraction
    numerator_flops: int
    denominator_bytes: Fraction

    def __float__(self) -> float:
        return float(self.ai)


def ai_tile(t_mc: int, t_n: int, k: int, prec: PrecisionSpec) -> AiResult:
    """Intensity (flops/byte) of one t_mc x t_n output tile reduced over k.

    Equals 2 / (a/t_n + b/t_mc + c/k) with a, b, c the per-element byte costs.
    """
    if t_mc <= 0 or t_n <= 0 or k <= 0:
        raise ConfigError("tile dims and k must be positive")
    flops = 2 * t_mc * t_n * k
    traffic = (
        prec.byte_cost_a * t_mc * k
        + prec.byte_cost_b * k * t_n
        + prec.byte_cost_c * t_mc * t_n
    )
    return AiResult(ai=Fraction(flops) / traffic, numerator_flops=flops, denominator_bytes=traffic)


def ai_array(
    tile: TileConfig,
    k: int,
    prec: PrecisionSpec,
    arch: ArchSpec = DEFAULT_ARCH,
) -> AiResult:
    """Intensity of the whole core array at the off-chip boundary.

    The grid shares A slices along rows and B slices along columns, so the
    array behaves like a single core with an (n_rows * t_mc) x (n_cols * t_n)
    output tile.
    """
    return ai_tile(arch.n_rows * tile.t_mc, arch.n_cols * tile.t_n, k, prec)
