"""Architecture, precision, and tile-shape domain types.

All byte accounting runs in exact rational arithmetic (fractions.Fraction) so
feasibility decisions at the capacity boundary never hinge on float rounding.
Sizes are bytes, dimensions are element counts.

The tile naming follows the asymmetric-buffering scheme: the A operand is
staged in slices of ``t_ma`` rows while the C accumulator tile covers ``t_mc``
rows, with ``rho = t_mc / t_ma`` the asymmetry factor. ``rho == 1`` is the
classic symmetric scheme.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from fractions import Fraction
from typing import Any

KIB = 1024


class ConfigError(ValueError):
    """Malformed or unknown configuration input."""


def as_byte_cost(value: Any) -> Fraction:
    """Coerce a per-element byte cost to an exact Fraction.

    Accepts int, Fraction, float (floats are binary-exact, so 1.25 means 5/4),
    or a "p/q" string.
    """
    if isinstance(value, bool):
        raise ConfigError(f"byte cost must be numeric, got {value!r}")
    if isinstance(value, (int, Fraction)):
        cost = Fraction(value)
    elif isinstance(value, float):
        cost = Fraction(value)
    elif isinstance(value, str):
        try:
            cost = Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad byte cost {value!r}") from exc
    else:
        raise ConfigError(f"byte cost must be numeric, got {value!r}")
    if cost <= 0:
        raise ConfigError(f"byte cost must be positive, got {value!r}")
    return cost


@dataclass(frozen=True)
class PrecisionSpec:
    """Per-element byte costs for the A, B, and C operands.

    ``accum_label`` records the accumulation format for reporting only; it does
    not affect any arithmetic.
    """

    byte_cost_a: Fraction
    byte_cost_b: Fraction
    byte_cost_c: Fraction
    accum_label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "byte_cost_a", as_byte_cost(self.byte_cost_a))
        object.__setattr__(self, "byte_cost_b", as_byte_cost(self.byte_cost_b))
        object.__setattr__(self, "byte_cost_c", as_byte_cost(self.byte_cost_c))


# Named precision presets. Block-FP (shared-exponent) storage is costed at the
# conventional 1.25 B/elem rate; the "_packed" variant uses the exact packed
# density of 9 bytes per 8 elements, which is what a byte-true allocator sees.
PRECISION_PRESETS: dict[str, PrecisionSpec] = {
    # BF16 activations and output, block-FP weights.
    "config1": PrecisionSpec(Fraction(2), Fraction(5, 4), Fraction(2), "bf16"),
    # Block-FP everywhere, accumulation stays in the same block format.
    "config2": PrecisionSpec(Fraction(5, 4), Fraction(5, 4), Fraction(5, 4), "bfp16"),
    # config2 with the exact 9/8 packed block-FP density.
    "config2_packed": PrecisionSpec(Fraction(9, 8), Fraction(9, 8), Fraction(9, 8), "bfp16"),
    # Block-FP storage, BF16 accumulation.
    "config3": PrecisionSpec(Fraction(5, 4), Fraction(5, 4), Fraction(5, 4), "bf16"),
}


@dataclass(frozen=True)
class ArchSpec:
    """Fixed parameters of the target core array.

    Defaults describe a 4x8 grid of VLIW vector cores, each with a 64 KiB L1
    scratchpad of which 63 KiB is usable for tile buffers, a 512-MAC/cycle
    vector unit at 1.8 GHz, and a shared 65 GB/s off-chip link.

    The buffer multipliers encode the staging discipline: A and B slices are
    double buffered (count 2) while the C accumulator tile is single buffered
    (count 1).
    """

    l1_capacity: int = 63 * KIB
    n_rows: int = 4
    n_cols: int = 8
    n_cores: int = 32
    peak_macs_per_cycle: int = 512
    clock_hz: float = 1.8e9
    offchip_bw: float = 65e9
    switch_overhead_delta: int = 50
    buffer_multiplier_a: int = 2
    buffer_multiplier_b: int = 2
    buffer_multiplier_c: int = 1

    def __post_init__(self):
        if self.l1_capacity <= 0:
            raise ConfigError("l1_capacity must be positive")
        for name in ("n_rows", "n_cols", "n_cores", "peak_macs_per_cycle"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.n_cores != self.n_rows * self.n_cols:
            raise ConfigError(
                f"n_cores={self.n_cores} does not match grid "
                f"{self.n_rows}x{self.n_cols}"
            )
        if self.clock_hz <= 0 or self.offchip_bw <= 0:
            raise ConfigError("clock_hz and offchip_bw must be positive")
        if self.switch_overhead_delta < 0:
            raise ConfigError("switch_overhead_delta must be nonnegative")
        for name in ("buffer_multiplier_a", "buffer_multiplier_b", "buffer_multiplier_c"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be at least 1")

    @property
    def peak_flops_per_cycle(self) -> int:
        """Per-core flops per cycle (each MAC is one multiply plus one add)."""
        return 2 * self.peak_macs_per_cycle

    @property
    def peak_core_flops(self) -> float:
        """Per-core peak in flops/s."""
        return self.peak_flops_per_cycle * self.clock_hz

    @property
    def peak_array_flops(self) -> float:
        """Whole-array peak in flops/s."""
        return self.peak_core_flops * self.n_cores


DEFAULT_ARCH = ArchSpec()


@dataclass(frozen=True)
class ProblemSpec:
    """GEMM problem shape: C[m, n] += A[m, k] * B[k, n]."""

    m: int
    k: int
    n: int

    def __post_init__(self):
        for name in ("m", "k", "n"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"problem dim {name} must be positive")


@dataclass(frozen=True)
class TileConfig:
    """L1 tile shape (t_ma, t_mc, t_k, t_n).

    ``t_ma`` rows of A are staged at a time against a ``t_mc x t_n`` output
    tile accumulated over reduction slices of depth ``t_k``. All dims must be
    positive multiples of ``microtile`` (the register-level granularity of the
    8x8x8 vector MAC), t_ma must divide t_mc, and t_mc >= t_ma.

    ``microtile`` can be lowered for degenerate unit-size examples.
    """

    t_ma: int
    t_mc: int
    t_k: int
    t_n: int
    microtile: int = 8

    def __post_init__(self):
        if self.microtile <= 0:
            raise ConfigError("microtile must be positive")
        for name in ("t_ma", "t_mc", "t_k", "t_n"):
            dim = getattr(self, name)
            if dim <= 0:
                raise ConfigError(f"tile dim {name} must be positive")
            if dim % self.microtile != 0:
                raise ConfigError(
                    f"tile dim {name}={dim} is not a multiple of {self.microtile}"
                )
        if self.t_mc < self.t_ma:
            raise ConfigError(f"t_mc={self.t_mc} must be >= t_ma={self.t_ma}")
        if self.t_mc % self.t_ma != 0:
            raise ConfigError(
                f"t_ma={self.t_ma} must divide t_mc={self.t_mc} exactly"
            )

    @property
    def rho(self) -> int:
        """Buffering asymmetry factor t_mc / t_ma (1 means symmetric)."""
        return self.t_mc // self.t_ma

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.t_ma, self.t_mc, self.t_k, self.t_n)


def buffer_footprint(tile: TileConfig, prec: PrecisionSpec, arch: ArchSpec = DEFAULT_ARCH) -> int:
    """Exact L1 bytes needed by the tile buffers, rounded up to whole bytes.

    Counts multiplier_a copies of the a-cost t_ma x t_k A slice, multiplier_b
    copies of the t_k x t_n B slice, and multiplier_c copies of the c-cost
    t_mc x t_n C tile.
    """
    total = (
        arch.buffer_multiplier_a * prec.byte_cost_a * (tile.t_ma * tile.t_k)
        + arch.buffer_multiplier_b * prec.byte_cost_b * (tile.t_k * tile.t_n)
        + arch.buffer_multiplier_c * prec.byte_cost_c * (tile.t_mc * tile.t_n)
    )
    return math.ceil(total)


def check_feasible(tile: TileConfig, prec: PrecisionSpec, arch: ArchSpec = DEFAULT_ARCH) -> bool:
    """True when the tile's buffers fit the L1 capacity (boundary inclusive)."""
    return buffer_footprint(tile, prec, arch) <= arch.l1_capacity


def derive_l2_tiles(tile: TileConfig, arch: ArchSpec = DEFAULT_ARCH) -> tuple[int, int, int]:
    """Effective (t_m, t_k, t_n) tile at the L2 boundary.

    Cores in a grid row share the same C rows and cores in a grid column share
    the same C columns, so the array as a whole consumes an
    (n_rows * t_mc) x (n_cols * t_n) output tile per pass.
    """
    return (arch.n_rows * tile.t_mc, tile.t_k, arch.n_cols * tile.t_n)


# -- config-document loading -------------------------------------------------

def _check_keys(data: dict, allowed: set[str], section: str) -> None:
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in section {section!r}")


def arch_from_dict(data: dict) -> ArchSpec:
    """Build an ArchSpec from a JSON-style dict; missing keys keep defaults."""
    if not isinstance(data, dict):
        raise ConfigError("'arch' section must be an object")
    _check_keys(data, {f.name for f in fields(ArchSpec)}, "arch")
    try:
        return ArchSpec(**data)
    except TypeError as exc:
        raise ConfigError(f"bad 'arch' section: {exc}") from exc


def problem_from_value(value) -> ProblemSpec:
    """Parse a problem from {"m":..,"k":..,"n":..} or an "MxKxN" string."""
    if isinstance(value, ProblemSpec):
        return value
    if isinstance(value, str):
        parts = value.lower().split("x")
        if len(parts) != 3:
            raise ConfigError(f"problem {value!r} is not of the form MxKxN")
        try:
            m, k, n = (int(p) for p in parts)
        except ValueError as exc:
            raise ConfigError(f"problem {value!r} is not of the form MxKxN") from exc
        return ProblemSpec(m, k, n)
    if isinstance(value, dict):
        _check_keys(value, {"m", "k", "n"}, "problem")
        try:
            return ProblemSpec(**value)
        except TypeError as exc:
            raise ConfigError(f"bad 'problem' section: {exc}") from exc
    raise ConfigError(f"cannot parse problem from {value!r}")


def tile_from_value(value) -> TileConfig:
    """Parse a tile from a [t_ma, t_mc, t_k, t_n] list or a field dict."""
    if isinstance(value, TileConfig):
        return value
    if isinstance(value, str):
        value = value.split(",")
    if isinstance(value, (list, tuple)):
        if len(value) != 4:
            raise ConfigError("tile must have exactly 4 entries: t_ma,t_mc,t_k,t_n")
        try:
            dims = [int(v) for v in value]
        except ValueError as exc:
            raise ConfigError(f"bad tile entry in {value!r}") from exc
        return TileConfig(*dims)
    if isinstance(value, dict):
        _check_keys(value, {f.name for f in fields(TileConfig)}, "tile")
        try:
            return TileConfig(**value)
        except TypeError as exc:
            raise ConfigError(f"bad 'tile' section: {exc}") from exc
    raise ConfigError(f"cannot parse tile from {value!r}")


def precision_from_value(value) -> PrecisionSpec:
    """Parse a precision from a preset name or a byte-cost dict."""
    if isinstance(value, PrecisionSpec):
        return value
    if isinstance(value, str):
        try:
            return PRECISION_PRESETS[value]
        except KeyError:
            known = ", ".join(sorted(PRECISION_PRESETS))
            raise ConfigError(f"unknown precision preset {value!r} (known: {known})") from None
    if isinstance(value, dict):
        _check_keys(value, {f.name for f in fields(PrecisionSpec)}, "precision")
        try:
            return PrecisionSpec(**value)
        except TypeError as exc:
            raise ConfigError(f"bad 'precision' section: {exc}") from exc
    raise ConfigError(f"cannot parse precision from {value!r}")
