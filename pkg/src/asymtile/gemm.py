"""Functional tiled-GEMM executor with explicitly bounded staging buffers.

Computes real matrix products through the same asymmetric staging discipline
the movement oracle counts — row-subtile slices of the first operand, full
contraction panels of the second, an output tile accumulated in place — so a
numeric run both proves the schedule computes the right answer and reproduces
the byte trace. A block-floating-point codec (8 values sharing one exponent
byte) grounds the fractional byte costs used by the intensity model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from asymtile.arch import (
    ConfigError,
    PrecisionSpec,
    TileConfig,
)
from asymtile.movement import BufferOverflowError, MovementTrace, _LeaseChecker


@dataclass(frozen=True)
class Matrix:
    """Dense row-major real matrix."""

    rows: int
    cols: int
    data: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ConfigError("matrix dims must be positive")
        if len(self.data) != self.rows * self.cols:
            raise ConfigError(
                f"data length {len(self.data)} != rows*cols = {self.rows * self.cols}"
            )

    def at(self, i: int, j: int) -> float:
        return self.data[i * self.cols + j]

    def row(self, i: int) -> tuple[float, ...]:
        return self.data[i * self.cols : (i + 1) * self.cols]


def zeros(rows: int, cols: int) -> Matrix:
    return Matrix(rows, cols, (0.0,) * (rows * cols))


def matrix_from_rows(rows: list[list[float]]) -> Matrix:
    if not rows:
        raise ConfigError("matrix needs at least one row")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise ConfigError("ragged rows")
    return Matrix(len(rows), width, tuple(float(v) for row in rows for v in row))


def matrix_to_csv(mat: Matrix) -> str:
    return "\n".join(
        ",".join(repr(v) for v in mat.row(i)) for i in range(mat.rows)
    ) + "\n"


def matrix_from_csv(text: str) -> Matrix:
    rows = [
        [float(cell) for cell in line.split(",")]
        for line in text.strip().splitlines()
        if line.strip()
    ]
    return matrix_from_rows(rows)


def naive_gemm(a: Matrix, b: Matrix) -> Matrix:
    """Reference product: per output element, terms added in ascending
    contraction order."""
    if a.cols != b.rows:
        raise ConfigError(f"shape mismatch: {a.rows}x{a.cols} times {b.rows}x{b.cols}")
    out = [[0.0] * b.cols for _ in range(a.rows)]
    for i in range(a.rows):
        arow = a.row(i)
        orow = out[i]
        for kk in range(a.cols):
            av = arow[kk]
            brow = b.row(kk)
            for j in range(b.cols):
                orow[j] += av * brow[j]
    return matrix_from_rows(out)


def tiled_gemm(
    a: Matrix,
    b: Matrix,
    tile: TileConfig,
    capacity: int,
    prec: PrecisionSpec,
) -> tuple[Matrix, MovementTrace]:
    """Compute ``a @ b`` through bounded staging buffers, returning the
    product and the byte trace of every transfer into them.

    Per output tile: the output accumulator stays resident for the whole
    contraction; each contraction step stages one panel of ``b`` and then
    walks ``a`` in row-subtile slices, releasing each slice as soon as its
    output rows finish the step. Occupancy (both halves of the
    double-buffered input stages plus the single output tile) is charged
    operand by operand and checked against ``capacity`` at every step; terms
    are accumulated in ascending contraction order, so the result equals
    :func:`naive_gemm` exactly.
    """
    if a.cols != b.rows:
        raise ConfigError(f"shape mismatch: {a.rows}x{a.cols} times {b.rows}x{b.cols}")
    m, k, n = a.rows, a.cols, b.cols
    t_ma, t_mc, t_k, t_n = tile.as_tuple()
    for dim, size, name in ((m, t_mc, "m"), (k, t_k, "k"), (n, t_n, "n")):
        if dim % size != 0:
            raise ConfigError(
                f"problem dim {name}={dim} is not divisible by its tile {size}"
            )
    rho = tile.rho
    ca, cb, cc = prec.byte_cost_a, prec.byte_cost_b, prec.byte_cost_c
    stage_cost = (
        ("A", 2 * ca * t_ma * t_k),
        ("B", 2 * cb * t_k * t_n),
        ("C", cc * t_mc * t_n),
    )

    bytes_a = bytes_b = bytes_c = Fraction(0)
    flops = 0
    evictions_a = 0
    peak = 0
    checker = _LeaseChecker()
    out = [[0.0] * n for _ in range(m)]

    for i0 in range(0, m, t_mc):
        for j0 in range(0, n, t_n):
            occupancy = Fraction(0)
            for operand, cost in stage_cost:
                occupancy += cost
                used = math.ceil(occupancy)
                if used > capacity:
                    raise BufferOverflowError(
                        f"step (i={i0 // t_mc}, j={j0 // t_n}): staging {operand} "
                        f"raises occupancy to {used} B over capacity {capacity} B"
                    )
                peak = max(peak, used)
            acc = [[0.0] * t_n for _ in range(t_mc)]
            for k0 in range(0, k, t_k):
                b_panel = [
                    b.data[(k0 + kk) * n + j0 : (k0 + kk) * n + j0 + t_n]
                    for kk in range(t_k)
                ]
                bytes_b += cb * t_k * t_n
                for r in range(rho):
                    token = checker.load()
                    a_slice = [
                        a.data[(i0 + r * t_ma + li) * k + k0 : (i0 + r * t_ma + li) * k + k0 + t_k]
                        for li in range(t_ma)
                    ]
                    bytes_a += ca * t_ma * t_k
                    checker.read(token)
                    for li in range(t_ma):
                        arow = a_slice[li]
                        crow = acc[r * t_ma + li]
                        for kk in range(t_k):
                            av = arow[kk]
                            brow = b_panel[kk]
                            for jj in range(t_n):
                                crow[jj] += av * brow[jj]
                    flops += 2 * t_ma * t_k * t_n
                    checker.evict(token)
                    evictions_a += 1
            for li in range(t_mc):
                out[i0 + li][j0 : j0 + t_n] = acc[li]
            bytes_c += cc * t_mc * t_n

    trace = MovementTrace(
        bytes_a=bytes_a,
        bytes_b=bytes_b,
        bytes_c=bytes_c,
        flops=flops,
        peak_l1_occupancy=peak,
        peak_occupancy_per_operand=(
            stage_cost[0][1],
            stage_cost[1][1],
            stage_cost[2][1],
        ),
        evictions_a=evictions_a,
    )
    return matrix_from_rows(out), trace


# -- block floating point ------------------------------------------------------

BFP_BLOCK = 8
BFP_EXP_BIAS = 127
BFP_MANTISSA_SHIFT = 7
BFP_BYTES_PER_BLOCK = 9


@dataclass(frozen=True)
class Bfp16Block:
    """Eight signed 8-bit mantissas sharing one 8-bit exponent: 9 bytes."""

    shared_exponent: int
    mantissas: tuple[int, ...]

    def __post_init__(self) -> None:
        if not 0 <= self.shared_exponent <= 255:
            raise ConfigError("shared exponent must fit 8 unsigned bits")
        if len(self.mantissas) != BFP_BLOCK:
            raise ConfigError(f"block holds exactly {BFP_BLOCK} mantissas")
        if any(not -128 <= v <= 127 for v in self.mantissas):
            raise ConfigError("mantissas must fit signed 8 bits")

    def to_bytes(self) -> bytes:
        return bytes([self.shared_exponent]) + bytes(v & 0xFF for v in self.mantissas)

    @classmethod
    def from_bytes(cls, raw: bytes) -> "Bfp16Block":
        if len(raw) != BFP_BYTES_PER_BLOCK:
            raise ConfigError(f"block is exactly {BFP_BYTES_PER_BLOCK} bytes")
        mantissas = tuple(v - 256 if v >= 128 else v for v in raw[1:])
        return cls(raw[0], mantissas)


def _bfp_scale_power(exponent: int) -> int:
    return exponent - BFP_EXP_BIAS - BFP_MANTISSA_SHIFT


def bfp16_encode(values) -> Bfp16Block:
    """Pack 8 finite reals into a shared-exponent block.

    The exponent is the smallest one whose scale lets every value round to a
    mantissa in [-128, 127]; mantissas are round-to-nearest, so each element's
    quantization error is at most half the block's scale step.
    """
    vals = [float(v) for v in values]
    if len(vals) != BFP_BLOCK:
        raise ConfigError(f"encode takes exactly {BFP_BLOCK} values")
    if any(not math.isfinite(v) for v in vals):
        raise ConfigError("non-finite value in block")
    if all(v == 0.0 for v in vals):
        return Bfp16Block(0, (0,) * BFP_BLOCK)
    _, exp2 = math.frexp(max(abs(v) for v in vals))
    e = max(0, exp2 + BFP_EXP_BIAS + BFP_MANTISSA_SHIFT - 8)
    while e <= 255:
        scale = math.ldexp(1.0, _bfp_scale_power(e))
        mantissas = [round(v / scale) for v in vals]
        if all(-128 <= mv <= 127 for mv in mantissas):
            return Bfp16Block(e, tuple(int(mv) for mv in mantissas))
        e += 1
    raise ConfigError("magnitude too large for a shared-exponent block")


def bfp16_decode(block: Bfp16Block) -> list[float]:
    scale_power = _bfp_scale_power(block.shared_exponent)
    return [math.ldexp(mv, scale_power) for mv in block.mantissas]


def bfp16_error_bound(block: Bfp16Block) -> float:
    """Largest possible per-element roundtrip error for this block's scale."""
    return math.ldexp(1.0, _bfp_scale_power(block.shared_exponent) - 1)


def quantize_bfp16(mat: Matrix) -> Matrix:
    """Pass a matrix through the block codec (rows padded to full blocks)."""
    out_rows: list[list[float]] = []
    for i in range(mat.rows):
        row = list(mat.row(i))
        padded = row + [0.0] * (-len(row) % BFP_BLOCK)
        decoded: list[float] = []
        for off in range(0, len(padded), BFP_BLOCK):
            decoded.extend(bfp16_decode(bfp16_encode(padded[off : off + BFP_BLOCK])))
        out_rows.append(decoded[: mat.cols])
    return matrix_from_rows(out_rows)
