"""Symbolic data-movement oracle for the output-stationary tiled loop nest.

Walks the full tiling loop structure (output tiles, contraction steps,
row-subtile passes) without numeric payloads, counting every byte that
crosses the chosen memory boundary and tracking buffer residency. The
resulting trace is the measured counterpart to the closed-form intensity
model in ``asymtile.intensity``: on any exactly-divisible problem the two
must agree as exact rationals.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction

from asymtile.arch import (
    DEFAULT_ARCH,
    ArchSpec,
    ConfigError,
    PrecisionSpec,
    ProblemSpec,
    TileConfig,
    derive_l2_tiles,
)
from asymtile.intensity import ai_array, ai_tile

BOUNDARY_CORE = "core"  # traffic into one core's scratchpad
BOUNDARY_ARRAY = "array"  # traffic from off-chip into the shared cache
BOUNDARIES = (BOUNDARY_CORE, BOUNDARY_ARRAY)


class BufferOverflowError(ConfigError):
    """Raised when staged operands exceed the buffer capacity."""


class LifetimeError(RuntimeError):
    """Simulator self-check: an operand buffer was used after release."""


class _LeaseChecker:
    """Tracks operand-buffer leases and flags any read after release."""

    def __init__(self) -> None:
        self._alive: set[int] = set()
        self._next = 0

    def load(self) -> int:
        token = self._next
        self._next += 1
        self._alive.add(token)
        return token

    def read(self, token: int) -> None:
        if token not in self._alive:
            raise LifetimeError(f"operand buffer {token} read after eviction")
        return None

    def evict(self, token: int) -> None:
        if token not in self._alive:
            raise LifetimeError(f"operand buffer {token} evicted twice")
        self._alive.remove(token)


@dataclass(frozen=True)
class MovementTrace:
    """Byte counters and buffer statistics from one simulated loop nest."""

    bytes_a: Fraction
    bytes_b: Fraction
    bytes_c: Fraction
    flops: int
    peak_l1_occupancy: int
    peak_occupancy_per_operand: tuple[Fraction, Fraction, Fraction]
    evictions_a: int

    @property
    def total_bytes(self) -> Fraction:
        return self.bytes_a + self.bytes_b + self.bytes_c


def _boundary_tiles(
    tile: TileConfig, arch: ArchSpec, boundary: str
) -> tuple[int, int, int, int]:
    """Effective (T_MA, T_MC, T_K, T_N) for the modeled boundary."""
    if boundary == BOUNDARY_CORE:
        return tile.t_ma, tile.t_mc, tile.t_k, tile.t_n
    if boundary == BOUNDARY_ARRAY:
        t_mc, t_k, t_n = derive_l2_tiles(tile, arch)
        return t_mc // tile.rho, t_mc, t_k, t_n
    raise ConfigError(f"unknown boundary {boundary!r}; expected one of {BOUNDARIES}")


def simulate_movement(
    problem: ProblemSpec,
    tile: TileConfig,
    prec: PrecisionSpec,
    arch: ArchSpec = DEFAULT_ARCH,
    *,
    boundary: str = BOUNDARY_CORE,
    capacity: int | None = None,
) -> MovementTrace:
    """Run the output-stationary nest symbolically and count all transfers.

    Per output tile the contraction dimension is walked in T_K-wide steps;
    each step re-stages the B panel once and the A block in ``rho``
    row-subtile passes, releasing every A subtile as soon as its output rows
    finish the step (the access checker enforces this lifetime). The output
    tile itself stays resident and is written back exactly once. Residency
    charges both halves of the double-buffered A and B stages plus the
    single-buffered output tile.

    With ``capacity`` given, the first step whose residency exceeds it
    raises :class:`BufferOverflowError` naming that step.
    """
    t_ma, t_mc, t_k, t_n = _boundary_tiles(tile, arch, boundary)
    m, k, n = problem.m, problem.k, problem.n
    for dim, size, name in ((m, t_mc, "m"), (k, t_k, "k"), (n, t_n, "n")):
        if dim % size != 0:
            raise ConfigError(
                f"problem dim {name}={dim} is not divisible by its tile {size}"
            )
    rho = t_mc // t_ma
    a, b, c = prec.byte_cost_a, prec.byte_cost_b, prec.byte_cost_c

    occ_a = 2 * a * t_ma * t_k
    occ_b = 2 * b * t_k * t_n
    occ_c = c * t_mc * t_n
    peak = math.ceil(occ_a + occ_b + occ_c)

    bytes_a = bytes_b = bytes_c = Fraction(0)
    flops = 0
    evictions_a = 0
    checker = _LeaseChecker()
    for i in range(m // t_mc):
        for j in range(n // t_n):
            if capacity is not None and peak > capacity:
                raise BufferOverflowError(
                    f"step (i={i}, j={j}, kk=0): occupancy {peak} B "
                    f"exceeds capacity {capacity} B"
                )
            for kk in range(k // t_k):
                bytes_b += b * t_k * t_n
                for r in range(rho):
                    token = checker.load()
                    bytes_a += a * t_ma * t_k
                    checker.read(token)
                    flops += 2 * t_ma * t_k * t_n
                    checker.evict(token)
                    evictions_a += 1
            bytes_c += c * t_mc * t_n

    return MovementTrace(
        bytes_a=bytes_a,
        bytes_b=bytes_b,
        bytes_c=bytes_c,
        flops=flops,
        peak_l1_occupancy=peak,
        peak_occupancy_per_operand=(occ_a, occ_b, occ_c),
        evictions_a=evictions_a,
    )


def measured_ai(trace: MovementTrace) -> Fraction:
    """Operations per byte actually moved, as an exact rational."""
    total = trace.total_bytes
    if total <= 0:
        raise ConfigError("trace moved zero bytes; intensity undefined")
    return Fraction(trace.flops) / total


def trace_to_csv(trace: MovementTrace, boundary: str) -> str:
    """Flat per-operand byte counts: ``boundary,operand,bytes`` rows."""
    lines = ["boundary,operand,bytes"]
    for operand, value in (
        ("a", trace.bytes_a),
        ("b", trace.bytes_b),
        ("c", trace.bytes_c),
    ):
        rendered = str(int(value)) if value.denominator == 1 else repr(float(value))
        lines.append(f"{boundary},{operand},{rendered}")
    return "\n".join(lines) + "\n"


# -- randomized equivalence harness -------------------------------------------

def random_divisible_case(
    rng: random.Random, arch: ArchSpec = DEFAULT_ARCH
) -> tuple[ProblemSpec, TileConfig, PrecisionSpec]:
    """Draw a (problem, tile, precision) triple exactly divisible at both
    boundaries, for measured-vs-closed-form equivalence runs."""
    t_ma = 8 * rng.randint(1, 4)
    rho = rng.choice([1, 2, 4])
    tile = TileConfig(
        t_ma=t_ma,
        t_mc=t_ma * rho,
        t_k=8 * rng.randint(1, 8),
        t_n=8 * rng.randint(1, 8),
    )
    costs = [Fraction(1), Fraction(9, 8), Fraction(5, 4), Fraction(3, 2), Fraction(2)]
    prec = PrecisionSpec(
        byte_cost_a=rng.choice(costs),
        byte_cost_b=rng.choice(costs),
        byte_cost_c=rng.choice(costs),
        accum_label="test",
    )
    problem = ProblemSpec(
        m=arch.n_rows * tile.t_mc * rng.randint(1, 3),
        k=tile.t_k * rng.randint(1, 6),
        n=arch.n_cols * tile.t_n * rng.randint(1, 3),
    )
    return problem, tile, prec


def verify_movement_equivalence(
    n: int, seed: int = 0, arch: ArchSpec = DEFAULT_ARCH
) -> list[dict]:
    """Compare simulated and closed-form intensity on ``n`` random cases.

    Checks, per case and boundary, exact rational equality of the measured
    intensity with the closed form, plus the output-written-once byte count.
    Returns one record per discrepancy; empty means full agreement.
    """
    rng = random.Random(seed)
    failures: list[dict] = []
    for i in range(n):
        problem, tile, prec = random_divisible_case(rng, arch)
        expected = {
            BOUNDARY_CORE: ai_tile(tile.t_mc, tile.t_n, problem.k, prec).ai,
            BOUNDARY_ARRAY: ai_array(tile, problem.k, prec, arch).ai,
        }
        for boundary, want in expected.items():
            trace = simulate_movement(problem, tile, prec, arch, boundary=boundary)
            got = measured_ai(trace)
            ok_c = trace.bytes_c == prec.byte_cost_c * problem.m * problem.n
            if got != want or not ok_c:
                failures.append(
                    {
                        "index": i,
                        "boundary": boundary,
                        "problem": problem,
                        "tile": tile,
                        "prec": prec,
                        "measured": got,
                        "closed_form": want,
                    }
                )
    return failures
