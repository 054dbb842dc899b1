"""Analytical lower bounds for VLIW microkernel latency.

The microkernel accumulates an output register tile through chains of
multiply-accumulate (VMAC) instructions. Its latency decomposes into a prolog
(first operand loads), a steady state paced by an initiation interval, and an
epilog (drain accumulators to stores). Every function here returns a lower
bound on the cycles a real schedule needs; the constructive scheduler in
``asymtile.schedule`` supplies the matching upper side.

Cycle quantities stay exact: integers where integral, Fraction for the
initiation interval, with rounding up applied once at the end of a bound,
never per term (rounding per term could overshoot a real schedule).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from fractions import Fraction
from typing import Iterable, NamedTuple

from asymtile.arch import ConfigError, TileConfig

# One accumulator update consumes this many reduction elements (the vector
# unit computes an 8x8x8 block per VMAC).
K_BASE = 8
# Output elements produced per chain cluster (an 8x8 register tile per chain,
# C chains per cluster).
MICROTILE_OUT = 64


@dataclass(frozen=True)
class LoadClass:
    """A group of operand loads with a common issue-to-ready latency.

    ``unaligned`` marks loads that need a preceding pointer-pop companion
    instruction; the analytical bounds ignore it (it only adds work, never
    removes any), the DAG builder materializes it.
    """

    latency: int
    count: int
    unaligned: bool = False

    def __post_init__(self):
        if self.latency < 1:
            raise ConfigError(f"load latency must be >= 1, got {self.latency}")
        if self.count < 1:
            raise ConfigError(f"load count must be >= 1, got {self.count}")


@dataclass(frozen=True)
class MicrokernelSpec:
    """Microkernel shape and machine parameters.

    Defaults describe the target core's block-FP kernel: a 3-deep MAC
    pipeline, two load slots, one store slot, one VMAC slot, four interleaved
    accumulation chains sharing operands in a 2x2 cluster (two loads per VMAC
    before sharing), 8-cycle operand loads, and a two-instruction store path.
    """

    pipeline_depth: int = 3
    u_ld: int = 2
    u_st: int = 1
    u_vmac: int = 1
    load_classes: tuple[LoadClass, ...] = (LoadClass(latency=8, count=4),)
    r_load: int = 2
    chains: int = 4
    n_accum: int = 8
    n_clusters: int = 1
    l_vmac_to_store: int = 6
    l_store: int = 2
    n_store: int = 2
    accum_regs: int = 5
    clamp_ii: bool = True

    def __post_init__(self):
        object.__setattr__(self, "load_classes", tuple(self.load_classes))
        if not self.load_classes:
            raise ConfigError("load_classes must be nonempty")
        for name in ("pipeline_depth", "u_ld", "u_st", "u_vmac", "r_load",
                     "chains", "n_accum", "l_store", "n_store", "accum_regs"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.n_clusters < 0:
            raise ConfigError("n_clusters must be >= 0")
        if self.l_vmac_to_store < 0:
            raise ConfigError("l_vmac_to_store must be >= 0")
        if self.chains > self.accum_regs:
            raise ConfigError(
                f"chains={self.chains} exceeds accum_regs={self.accum_regs}"
            )

    @property
    def prolog_load_count(self) -> int:
        return sum(c.count for c in self.load_classes)


DEFAULT_MICROKERNEL = MicrokernelSpec()


class InitiationIntervals(NamedTuple):
    ii_single: int
    ii_parallel: Fraction


@dataclass(frozen=True)
class LatencyBounds:
    """All phase and total bounds for one microkernel spec."""

    t_prolog: int
    ii_single: int
    ii_parallel: Fraction
    t_steady: int
    t_epilog: int
    l_total_sequential: int
    l_total_overlapped: int
    eff_micro: Fraction

    def total_for(self, mode: str) -> int:
        if mode == "sequential":
            return self.l_total_sequential
        if mode == "overlapped":
            return self.l_total_overlapped
        raise ConfigError(f"mode must be 'sequential' or 'overlapped', got {mode!r}")


def prolog_bound(classes: Iterable[LoadClass], u_ld: int) -> int:
    """Earliest cycle all prolog operands can be ready.

    With classes sorted by descending latency and S_(i) the cumulative load
    count through class i, no schedule beats
    max_i(latency_(i) + ceil(S_(i) / u_ld) - 1): the S_(i) longest-latency
    loads cannot all issue before cycle ceil(S_(i)/u_ld) - 1, and the last of
    them still waits its own latency.
    """
    ordered = sorted(classes, key=lambda c: c.latency, reverse=True)
    if not ordered:
        raise ConfigError("load_classes must be nonempty")
    best = 0
    cum = 0
    for cls in ordered:
        cum += cls.count
        best = max(best, cls.latency + math.ceil(cum / u_ld) - 1)
    return best


def ii_parallel_raw(spec: MicrokernelSpec) -> Fraction:
    """Unclamped per-VMAC initiation interval with chained interleaving.

    Interleaving C chains hides up to C-1 cycles of the accumulator RAW
    distance, and the cluster's per-step loads amortize over C VMACs:
    max(P + 1 - C, ceil(r_load / u_ld)) / C. Can drop below one cycle per
    VMAC; see initiation_intervals for the issue-slot clamp.
    """
    raw = max(
        spec.pipeline_depth + 1 - spec.chains,
        math.ceil(spec.r_load / spec.u_ld),
    )
    return Fraction(raw, spec.chains)


def initiation_intervals(spec: MicrokernelSpec) -> InitiationIntervals:
    """(single-chain II, parallel-chain II) in cycles per VMAC.

    A single chain is paced by the larger of the accumulator RAW distance P
    and its own load pressure. The parallel value divides across C chains and,
    when clamp_ii is set, is floored at 1/u_vmac since the VMAC slots cannot
    issue more than u_vmac VMACs per cycle.
    """
    single = max(spec.pipeline_depth, math.ceil(spec.r_load / spec.u_ld))
    parallel = ii_parallel_raw(spec)
    if spec.clamp_ii:
        parallel = max(parallel, Fraction(1, spec.u_vmac))
    return InitiationIntervals(single, parallel)


def steady_bound(spec: MicrokernelSpec, ii_parallel: Fraction) -> int:
    """Cycles from the first VMAC until all chains' last update can issue."""
    return math.ceil(ii_parallel * max(0, spec.n_accum - spec.chains))


def epilog_bound(spec: MicrokernelSpec) -> int:
    """Cycles to drain one cluster after its last accumulator update.

    One chain needs the VMAC-to-store forwarding latency plus its store
    sequence; the remaining C - 1 chains' drains pipeline one cycle apart.
    """
    one_chain = spec.l_vmac_to_store + spec.l_store + spec.n_store - 1
    return one_chain + (spec.chains - 1)


def total_latency(spec: MicrokernelSpec, mode: str | None = None) -> LatencyBounds:
    """Aggregate phase bounds into whole-kernel latency bounds.

    Sequential clusters pay all three phases each. Overlapped clusters hide
    each inner cluster's prolog and epilog behind its neighbors' steady
    states, paying II * C per cluster boundary instead; the overlapped figure
    is capped at the sequential one, which any execution can fall back to.
    ``mode`` is validated if given; both totals are always populated.
    """
    if mode is not None and mode not in ("sequential", "overlapped"):
        raise ConfigError(f"mode must be 'sequential' or 'overlapped', got {mode!r}")
    t_prolog = prolog_bound(spec.load_classes, spec.u_ld)
    ii_single, ii_par = initiation_intervals(spec)
    steady_exact = ii_par * max(0, spec.n_accum - spec.chains)
    t_steady = math.ceil(steady_exact)
    t_epilog = epilog_bound(spec)
    n_c = spec.n_clusters
    if n_c == 0:
        seq = ovl = 0
    else:
        seq = math.ceil((t_prolog + steady_exact + t_epilog) * n_c)
        ovl_exact = t_prolog + (steady_exact + ii_par * spec.chains) * n_c + t_epilog
        ovl = min(math.ceil(ovl_exact), seq)
    return LatencyBounds(
        t_prolog=t_prolog,
        ii_single=ii_single,
        ii_parallel=ii_par,
        t_steady=t_steady,
        t_epilog=t_epilog,
        l_total_sequential=seq,
        l_total_overlapped=ovl,
        eff_micro=eff_micro(spec, ii_par),
    )


def eff_micro_phases(
    n_accum: int,
    chains: int,
    ii_parallel: Fraction | float,
    prolog: Fraction | float,
    epilog: Fraction | float,
) -> Fraction:
    """Modeled VMAC issue efficiency from explicit phase costs.

    One cluster issues n_accum updates per chain in
    prolog + II * (n_accum - chains) + epilog cycles; clusters repeat the
    pattern, so the cluster count cancels.
    """
    ii = Fraction(ii_parallel)
    denom = Fraction(prolog) + ii * max(0, n_accum - chains) + Fraction(epilog)
    if denom <= 0:
        raise ConfigError("phase cost total must be positive")
    return Fraction(n_accum) / denom


def eff_micro(spec: MicrokernelSpec, ii_parallel: Fraction | None = None) -> Fraction:
    """Modeled VMAC issue efficiency of the microkernel in (0, 1]."""
    if ii_parallel is None:
        ii_parallel = initiation_intervals(spec).ii_parallel
    return eff_micro_phases(
        spec.n_accum,
        spec.chains,
        ii_parallel,
        prolog_bound(spec.load_classes, spec.u_ld),
        epilog_bound(spec),
    )


class FittedEff(NamedTuple):
    """Reduced-form efficiency parameters: eff(t_k) = eta*t_k / (eps + eta*ii*t_k)."""

    eta: Fraction
    eps: Fraction
    ii: Fraction


def fitted_params(spec: MicrokernelSpec, ii_parallel: Fraction | None = None) -> FittedEff:
    """Collapse the phase model into its two-parameter reduced form.

    With n_accum = t_k / K_BASE, the phase formula rearranges to
    eta * t_k / (eps + eta * ii * t_k) where eta = 1/K_BASE and
    eps = prolog + epilog - ii * chains captures the non-amortizing boundary
    cost (diminishing returns as t_k grows). Exact match with eff_micro
    requires n_accum >= chains; shallower kernels clamp the steady term.
    """
    if ii_parallel is None:
        ii_parallel = initiation_intervals(spec).ii_parallel
    eta = Fraction(1, K_BASE)
    eps = (
        prolog_bound(spec.load_classes, spec.u_ld)
        + epilog_bound(spec)
        - ii_parallel * spec.chains
    )
    return FittedEff(eta=eta, eps=Fraction(eps), ii=Fraction(ii_parallel))


def fitted_eff(params: FittedEff, t_k: int) -> Fraction:
    """Evaluate the reduced-form efficiency at reduction tile depth t_k."""
    if t_k < K_BASE:
        raise ConfigError(f"t_k must be >= {K_BASE}")
    return params.eta * t_k / (params.eps + params.eta * params.ii * t_k)


def microkernel_for_tile(tile: TileConfig, base: MicrokernelSpec = DEFAULT_MICROKERNEL) -> MicrokernelSpec:
    """Instantiate a microkernel spec for a tile shape.

    Each accumulator update covers K_BASE reduction elements, so
    n_accum = t_k / K_BASE; each cluster produces MICROTILE_OUT * chains
    output elements, so n_clusters = t_ma * t_n / (MICROTILE_OUT * chains).
    """
    if tile.t_k % K_BASE != 0:
        raise ConfigError(f"t_k={tile.t_k} must be a multiple of {K_BASE}")
    per_cluster = MICROTILE_OUT * base.chains
    if (tile.t_ma * tile.t_n) % per_cluster != 0:
        raise ConfigError(
            f"t_ma*t_n={tile.t_ma * tile.t_n} must be a multiple of {per_cluster}"
        )
    return replace(
        base,
        n_accum=tile.t_k // K_BASE,
        n_clusters=(tile.t_ma * tile.t_n) // per_cluster,
    )


# -- config-document loading -------------------------------------------------

def _load_class_from_value(value) -> LoadClass:
    if isinstance(value, LoadClass):
        return value
    if isinstance(value, (list, tuple)):
        if len(value) not in (2, 3):
            raise ConfigError(f"load class {value!r} must be [latency, count]")
        return LoadClass(*value)
    if isinstance(value, dict):
        allowed = {f.name for f in fields(LoadClass)}
        unknown = sorted(set(value) - allowed)
        if unknown:
            raise ConfigError(f"unknown key {unknown[0]!r} in load class")
        try:
            return LoadClass(**value)
        except TypeError as exc:
            raise ConfigError(f"bad load class {value!r}: {exc}") from exc
    raise ConfigError(f"cannot parse load class from {value!r}")


def microkernel_from_dict(data: dict) -> MicrokernelSpec:
    """Build a MicrokernelSpec from a JSON-style dict; unknown keys rejected."""
    if not isinstance(data, dict):
        raise ConfigError("'microkernel' section must be an object")
    allowed = {f.name for f in fields(MicrokernelSpec)}
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in section 'microkernel'")
    data = dict(data)
    if "load_classes" in data:
        raw = data["load_classes"]
        if not isinstance(raw, (list, tuple)):
            raise ConfigError("'load_classes' must be a list")
        data["load_classes"] = tuple(_load_class_from_value(v) for v in raw)
    try:
        return MicrokernelSpec(**data)
    except TypeError as exc:
        raise ConfigError(f"bad 'microkernel' section: {exc}") from exc
