"""Constructive VLIW microkernel scheduler.

Builds explicit instruction DAGs for the accumulation-chain microkernel
(operand loads, chained VMACs, store drains, cluster sequencing) and runs a
deterministic greedy list scheduler against per-class slot limits. The
resulting cycle counts are the measured counterpart to the closed-form lower
bounds in ``asymtile.pipeline``: for matched parameters the schedule can only
be slower, never faster.
"""

from __future__ import annotations

import heapq
import io
import math
import random
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction

from asymtile.arch import ConfigError
from asymtile.pipeline import (
    LatencyBounds,
    LoadClass,
    MicrokernelSpec,
    total_latency,
)

SLOT_LOAD = "ld"
SLOT_STORE = "st"
SLOT_VMAC = "vmac"


@dataclass(frozen=True)
class Instruction:
    """One VLIW operation: issued on ``slot``, result ready after ``latency``.

    ``preds`` holds (predecessor id, required issue delay) pairs: this
    instruction may not issue before pred_issue + delay. ``group`` tags the
    owning chain cluster for phase measurements.
    """

    id: int
    kind: str
    slot: str
    latency: int
    preds: tuple[tuple[int, int], ...] = ()
    group: int = 0
    tag: str = ""


@dataclass(frozen=True)
class ScheduleResult:
    """Issue cycles and summary metrics of one scheduled DAG."""

    cycle_of: dict[int, int]
    total_cycles: int
    vmac_issue_rate: Fraction
    phase_times: tuple[int, int, int]
    vmac_cycles_by_group: tuple[tuple[int, ...], ...]


def slots_for(spec: MicrokernelSpec) -> dict[str, int]:
    return {SLOT_LOAD: spec.u_ld, SLOT_STORE: spec.u_st, SLOT_VMAC: spec.u_vmac}


def derive_cluster_shape(chains: int) -> tuple[int, int]:
    """Default (rows, cols) arrangement of chains for operand sharing."""
    rows = max(r for r in range(1, math.isqrt(chains) + 1) if chains % r == 0)
    return rows, chains // rows


class _DagBuilder:
    def __init__(self):
        self.instrs: list[Instruction] = []

    def add(self, kind: str, slot: str, latency: int, preds, group: int, tag: str) -> int:
        vid = len(self.instrs)
        self.instrs.append(
            Instruction(
                id=vid,
                kind=kind,
                slot=slot,
                latency=latency,
                preds=tuple(preds),
                group=group,
                tag=tag,
            )
        )
        return vid


def _steady_round_load_count(spec: MicrokernelSpec, share_inputs: bool, shape: tuple[int, int]) -> int:
    if share_inputs:
        rows, cols = shape
        return rows + cols + (spec.r_load - 2) * spec.chains
    return spec.r_load * spec.chains


def build_microkernel_dag(
    spec: MicrokernelSpec,
    *,
    share_inputs: bool = True,
    cluster_shape: tuple[int, int] | None = None,
    double_buffer: bool = True,
    overlap_clusters: bool = False,
) -> list[Instruction]:
    """Emit the instruction DAG for ``spec`` under the given buffering options.

    Per cluster: the prolog load classes (each unaligned load preceded by a
    pointer-pop companion), n_accum VMACs assigned round-robin to the chains
    with accumulator RAW distance pipeline_depth within a chain, fresh operand
    loads per steady round (shared across the cluster's row/column structure
    when share_inputs), and n_store stores per chain after the
    VMAC-to-store forwarding latency.

    Register reuse turns into edges. Input registers: a round's loads must
    wait for the VMACs two rounds back (the other buffer half); without
    double_buffer they also wait for the round immediately before (same
    registers), so the single-buffered edge set is a strict superset.
    Accumulators and cluster order: with overlap_clusters the next cluster's
    chain j may start once chain j's registers drain (its last store has
    issued and its last VMAC cleared the pipeline), letting loads and early
    VMACs overlap the neighbor's epilog; without it the next cluster's prolog
    waits for the previous cluster's final stores to complete.
    """
    if spec.n_accum < 1:
        raise ConfigError("n_accum must be >= 1 to build a kernel")
    shape = cluster_shape if cluster_shape is not None else derive_cluster_shape(spec.chains)
    rows, cols = shape
    if rows * cols != spec.chains:
        raise ConfigError(
            f"cluster_shape {shape} does not cover chains={spec.chains}"
        )
    if share_inputs and spec.r_load < 2:
        raise ConfigError("share_inputs needs r_load >= 2 (one row and one column operand)")
    n_rounds = math.ceil(spec.n_accum / spec.chains)
    per_round = _steady_round_load_count(spec, share_inputs, shape)
    if n_rounds > 1 and spec.prolog_load_count < per_round:
        raise ConfigError(
            f"prolog supplies {spec.prolog_load_count} loads but a steady round "
            f"consumes {per_round}"
        )
    steady_latency = max(c.latency for c in spec.load_classes)

    b = _DagBuilder()
    prev_cluster_gate: list[tuple[int, int]] = []  # (final store, delay) per chain
    prev_cluster_last_vmac: dict[int, int] = {}
    prev_cluster_last_store: dict[int, int] = {}

    for cl in range(spec.n_clusters):
        prolog_ids: list[int] = []
        prolog_all: list[int] = []  # loads and pops, for cluster serialization
        for ci, cls in enumerate(spec.load_classes):
            for li in range(cls.count):
                tag = f"c{cl}.prolog{ci}.{li}"
                preds: list[tuple[int, int]] = []
                if cls.unaligned:
                    pop = b.add("vload_pop", SLOT_LOAD, 1, prev_cluster_gate, cl, tag + ".pop")
                    prolog_all.append(pop)
                    preds.append((pop, 1))
                else:
                    preds.extend(prev_cluster_gate)
                vid = b.add("vload", SLOT_LOAD, cls.latency, preds, cl, tag)
                prolog_ids.append(vid)
                prolog_all.append(vid)

        vmac_of: dict[tuple[int, int], int] = {}  # (round, chain) -> id
        round_vmacs: dict[int, list[int]] = defaultdict(list)
        round_loads: dict[int, list[int]] = defaultdict(list)

        for t in range(n_rounds):
            in_round = [
                j for j in range(spec.chains) if t * spec.chains + j < spec.n_accum
            ]
            loads_of_chain: dict[int, list[int]] = {j: [] for j in in_round}
            if t > 0:
                # Round 1 has no two-back round to reuse registers from, but in
                # sequential mode it must still sit behind the cluster gate.
                war: list[tuple[int, int]] = (
                    [(v, 1) for v in round_vmacs[t - 2]] if t >= 2 else list(prev_cluster_gate)
                )
                if not double_buffer:
                    war += [(v, 1) for v in round_vmacs.get(t - 1, [])]
                if share_inputs:
                    for r in sorted({j // cols for j in in_round}):
                        vid = b.add("vload", SLOT_LOAD, steady_latency, war, cl, f"c{cl}.r{t}.row{r}")
                        round_loads[t].append(vid)
                        for j in in_round:
                            if j // cols == r:
                                loads_of_chain[j].append(vid)
                    for c in sorted({j % cols for j in in_round}):
                        vid = b.add("vload", SLOT_LOAD, steady_latency, war, cl, f"c{cl}.r{t}.col{c}")
                        round_loads[t].append(vid)
                        for j in in_round:
                            if j % cols == c:
                                loads_of_chain[j].append(vid)
                    extra = spec.r_load - 2
                else:
                    extra = spec.r_load
                for j in in_round:
                    for e in range(extra):
                        vid = b.add(
                            "vload", SLOT_LOAD, steady_latency, war, cl, f"c{cl}.r{t}.ch{j}.x{e}"
                        )
                        round_loads[t].append(vid)
                        loads_of_chain[j].append(vid)

            for j in in_round:
                preds = []
                if t == 0:
                    preds.extend((lid, b.instrs[lid].latency) for lid in prolog_ids)
                    if overlap_clusters and cl > 0:
                        if j in prev_cluster_last_store:
                            preds.append((prev_cluster_last_store[j], 1))
                        if j in prev_cluster_last_vmac:
                            preds.append((prev_cluster_last_vmac[j], spec.pipeline_depth))
                else:
                    preds.extend((lid, steady_latency) for lid in loads_of_chain[j])
                    preds.append((vmac_of[(t - 1, j)], spec.pipeline_depth))
                vid = b.add("vmac", SLOT_VMAC, spec.pipeline_depth, preds, cl, f"c{cl}.r{t}.vmac{j}")
                vmac_of[(t, j)] = vid
                round_vmacs[t].append(vid)

        gate: list[tuple[int, int]] = []
        last_vmac_of: dict[int, int] = {}
        last_store_of: dict[int, int] = {}
        for j in range(spec.chains):
            rounds_j = [t for t in range(n_rounds) if (t, j) in vmac_of]
            if not rounds_j:
                continue
            last_vmac = vmac_of[(rounds_j[-1], j)]
            last_vmac_of[j] = last_vmac
            prev = (last_vmac, spec.l_vmac_to_store)
            sid = -1
            for s in range(spec.n_store):
                sid = b.add(
                    "vstore", SLOT_STORE, spec.l_store, [prev], cl, f"c{cl}.ch{j}.st{s}"
                )
                prev = (sid, 1)
            last_store_of[j] = sid
            gate.append((sid, spec.l_store))

        prev_cluster_last_vmac = last_vmac_of
        prev_cluster_last_store = last_store_of
        prev_cluster_gate = [] if overlap_clusters else gate

    return b.instrs


def schedule(dag: list[Instruction], slots: dict[str, int]) -> ScheduleResult:
    """Greedy cycle-by-cycle list schedule of ``dag`` onto ``slots``.

    Each cycle, ready instructions issue in priority order (longest
    delay-weighted path to any sink, ties by ascending id) up to the slot
    count of their class. Deterministic for identical inputs.
    """
    if not dag:
        return ScheduleResult({}, 0, Fraction(0), (0, 0, 0), ())
    instrs = {ins.id: ins for ins in dag}
    if len(instrs) != len(dag):
        raise ConfigError("duplicate instruction ids")
    succs: dict[int, list[tuple[int, int]]] = defaultdict(list)
    indeg: dict[int, int] = {ins.id: 0 for ins in dag}
    for ins in dag:
        if ins.slot not in slots or slots[ins.slot] < 1:
            raise ConfigError(f"no slots for class {ins.slot!r}")
        for pid, delay in ins.preds:
            if pid not in instrs:
                raise ConfigError(f"instruction {ins.id} depends on unknown id {pid}")
            succs[pid].append((ins.id, delay))
            indeg[ins.id] += 1

    order: list[int] = [vid for vid, d in indeg.items() if d == 0]
    remaining = dict(indeg)
    head = 0
    while head < len(order):
        vid = order[head]
        head += 1
        for sid, _ in succs[vid]:
            remaining[sid] -= 1
            if remaining[sid] == 0:
                order.append(sid)
    if len(order) != len(dag):
        raise ConfigError("dependency cycle in instruction DAG")

    prio: dict[int, int] = {}
    for vid in reversed(order):
        best = instrs[vid].latency
        for sid, delay in succs[vid]:
            best = max(best, delay + prio[sid])
        prio[vid] = best

    ready_bound: dict[int, int] = {ins.id: 0 for ins in dag}
    remaining = dict(indeg)
    future: list[tuple[int, int, int]] = []  # (ready cycle, -prio, id)
    pool: dict[str, list[tuple[int, int]]] = {s: [] for s in slots}
    for ins in dag:
        if indeg[ins.id] == 0:
            heapq.heappush(future, (0, -prio[ins.id], ins.id))

    cycle_of: dict[int, int] = {}
    cycle = 0
    n_done = 0
    while n_done < len(dag):
        while future and future[0][0] <= cycle:
            _, negp, vid = heapq.heappop(future)
            heapq.heappush(pool[instrs[vid].slot], (negp, vid))
        issued_any = False
        for slot_class in sorted(slots):
            cap = slots[slot_class]
            bucket = pool[slot_class]
            n = 0
            while n < cap and bucket:
                _, vid = heapq.heappop(bucket)
                cycle_of[vid] = cycle
                n += 1
                n_done += 1
                issued_any = True
                for sid, delay in succs[vid]:
                    ready_bound[sid] = max(ready_bound[sid], cycle + delay)
                    remaining[sid] -= 1
                    if remaining[sid] == 0:
                        heapq.heappush(
                            future, (max(ready_bound[sid], cycle + 1), -prio[sid], sid)
                        )
        if any(pool[s] for s in pool):
            cycle += 1
        elif future:
            cycle = max(cycle + 1, future[0][0])
        elif n_done < len(dag):
            raise ConfigError("scheduler stalled with unissued instructions")

    total = 0
    for ins in dag:
        end = cycle_of[ins.id] + (ins.latency if ins.kind == "vstore" else 1)
        total = max(total, end)

    vmacs = sorted(
        (cycle_of[ins.id], ins.group) for ins in dag if ins.kind == "vmac"
    )
    if vmacs:
        first_v = vmacs[0][0]
        last_v = vmacs[-1][0]
        phases = (first_v, last_v - first_v, total - last_v)
        rate = Fraction(len(vmacs), total)
        by_group: dict[int, list[int]] = defaultdict(list)
        for c, g in vmacs:
            by_group[g].append(c)
        groups = tuple(tuple(by_group[g]) for g in sorted(by_group))
    else:
        phases = (total, 0, 0)
        rate = Fraction(0)
        groups = ()
    return ScheduleResult(
        cycle_of=cycle_of,
        total_cycles=total,
        vmac_issue_rate=rate,
        phase_times=phases,
        vmac_cycles_by_group=groups,
    )


def measure(result: ScheduleResult) -> dict[str, Fraction | None]:
    """Observed efficiency metrics of a schedule.

    ``eff_micro_sim`` is VMACs per cycle against a one-per-cycle peak.
    ``ii_observed`` is the mean gap between consecutive VMAC issues pooled
    within each cluster (cross-cluster gaps excluded); None with fewer than
    two VMACs in every cluster.
    """
    gaps: list[int] = []
    for cycles in result.vmac_cycles_by_group:
        gaps.extend(b - a for a, b in zip(cycles, cycles[1:]))
    ii_observed = Fraction(sum(gaps), len(gaps)) if gaps else None
    return {"eff_micro_sim": result.vmac_issue_rate, "ii_observed": ii_observed}


def dump_schedule_csv(dag: list[Instruction], result: ScheduleResult) -> str:
    """Render a schedule as CSV rows (cycle, slot, instruction id, kind)."""
    out = io.StringIO()
    out.write("cycle,slot,id,kind\n")
    rows = sorted(
        (result.cycle_of[ins.id], ins.slot, ins.id, ins.kind) for ins in dag
    )
    for cycle, slot, vid, kind in rows:
        out.write(f"{cycle},{slot},{vid},{kind}\n")
    return out.getvalue()


# -- randomized soundness harness --------------------------------------------

def random_microkernel_spec(rng: random.Random) -> tuple[MicrokernelSpec, dict]:
    """Draw a machine-plausible spec plus build options for soundness runs.

    The draw is constrained to kernels a real VLIW core could run: one VMAC
    and one store slot, store forwarding at least as long as the MAC pipeline
    drain, per-round load pressure at most twice the load bandwidth, full
    rounds, and a prolog that covers one steady round's operands. Outside
    this envelope the closed forms stop being lower bounds (they assume
    exactly these resource relations), so samples there would not test
    anything meaningful.
    """
    u_ld = rng.choice([1, 2, 4])
    pipeline_depth = rng.randint(1, 6)
    chains = rng.randint(1, 5)
    r_load = u_ld * rng.choice([1, 2])
    share = bool(r_load >= 2 and rng.random() < 0.5)
    classes = [LoadClass(latency=rng.randint(2, 10), count=r_load * chains)]
    if rng.random() < 0.4:
        classes.append(
            LoadClass(
                latency=rng.randint(1, 10),
                count=rng.randint(1, 4),
                unaligned=rng.random() < 0.3,
            )
        )
    spec = MicrokernelSpec(
        pipeline_depth=pipeline_depth,
        u_ld=u_ld,
        u_st=1,
        u_vmac=1,
        load_classes=tuple(classes),
        r_load=r_load,
        chains=chains,
        n_accum=chains * rng.randint(1, 8),
        n_clusters=rng.randint(1, 6),
        l_vmac_to_store=2 * pipeline_depth + rng.randint(0, 6),
        l_store=rng.randint(1, 3),
        n_store=rng.randint(3, 5),
        accum_regs=5,
        clamp_ii=True,
    )
    options = {
        "share_inputs": share,
        "double_buffer": rng.random() < 0.5,
    }
    return spec, options


def check_bounds_hold(
    spec: MicrokernelSpec, options: dict
) -> list[tuple[str, int, int]]:
    """Compare one spec's schedule against every closed-form bound.

    Returns (bound name, bound value, simulated value) triples for any bound
    the simulation beats; empty means sound. Both cluster sequencing modes
    are exercised.
    """
    bounds: LatencyBounds = total_latency(spec)
    violations: list[tuple[str, int, int]] = []
    for overlap in (False, True):
        dag = build_microkernel_dag(spec, overlap_clusters=overlap, **options)
        res = schedule(dag, slots_for(spec))
        total_bound = bounds.l_total_overlapped if overlap else bounds.l_total_sequential
        name = "l_total_overlapped" if overlap else "l_total_sequential"
        if res.total_cycles < total_bound:
            violations.append((name, total_bound, res.total_cycles))
        first_vmac = res.phase_times[0]
        if first_vmac < bounds.t_prolog:
            violations.append(("t_prolog", bounds.t_prolog, first_vmac))
        for bound_name in ("t_steady", "t_epilog"):
            bound = getattr(bounds, bound_name)
            if res.total_cycles < bound:
                violations.append((bound_name, bound, res.total_cycles))
    return violations


def verify_random_specs(n: int, seed: int = 0) -> list[dict]:
    """Run the soundness property over ``n`` random specs; list violations."""
    rng = random.Random(seed)
    failures: list[dict] = []
    for i in range(n):
        spec, options = random_microkernel_spec(rng)
        bad = check_bounds_hold(spec, options)
        if bad:
            failures.append({"index": i, "spec": spec, "options": options, "violations": bad})
    return failures
