import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from asymtile.arch import ConfigError
from asymtile.pipeline import LoadClass, MicrokernelSpec, total_latency
from asymtile.schedule import (
    Instruction,
    build_microkernel_dag,
    check_bounds_hold,
    derive_cluster_shape,
    dump_schedule_csv,
    measure,
    random_microkernel_spec,
    schedule,
    slots_for,
    verify_random_specs,
)


def fig3_spec() -> MicrokernelSpec:
    # Single chain, one update, loads: two of the accumulator tile and one of
    # each input operand, all latency 3, on two load slots.
    return MicrokernelSpec(
        chains=1,
        n_accum=1,
        r_load=2,
        u_ld=2,
        load_classes=(LoadClass(3, 2), LoadClass(3, 1), LoadClass(3, 1)),
        n_clusters=1,
    )


def test_first_vmac_matches_prolog_bound():
    spec = fig3_spec()
    dag = build_microkernel_dag(spec, share_inputs=False)
    assert sum(1 for i in dag if i.kind == "vload") == 4
    assert sum(1 for i in dag if i.kind == "vmac") == 1
    res = schedule(dag, slots_for(spec))
    assert res.phase_times[0] == 4


def test_single_vmac_rate():
    spec = fig3_spec()
    res = schedule(build_microkernel_dag(spec, share_inputs=False), slots_for(spec))
    assert res.vmac_issue_rate == Fraction(1, res.total_cycles)


def test_independent_loads_bandwidth_bound():
    for n in (1, 2, 5, 8):
        dag = [Instruction(id=i, kind="vload", slot="ld", latency=1) for i in range(n)]
        res = schedule(dag, {"ld": 2})
        assert res.total_cycles == -(-n // 2)


def test_saturated_vmacs_full_rate():
    dag = [Instruction(id=i, kind="vmac", slot="vmac", latency=3) for i in range(6)]
    res = schedule(dag, {"vmac": 1})
    assert res.total_cycles == 6
    assert res.vmac_issue_rate == 1


def test_ii_observed_at_least_one_slot_cycle():
    spec = MicrokernelSpec(n_accum=32, n_clusters=2)
    res = schedule(build_microkernel_dag(spec), slots_for(spec))
    m = measure(res)
    assert m["ii_observed"] >= 1
    assert m["eff_micro_sim"] == res.vmac_issue_rate


def test_empty_dag():
    res = schedule([], {"ld": 1})
    assert res.total_cycles == 0


def test_cycle_rejected():
    dag = [
        Instruction(id=0, kind="vload", slot="ld", latency=1, preds=((1, 1),)),
        Instruction(id=1, kind="vload", slot="ld", latency=1, preds=((0, 1),)),
    ]
    with pytest.raises(ConfigError):
        schedule(dag, {"ld": 1})


def test_missing_slot_rejected():
    dag = [Instruction(id=0, kind="vstore", slot="st", latency=1)]
    with pytest.raises(ConfigError):
        schedule(dag, {"ld": 1})


def test_determinism():
    spec = MicrokernelSpec(n_accum=16, n_clusters=3)
    a = schedule(build_microkernel_dag(spec), slots_for(spec))
    b = schedule(build_microkernel_dag(spec), slots_for(spec))
    assert a.cycle_of == b.cycle_of
    assert a.total_cycles == b.total_cycles


def test_resource_legality():
    rng = random.Random(5)
    for _ in range(20):
        spec, options = random_microkernel_spec(rng)
        slots = slots_for(spec)
        dag = build_microkernel_dag(spec, **options)
        res = schedule(dag, slots)
        used = {}
        for ins in dag:
            key = (res.cycle_of[ins.id], ins.slot)
            used[key] = used.get(key, 0) + 1
        assert all(count <= slots[slot] for (_, slot), count in used.items())
        for ins in dag:
            for pid, delay in ins.preds:
                assert res.cycle_of[ins.id] >= res.cycle_of[pid] + delay


def test_derive_cluster_shape():
    assert derive_cluster_shape(4) == (2, 2)
    assert derive_cluster_shape(6) == (2, 3)
    assert derive_cluster_shape(5) == (1, 5)
    assert derive_cluster_shape(1) == (1, 1)


def test_share_halves_steady_loads():
    # 2x2 cluster with two operands per update: 8 private loads per round
    # drop to 2 row + 2 col shared loads.
    spec = MicrokernelSpec(load_classes=(LoadClass(8, 8),), n_accum=16, n_clusters=1)
    unshared = build_microkernel_dag(spec, share_inputs=False)
    shared = build_microkernel_dag(spec, share_inputs=True)

    def steady_loads(dag):
        return sum(1 for i in dag if i.kind == "vload" and "prolog" not in i.tag)

    assert steady_loads(unshared) == 2 * steady_loads(shared)


def test_double_buffer_edges_are_subset():
    spec = MicrokernelSpec(n_accum=24, n_clusters=2)
    edges_single = {
        (pid, ins.tag, delay)
        for ins in build_microkernel_dag(spec, double_buffer=False)
        for pid, delay in ins.preds
    }
    edges_double = {
        (pid, ins.tag, delay)
        for ins in build_microkernel_dag(spec, double_buffer=True)
        for pid, delay in ins.preds
    }
    assert edges_double < edges_single


def test_sequential_cluster_serialization():
    spec = MicrokernelSpec(n_accum=8, n_clusters=2)
    dag = build_microkernel_dag(spec, overlap_clusters=False)
    res = schedule(dag, slots_for(spec))
    last_store_c0 = max(
        res.cycle_of[i.id] for i in dag if i.kind == "vstore" and i.group == 0
    )
    first_load_c1 = min(
        res.cycle_of[i.id] for i in dag if i.kind == "vload" and i.group == 1
    )
    assert first_load_c1 >= last_store_c0 + spec.l_store


def test_overlap_allows_prefetch():
    spec = MicrokernelSpec(n_accum=8, n_clusters=2)
    seq = schedule(build_microkernel_dag(spec, overlap_clusters=False), slots_for(spec))
    ovl_dag = build_microkernel_dag(spec, overlap_clusters=True)
    ovl = schedule(ovl_dag, slots_for(spec))
    assert ovl.total_cycles <= seq.total_cycles
    last_vmac_c0 = max(
        ovl.cycle_of[i.id] for i in ovl_dag if i.kind == "vmac" and i.group == 0
    )
    first_load_c1 = min(
        ovl.cycle_of[i.id] for i in ovl_dag if i.kind == "vload" and i.group == 1
    )
    assert first_load_c1 < last_vmac_c0


def test_unaligned_loads_get_pop_companions():
    spec = MicrokernelSpec(
        load_classes=(LoadClass(8, 4), LoadClass(4, 2, unaligned=True)), n_accum=4
    )
    dag = build_microkernel_dag(spec)
    pops = [i for i in dag if i.kind == "vload_pop"]
    assert len(pops) == 2
    res = schedule(dag, slots_for(spec))
    for ins in dag:
        if ins.kind == "vload" and any(
            dag[pid].kind == "vload_pop" for pid, _ in ins.preds
        ):
            pop_id = next(pid for pid, _ in ins.preds if dag[pid].kind == "vload_pop")
            assert res.cycle_of[ins.id] > res.cycle_of[pop_id]


def test_builder_validation():
    with pytest.raises(ConfigError):
        build_microkernel_dag(MicrokernelSpec(r_load=1), share_inputs=True)
    with pytest.raises(ConfigError):
        build_microkernel_dag(MicrokernelSpec(), cluster_shape=(3, 2))
    with pytest.raises(ConfigError):
        # prolog holds 2 loads but a steady round consumes 8
        build_microkernel_dag(
            MicrokernelSpec(load_classes=(LoadClass(8, 2),), n_accum=16),
            share_inputs=False,
        )


def test_csv_dump():
    spec = fig3_spec()
    dag = build_microkernel_dag(spec, share_inputs=False)
    res = schedule(dag, slots_for(spec))
    text = dump_schedule_csv(dag, res)
    lines = text.strip().splitlines()
    assert lines[0] == "cycle,slot,id,kind"
    assert len(lines) == len(dag) + 1
    cycles = [int(line.split(",")[0]) for line in lines[1:]]
    assert cycles == sorted(cycles)


def test_bounds_sound_over_random_specs():
    assert verify_random_specs(120, seed=2024) == []


@settings(max_examples=40)
@given(seed=st.integers(0, 10**9))
def test_bounds_sound_hypothesis(seed):
    spec, options = random_microkernel_spec(random.Random(seed))
    assert check_bounds_hold(spec, options) == []


def test_double_buffer_and_overlap_monotone():
    rng = random.Random(81)
    for _ in range(60):
        spec, options = random_microkernel_spec(rng)
        for overlap in (False, True):
            base_opts = dict(options, overlap_clusters=overlap, double_buffer=False)
            base = schedule(build_microkernel_dag(spec, **base_opts), slots_for(spec))
            db = schedule(
                build_microkernel_dag(spec, **dict(base_opts, double_buffer=True)),
                slots_for(spec),
            )
            assert db.total_cycles <= base.total_cycles
        seq_opts = dict(options, overlap_clusters=False)
        seq = schedule(build_microkernel_dag(spec, **seq_opts), slots_for(spec))
        ovl = schedule(
            build_microkernel_dag(spec, **dict(seq_opts, overlap_clusters=True)),
            slots_for(spec),
        )
        assert ovl.total_cycles <= seq.total_cycles


def test_total_includes_store_drain():
    spec = MicrokernelSpec(n_accum=4, n_clusters=1)
    dag = build_microkernel_dag(spec)
    res = schedule(dag, slots_for(spec))
    last_store = max(res.cycle_of[i.id] for i in dag if i.kind == "vstore")
    assert res.total_cycles == last_store + spec.l_store
    assert res.total_cycles >= total_latency(spec).l_total_sequential
