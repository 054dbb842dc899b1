from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from asymtile.arch import ConfigError, TileConfig
from asymtile.pipeline import (
    DEFAULT_MICROKERNEL,
    FittedEff,
    LoadClass,
    MicrokernelSpec,
    eff_micro,
    eff_micro_phases,
    epilog_bound,
    fitted_eff,
    fitted_params,
    ii_parallel_raw,
    initiation_intervals,
    microkernel_for_tile,
    microkernel_from_dict,
    prolog_bound,
    steady_bound,
    total_latency,
)


def mk(**kw) -> MicrokernelSpec:
    return MicrokernelSpec(**kw)


# -- prolog ------------------------------------------------------------------

def test_prolog_two_slot_four_loads():
    classes = [LoadClass(3, 2), LoadClass(3, 1), LoadClass(3, 1)]
    assert prolog_bound(classes, u_ld=2) == 4


def test_prolog_single_load_latency_bound():
    assert prolog_bound([LoadClass(5, 1)], u_ld=2) == 5


def test_prolog_mixed_latencies():
    # max(8 + ceil(4/2) - 1, 2 + ceil(8/2) - 1) = max(9, 5)
    assert prolog_bound([LoadClass(8, 4), LoadClass(2, 4)], u_ld=2) == 9


def test_prolog_empty_rejected():
    with pytest.raises(ConfigError):
        prolog_bound([], u_ld=2)


@given(
    classes=st.lists(
        st.builds(LoadClass, latency=st.integers(1, 12), count=st.integers(1, 6)),
        min_size=1,
        max_size=5,
    ),
    u_ld=st.integers(1, 4),
    seed=st.randoms(),
)
def test_prolog_permutation_invariant_and_monotone(classes, u_ld, seed):
    base = prolog_bound(classes, u_ld)
    shuffled = list(classes)
    seed.shuffle(shuffled)
    assert prolog_bound(shuffled, u_ld) == base
    bigger = [LoadClass(c.latency + 1, c.count + 1) for c in classes]
    assert prolog_bound(bigger, u_ld) >= base


# -- initiation intervals ----------------------------------------------------

def test_ii_single_chain():
    spec = mk(pipeline_depth=3, r_load=4, u_ld=2, chains=1, accum_regs=5)
    ii = initiation_intervals(spec)
    assert ii.ii_single == 3
    assert ii.ii_parallel == 3


def test_ii_three_chains_clamped():
    spec = mk(pipeline_depth=3, r_load=2, u_ld=2, chains=3)
    assert ii_parallel_raw(spec) == Fraction(1, 3)
    assert initiation_intervals(spec).ii_parallel == 1


def test_ii_four_chains_clamped():
    spec = mk(pipeline_depth=3, r_load=4, u_ld=2, chains=4)
    assert ii_parallel_raw(spec) == Fraction(1, 2)
    assert initiation_intervals(spec).ii_parallel == 1


def test_ii_unclamped_mode():
    spec = mk(pipeline_depth=3, r_load=4, u_ld=2, chains=4, clamp_ii=False)
    assert initiation_intervals(spec).ii_parallel == Fraction(1, 2)


@given(
    p=st.integers(1, 8),
    r=st.integers(1, 8),
    u=st.integers(1, 4),
    c=st.integers(1, 5),
)
def test_ii_raw_monotonicity(p, r, u, c):
    spec = mk(pipeline_depth=p, r_load=r, u_ld=u, chains=c)
    raw = ii_parallel_raw(spec)
    if c > 1:
        assert ii_parallel_raw(mk(pipeline_depth=p, r_load=r, u_ld=u, chains=c - 1)) >= raw
    assert ii_parallel_raw(mk(pipeline_depth=p + 1, r_load=r, u_ld=u, chains=c)) >= raw
    assert ii_parallel_raw(mk(pipeline_depth=p, r_load=r + 1, u_ld=u, chains=c)) >= raw


# -- steady and epilog -------------------------------------------------------

def test_steady_examples():
    assert steady_bound(mk(n_accum=8, chains=4), Fraction(1)) == 4
    assert steady_bound(mk(n_accum=4, chains=4), Fraction(1)) == 0
    assert steady_bound(mk(n_accum=16, chains=4), Fraction(3, 2)) == 18


def test_epilog_examples():
    assert epilog_bound(mk(l_vmac_to_store=6, l_store=2, n_store=2, chains=1)) == 9
    assert epilog_bound(mk(l_vmac_to_store=6, l_store=2, n_store=2, chains=4)) == 12
    assert epilog_bound(mk(l_vmac_to_store=0, l_store=1, n_store=1, chains=1)) == 1


# -- totals ------------------------------------------------------------------

def eight_cluster_spec() -> MicrokernelSpec:
    # prolog 8 + ceil(6/2) - 1 = 10; epilog (6+2+2-1) + 3 = 12; raw II
    # max(3+1-4, ceil(4/2))/4 = 1/2 clamps to 1.
    return mk(
        pipeline_depth=3,
        u_ld=2,
        load_classes=(LoadClass(8, 6),),
        r_load=4,
        chains=4,
        n_accum=8,
        n_clusters=8,
    )


def test_total_latency_reference():
    b = total_latency(eight_cluster_spec())
    assert b.t_prolog == 10
    assert b.ii_parallel == 1
    assert b.t_steady == 4
    assert b.t_epilog == 12
    assert b.l_total_sequential == (10 + 4 + 12) * 8
    assert b.l_total_sequential == 208
    assert b.l_total_overlapped == 10 + (4 + 4) * 8 + 12
    assert b.l_total_overlapped == 86
    assert b.total_for("sequential") == 208
    assert b.total_for("overlapped") == 86


def test_total_latency_zero_clusters():
    b = total_latency(mk(n_clusters=0))
    assert b.l_total_sequential == 0
    assert b.l_total_overlapped == 0


def test_total_latency_single_cluster_modes_agree_on_order():
    b = total_latency(mk(n_clusters=1))
    assert b.l_total_overlapped <= b.l_total_sequential


def test_total_latency_mode_validated():
    with pytest.raises(ConfigError):
        total_latency(DEFAULT_MICROKERNEL, mode="pipelined")


@given(
    p=st.integers(1, 6),
    lat=st.integers(1, 10),
    n_loads=st.integers(1, 8),
    r=st.sampled_from([2, 4, 6]),
    chains=st.integers(1, 5),
    n_accum=st.integers(1, 32),
    n_clusters=st.integers(1, 16),
)
def test_overlapped_never_exceeds_sequential(p, lat, n_loads, r, chains, n_accum, n_clusters):
    spec = mk(
        pipeline_depth=p,
        load_classes=(LoadClass(lat, n_loads),),
        r_load=r,
        chains=chains,
        n_accum=n_accum,
        n_clusters=n_clusters,
        l_vmac_to_store=p,
    )
    b = total_latency(spec)
    assert 0 < b.l_total_overlapped <= b.l_total_sequential


# -- efficiency --------------------------------------------------------------

def test_eff_micro_reference_phases():
    # 8 updates over 8.7 boundary cycles plus 4 steady cycles.
    eff = eff_micro_phases(8, 4, Fraction(1), Fraction(87, 10), Fraction(0))
    assert eff == Fraction(80, 127)
    assert float(eff) == pytest.approx(0.63, abs=0.005)


def test_eff_micro_saturates():
    spec = mk(n_accum=4096, chains=4, r_load=2)
    assert initiation_intervals(spec).ii_parallel == 1
    assert eff_micro(spec) > Fraction(99, 100)


def test_eff_micro_cluster_count_cancels():
    a = eff_micro(mk(n_clusters=1))
    b = eff_micro(mk(n_clusters=64))
    assert a == b


def test_eff_micro_zero_denominator_rejected():
    with pytest.raises(ConfigError):
        eff_micro_phases(4, 4, Fraction(1), Fraction(0), Fraction(0))


def realistic_specs():
    # Realism constraints keep stores semantically downstream of the MAC pipe
    # and keep prolog load pressure at least one steady step's worth.
    return st.integers(1, 6).flatmap(
        lambda p: st.tuples(
            st.just(p),
            st.integers(p, p + 8),  # l_vmac_to_store >= pipeline depth
            st.sampled_from([2, 4]).flatmap(
                lambda u: st.tuples(st.just(u), st.integers(1, 4).map(lambda m: u * m))
            ),
            st.integers(1, 5),
            st.integers(1, 32),
            st.integers(1, 12),
        )
    )


@given(params=realistic_specs())
def test_eff_micro_bounded_by_ii(params):
    p, l_v2s, (u_ld, r_load), chains, n_accum, lat = params
    spec = mk(
        pipeline_depth=p,
        l_vmac_to_store=l_v2s,
        u_ld=u_ld,
        r_load=r_load,
        chains=chains,
        n_accum=n_accum,
        load_classes=(LoadClass(lat, max(1, r_load * chains)),),
        accum_regs=5,
    )
    ii = initiation_intervals(spec).ii_parallel
    assert 0 < eff_micro(spec, ii) * ii <= 1


@given(n_accum=st.integers(1, 64))
def test_eff_micro_nondecreasing_in_n_accum(n_accum):
    a = eff_micro(mk(n_accum=n_accum))
    b = eff_micro(mk(n_accum=n_accum + 1))
    assert b >= a


def test_fitted_form_matches_phase_model():
    spec = eight_cluster_spec()
    params = fitted_params(spec)
    assert params.eta == Fraction(1, 8)
    assert params.eps == 10 + 12 - 1 * 4
    # Equivalence needs n_accum >= chains (t_k >= 32 here); below that the
    # phase model clamps the steady term at zero and the fitted form does not.
    for t_k in (32, 64, 256, 512):
        direct = eff_micro(mk(**{**vars_of(spec), "n_accum": t_k // 8}))
        assert fitted_eff(params, t_k) == direct


def vars_of(spec: MicrokernelSpec) -> dict:
    return {
        "pipeline_depth": spec.pipeline_depth,
        "u_ld": spec.u_ld,
        "load_classes": spec.load_classes,
        "r_load": spec.r_load,
        "chains": spec.chains,
        "n_clusters": spec.n_clusters,
        "l_vmac_to_store": spec.l_vmac_to_store,
        "l_store": spec.l_store,
        "n_store": spec.n_store,
    }


# -- tile derivation and loading ---------------------------------------------

def test_microkernel_for_tile():
    spec = microkernel_for_tile(TileConfig(32, 128, 64, 128))
    assert spec.n_accum == 8
    assert spec.n_clusters == 32 * 128 // (64 * 4)
    assert spec.n_clusters == 16


def test_microkernel_for_tile_rejects_nondivisible():
    with pytest.raises(ConfigError):
        microkernel_for_tile(TileConfig(8, 8, 8, 8))  # 64 outputs, needs 256


def test_microkernel_from_dict():
    spec = microkernel_from_dict(
        {"pipeline_depth": 4, "load_classes": [[8, 4], {"latency": 2, "count": 1}]}
    )
    assert spec.pipeline_depth == 4
    assert spec.load_classes == (LoadClass(8, 4), LoadClass(2, 1))
    with pytest.raises(ConfigError):
        microkernel_from_dict({"pipeline": 4})
    with pytest.raises(ConfigError):
        microkernel_from_dict({"chains": 6})  # exceeds default accum_regs=5


def test_spec_validation():
    with pytest.raises(ConfigError):
        mk(chains=0)
    with pytest.raises(ConfigError):
        mk(load_classes=())
    with pytest.raises(ConfigError):
        LoadClass(0, 1)
