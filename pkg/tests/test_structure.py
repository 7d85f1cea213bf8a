import math

import numpy as np
import pytest

import oqw
from oqw import fixtures
from oqw.errors import InputError
from oqw.structure import enclosure_closure

from conftest import E1, E2, MIX


def unit(d, k):
    v = np.zeros(d, dtype=complex)
    v[k] = 1.0
    return v


# ---------------------------------------------------------------------------
# closures


def test_closure_identity_site_keeps_seed():
    walk = oqw.WalkSpec(("0",), {"0": 2}, {("0", "0"): np.eye(2)})
    enc = enclosure_closure(walk, [("0", unit(2, 0))])
    assert enc.dim("0") == 1
    assert np.abs(np.abs(enc.bases["0"][:, 0]) - np.array([1.0, 0.0])).max() <= 1e-12


def test_closure_trap_walk_e2_never_reenters_e1(trap_walk):
    enc = enclosure_closure(trap_walk, [("0", unit(2, 1))])
    assert enc.dim("0") == 1
    assert enc.dim("1") == 0
    assert enc.dim("2") == 1
    # the site-0 component stays along e2
    assert abs(enc.bases["0"][0, 0]) <= 1e-12
    assert enc.closure_defect(trap_walk) <= 1e-8


def test_closure_branch_walk_from_e1(branch_walk):
    # e1 at site 1 spreads to the full fibers at 0 and 1; sites 2 and 3 keep
    # only their reachable e1 lines
    enc = enclosure_closure(branch_walk, [("1", unit(2, 0))])
    assert enc.dim("0") == 1
    assert enc.dim("1") == 2
    assert enc.dim("2") == 1
    assert enc.dim("3") == 1
    assert enc.closure_defect(branch_walk) <= 1e-8


def test_closure_is_transition_closed(half_line_up_taboo, ring_walk):
    rng = np.random.default_rng(11)
    for walk in (half_line_up_taboo, ring_walk):
        s = walk.sites[0]
        v = rng.normal(size=walk.dims[s]) + 1j * rng.normal(size=walk.dims[s])
        enc = enclosure_closure(walk, [(s, v)])
        assert enc.closure_defect(walk) <= 1e-8


def test_closure_rejects_zero_seed(trap_walk):
    with pytest.raises(InputError):
        enclosure_closure(trap_walk, [("0", np.zeros(2))])


# ---------------------------------------------------------------------------
# irreducibility


def test_trap_walk_reducible_with_witness(trap_walk):
    ok, witness = oqw.is_irreducible(trap_walk)
    assert not ok
    assert witness is not None
    assert not witness.is_full(trap_walk)
    assert witness.closure_defect(trap_walk) <= 1e-8


def test_half_line_taboo_truncation_irreducible():
    for n in (2, 5, 17):
        walk = fixtures.example_half_line(0.25, n, boundary="taboo")
        ok, _ = oqw.is_irreducible(walk)
        assert ok


def test_minimal_dilation_irreducibility_matches_connectivity():
    ok, _ = oqw.is_irreducible(fixtures.cycle_dilation(4, bias=0.7))
    assert ok
    ok, _ = oqw.is_irreducible(fixtures.gamblers_ruin(5, 0.5))
    assert not ok  # absorbing edges


def test_irreducibility_invariant_under_local_unitaries(ring_walk):
    rng = np.random.default_rng(12)
    us = {}
    for s in ring_walk.sites:
        a = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
        q, _ = np.linalg.qr(a)
        us[s] = q
    trans = {(to, fr): us[to] @ L @ us[fr].conj().T
             for (to, fr), L in ring_walk.transitions.items()}
    rotated = oqw.WalkSpec(ring_walk.sites, ring_walk.dims, trans)
    assert oqw.is_irreducible(rotated)[0] == oqw.is_irreducible(ring_walk)[0]


# ---------------------------------------------------------------------------
# decomposition


def test_decompose_irreducible_walk_is_single_full_enclosure(ring_walk):
    deco = oqw.decompose(ring_walk)
    assert len(deco.recurrent) == 1
    assert deco.recurrent[0].is_full(ring_walk)
    assert deco.transient.total_dim() == 0
    assert deco.projector_sum_defect(ring_walk) <= 1e-8


def test_decompose_trap_walk(trap_walk):
    deco = oqw.decompose(trap_walk)
    assert deco.projector_sum_defect(trap_walk) <= 1e-8
    # e1 direction at site 0 belongs to the recurrent cycle, e2 to none
    d0 = sum(enc.dim("0") for enc in deco.recurrent)
    assert d0 == 1
    assert deco.transient.dim("0") == 1
    assert sum(enc.dim("2") for enc in deco.recurrent) == 2
    assert deco.warning  # degenerate fixed space


def test_decompose_direct_sum_recovers_components(ring_walk):
    other = fixtures.cycle_dilation(2, bias=0.5)
    sites = tuple(f"a{s}" for s in ring_walk.sites) + tuple(f"b{s}" for s in other.sites)
    dims = {f"a{s}": d for s, d in ring_walk.dims.items()}
    dims.update({f"b{s}": d for s, d in other.dims.items()})
    trans = {(f"a{t}", f"a{f}"): L for (t, f), L in ring_walk.transitions.items()}
    trans.update({(f"b{t}", f"b{f}"): L for (t, f), L in other.transitions.items()})
    walk = oqw.WalkSpec(sites, dims, trans)
    deco = oqw.decompose(walk)
    assert len(deco.recurrent) == 2
    assert deco.transient.total_dim() == 0
    supports = [{s for s in sites if enc.dim(s) > 0} for enc in deco.recurrent]
    assert {frozenset(x) for x in supports} == {
        frozenset(s for s in sites if s.startswith("a")),
        frozenset(s for s in sites if s.startswith("b"))}


def test_restrict_walk_is_stochastic_on_enclosure(trap_walk):
    deco = oqw.decompose(trap_walk)
    cycle = next(enc for enc in deco.recurrent if enc.dim("0") == 1)
    sub, _ = oqw.restrict_walk(trap_walk, cycle)
    assert oqw.validate_walk(sub).accepted


# ---------------------------------------------------------------------------
# recurrence classification


def test_classify_requires_irreducible(trap_walk):
    with pytest.raises(InputError, match="reducible"):
        oqw.classify_recurrence(trap_walk, "0")


def test_classify_recurrent_cases():
    # any finite irreducible walk with an invariant state is recurrent
    for walk in (fixtures.cycle_dilation(4, 0.7),
                 fixtures.random_doubly_stochastic(3, 2, seed=7),
                 fixtures.example_half_line(0.75, 30, boundary="taboo")):
        verdict = oqw.classify_recurrence(walk, walk.sites[0])
        assert verdict.case == "recurrent"
        assert verdict.expected_visits_finite is False


def test_classify_transient_open_chain():
    t = np.zeros((6, 6))
    for k in range(6):
        if k + 1 < 6:
            t[k + 1, k] = 0.7
        if k - 1 >= 0:
            t[k - 1, k] = 0.3
    trans = {(str(i), str(j)): np.array([[np.sqrt(t[i, j])]], dtype=complex)
             for i in range(6) for j in range(6) if t[i, j] > 0}
    walk = oqw.WalkSpec(tuple(str(k) for k in range(6)),
                        {str(k): 1 for k in range(6)}, trans)
    verdict = oqw.classify_recurrence(walk, "2")
    assert verdict.case == "transient"
    assert verdict.expected_visits_finite is True


def test_classify_mixed_half_line(half_line_up_taboo):
    verdict = oqw.classify_recurrence(half_line_up_taboo, "0")
    assert verdict.case == "mixed"
    assert np.allclose(verdict.witness_sure, E2, atol=1e-8)
    assert np.allclose(verdict.witness_deficient, MIX, atol=1e-12)
    # witnesses behave as claimed
    p_sure = oqw.passage_probability(half_line_up_taboo, "0", verdict.witness_sure, "0")
    p_def = oqw.passage_probability(half_line_up_taboo, "0",
                                    verdict.witness_deficient, "0")
    assert p_sure >= 1 - 1e-6
    assert p_def <= 1 - 1e-3


def test_classify_agrees_with_classical_recurrence():
    # minimal dilations of finite irreducible chains are always recurrent
    for bias in (0.5, 0.8):
        verdict = oqw.classify_recurrence(fixtures.cycle_dilation(5, bias), "0")
        assert verdict.case == "recurrent"


# ---------------------------------------------------------------------------
# decomposition bounds


def test_bounds_equality_inside_enclosure(trap_walk):
    deco = oqw.decompose(trap_walk)
    rep = oqw.check_decomposition_bounds(trap_walk, deco, "0", E1, "0")
    assert rep.inequalities_hold
    assert rep.supported_in_recurrent
    assert rep.equalities_hold


def test_bounds_strict_for_leaking_state(trap_walk):
    deco = oqw.decompose(trap_walk)
    rep = oqw.check_decomposition_bounds(trap_walk, deco, "0", MIX, "0")
    assert rep.inequalities_hold
    assert not rep.supported_in_recurrent
    # return time is strictly larger than the enclosure sum (inf vs finite)
    assert math.isinf(rep.return_time[0])
    assert not math.isinf(rep.return_time[1])


def test_bounds_equality_for_mixture_of_enclosures():
    a = fixtures.cycle_dilation(2, 0.5)
    sites = tuple(f"a{s}" for s in a.sites) + tuple(f"b{s}" for s in a.sites)
    dims = {s: 1 for s in sites}
    trans = {(f"a{t}", f"a{f}"): L for (t, f), L in a.transitions.items()}
    trans.update({(f"b{t}", f"b{f}"): L for (t, f), L in a.transitions.items()})
    walk = oqw.WalkSpec(sites, dims, trans)
    deco = oqw.decompose(walk)
    rep = oqw.check_decomposition_bounds(walk, deco, "a0",
                                         np.array([[1.0]], dtype=complex), "a1")
    assert rep.supported_in_recurrent
    assert rep.equalities_hold
