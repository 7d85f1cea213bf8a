import numpy as np
import pytest

import oqw
from oqw import fixtures
from oqw.errors import InputError, ShapeError
from oqw.walk import DiagonalObservable, DiagonalState, identity_observable

from conftest import E1, random_density, random_hermitian


def test_validate_single_site_identity():
    walk = oqw.WalkSpec(("0",), {"0": 1}, {("0", "0"): np.array([[1.0]])})
    report = oqw.validate_walk(walk)
    assert report.accepted
    assert report.max_residual == 0.0


def test_validate_trap_walk_accepted(trap_walk):
    report = oqw.validate_walk(trap_walk)
    assert report.accepted
    assert report.max_residual <= 1e-14


def test_validate_rejects_scaled_block(trap_walk):
    trans = dict(trap_walk.transitions)
    trans[("1", "0")] = 1.1 * trans[("1", "0")]
    bad = oqw.WalkSpec(trap_walk.sites, trap_walk.dims, trans)
    report = oqw.validate_walk(bad)
    assert not report.accepted
    # direct arithmetic: sum L†L at source 0 becomes diag(1.21, 1)
    assert report.residuals["0"] == pytest.approx(0.21, abs=1e-12)


def test_shape_mismatch_names_offender():
    with pytest.raises(ShapeError, match=r"\('1', '0'\)"):
        oqw.WalkSpec(("0", "1"), {"0": 2, "1": 1},
                     {("1", "0"): np.eye(2)})


def test_duplicate_sites_rejected():
    with pytest.raises(InputError):
        oqw.WalkSpec(("0", "0"), {"0": 1}, {})


def test_apply_step_identity_site():
    walk = oqw.WalkSpec(("0",), {"0": 2}, {("0", "0"): np.eye(2)})
    rho = random_density(np.random.default_rng(0), 2)
    out = oqw.apply_step(walk, oqw.site_state(walk, "0", rho))
    assert np.allclose(out.blocks["0"], rho)


def test_apply_step_trap_walk_moves_e1(trap_walk):
    out = oqw.apply_step(trap_walk, oqw.site_state(trap_walk, "0", E1))
    assert np.allclose(out.blocks["1"], E1)
    assert np.abs(out.blocks["0"]).max() == 0.0
    assert np.abs(out.blocks["2"]).max() == 0.0


def test_apply_step_matches_classical_chain():
    t = np.array([[0.3, 0.6], [0.7, 0.4]])
    walk = oqw.minimal_dilation(t)
    state = oqw.site_state(walk, "0", np.array([[1.0]]))
    out = oqw.apply_step(walk, state)
    assert out.blocks["0"][0, 0].real == pytest.approx(0.3)
    assert out.blocks["1"][0, 0].real == pytest.approx(0.7)


def test_trace_preserved_on_random_states(trap_walk, ring_walk):
    rng = np.random.default_rng(1)
    for walk in (trap_walk, ring_walk):
        blocks = {s: random_density(rng, walk.dims[s]) / len(walk.sites)
                  for s in walk.sites}
        state = DiagonalState(blocks)
        stepped = oqw.apply_step(walk, state)
        assert stepped.trace() == pytest.approx(state.trace(), abs=1e-10)


def test_dual_apply_fixes_identity(trap_walk, ring_walk, ruin_walk):
    for walk in (trap_walk, ring_walk, ruin_walk):
        out = oqw.dual_apply(walk, identity_observable(walk))
        for s in walk.sites:
            assert np.abs(out.blocks[s] - np.eye(walk.dims[s])).max() <= 1e-10


def test_dual_step_fixed_point_of_printed_return_kraus():
    # the qubit return map with Kraus pair [[0,0],[0,1]], [[0,0],[s3/2,0]]
    # fixes diag(3/4, 1) under its dual
    k1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    k2 = np.array([[0.0, 0.0], [np.sqrt(3) / 2, 0.0]], dtype=complex)
    x = np.diag([0.75, 1.0]).astype(complex)
    out = k1.conj().T @ x @ k1 + k2.conj().T @ x @ k2
    assert np.allclose(out, x, atol=1e-14)


def test_dual_apply_is_contractive(ring_walk):
    rng = np.random.default_rng(2)
    for _ in range(20):
        obs = DiagonalObservable({s: random_hermitian(rng, ring_walk.dims[s])
                                  for s in ring_walk.sites})
        out = oqw.dual_apply(ring_walk, obs)
        norm_in = max(np.abs(np.linalg.eigvalsh(b)).max() for b in obs.blocks.values())
        norm_out = max(np.abs(np.linalg.eigvalsh(b)).max() for b in out.blocks.values())
        assert norm_out <= norm_in + 1e-10


def test_minimal_dilation_validates_and_rejects():
    t = np.array([[0.0, 1.0], [1.0, 0.0]])
    walk = oqw.minimal_dilation(t)
    assert oqw.validate_walk(walk).accepted
    with pytest.raises(InputError):
        oqw.minimal_dilation(np.array([[0.5, 0.2], [0.4, 0.8]]))
    with pytest.raises(InputError):
        oqw.minimal_dilation(np.array([[-0.1, 1.0], [1.1, 0.0]]))


def test_minimal_dilation_path_graph_amplitudes():
    t = np.zeros((3, 3))
    t[1, 0] = 1.0
    t[0, 1] = t[2, 1] = 0.5
    t[1, 2] = 1.0
    walk = oqw.minimal_dilation(t)
    assert walk.block("0", "1")[0, 0] == pytest.approx(np.sqrt(0.5))


def test_invariant_state_symmetric_two_cycle():
    walk = oqw.minimal_dilation(np.array([[0.5, 0.5], [0.5, 0.5]]))
    tau, dim = oqw.invariant_state(walk)
    assert dim == 1
    assert tau.blocks["0"][0, 0].real == pytest.approx(0.5, abs=1e-10)


def test_invariant_state_unitary_single_site():
    u = np.array([[0, 1], [1, 0]], dtype=complex)
    walk = oqw.WalkSpec(("0",), {"0": 2}, {("0", "0"): u})
    tau, _ = oqw.invariant_state(walk)
    # the deterministic extraction lands on the maximally mixed state
    assert np.allclose(tau.blocks["0"], np.eye(2) / 2, atol=1e-10)


def test_invariant_state_residual(trap_walk, ring_walk, branch_walk):
    for walk in (trap_walk, ring_walk, branch_walk):
        tau, _ = oqw.invariant_state(walk)
        stepped = oqw.apply_step(walk, tau)
        resid = sum(np.abs(np.linalg.eigvalsh(
            stepped.blocks[s] - tau.blocks[s])).sum() for s in walk.sites)
        assert resid <= 1e-8


def test_trap_walk_invariant_supported_on_trap_and_cycle(trap_walk):
    tau, dim = oqw.invariant_state(trap_walk)
    assert dim == 5
    # e2 direction at sites 0/1 carries no invariant mass
    assert abs(tau.blocks["0"][1, 1]) <= 1e-10
    assert abs(tau.blocks["1"][1, 1]) <= 1e-10
    assert np.trace(tau.blocks["2"]).real > 0.5


def test_detailed_balance_flat_state_on_ring(ring_walk):
    tau, _ = oqw.invariant_state(ring_walk)
    report = oqw.check_detailed_balance(ring_walk, tau)
    assert report.sufficient_condition_holds
    assert report.selfadjoint_within_tol


def test_detailed_balance_reversible_birth_death():
    # birth-death chains are reversible for their stationary distribution
    t = np.zeros((3, 3))
    t[1, 0] = 0.4
    t[0, 0] = 0.6
    t[0, 1], t[2, 1] = 0.3, 0.2
    t[1, 1] = 0.5
    t[1, 2] = 0.7
    t[2, 2] = 0.3
    walk = oqw.minimal_dilation(t)
    tau, _ = oqw.invariant_state(walk)
    report = oqw.check_detailed_balance(walk, tau)
    assert report.sufficient_condition_holds
    assert report.selfadjoint_within_tol


def test_detailed_balance_fails_on_asymmetric_cycle():
    walk = fixtures.cycle_dilation(3, bias=0.8)
    tau, _ = oqw.invariant_state(walk)
    report = oqw.check_detailed_balance(walk, tau)
    assert not report.selfadjoint_within_tol
    assert report.selfadjoint_residual > 0.1


def test_detailed_balance_requires_faithful_state(ring_walk):
    bad = DiagonalState({s: np.diag([1.0, 0.0]).astype(complex) / 3
                         for s in ring_walk.sites})
    with pytest.raises(InputError, match="faithful"):
        oqw.check_detailed_balance(ring_walk, bad)


def test_sufficient_condition_implies_selfadjoint(ring_walk, ruin_walk):
    for walk in (ring_walk,):
        tau, _ = oqw.invariant_state(walk)
        report = oqw.check_detailed_balance(walk, tau)
        if report.sufficient_condition_holds:
            assert report.selfadjoint_within_tol


def test_walk_arrays_are_immutable(trap_walk):
    with pytest.raises(ValueError):
        trap_walk.transitions[("1", "0")][0, 0] = 9.0
