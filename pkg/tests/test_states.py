import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anyonsim import category as cat
from anyonsim.errors import CapabilityError, PreconditionError, StructuralError, ZeroProbabilityOutcome
from anyonsim.states import (
    braid_counter,
    braid_generator,
    braid_word,
    change_basis,
    count_braids,
    enumerate_basis,
    f_move,
    fidelity,
    fuse_measure,
    get_basis,
    left_comb,
    make_state,
    outcome_distribution,
    overlap,
    pair_create,
    phase_equal,
    random_state,
    register_state,
    remove_vacuum,
    split,
    stump_matrix,
    stump_matrix_by_engine,
    to_comb,
    to_pairwise,
    tree_from_nested,
    vacuum_state,
)
from anyonsim.theories import build_ising, build_tambara_yamagami

Q = 2  # label index of q in Ising


def test_basis_enumeration_counts():
    ising = build_ising()
    assert enumerate_basis(ising, (Q, Q)) == [(0,), (1,)]
    assert len(enumerate_basis(ising, (Q,) * 4, total_charge=0)) == 2
    assert len(enumerate_basis(ising, (Q,) * 4)) == 4
    # 2p q's carry 2^p pair-channel strings
    assert len(enumerate_basis(ising, (Q,) * 6)) == 8
    ty2 = build_tambara_yamagami(2)
    assert len(enumerate_basis(ty2, (4, 4))) == 4


def test_basis_rejects_bad_input():
    ising = build_ising()
    with pytest.raises(StructuralError):
        get_basis(ising, (Q, Q, Q), ((0, 2),))
    with pytest.raises(StructuralError):
        get_basis(ising, (7, Q), ((0, 2),))
    with pytest.raises(StructuralError):
        make_state(ising, (Q, Q), {(2,): 1.0})
    with pytest.raises(StructuralError):
        tree_from_nested(((0, 2), 1))


def test_pair_create_from_vacuum():
    ising = build_ising()
    s = pair_create(vacuum_state(ising), 0, Q)
    assert s.leaves == (Q, Q)
    assert s.amplitudes(1e-12) == {(0,): 1}


def test_pair_on_the_right_embeds():
    ising = build_ising()
    phi = make_state(ising, (Q, Q), {(0,): 0.6, (1,): 0.8j})
    s = to_pairwise(pair_create(phi, 2, Q))
    amps = s.amplitudes(1e-12)
    # labeling is (k1, k2, total); the new pair sits in channel 0
    assert set(amps) == {(0, 0, 0), (1, 0, 1)}
    assert amps[(0, 0, 0)] == pytest.approx(0.6)
    assert amps[(1, 0, 1)] == pytest.approx(0.8j)


def test_f_move_round_trip(rng):
    ising = build_ising()
    s = random_state(ising, (Q,) * 4, rng, tree=left_comb(4))
    for node in s.tree:
        if node[1] - node[0] >= 3:
            try:
                t = f_move(s, node)
            except StructuralError:
                continue
            back = f_move(t, node if node in t.tree else t.tree[-1], inverse=True)
            back = change_basis(back, s.tree)
            assert np.allclose(back.vec, s.vec, atol=1e-12)


def test_change_basis_round_trip_and_overlap(rng):
    ty2 = build_tambara_yamagami(2)
    s = random_state(ty2, (4,) * 4, rng)
    t = random_state(ty2, (4,) * 4, rng)
    other = tree_from_nested((0, ((1, 2), 3)))
    s2 = change_basis(s, other)
    assert s2.norm == pytest.approx(1, abs=1e-12)
    assert np.allclose(change_basis(s2, s.tree).vec, s.vec, atol=1e-12)
    assert overlap(s2, t) == pytest.approx(overlap(s, t), abs=1e-12)


def test_vacuum_padding_is_harmless(rng):
    ising = build_ising()
    s = random_state(ising, (Q, Q), rng)
    padded = split(s, 0, 0, Q)
    assert padded.leaves == (0, Q, Q)
    assert phase_equal(remove_vacuum(padded, 0), s, 1e-12)


def test_braid_inverse_is_identity(ising, rng):
    s = random_state(ising, (Q,) * 4, rng)
    t = braid_generator(braid_generator(s, 1), 1, orientation=-1)
    assert np.allclose(to_pairwise(t).vec, s.vec, atol=1e-12)


def test_pair_monodromy_is_spin_ratio(ising):
    theta = cat.topological_spins(ising)
    for c in (0, 1):
        s = make_state(ising, (Q, Q), {(c,): 1.0})
        t = braid_word(s, [(0, 2)])
        assert overlap(s, t) == pytest.approx(theta[c] * theta[Q] ** -2, abs=1e-12)


def test_middle_monodromy_flips_both_pairs(ising):
    for a in (0, 1):
        for b in (0, 1):
            s = make_state(ising, (Q,) * 4, {(a, b, a ^ b): 1.0})
            t = to_pairwise(braid_word(s, [(1, 2)]))
            amps = t.amplitudes(1e-9)
            assert list(amps) == [(1 - a, 1 - b, a ^ b)]
            assert abs(list(amps.values())[0]) == pytest.approx(1, abs=1e-12)


def test_braiding_requires_r_data(rng):
    ising = build_ising()
    s = random_state(ising, (Q,) * 4, rng)
    before = braid_counter["refused"]
    with count_braids() as counter:
        with pytest.raises(CapabilityError):
            braid_generator(s, 0)
    assert counter == {"calls": 0, "refused": 1}
    assert braid_counter["refused"] == before + 1


def test_fuse_measure_definite_channel():
    ising = build_ising()
    s = pair_create(vacuum_state(ising), 0, Q)
    c, p, out = fuse_measure(s, 0, outcome=0)
    assert (c, out.leaves) == (0, (0,))
    assert p == pytest.approx(1)
    with pytest.raises(ZeroProbabilityOutcome):
        fuse_measure(s, 0, outcome=1)
    with pytest.raises(PreconditionError):
        fuse_measure(s, 0)
    with pytest.raises(PreconditionError):
        fuse_measure(s, 1, outcome=0)


def test_sampled_fusion_follows_born_rule():
    ising = build_ising()
    s = make_state(ising, (Q, Q), {(0,): math.sqrt(0.3), (1,): math.sqrt(0.7)})
    rng = np.random.default_rng(0)
    hits = sum(fuse_measure(s, 0, rng=rng)[0] for _ in range(4000))
    assert hits / 4000 == pytest.approx(0.7, abs=0.03)


def test_outcome_distribution_is_basis_independent(rng):
    # the same state written in two trees gives the same distributions
    ty2 = build_tambara_yamagami(2)
    s = random_state(ty2, (4,) * 6, rng)
    t = change_basis(s, tree_from_nested((((0, (1, 2)), 3), (4, 5))))
    for i in range(5):
        a, b = outcome_distribution(s, i), outcome_distribution(t, i)
        assert a.keys() == b.keys()
        assert all(abs(a[k] - b[k]) < 1e-9 for k in a)
        assert sum(a.values()) == pytest.approx(1, abs=1e-12)


def test_stumps_in_constructed_gauge():
    ising = build_ising()
    z = np.diag([1, -1])
    assert np.allclose(stump_matrix(ising, 0), np.eye(2))
    assert np.allclose(stump_matrix(ising, 1, "left"), z)
    assert np.allclose(stump_matrix(ising, 1, "right"), z)
    assert np.allclose(stump_matrix_by_engine(ising, 1, "left"), z)
    with pytest.raises(PreconditionError):
        stump_matrix(ising, Q)
    with pytest.raises(PreconditionError):
        stump_matrix(ising, 1, "middle")


def test_phase_equal():
    ising = build_ising()
    v = make_state(ising, (Q, Q), {(0,): 0.6, (1,): 0.8})
    assert phase_equal(v, v)
    assert phase_equal(v, make_state(ising, (Q, Q), {(0,): 0.6j, (1,): 0.8j}))
    zero, one = (make_state(ising, (Q, Q), {(k,): 1.0}) for k in (0, 1))
    assert not phase_equal(zero, one)
    assert fidelity(zero, one) == pytest.approx(0)


def test_register_state_factors_product(rng):
    ising = build_ising()
    phi = random_state(ising, (Q, Q), rng)
    s = pair_create(pair_create(phi, 0, Q), 2, Q)  # (q q) (q q) phi
    reg, rest = register_state(s, 4, 6)
    assert rest < 1e-12
    assert phase_equal(reg, phi, 1e-12)


def test_register_state_sees_entanglement():
    ising = build_ising()
    s = pair_create(pair_create(vacuum_state(ising), 0, Q), 1, Q)
    _, rest = register_state(s, 0, 2)
    assert rest == pytest.approx(0.5, abs=1e-12)


words = st.lists(st.tuples(st.integers(0, 4), st.sampled_from([1, -1])), max_size=8)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), words)
def test_braids_preserve_norm(ising, seed, word):
    s = random_state(ising, (Q,) * 6, np.random.default_rng(seed))
    t = braid_word(s, word)
    assert t.norm == pytest.approx(1, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 2))
def test_yang_baxter(ising, seed, i):
    s = random_state(ising, (Q,) * 5, np.random.default_rng(seed))
    left = braid_word(s, [(i, 1), (i + 1, 1), (i, 1)])
    right = braid_word(s, [(i + 1, 1), (i, 1), (i + 1, 1)])
    assert np.allclose(to_pairwise(left).vec, to_pairwise(right).vec, atol=1e-9)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_yang_baxter_and_far_commutation_ty(ty2_braided, seed):
    s = random_state(ty2_braided, (4,) * 4, np.random.default_rng(seed))
    left = braid_word(s, [(0, 1), (1, 1), (0, 1)])
    right = braid_word(s, [(1, 1), (0, 1), (1, 1)])
    assert np.allclose(to_pairwise(left).vec, to_pairwise(right).vec, atol=1e-9)
    a = braid_word(s, [(0, 1), (2, -1)])
    b = braid_word(s, [(2, -1), (0, 1)])
    assert np.allclose(to_pairwise(a).vec, to_pairwise(b).vec, atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(0, 4))
def test_fusion_output_is_normalized(seed, i):
    ty2 = build_tambara_yamagami(2)
    s = random_state(ty2, (4,) * 6, np.random.default_rng(seed))
    dist = outcome_distribution(s, i)
    assert sum(dist.values()) == pytest.approx(1, abs=1e-12)
    c = max(dist, key=dist.get)
    _, p, out = fuse_measure(s, i, outcome=c)
    assert p == pytest.approx(dist[c], abs=1e-12)
    assert out.norm == pytest.approx(1, abs=1e-12)
    assert to_comb(out).norm == pytest.approx(1, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3]))
def test_stump_inverse_law_under_gauges(seed, n):
    data = build_tambara_yamagami(n)
    g = cat.gauge_transform(data, cat.random_gauge(data.rules, np.random.default_rng(seed)))
    for h in range(2**n):
        a = stump_matrix_by_engine(g, h, "left")
        b = stump_matrix_by_engine(g, h, "right")
        assert np.allclose(a @ b, np.eye(2**n), atol=1e-9)
        assert np.allclose(a, stump_matrix(g, h, "left"), atol=1e-9)
