import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anyonsim import category as cat
from anyonsim.category import FMatrix, SkeletalData
from anyonsim.errors import InconsistentDataError, NumericalError, StructuralError
from anyonsim.theories import build_ising, build_tambara_yamagami, build_theory

BUILT = [("ising", 1, 1), ("ising", 1, -1)] + [("ty", n, k) for n in (1, 2, 3) for k in (1, -1)]


@pytest.mark.parametrize("kind,n,kappa", BUILT)
def test_built_data_is_consistent(kind, n, kappa):
    data = build_theory(kind, n, kappa)
    assert cat.validate_fusion_rules(data.rules) == []
    assert cat.check_pentagon(data)[0] < 1e-9
    assert cat.check_f_unitary(data)
    assert cat.check_triangle(data)
    assert cat.dimension_identity_residual(data.rules) < 1e-9


@pytest.mark.parametrize("n", [1, 2, 3])
def test_ty_dimensions(n):
    rules = build_tambara_yamagami(n).rules
    d = cat.quantum_dimensions(rules)
    assert np.allclose(d[:-1], 1, atol=1e-12)
    assert d[-1] == pytest.approx(math.sqrt(2**n), abs=1e-12)
    # D^2 = |G| + d_q^2 = 2|G|
    assert cat.total_dimension(rules) == pytest.approx(math.sqrt(2 ** (n + 1)), abs=1e-12)


def test_ising_dimension_and_indicators():
    for kappa in (1, -1):
        data = build_ising(kappa)
        assert cat.quantum_dimensions(data.rules)[2] == pytest.approx(math.sqrt(2), abs=1e-12)
        t, fs = cat.pivotal_and_fs(data)
        assert fs == {0: 1, 1: 1, 2: kappa}
        assert np.allclose(t, [1, 1, kappa])


@pytest.mark.parametrize("n", [1, 2, 3])
def test_group_labels_have_trivial_indicator(n):
    for kappa in (1, -1):
        _, fs = cat.pivotal_and_fs(build_tambara_yamagami(n, kappa))
        assert all(fs[g] == 1 for g in range(2**n))
        assert fs[2**n] == kappa


def test_fusion_rule_validation_catches_errors():
    rules = build_ising().rules
    N = rules.N.copy()
    N[2, 1, 2] = 0  # breaks commutativity
    bad = cat.FusionRules(rules.labels, rules.dual, N)
    assert any("commut" in p or "symmetr" in p for p in cat.validate_fusion_rules(bad))
    with pytest.raises(StructuralError):
        cat.FusionRules(("0", "1"), (0, 1), np.zeros((3, 3, 3), dtype=int))


def test_quantum_dimensions_reject_non_fusion_matrix():
    N = np.zeros((2, 2, 2), dtype=int)
    N[0, 0, 0] = N[0, 1, 1] = N[1, 0, 1] = 1
    # 1 x 1 = 0 is missing, so label 1 has no positive dimension
    with pytest.raises(NumericalError):
        cat.quantum_dimensions(cat.FusionRules(("0", "1"), (0, 1), N))


def test_corrupted_f_is_detected():
    data = build_ising()
    F = dict(data.F)
    F[(1, 2, 1, 2)] = FMatrix((2,), (2,), np.array([[1.0 + 0j]]))
    broken = SkeletalData(data.rules, F, None, "broken")
    assert cat.check_pentagon(broken)[0] > 0.5


def test_hexagon_detects_wrong_r(ising):
    assert cat.check_hexagon(ising)[0] < 1e-7
    R = {ab: {c: v.conjugate() if ab == (2, 2) and c == 0 else v for c, v in ch.items()} for ab, ch in ising.R.items()}
    assert cat.check_hexagon(ising.with_R(R))[0] > 1e-3


def test_missing_entries_raise():
    data = build_ising()
    with pytest.raises(StructuralError):
        data.fmat(2, 2, 2, 1)  # q q q cannot fuse to 1... as (2,2,2,1) is inadmissible
    with pytest.raises(StructuralError):
        data.r(2, 2, 0)


def test_leg_bending_moduli():
    data = build_ising()
    for a, b, c in [(2, 1, 2), (2, 2, 0), (2, 2, 1), (1, 2, 2)]:
        lb = cat.leg_bending(data, a, b, c)
        for v in lb.values():
            assert abs(v) == pytest.approx(1, abs=1e-12)


def test_ising_spins_and_s_matrix(ising):
    theta = cat.topological_spins(ising)
    assert theta[0] == pytest.approx(1)
    assert theta[1] == pytest.approx(-1)
    assert theta[2] == pytest.approx(np.exp(1j * np.pi / 8))
    S, modular = cat.s_matrix(ising)
    r = 1 / math.sqrt(2)
    expected = 0.5 * np.array([[1, 1, 2 * r], [1, 1, -2 * r], [2 * r, -2 * r, 0]])
    assert modular
    assert np.allclose(S, expected, atol=1e-9)


def test_monodromy_of_two_q(ising):
    theta = cat.topological_spins(ising)
    for c, sign in ((0, 1), (1, -1)):
        m = cat.monodromy(ising, 2, 2, c)
        assert m == pytest.approx(theta[2] ** -2 * sign, abs=1e-9)


def test_gauge_transform_rejects_bad_phases():
    rules = build_ising().rules
    with pytest.raises(InconsistentDataError):
        cat.gauge_transform(build_ising(), {(2, 2, 0): 2.0})
    with pytest.raises(InconsistentDataError):
        cat.gauge_transform(build_ising(), {(0, 2, 2): 1j})
    assert set(cat.random_gauge(rules, np.random.default_rng(0))) == {
        (a, b, c) for a in (1, 2) for b in (1, 2) for c in rules.outcomes(a, b)
    }


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_gauge_invariants_ising(ising, seed):
    g = cat.gauge_transform(ising, cat.random_gauge(ising.rules, np.random.default_rng(seed)))
    assert cat.check_pentagon(g)[0] < 1e-9
    assert cat.check_hexagon(g)[0] < 1e-7
    assert cat.check_f_unitary(g)
    assert np.allclose(cat.topological_spins(g), cat.topological_spins(ising), atol=1e-9)
    assert cat.pivotal_and_fs(g)[1] == cat.pivotal_and_fs(ising)[1]
    for c in (0, 1):
        assert abs(cat.monodromy(g, 2, 2, c) - cat.monodromy(ising, 2, 2, c)) < 1e-9
    assert np.allclose(cat.s_matrix(g)[0], cat.s_matrix(ising)[0], atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2]), st.sampled_from([1, -1]))
def test_gauge_invariants_ty(seed, n, kappa):
    data = build_tambara_yamagami(n, kappa)
    g = cat.gauge_transform(data, cat.random_gauge(data.rules, np.random.default_rng(seed)))
    assert cat.check_pentagon(g)[0] < 1e-9
    assert cat.check_f_unitary(g)
    assert cat.pivotal_and_fs(g)[1] == cat.pivotal_and_fs(data)[1]


@pytest.mark.parametrize("kind,n,kappa", BUILT)
def test_json_round_trip_is_exact(kind, n, kappa):
    data = build_theory(kind, n, kappa)
    data = cat.gauge_transform(data, cat.random_gauge(data.rules, np.random.default_rng(3)))
    again = cat.loads(cat.dumps(data))
    assert again.rules.labels == data.rules.labels
    assert np.array_equal(again.rules.N, data.rules.N)
    for key, m in data.F.items():
        assert np.array_equal(again.F[key].matrix, m.matrix)
        assert again.F[key].rows == m.rows


def test_json_round_trip_with_r(ising):
    again = cat.loads(cat.dumps(ising, {"note": "x"}))
    assert again.R == ising.R


@pytest.mark.parametrize(
    "text",
    ["{", "[]", '{"labels": ["0"], "dual": [0], "fusion": [[0, 0, 0]], "F": [{"abcd": [0, 0, 0, 0]}]}',
     '{"labels": ["0"], "dual": [0], "fusion": [[0, 0, 0]], "F": [{"abcd": [0, 0, 5, 0], "rows": [0], "cols": [0], "entries": [[1, 0]]}]}'],
)
def test_malformed_json_raises_structural_error(text):
    with pytest.raises(StructuralError):
        cat.loads(text)


def test_cyclic_ty_pentagon():
    for m in (3, 4):
        data = build_theory("abelian_group", m)
        assert cat.check_pentagon(data)[0] < 1e-9
        assert cat.check_f_unitary(data)
