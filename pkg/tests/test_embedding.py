import math

import numpy as np
import pytest

from stratcap import capacity as cap
from stratcap import embedding as emb
from stratcap.errors import InvalidArgument
from stratcap.suites import standard_suite

from conftest import operator


@pytest.fixture(scope="module")
def setup():
    op = operator("r1", 64)
    g = op.grid
    family = emb.build_family(g, cap=200, seed=0)
    ev = emb.FamilyEvaluation(g, family, lambda E: cap.riesz_capacity(op, 0.2, 2, E), emb.default_t_levels(g))
    return op, g, ev


def _tent_by_hand(grid, member, t):
    # R1 only: (x, t) is in the tent iff every node y with |y - x| < t exists and lies in O
    x = grid.coords[:, 0]
    h = grid.spacing[0]
    out = np.zeros(grid.n, dtype=bool)
    for i in range(grid.n):
        reach = int(np.ceil(t / h - 1e-12)) - 1
        js = range(i - reach, i + reach + 1)
        out[i] = all(0 <= j < grid.n and member[j] and abs(x[j] - x[i]) < t for j in js)
    return out


def test_tent_whole_box_and_empty(setup):
    _, g, _ = setup
    tl = emb.default_t_levels(g)
    whole = cap.DiscreteSet(g, np.ones(g.n, bool))
    T = emb.tent(g, whole, tl)
    for k, t in enumerate(tl):
        np.testing.assert_array_equal(T[:, k], _tent_by_hand(g, whole.membership, t))
    assert not emb.tent(g, cap.DiscreteSet.empty(g), tl).any()


def test_tent_of_ball_by_hand(setup):
    _, g, _ = setup
    tl = emb.default_t_levels(g)
    O = cap.DiscreteSet.ball(g, [0.1], 0.3)
    T = emb.tent(g, O, tl)
    for k, t in enumerate(tl):
        np.testing.assert_array_equal(T[:, k], _tent_by_hand(g, O.membership, t))


def test_tent_identities_disjoint_balls(setup):
    _, g, _ = setup
    tl = emb.default_t_levels(g)
    O1 = cap.DiscreteSet.ball(g, [-0.4], 0.2)
    O2 = cap.DiscreteSet.ball(g, [0.4], 0.2)
    rep = emb.tent_identity_report(g, O1, O2, tl)
    assert rep["intersection_identity"] and rep["union_contains_union"] and rep["antitone_in_t"]
    # read literally, T(O1 u O2) = T(O1) n T(O2) fails for disjoint balls with nonempty tents
    assert rep["union_as_intersection"] is False


def test_family_is_deterministic_and_capped():
    g = operator("r1", 64).grid
    a = emb.build_family(g, cap=150, seed=3)
    b = emb.build_family(g, cap=150, seed=3)
    assert len(a) == 150 and all(x == y for x, y in zip(a, b))
    assert len({S.key() for S in a}) == len(a)


def test_cp_single_atom_exhaustive(setup):
    op, g, ev = setup
    tl = emb.default_t_levels(g)
    node, level = g.identity_node, 1
    mu = emb.DiscreteMeasure(g, [node], [0.7], [level], tl)
    containing = [c for c, T in zip(ev.capacities, ev.tents) if T[node, level]]
    want = min(containing) if containing else math.inf
    assert emb.cp_minimizing(op, None, mu, 0.5, ev) == want
    assert math.isinf(emb.cp_minimizing(op, None, mu, 0.8, ev))


def test_cp_monotone_in_t(setup):
    op, g, ev = setup
    mu = emb.random_measure(g, 6, seed=2)
    ts = np.linspace(0.05, 1.0, 20) * mu.total
    vals = [emb.cp_minimizing(op, None, mu, t, ev) for t in ts]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_carleson_zero_measure_and_homogeneity(setup):
    op, g, ev = setup
    suite = standard_suite(g, 5)
    mu = emb.random_measure(g, 5, seed=1)
    zero = emb.carleson_embedding_verify(op, 0.5, 0.2, 2, 2, mu.scaled(0.0), suite, ev)
    assert all(v == 0 for v in zero.constants.values())
    a = emb.carleson_embedding_verify(op, 0.5, 0.2, 2, 4, mu, suite, ev).constants["(iv) capacity"]
    b = emb.carleson_embedding_verify(op, 0.5, 0.2, 2, 4, mu.scaled(16.0), suite, ev).constants["(iv) capacity"]
    assert b / a == pytest.approx(4.0, rel=1e-12)


def test_carleson_constants_finite(setup):
    op, g, ev = setup
    suite = standard_suite(g, 5)
    for seed in range(3):
        mu = emb.random_measure(g, 5, seed=seed)
        rep = emb.carleson_embedding_verify(op, 0.5, 0.25, 2, 2, mu, suite, ev)
        c = rep.constants
        if math.isfinite(c["(iv) capacity"]):
            assert math.isfinite(c["(i) strong-type"])
        assert c["(iii) weak-type"] <= c["(i) strong-type"]
        assert rep.extra["preconditions"]["p_range"] is False  # p = 2 = Q / (2 s) sits on the boundary
    heat = emb.carleson_embedding_verify(op, 0.5, 0.2, 2, 2, mu, suite, ev, parameterization="heat")
    assert math.isfinite(heat.constants["(i) strong-type"])


def test_carleson_q_below_p(setup):
    op, g, ev = setup
    mu = emb.random_measure(g, 5, seed=4)
    rep = emb.carleson_embedding_verify(op, 0.5, 0.2, 2, 1, mu, standard_suite(g, 3), ev)
    assert "(ii) cp integral" in rep.constants and "(ii) cp dyadic sum" in rep.constants
    c = rep.constants
    assert all(math.isfinite(v) and v > 0 for v in c.values())
    assert c["(iii) weak-type"] <= c["(i) strong-type"]


def test_trace_examples():
    op = operator("r1", 64)
    g = op.grid
    family = emb.build_family(g, cap=150, seed=0)
    ev = emb.FamilyEvaluation(g, family, lambda E: cap.riesz_capacity(op, 0.2, 2, E))
    suite = standard_suite(g, 5)
    ball = cap.DiscreteSet.ball(g, [0.0], 0.3 * g.inradius())
    nu = emb.DiscreteMeasure(g, ball.nodes, np.full(ball.size, g.cell_volume))
    rep = emb.trace_embedding_verify(op, 0.2, 2, 2, nu, suite, ev)
    assert all(math.isfinite(v) and v > 0 for v in rep.constants.values())
    zero = emb.trace_embedding_verify(op, 0.2, 2, 2, nu.scaled(0.0), suite, ev)
    assert all(v == 0 for v in zero.constants.values())
    with pytest.raises(InvalidArgument):
        emb.trace_embedding_verify(op, 0.2, 2, 2, emb.random_measure(g, 3), suite, ev)


def test_tent_lower_bound():
    op = operator("r1", 128)
    g = op.grid
    R = g.inradius()
    vals = [emb.tent_lower_bound_check(op, 0.5, cap.DiscreteSet.ball(g, [0.0], r * R), g.constant(1.0))
            for r in (0.6, 0.4, 0.2)]
    assert all(0 < v <= 1 for v in vals)
    assert all(b >= a for a, b in zip(vals, vals[1:]))
    O = cap.DiscreteSet.ball(g, [0.0], 0.5 * R)
    assert emb.tent_lower_bound_check(op, 0.5, O, O.indicator()) > 0


def test_read_measure_csv(tmp_path):
    g = operator("r1", 64).grid
    tl = emb.default_t_levels(g)
    x = float(g.coords[30, 0])
    p = tmp_path / "mu.csv"
    p.write_text(f"x,t,weight\n{x!r},{float(tl[2])!r},0.5\n")
    mu = emb.read_measure_csv(p, g)
    assert list(mu.nodes) == [30] and list(mu.levels) == [2] and mu.total == 0.5
    bad = tmp_path / "bad.csv"
    bad.write_text(f"x,t,weight\n{x!r},{float(tl[2]) * 1.1!r},0.5\n")
    with pytest.raises(InvalidArgument):
        emb.read_measure_csv(bad, g)
