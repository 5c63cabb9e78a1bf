"""Loop corrections: the 2-regular term, the full series, and the oracle.

Three-way agreement is the point: the matching-based series, the brute
enumeration of generalized loops, and exhaustive state enumeration must
all coincide. The ladder census (counts per removal set) is frozen from a
hand derivation.
"""

from collections import Counter

import pytest

from planarz import (
    BPConfig,
    ForneyGraph,
    ModelError,
    enumerate_loops,
    exact_log_z,
    loop_correction,
    pfaffian_series,
    run_bp,
    term_ranking,
    triplet_nodes,
    z_empty,
)
from planarz.series import format_term_log
from builders import cycle_forney, ladder_graph, random_planar_forney


def _bp(g):
    res = run_bp(g, BPConfig())
    assert res.converged
    return res


# ---------------------------------------------------------------- loop oracle


def test_cycle_has_one_loop():
    g = cycle_forney(6, seed=0)
    res = _bp(g)
    loops = enumerate_loops(g, res)
    assert len(loops) == 1
    assert len(loops[0].edges) == 6
    assert loops[0].triplets == ()


def test_ladder_loop_census():
    # frozen by hand for the 2x4 ladder: 7 two-regular loops and 7 loops
    # with degree-3 nodes, grouped by which nodes have degree 3
    g = ladder_graph(seed=4)
    res = _bp(g)
    loops = enumerate_loops(g, res)
    assert len(loops) == 14
    regular = enumerate_loops(g, res, regular_only=True)
    assert len(regular) == 7
    census = Counter(l.triplets for l in loops)
    assert census[()] == 7
    assert census[("b1", "t1")] == 2
    assert census[("b2", "t2")] == 2
    assert census[("b1", "b2")] == 1
    assert census[("t1", "t2")] == 1
    assert census[("b1", "b2", "t1", "t2")] == 1
    # interleaved pairs cannot close a generalized loop on the ladder
    assert census[("b1", "t2")] == 0
    assert census[("b2", "t1")] == 0


def test_loop_weights_product_form():
    g = ladder_graph(seed=4)
    res = _bp(g)
    from planarz import mu_term

    for loop in enumerate_loops(g, res):
        want = 1.0
        seen = set()
        for u, v in loop.edges:
            seen.add(u)
            seen.add(v)
        for a in seen:
            inside = tuple(b for b in g.neighbors[a] if tuple(sorted((a, b))) in loop.edges)
            want *= mu_term(res, a, inside)
        assert loop.weight == pytest.approx(want, rel=1e-12)


def test_loop_correction_streams_same_total():
    g = ladder_graph(seed=4)
    res = _bp(g)
    total, count = loop_correction(g, res)
    loops = enumerate_loops(g, res)
    assert count == len(loops)
    assert total == pytest.approx(1.0 + sum(l.weight for l in loops), rel=1e-14)


def test_loop_enumeration_caps():
    g = random_planar_forney(0)
    res = _bp(g)
    big = cycle_forney(25, seed=0)
    res_big = _bp(big)
    with pytest.raises(ModelError):
        enumerate_loops(big, res_big)


# ---------------------------------------------------------------- z_empty


def test_z_empty_exact_on_single_cycle():
    # one loop, and the matching construction must reproduce it exactly
    for seed in range(5):
        g = cycle_forney(5 + seed, seed=seed)
        res = _bp(g)
        corr = z_empty(g, res)
        total, _ = loop_correction(g, res)
        assert corr.to_float() == pytest.approx(total, rel=1e-12)
        est = res.log_z_bp + corr.log_magnitude
        assert est == pytest.approx(exact_log_z(g), rel=1e-12)


def test_z_empty_matches_regular_loop_sum():
    for seed in range(8):
        g = random_planar_forney(seed)
        res = _bp(g)
        corr = z_empty(g, res)
        total, _ = loop_correction(g, res, regular_only=True)
        assert corr.to_float() == pytest.approx(total, rel=1e-10), f"seed {seed}"


def test_z_empty_empty_graph_is_one():
    g = ForneyGraph({}, {})

    class _Res:
        pass

    assert z_empty(g, None).to_float() == 1.0


# ---------------------------------------------------------------- full series


def test_series_terms_match_loop_groups():
    # every removal-set term equals the summed weights of the loops whose
    # degree-3 set is exactly that removal set (plus 1 for the empty set)
    g = ladder_graph(seed=11)
    res = _bp(g)
    series = pfaffian_series(g, res)
    groups: dict = {}
    for loop in enumerate_loops(g, res):
        groups[loop.triplets] = groups.get(loop.triplets, 0.0) + loop.weight
    for term in series.terms:
        want = groups.get(term.psi, 0.0) + (1.0 if term.psi == () else 0.0)
        assert term.contribution.to_float() == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_series_total_matches_oracle_and_exact():
    for seed in (1, 3, 5, 7):
        g = random_planar_forney(seed)
        res = _bp(g)
        series = pfaffian_series(g, res)
        assert series.complete
        total, _ = loop_correction(g, res)
        assert series.z_total.to_float() == pytest.approx(total, rel=1e-9), f"seed {seed}"
        est = res.log_z_bp + series.z_total.log_magnitude
        assert est == pytest.approx(exact_log_z(g), rel=1e-9), f"seed {seed}"


def test_series_term_count():
    g = ladder_graph(seed=0)
    res = _bp(g)
    series = pfaffian_series(g, res)
    # 4 degree-3 nodes: 1 empty + 6 pairs + 1 quadruple
    assert len(series.terms) == 8
    assert series.terms[0].psi == ()
    sizes = [len(t.psi) for t in series.terms]
    assert sizes == sorted(sizes)


def test_series_budget_truncates():
    g = ladder_graph(seed=0)
    res = _bp(g)
    series = pfaffian_series(g, res, budget=3)
    assert len(series.terms) == 3
    assert not series.complete


def test_series_max_psi_size():
    g = ladder_graph(seed=0)
    res = _bp(g)
    series = pfaffian_series(g, res, max_psi_size=2)
    assert len(series.terms) == 7
    assert not series.complete
    full = pfaffian_series(g, res)
    for a, b in zip(series.terms, full.terms):
        assert a.psi == b.psi


def test_triplet_nodes_sorted():
    g = ladder_graph(seed=0)
    assert triplet_nodes(g) == ("b1", "b2", "t1", "t2")


def test_term_ranking_descending():
    g = ladder_graph(seed=11)
    res = _bp(g)
    series = pfaffian_series(g, res)
    ranked = term_ranking(series.terms)
    mags = [t.contribution.log_magnitude for t in ranked]
    assert mags == sorted(mags, reverse=True)
    assert ranked[0].psi == ()


def test_format_term_log_lines():
    g = ladder_graph(seed=0)
    res = _bp(g)
    series = pfaffian_series(g, res)
    text = format_term_log(series.terms)
    lines = text.strip().split("\n")
    assert len(lines) == len(series.terms)
    assert lines[0].startswith("psi - sign")
    assert "b1,b2" in text
