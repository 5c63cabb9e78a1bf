"""Model file format: round trips and parser rejection behavior."""

import numpy as np
import pytest

from planarz import (
    FactorGraph,
    ForneyGraph,
    ModelError,
    exact_log_z,
    exact_log_z_factor,
    parse_model,
    write_factor_graph,
    write_forney,
)

from builders import ladder_graph, random_planar_forney


def test_forney_round_trip_preserves_z():
    for seed in range(5):
        g = random_planar_forney(seed)
        g2 = parse_model(write_forney(g))
        assert isinstance(g2, ForneyGraph)
        assert set(g2.edges) == set(g.edges)
        assert exact_log_z(g2) == pytest.approx(exact_log_z(g), rel=1e-12)


def test_forney_written_neighbor_order_is_canonical():
    g = ladder_graph()
    g2 = parse_model(write_forney(g))
    for a in g2.nodes:
        assert list(g2.neighbors[a]) == sorted(g2.neighbors[a])


def test_factor_graph_round_trip():
    rng = np.random.default_rng(0)
    fg = FactorGraph(
        ["x", "y", "z"],
        [
            ("A", ("x", "y"), rng.uniform(0.2, 2.0, 4)),
            ("B", ("y", "z"), rng.uniform(0.2, 2.0, 4)),
            ("C", ("z",), rng.uniform(0.2, 2.0, 2)),
            ("D", ("x", "y", "z"), rng.uniform(0.2, 2.0, 8)),
        ],
    )
    fg2 = parse_model(write_factor_graph(fg))
    assert isinstance(fg2, FactorGraph)
    assert [f.id for f in fg2.factors] == ["A", "B", "C", "D"]
    assert fg2.factors[3].scope == ("x", "y", "z")
    assert exact_log_z_factor(fg2) == pytest.approx(exact_log_z_factor(fg), rel=1e-14)


def test_comments_and_blank_lines_ignored():
    text = """\
# a model
forney 2   # header

edge a b
factor a 1 1  # table
factor b 1 1
"""
    g = parse_model(text)
    assert g.num_nodes == 2


REJECTED = [
    "",  # no header
    "forney x\n",  # bad count
    "forney 2\nedge a b\nfactor a 1 1\n",  # missing table
    "forney 1\nedge a a\nfactor a 1 1\n",  # self loop
    "forney 2\nedge a b\nfactor a 1 1\nfactor b 1 1\nfactor b 1 1\n",  # duplicate
    "forney 2\nedge a b\nfactor a 1 1\nfactor b 1 1\nbogus x\n",  # unknown directive
    "forney 3\nedge a b\nfactor a 1 1\nfactor b 1 1\n",  # node count mismatch
    "forney 2\nedge a b\nfactor a 1 1\nfactor b 1 nan\n",  # non-finite value
    "factorgraph 1\nvar x\nfactor f x 1\n",  # token count fits no scope size
    "factorgraph 1\nvar x\nfactor f y 1 2\n",  # unknown variable
]


@pytest.mark.parametrize("text", REJECTED)
def test_parser_rejections(text):
    with pytest.raises(ModelError):
        parse_model(text)


def test_parser_reports_line_numbers():
    with pytest.raises(ModelError, match="line 3"):
        parse_model("forney 2\nedge a b\nbogus\n")
