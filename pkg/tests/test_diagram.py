"""Diagram ratio arithmetic and deterministic DOT emission."""

import pathlib

import numpy as np
import pytest

from collabtrees.diagram import DiagramSpec, diagram_spec, emit_dot
from collabtrees.errors import ArgumentError
from collabtrees.xmdi import XmdiMatrix

GOLDEN = pathlib.Path(__file__).parent / "golden"


def test_purely_additive_matrix():
    spec = diagram_spec(XmdiMatrix(np.diag([0.5, 0.25])), 1.0, ["a", "b"])
    assert all(n.additive_ratio == 1.0 for n in spec.nodes)
    assert spec.edges == ()
    assert spec.max_interaction_ratio == 0.0


def test_two_group_ratios():
    m = XmdiMatrix(np.array([[0.1, 0.1], [0.1, 0.0]]))
    spec = diagram_spec(m, 1.0, ["n1", "n2"])
    by_label = {n.label: n for n in spec.nodes}
    assert by_label["n1"].additive_ratio == pytest.approx(0.5)
    assert by_label["n2"].additive_ratio == pytest.approx(0.0)
    drivers = {(e.source, e.target): e.driver for e in spec.edges}
    assert drivers[("n2", "n1")] == pytest.approx(0.5)  # toward n1: 0.1 / 0.2
    assert drivers[("n1", "n2")] == pytest.approx(1.0)  # toward n2: 0.1 / 0.1
    assert spec.max_standardized_importance == pytest.approx(0.2)


def test_zero_matrix_empty_diagram():
    spec = diagram_spec(XmdiMatrix(np.zeros((3, 3))), 1.0, ["a", "b", "c"])
    assert spec.nodes == () and spec.edges == ()
    dot = emit_dot(spec)
    assert dot == "digraph importance {\n}\n"


def test_nonpositive_variance_rejected():
    with pytest.raises(ArgumentError):
        diagram_spec(XmdiMatrix(np.zeros((2, 2))), 0.0, ["a", "b"])


def test_pruning_thresholds():
    vals = np.array([[0.4, 0.00001], [0.00001, 0.00005]])
    spec = diagram_spec(XmdiMatrix(vals), 1.0, ["big", "tiny"])
    assert [n.label for n in spec.nodes] == ["big"]
    assert spec.edges == ()
    spec_all = diagram_spec(XmdiMatrix(vals), 1.0, ["big", "tiny"], node_threshold=0.0, edge_threshold=0.0)
    assert len(spec_all.nodes) == 2 and len(spec_all.edges) == 2


@pytest.mark.parametrize("name,vals,var,labels", [
    ("pair", [[0.1, 0.1], [0.1, 0.0]], 1.0, ["alpha", "beta"]),
    ("additive", np.diag([0.5, 0.25, 0.1]), 0.8, ["a", "b", "c"]),
    ("mixed", [
        [0.40, 0.05, 0.0, 0.0],
        [0.05, 0.30, 0.02, 0.0],
        [0.0, 0.02, 0.10, 0.00005],
        [0.0, 0.0, 0.00005, 0.00005]], 2.0, ["a", "b", "c", "d"]),
])
def test_golden_files(name, vals, var, labels):
    dot = emit_dot(diagram_spec(XmdiMatrix(np.asarray(vals, dtype=float)), var, labels))
    assert dot == (GOLDEN / f"{name}.dot").read_text()


def test_emission_deterministic():
    m = XmdiMatrix(np.array([[0.3, 0.02], [0.02, 0.2]]))
    a = emit_dot(diagram_spec(m, 1.0, ["x", "y"]))
    b = emit_dot(diagram_spec(m, 1.0, ["x", "y"]))
    assert a == b


def test_emission_order_independent():
    vals = np.array([
        [0.40, 0.05, 0.01],
        [0.05, 0.30, 0.02],
        [0.01, 0.02, 0.10],
    ])
    labels = ["a", "b", "c"]
    perm = [2, 0, 1]
    permuted = vals[np.ix_(perm, perm)]
    plabels = [labels[i] for i in perm]
    a = emit_dot(diagram_spec(XmdiMatrix(vals), 1.0, labels))
    b = emit_dot(diagram_spec(XmdiMatrix(permuted), 1.0, plabels))
    assert a == b


def test_node_size_ordering_monotone():
    vals = np.diag([0.5, 0.1, 0.3])
    spec = diagram_spec(XmdiMatrix(vals), 1.0, ["a", "b", "c"])
    dot = emit_dot(spec)
    widths = {}
    for line in dot.splitlines():
        if "width=" in line and "->" not in line:
            label = line.strip().split(" ")[0].strip('"')
            widths[label] = float(line.split("width=")[1].split(",")[0])
    assert widths["a"] > widths["c"] > widths["b"]
