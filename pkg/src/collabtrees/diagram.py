"""Network-diagram construction from an importance matrix, emitted as DOT.

Nodes are feature groups: size follows overall importance, fill color blends
from red to blue as the additive share of the group's importance grows.  Each
retained pair produces two directed edges whose gray level follows the
interaction's share of the target group's overall importance (the arrow points
at the denominator group).  The graph label reports the maximum interaction
share and the maximum standardized importance as percentages.

Numeric mappings (linear, documented endpoints): node width 0.3-2.0 against
the largest overall importance, edge pen width 0.5-6.0 against the largest
retained interaction, edge gray 0.85 (weak) to 0.10 (strong).  Default display
thresholds prune nodes and edges at 1e-4 times the response variance.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ArgumentError
from .xmdi import XmdiMatrix, overall_importance

BLUE = (31, 81, 163)
RED = (198, 45, 45)
WIDTH_RANGE = (0.3, 2.0)
PENWIDTH_RANGE = (0.5, 6.0)
GRAY_RANGE = (0.85, 0.10)


@dataclass(frozen=True)
class NodeSpec:
    label: str
    overall: float
    additive_ratio: float
    standardized_importance: float


@dataclass(frozen=True)
class EdgeSpec:
    source: str
    target: str
    weight: float
    driver: float  # interaction share of the target's overall importance


@dataclass(frozen=True)
class DiagramSpec:
    nodes: tuple[NodeSpec, ...]
    edges: tuple[EdgeSpec, ...]
    max_interaction_ratio: float
    max_standardized_importance: float


def diagram_spec(
    matrix: XmdiMatrix,
    response_variance: float,
    labels,
    node_threshold: float | None = None,
    edge_threshold: float | None = None,
) -> DiagramSpec:
    """Compute node and edge attributes, pruning below the display thresholds."""
    if not response_variance > 0:
        raise ArgumentError("response variance must be positive")
    labels = list(labels)
    if len(labels) != matrix.n_groups:
        raise ArgumentError("label count does not match the matrix")
    if node_threshold is None:
        node_threshold = 1e-4 * response_variance
    if edge_threshold is None:
        edge_threshold = 1e-4 * response_variance

    v = matrix.values
    overall = overall_importance(matrix)
    keep = overall > node_threshold
    nodes = []
    for i in range(len(labels)):
        if not keep[i]:
            continue
        additive = v[i, i] / overall[i] if overall[i] > 0 else 0.0
        nodes.append(
            NodeSpec(
                label=labels[i],
                overall=float(overall[i]),
                additive_ratio=float(additive),
                standardized_importance=float(overall[i] / response_variance),
            )
        )
    edges = []
    for i in range(len(labels)):
        for j in range(len(labels)):
            if i == j or not (keep[i] and keep[j]):
                continue
            w = v[min(i, j), max(i, j)]
            if w <= edge_threshold:
                continue
            driver = w / overall[j] if overall[j] > 0 else 0.0
            edges.append(EdgeSpec(labels[i], labels[j], float(w), float(driver)))
    max_ratio = max((e.driver for e in edges), default=0.0)
    max_std = max((n.standardized_importance for n in nodes), default=0.0)
    return DiagramSpec(tuple(nodes), tuple(edges), max_ratio, max_std)


def _hex_blend(t: float) -> str:
    t = min(max(t, 0.0), 1.0)
    rgb = tuple(round(RED[c] + t * (BLUE[c] - RED[c])) for c in range(3))
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def _hex_gray(driver: float) -> str:
    g = GRAY_RANGE[0] + min(max(driver, 0.0), 1.0) * (GRAY_RANGE[1] - GRAY_RANGE[0])
    level = round(255 * g)
    return "#{0:02x}{0:02x}{0:02x}".format(level)


def _quote(label: str) -> str:
    return '"' + label.replace("\\", "\\\\").replace('"', '\\"') + '"'


def emit_dot(spec: DiagramSpec) -> str:
    """Deterministic DOT text: nodes sorted by label, edges by endpoint labels."""
    if not spec.nodes:
        return "digraph importance {\n}\n"
    lines = ["digraph importance {"]
    lines.append(
        '    graph [label="max interaction ratio: {:.1f}%; '
        'max standardized importance: {:.1f}%", labelloc="t"];'.format(
            100.0 * spec.max_interaction_ratio, 100.0 * spec.max_standardized_importance
        )
    )
    lines.append("    node [shape=circle, style=filled, fixedsize=true];")
    max_overall = max(n.overall for n in spec.nodes)
    for node in sorted(spec.nodes, key=lambda n: n.label):
        width = WIDTH_RANGE[0] + (WIDTH_RANGE[1] - WIDTH_RANGE[0]) * (
            node.overall / max_overall if max_overall > 0 else 0.0
        )
        lines.append(
            "    {} [width={:.4f}, fillcolor=\"{}\"];".format(
                _quote(node.label), width, _hex_blend(node.additive_ratio)
            )
        )
    if spec.edges:
        max_weight = max(e.weight for e in spec.edges)
        for edge in sorted(spec.edges, key=lambda e: (e.source, e.target)):
            pen = PENWIDTH_RANGE[0] + (PENWIDTH_RANGE[1] - PENWIDTH_RANGE[0]) * (
                edge.weight / max_weight if max_weight > 0 else 0.0
            )
            lines.append(
                "    {} -> {} [penwidth={:.4f}, color=\"{}\"];".format(
                    _quote(edge.source), _quote(edge.target), pen, _hex_gray(edge.driver)
                )
            )
    lines.append("}")
    return "\n".join(lines) + "\n"
