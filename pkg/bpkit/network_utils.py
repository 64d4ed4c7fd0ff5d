"""Structural validation and indexing of Bayesian networks."""
import logging
import math
import re
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from bpkit.exceptions import BpkitError, StructuralError
from bpkit.schemas import (
    Cpt,
    Evidence,
    Mode,
    Network,
    Node,
    ValidationIssue,
    ValidationReport,
)

logger = logging.getLogger(__name__)

ID_PATTERN = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")
ROW_TOLERANCE = 1e-9
# Rows already normalized up to float rounding are left untouched
RENORMALIZE_SLACK = 1e-12


def check_row(values: Sequence[float], mode: Mode) -> Optional[str]:
    """
    Check one CPT row against the normalization rule of a mode.

    Args:
        values: Row entries over the child's states
        mode: "probabilistic" (row sums to 1) or "possibilistic" (row max is 1)

    Returns:
        A problem description, or None when the row is acceptable
    """
    for value in values:
        if not math.isfinite(value):
            return f"entry {value} is not a finite number"
        if value < 0:
            return f"entry {value:.10g} is negative"
    if mode == "probabilistic":
        total = math.fsum(values)
        if abs(total - 1.0) > ROW_TOLERANCE:
            return f"row sum {total:.10g} ≠ 1"
    else:
        peak = max(values) if values else 0.0
        if abs(peak - 1.0) > ROW_TOLERANCE:
            return f"row max {peak:.10g} ≠ 1"
    return None


def normalize_row(values: Sequence[float], mode: Mode) -> Tuple[float, ...]:
    """Rescale a row that passed check_row so it is normalized exactly."""
    scale = math.fsum(values) if mode == "probabilistic" else max(values)
    if abs(scale - 1.0) <= RENORMALIZE_SLACK:
        return tuple(float(v) for v in values)
    return tuple(float(v) / scale for v in values)


def make_network(nodes: Sequence[Node], cpts: Dict[str, Cpt]) -> Network:
    """Assemble a network whose edges are read off the CPT parent lists.

    Edges are listed child by child in node declaration order, each child's
    parents in CPT order, so equal networks always compare equal.
    """
    edges = [
        (parent, node.id)
        for node in nodes
        if node.id in cpts
        for parent in cpts[node.id].parents
    ]
    ordered = {node.id: cpts[node.id] for node in nodes if node.id in cpts}
    return Network(nodes=tuple(nodes), edges=tuple(edges), cpts=ordered)


def _skeleton(net: Network) -> nx.Graph:
    graph = nx.Graph()
    graph.add_nodes_from(net.node_ids)
    graph.add_edges_from(net.edges)
    return graph


def _digraph(net: Network) -> nx.DiGraph:
    graph = nx.DiGraph()
    graph.add_nodes_from(net.node_ids)
    graph.add_edges_from(net.edges)
    return graph


def validate_network(net: Network, mode: Mode = "probabilistic") -> ValidationReport:
    """
    Report every violated structural or CPT invariant of a network.

    Never raises; an empty error list means the network is usable in the
    given mode.

    Args:
        net: Network to check, possibly invalid
        mode: Row normalization rule to apply

    Returns:
        ValidationReport with one issue per violation
    """
    issues: List[ValidationIssue] = []

    def error(location: str, message: str) -> None:
        issues.append(ValidationIssue(severity="error", location=location, message=message))

    # Nodes
    cardinality: Dict[str, int] = {}
    for node in net.nodes:
        if node.id in cardinality:
            error(f"node {node.id}", "duplicate node declaration")
            continue
        if not ID_PATTERN.match(node.id):
            error(f"node {node.id}", "invalid node id")
        if len(node.states) < 2:
            error(f"node {node.id}", f"needs at least 2 states, found {len(node.states)}")
        if len(set(node.states)) != len(node.states):
            error(f"node {node.id}", "duplicate state label")
        cardinality[node.id] = len(node.states)

    # Edges
    seen_edges: Dict[Tuple[str, str], None] = {}
    for parent, child in net.edges:
        location = f"edge {parent}->{child}"
        if parent not in cardinality or child not in cardinality:
            error(location, "edge references an undeclared node")
        elif parent == child:
            error(location, "self loop")
        elif (parent, child) in seen_edges:
            error(location, "duplicate edge")
        seen_edges[(parent, child)] = None

    graph = nx.DiGraph()
    graph.add_nodes_from(cardinality)
    graph.add_edges_from(
        (p, c) for p, c in seen_edges if p in cardinality and c in cardinality and p != c
    )
    try:
        cycle = nx.find_cycle(graph)
        path = " -> ".join([edge[0] for edge in cycle] + [cycle[0][0]])
        error("graph", f"directed cycle {path}")
    except nx.NetworkXNoCycle:
        pass

    # CPTs
    for key, cpt in net.cpts.items():
        if key not in cardinality:
            error(f"cpt {key}", "table for an undeclared node")
        elif cpt.child != key:
            error(f"cpt {key}", f"table is filed under {key} but describes {cpt.child}")
    for node_id, card in cardinality.items():
        location = f"cpt {node_id}"
        cpt = net.cpts.get(node_id)
        if cpt is None:
            error(location, "missing table")
            continue
        in_edges = sorted(p for p, c in seen_edges if c == node_id)
        if sorted(cpt.parents) != in_edges or len(set(cpt.parents)) != len(cpt.parents):
            error(location, f"parents {list(cpt.parents)} do not match in-edges {in_edges}")
            continue
        unknown = [p for p in cpt.parents if p not in cardinality]
        if unknown:
            error(location, f"unknown parents {unknown}")
            continue
        expected_rows = math.prod(cardinality[p] for p in cpt.parents)
        if len(cpt.table) != expected_rows:
            error(location, f"expected {expected_rows} rows, found {len(cpt.table)}")
            continue
        for index, row in enumerate(cpt.table):
            row_location = f"{location} row {index + 1}"
            if len(row) != card:
                error(row_location, f"expected {card} values, found {len(row)}")
                continue
            problem = check_row(row, mode)
            if problem:
                error(row_location, problem)

    if cardinality:
        components = nx.number_weakly_connected_components(graph)
        if components > 1:
            issues.append(ValidationIssue(
                severity="warning",
                location="graph",
                message=f"{components} disconnected components, inferred independently",
            ))

    report = ValidationReport(issues=issues)
    logger.debug("validated %d nodes in %s mode: %d issues", len(net.nodes), mode, len(issues))
    return report


def is_polytree(net: Network) -> bool:
    """True iff the undirected skeleton has no cycle."""
    skeleton = _skeleton(net)
    components = nx.number_connected_components(skeleton)
    return skeleton.number_of_edges() == skeleton.number_of_nodes() - components


def topological_order(net: Network) -> List[str]:
    """Parents before children, ties broken by declaration order."""
    position = {node_id: i for i, node_id in enumerate(net.node_ids)}
    try:
        return list(nx.lexicographical_topological_sort(_digraph(net), key=position.get))
    except nx.NetworkXUnfeasible:
        raise StructuralError("directed cycle: no topological order exists")


def diameter(net: Network) -> int:
    """Longest shortest path of the skeleton, over all weak components."""
    skeleton = _skeleton(net)
    longest = 0
    for component in nx.connected_components(skeleton):
        if len(component) > 1:
            longest = max(longest, nx.diameter(skeleton.subgraph(component)))
    return longest


def validate_evidence(net: Network, ev: Evidence) -> Dict[str, int]:
    """
    Check evidence against a network.

    Returns:
        Observed state index per observed node

    Raises:
        BpkitError: On an unknown node or state
    """
    indices = {}
    for node_id, state in ev.observations.items():
        try:
            node = net.node(node_id)
        except KeyError:
            raise BpkitError(f"evidence on unknown node {node_id}")
        if state not in node.states:
            raise BpkitError(f"unknown state {state!r} for node {node_id}")
        indices[node_id] = node.state_index(state)
    return indices


@dataclass(frozen=True)
class NetworkIndex:
    """Adjacency and CPT tensors of a validated network, ready for engines.

    ``tables[x]`` has shape ``(|U1|, ..., |Up|, |X|)`` in CPT parent order.
    """
    order: Tuple[str, ...]
    parents: Dict[str, Tuple[str, ...]]
    children: Dict[str, Tuple[str, ...]]
    cardinality: Dict[str, int]
    tables: Dict[str, np.ndarray]
    states: Dict[str, Tuple[str, ...]]

    def evidence_vector(self, node_id: str, observed: Optional[int]) -> np.ndarray:
        """Indicator of an observed state, all-ones when unobserved."""
        if observed is None:
            return np.ones(self.cardinality[node_id])
        vector = np.zeros(self.cardinality[node_id])
        vector[observed] = 1.0
        return vector


def index_network(net: Network) -> NetworkIndex:
    """Build the engine view of a network (raises StructuralError on a cycle)."""
    order = tuple(topological_order(net))
    cardinality = {node.id: node.cardinality for node in net.nodes}
    children: Dict[str, List[str]] = {node_id: [] for node_id in cardinality}
    for parent, child in net.edges:
        children[parent].append(child)
    tables = {}
    for node_id, card in cardinality.items():
        cpt = net.cpts[node_id]
        shape = tuple(cardinality[p] for p in cpt.parents) + (card,)
        table = np.asarray(cpt.table, dtype=float).reshape(shape)
        table.setflags(write=False)
        tables[node_id] = table
    return NetworkIndex(
        order=order,
        parents={node_id: net.cpts[node_id].parents for node_id in cardinality},
        children={node_id: tuple(kids) for node_id, kids in children.items()},
        cardinality=cardinality,
        tables=tables,
        states={node.id: node.states for node in net.nodes},
    )
