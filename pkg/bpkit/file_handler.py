"""Network and evidence text formats.

Network files are whitespace separated with ``#`` comments::

    node A { t f }
    node B { t f }
    prior A ( 0.3 0.7 )
    cpt B | A {
      ( 0.9 0.1 )
      ( 0.2 0.8 )
    }

CPT rows follow the mixed-radix order of parent states, last parent
fastest. Evidence files hold one ``<node> = <state>`` per line.
"""
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import networkx as nx

from bpkit.exceptions import ParseError
from bpkit.network_utils import ID_PATTERN, check_row, make_network, normalize_row
from bpkit.schemas import Cpt, Evidence, Mode, Network, Node, SourceSpan

logger = logging.getLogger(__name__)

WORD_RE = re.compile(r"[^\s#{}()|=]+|[{}()|=]|#[^\n]*|\n")
NUMBER_RE = re.compile(r"[+-]?(?:\d+\.\d*|\.\d+|\d+)(?:[eE][+-]?\d+)?\Z")
INTEGER_RE = re.compile(r"\d+\Z")
KEYWORDS = ("node", "prior", "cpt")


@dataclass(frozen=True)
class Token:
    kind: str  # "id", "number", "punct", "newline", "end"
    text: str
    span: SourceSpan


def tokenize(text: str) -> List[Token]:
    """Split text into tokens, dropping comments and blanks (newlines are kept)."""
    tokens = []
    line, line_start = 1, 0
    for match in WORD_RE.finditer(text):
        word = match.group()
        span = SourceSpan(line=line, column=match.start() - line_start + 1)
        if word == "\n":
            tokens.append(Token("newline", word, span))
            line, line_start = line + 1, match.end()
        elif word.startswith("#"):
            continue
        elif word in "{}()|=":
            tokens.append(Token("punct", word, span))
        elif ID_PATTERN.match(word):
            tokens.append(Token("id", word, span))
        elif NUMBER_RE.match(word):
            tokens.append(Token("number", word, span))
        else:
            raise ParseError(span, f"invalid token {word!r}")
    end_column = len(text) - line_start + 1
    tokens.append(Token("end", "", SourceSpan(line=line, column=end_column)))
    return tokens


class _TokenStream:
    """Cursor over tokens with expectation helpers."""

    def __init__(self, tokens: Iterable[Token]):
        self.tokens = [t for t in tokens if t.kind != "newline"]
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != "end":
            self.pos += 1
        return token

    def expect_punct(self, text: str) -> Token:
        token = self.next()
        if token.kind != "punct" or token.text != text:
            raise ParseError(token.span, f"expected '{text}', found {_describe(token)}")
        return token

    def expect_id(self, what: str) -> Token:
        token = self.next()
        if token.kind != "id":
            raise ParseError(token.span, f"expected {what}, found {_describe(token)}")
        return token

    def at_punct(self, text: str) -> bool:
        token = self.peek()
        return token.kind == "punct" and token.text == text


def _describe(token: Token) -> str:
    return "end of input" if token.kind == "end" else repr(token.text)


def _is_state(token: Token) -> bool:
    return token.kind == "id" or (token.kind == "number" and INTEGER_RE.match(token.text) is not None)


class _NetworkParser:
    """Recursive-descent reader of the network grammar."""

    def __init__(self, text: str, mode: Optional[Mode]):
        self.stream = _TokenStream(tokenize(text))
        self.mode = mode
        self.nodes: Dict[str, Node] = {}
        self.cpts: Dict[str, Cpt] = {}
        self.spans: Dict[str, SourceSpan] = {}

    def parse(self) -> Network:
        while self.stream.peek().kind != "end":
            keyword = self.stream.next()
            if keyword.kind != "id" or keyword.text not in KEYWORDS:
                raise ParseError(
                    keyword.span, f"expected 'node', 'prior' or 'cpt', found {_describe(keyword)}"
                )
            getattr(self, f"_parse_{keyword.text}")(keyword)
        if self.mode is not None:
            self._check_complete()
        return make_network(list(self.nodes.values()), self.cpts)

    def _parse_node(self, keyword: Token) -> None:
        name = self.stream.expect_id("a node id")
        if name.text in self.nodes:
            raise ParseError(name.span, f"duplicate declaration of node {name.text}")
        self.stream.expect_punct("{")
        states: List[str] = []
        while not self.stream.at_punct("}"):
            token = self.stream.next()
            if not _is_state(token):
                raise ParseError(token.span, f"expected a state label, found {_describe(token)}")
            if token.text in states:
                raise ParseError(token.span, f"duplicate state {token.text}")
            states.append(token.text)
        self.stream.expect_punct("}")
        if len(states) < 2:
            raise ParseError(name.span, f"node {name.text} needs at least 2 states")
        self.nodes[name.text] = Node(id=name.text, states=tuple(states))
        self.spans[f"node {name.text}"] = name.span

    def _table_owner(self, keyword: Token) -> Token:
        name = self.stream.expect_id("a node id")
        if name.text not in self.nodes:
            raise ParseError(name.span, f"unknown node {name.text}")
        if name.text in self.cpts:
            raise ParseError(name.span, f"duplicate table for node {name.text}")
        self.spans[f"cpt {name.text}"] = keyword.span
        return name

    def _parse_prior(self, keyword: Token) -> None:
        name = self._table_owner(keyword)
        row = self._parse_row(name.text, 1)
        self.cpts[name.text] = Cpt(child=name.text, parents=(), table=(row,))

    def _parse_cpt(self, keyword: Token) -> None:
        name = self._table_owner(keyword)
        parents: List[str] = []
        if self.stream.at_punct("|"):
            self.stream.next()
            while self.stream.peek().kind == "id":
                parent = self.stream.next()
                if parent.text not in self.nodes:
                    raise ParseError(parent.span, f"unknown node {parent.text}")
                if parent.text == name.text:
                    raise ParseError(parent.span, f"node {name.text} cannot be its own parent")
                if parent.text in parents:
                    raise ParseError(parent.span, f"duplicate parent {parent.text}")
                parents.append(parent.text)
        self.stream.expect_punct("{")
        expected = math.prod(self.nodes[p].cardinality for p in parents)
        rows = []
        while self.stream.at_punct("("):
            if len(rows) == expected:
                raise ParseError(
                    self.stream.peek().span,
                    f"expected {expected} rows, found more than {expected}",
                )
            rows.append(self._parse_row(name.text, len(rows) + 1))
        closing = self.stream.expect_punct("}")
        if len(rows) != expected:
            raise ParseError(closing.span, f"expected {expected} rows, found {len(rows)}")
        self.cpts[name.text] = Cpt(child=name.text, parents=tuple(parents), table=tuple(rows))

    def _parse_row(self, child: str, number: int) -> Tuple[float, ...]:
        opening = self.stream.expect_punct("(")
        values = []
        while not self.stream.at_punct(")"):
            token = self.stream.next()
            if token.kind != "number":
                raise ParseError(token.span, f"expected a number, found {_describe(token)}")
            values.append(float(token.text))
        self.stream.expect_punct(")")
        card = self.nodes[child].cardinality
        if len(values) != card:
            raise ParseError(opening.span, f"expected {card} values, found {len(values)}")
        self.spans[f"cpt {child} row {number}"] = opening.span
        if self.mode is None:
            return tuple(values)
        problem = check_row(values, self.mode)
        if problem:
            raise ParseError(opening.span, problem)
        return normalize_row(values, self.mode)

    def _check_complete(self) -> None:
        for node_id in self.nodes:
            if node_id not in self.cpts:
                raise ParseError(self.spans[f"node {node_id}"], f"node {node_id} has no table")
        graph = nx.DiGraph()
        graph.add_nodes_from(self.nodes)
        graph.add_edges_from((p, c) for c, cpt in self.cpts.items() for p in cpt.parents)
        try:
            cycle = nx.find_cycle(graph)
        except nx.NetworkXNoCycle:
            return
        path = " -> ".join([edge[0] for edge in cycle] + [cycle[0][0]])
        raise ParseError(self.spans[f"cpt {cycle[0][1]}"], f"directed cycle {path}")


def parse_network(text: str, mode: Mode = "probabilistic") -> Network:
    """
    Parse network text into a fully valid Network.

    Rows are checked against the mode's normalization rule (within 1e-9) and
    then rescaled exactly once.

    Args:
        text: Network source
        mode: "probabilistic" or "possibilistic"

    Returns:
        Network satisfying every model invariant

    Raises:
        ParseError: First problem found, with its line and column
    """
    return _NetworkParser(text, mode).parse()


def parse_network_structure(text: str) -> Tuple[Network, Dict[str, SourceSpan]]:
    """
    Parse network text without checking row values, completeness or cycles.

    Used by validation, which reports those problems all at once.

    Returns:
        The raw network and the span of every declaration, keyed by the
        locations used in validation reports ("node X", "cpt X", "cpt X row i")
    """
    parser = _NetworkParser(text, None)
    return parser.parse(), parser.spans


def _format_real(value: float) -> str:
    return format(value, ".17g")


def serialize_network(net: Network) -> str:
    """Canonical text of a network: byte-identical for equal networks."""
    lines = [f"node {node.id} {{ {' '.join(node.states)} }}" for node in net.nodes]
    for node in net.nodes:
        cpt = net.cpts[node.id]
        lines.append("")
        if not cpt.parents:
            values = " ".join(_format_real(v) for v in cpt.table[0])
            lines.append(f"prior {node.id} ( {values} )")
            continue
        lines.append(f"cpt {node.id} | {' '.join(cpt.parents)} {{")
        for row in cpt.table:
            lines.append(f"  ( {' '.join(_format_real(v) for v in row)} )")
        lines.append("}")
    return "\n".join(lines) + "\n"


def parse_evidence(text: str, net: Network) -> Evidence:
    """
    Parse ``<node> = <state>`` lines against a network.

    Raises:
        ParseError: On malformed lines, unknown nodes or states, and
            duplicate observations
    """
    observations: Dict[str, str] = {}
    line: List[Token] = []
    for token in tokenize(text):
        if token.kind not in ("newline", "end"):
            line.append(token)
            continue
        if line:
            name, state = _evidence_line(line)
            if name.text in observations:
                raise ParseError(name.span, f"duplicate observation of {name.text}")
            try:
                node = net.node(name.text)
            except KeyError:
                raise ParseError(name.span, f"unknown node {name.text}")
            if state.text not in node.states:
                raise ParseError(state.span, f"unknown state {state.text} for node {name.text}")
            observations[name.text] = state.text
        line = []
    return Evidence(observations=observations)


def _evidence_line(line: List[Token]) -> Tuple[Token, Token]:
    if (
        len(line) != 3
        or line[0].kind != "id"
        or line[1].text != "="
        or not _is_state(line[2])
    ):
        raise ParseError(line[0].span, "expected '<node> = <state>'")
    return line[0], line[2]


def parse_observations(items: Iterable[str], net: Network) -> Evidence:
    """Evidence from ``X=state`` strings, as given on the command line."""
    return parse_evidence("\n".join(item.replace("=", " = ", 1) for item in items), net)


def merge_evidence(first: Evidence, second: Evidence) -> Evidence:
    """Union of two evidence sets; a node observed twice is an error."""
    duplicated = set(first.observations) & set(second.observations)
    if duplicated:
        node = sorted(duplicated)[0]
        raise ParseError(SourceSpan(line=1, column=1), f"duplicate observation of {node}")
    return Evidence(observations={**first.observations, **second.observations})


def load_network(path, mode: Mode = "probabilistic") -> Network:
    """Read and parse a network file (UTF-8)."""
    net = parse_network(Path(path).read_text(encoding="utf-8"), mode)
    logger.info("loaded %s: %d nodes, %d edges", path, len(net.nodes), len(net.edges))
    return net


def load_evidence(path, net: Network) -> Evidence:
    """Read and parse an evidence file (UTF-8)."""
    return parse_evidence(Path(path).read_text(encoding="utf-8"), net)


def write_network(path, net: Network) -> None:
    """Write the canonical text of a network."""
    Path(path).write_text(serialize_network(net), encoding="utf-8")
    logger.info("wrote %s", path)


def serialize_evidence(ev: Evidence) -> str:
    """Evidence file text, one observation per line."""
    return "".join(f"{node} = {state}\n" for node, state in ev.observations.items())
