"""Pydantic schemas for networks, evidence, engine options and reports."""
from enum import Enum
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, computed_field, model_validator

Mode = Literal["probabilistic", "possibilistic"]
Family = Literal["random_polytree", "pyramid", "toyqmr", "agreement"]


class SemiringId(str, Enum):
    PROB_SUM_PRODUCT = "prob_sum_product"
    POSS_MAX_PRODUCT = "poss_max_product"
    POSS_MAX_MIN = "poss_max_min"


class LbpStatus(str, Enum):
    CONVERGED = "converged"
    OSCILLATING = "oscillating"
    ITERATION_CAP = "iteration_cap"


# Source Schemas
class SourceSpan(BaseModel):
    """1-based position of a token in its source text."""
    model_config = ConfigDict(frozen=True)

    line: int = Field(ge=1)
    column: int = Field(ge=1)

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


# Network Schemas
class Node(BaseModel):
    """A discrete variable; the state order is the CPT indexing order."""
    model_config = ConfigDict(frozen=True)

    id: str
    states: Tuple[str, ...]

    @property
    def cardinality(self) -> int:
        return len(self.states)

    def state_index(self, label: str) -> int:
        """Position of a state label, ValueError if the label is unknown."""
        return self.states.index(label)


class Cpt(BaseModel):
    """Conditional table of a node given its ordered parents.

    Rows follow the mixed-radix order of parent states, the last parent
    varying fastest. A root holds a single row, its prior.
    """
    model_config = ConfigDict(frozen=True)

    child: str
    parents: Tuple[str, ...] = ()
    table: Tuple[Tuple[float, ...], ...]


class Network(BaseModel):
    """Directed acyclic graph of discrete nodes with one CPT per node."""
    model_config = ConfigDict(frozen=True)

    nodes: Tuple[Node, ...]
    edges: Tuple[Tuple[str, str], ...] = ()
    cpts: Dict[str, Cpt] = Field(default_factory=dict)

    @property
    def node_ids(self) -> List[str]:
        return [node.id for node in self.nodes]

    def node(self, node_id: str) -> Node:
        for node in self.nodes:
            if node.id == node_id:
                return node
        raise KeyError(node_id)

    def parents(self, node_id: str) -> Tuple[str, ...]:
        return self.cpts[node_id].parents

    def children(self, node_id: str) -> List[str]:
        return [child for parent, child in self.edges if parent == node_id]


class Evidence(BaseModel):
    """Observed state label per observed node."""
    model_config = ConfigDict(frozen=True)

    observations: Dict[str, str] = Field(default_factory=dict)

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.observations

    def __len__(self) -> int:
        return len(self.observations)


# Validation Schemas
class ValidationIssue(BaseModel):
    """One violated (error) or suspicious (warning) network property."""
    severity: Literal["error", "warning"]
    location: str
    message: str


class ValidationReport(BaseModel):
    """Outcome of validating a network in a given mode."""
    issues: List[ValidationIssue] = Field(default_factory=list)

    @computed_field
    @property
    def ok(self) -> bool:
        return not any(issue.severity == "error" for issue in self.issues)

    @property
    def errors(self) -> List[ValidationIssue]:
        return [issue for issue in self.issues if issue.severity == "error"]


# Inference Schemas
class Distribution(BaseModel):
    """Posterior (or possibility) vector over a node's states."""
    model_config = ConfigDict(frozen=True)

    node: str
    states: Tuple[str, ...]
    values: Tuple[float, ...]

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def __getitem__(self, state: str) -> float:
        return self.values[self.states.index(state)]


class LbpOptions(BaseModel):
    """Stopping rule, damping and oscillation window for loopy propagation."""
    model_config = ConfigDict(frozen=True)

    threshold: float = Field(1e-4, gt=0)
    max_iterations: int = Field(200, gt=0)
    damping: float = Field(0.0, ge=0.0, lt=1.0)
    history_depth: int = Field(8, ge=2)
    momentum_target: Literal["messages", "node_values"] = "messages"


class LbpResult(BaseModel):
    """Outcome of a loopy run: final-round beliefs plus the termination status."""
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    status: LbpStatus
    iterations_run: int = Field(ge=0)
    beliefs: Dict[str, Distribution]
    history: Tuple[Tuple[float, ...], ...]
    max_delta_trace: Tuple[float, ...]
    period: Optional[int] = Field(None, ge=2)
    semiring: SemiringId = SemiringId.PROB_SUM_PRODUCT
    # loopy_utils.IterationState of the last round
    final_state: Optional[Any] = Field(None, exclude=True, repr=False)

    @property
    def status_text(self) -> str:
        if self.status is LbpStatus.OSCILLATING:
            return f"oscillating({self.period})"
        return self.status.value


# Benchmark Schemas
class GenSpec(BaseModel):
    """Recipe for one synthetic network; the same spec yields the same bytes."""
    model_config = ConfigDict(frozen=True)

    family: Family
    nodes: int = Field(8, ge=0)
    widths: Tuple[int, ...] = (1, 3, 3)
    diseases: int = Field(4, ge=0)
    findings: int = Field(6, ge=0)
    max_parents: int = Field(3, ge=1)
    cardinality: int = Field(2, ge=2)
    seed: int = Field(0, ge=0, lt=2 ** 64)
    prior_scale: float = Field(0.02, gt=0.0, le=1.0)
    concentration: float = Field(1.0, gt=0.0)
    mode: Mode = "probabilistic"
    evidence_count: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_sizes(self) -> "GenSpec":
        if self.family == "random_polytree" and self.nodes < 1:
            raise ValueError("random_polytree needs at least 1 node")
        if self.family == "pyramid" and (not self.widths or min(self.widths) < 1):
            raise ValueError("pyramid widths must be a non-empty list of positive integers")
        if self.family == "toyqmr":
            if self.diseases < 1 or self.findings < 1:
                raise ValueError("toyqmr needs at least 1 disease and 1 finding")
            if self.cardinality != 2:
                raise ValueError("toyqmr nodes are binary (cardinality 2)")
        if self.family == "agreement":
            if self.findings < 2:
                raise ValueError("agreement needs at least 2 shared findings")
            if self.cardinality != 2:
                raise ValueError("agreement nodes are binary (cardinality 2)")
        return self

    @property
    def label(self) -> str:
        if self.family == "random_polytree":
            size = f"n{self.nodes}"
        elif self.family == "pyramid":
            size = "w" + "x".join(str(w) for w in self.widths)
        elif self.family == "agreement":
            size = f"f{self.findings}"
        else:
            size = f"d{self.diseases}f{self.findings}"
        return f"{self.family}-{size}-k{self.cardinality}-s{self.seed}"


class StudyRow(BaseModel):
    """One engine run on one generated network at one damping value."""
    network: str
    family: Family
    seed: int
    nodes: int
    edges: int
    is_polytree: bool
    engine: str
    damping: float
    status: str
    period: Optional[int] = None
    iterations: Optional[int] = None
    l1_error_mean: Optional[float] = None
    l1_error_max: Optional[float] = None
    oracle_refused: bool = False
    honest: Optional[bool] = None
    failure: Optional[str] = None


class StudyAggregate(BaseModel):
    """Summary over the rows sharing one engine and damping value."""
    engine: str
    damping: float
    runs: int
    converged: int
    fraction_converged: float
    mean_l1_error: Optional[float] = None
    max_l1_error: Optional[float] = None
    oscillating: int


class StudyReport(BaseModel):
    """Rows of a convergence study; aggregates are always derived from rows."""
    engines: Tuple[str, ...] = ("lbp",)
    damping_grid: Tuple[float, ...] = (0.0,)
    rows: List[StudyRow] = Field(default_factory=list)

    @computed_field
    @property
    def aggregates(self) -> List[StudyAggregate]:
        summary = []
        for engine in self.engines:
            # only loopy propagation is swept over damping values
            grid = self.damping_grid if engine == "lbp" else (0.0,)
            for damping in grid:
                group = [
                    row for row in self.rows
                    if row.engine == engine and row.damping == damping
                ]
                converged = [row for row in group if row.status in ("converged", "exact")]
                means = [row.l1_error_mean for row in converged if row.l1_error_mean is not None]
                errors = [row.l1_error_max for row in converged if row.l1_error_max is not None]
                summary.append(StudyAggregate(
                    engine=engine,
                    damping=damping,
                    runs=len(group),
                    converged=len(converged),
                    fraction_converged=len(converged) / len(group) if group else 0.0,
                    mean_l1_error=sum(means) / len(means) if means else None,
                    max_l1_error=max(errors) if errors else None,
                    oscillating=sum(1 for row in group if row.status == "oscillating"),
                ))
        return summary
