"""Synthetic network families and the convergence study harness.

Randomness comes from numpy's PCG64 generator seeded with GenSpec.seed, so
a spec always produces the same network (and the same serialized bytes).
"""
import csv
import io
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from bpkit.config import ORACLE_MAX_JOINT_STATES
from bpkit.exceptions import BpkitError, OracleRefusalError
from bpkit.loopy_utils import (
    belief_l1_errors,
    check_convergence,
    run_lbp,
)
from bpkit.network_utils import is_polytree, make_network, normalize_row, topological_order
from bpkit.oracle_utils import exact_posteriors, joint_size
from bpkit.pearl_utils import pearl_beliefs
from bpkit.schemas import (
    Cpt,
    Evidence,
    GenSpec,
    LbpOptions,
    LbpResult,
    LbpStatus,
    Network,
    Node,
    StudyReport,
    StudyRow,
)
from bpkit.semiring import PROB_SUM_PRODUCT, Semiring

logger = logging.getLogger(__name__)

NOISY_OR_LEAK = 0.01
INHIBITION_RANGE = (0.2, 0.9)
QMR_STATES = ("absent", "present")
AGREEMENT_STATES = ("no", "yes")
# Offsets the evidence stream from the structure stream of the same seed
EVIDENCE_STREAM = 0xE5

CSV_COLUMNS = list(StudyRow.model_fields)


def _rng(*seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(list(seed)))


def _states(cardinality: int) -> Tuple[str, ...]:
    return tuple(f"s{i}" for i in range(cardinality))


def _dirichlet_rows(
    rng: np.random.Generator,
    rows: int,
    cardinality: int,
    concentration: float,
) -> Tuple[Tuple[float, ...], ...]:
    table = rng.dirichlet([concentration] * cardinality, size=rows)
    return tuple(normalize_row(row.tolist(), "probabilistic") for row in table)


def _random_polytree(spec: GenSpec, rng: np.random.Generator) -> Network:
    n = spec.nodes
    names = [f"X{i}" for i in range(n)]
    if n == 1:
        tree_edges = []
    elif n == 2:
        tree_edges = [(0, 1)]
    else:
        # Uniform labelled tree from a random Pruefer sequence
        tree = nx.from_prufer_sequence(rng.integers(0, n, size=n - 2).tolist())
        tree_edges = sorted(tuple(sorted(edge)) for edge in tree.edges())
    parents: Dict[int, List[int]] = {i: [] for i in range(n)}
    for a, b in tree_edges:
        if rng.random() < 0.5:
            parents[b].append(a)
        else:
            parents[a].append(b)
    nodes = [Node(id=name, states=_states(spec.cardinality)) for name in names]
    cpts = {}
    for i, name in enumerate(names):
        ordered = sorted(parents[i])
        rows = spec.cardinality ** len(ordered)
        cpts[name] = Cpt(
            child=name,
            parents=tuple(names[p] for p in ordered),
            table=_dirichlet_rows(rng, rows, spec.cardinality, spec.concentration),
        )
    return make_network(nodes, cpts)


def _pyramid(spec: GenSpec, rng: np.random.Generator) -> Network:
    layers = [[f"L{depth}_{i}" for i in range(width)] for depth, width in enumerate(spec.widths)]
    nodes = [Node(id=name, states=_states(spec.cardinality)) for layer in layers for name in layer]
    cpts = {}
    for depth, layer in enumerate(layers):
        for name in layer:
            if depth == 0:
                chosen: List[str] = []
            else:
                above = layers[depth - 1]
                most = min(spec.max_parents, 3, len(above))
                count = int(rng.integers(1, most + 1))
                picks = sorted(rng.choice(len(above), size=count, replace=False).tolist())
                chosen = [above[p] for p in picks]
            rows = spec.cardinality ** len(chosen)
            cpts[name] = Cpt(
                child=name,
                parents=tuple(chosen),
                table=_dirichlet_rows(rng, rows, spec.cardinality, spec.concentration),
            )
    return make_network(nodes, cpts)


def _toyqmr(spec: GenSpec, rng: np.random.Generator) -> Network:
    diseases = [f"D{i}" for i in range(spec.diseases)]
    findings = [f"F{j}" for j in range(spec.findings)]
    nodes = [Node(id=name, states=QMR_STATES) for name in diseases + findings]
    cpts = {}
    for name in diseases:
        present = spec.prior_scale * float(rng.uniform(0.5, 1.0))
        cpts[name] = Cpt(child=name, table=(normalize_row([1.0 - present, present], "probabilistic"),))
    for name in findings:
        count = int(rng.integers(1, min(spec.max_parents, len(diseases)) + 1))
        picks = sorted(rng.choice(len(diseases), size=count, replace=False).tolist())
        inhibition = rng.uniform(*INHIBITION_RANGE, size=count)
        rows = []
        # Parent assignments in mixed-radix order, last parent fastest
        for assignment in np.ndindex(*([2] * count)):
            absent = 1.0 - NOISY_OR_LEAK
            for q, state in zip(inhibition, assignment):
                if state == 1:
                    absent *= float(q)
            rows.append(normalize_row([absent, 1.0 - absent], "probabilistic"))
        cpts[name] = Cpt(child=name, parents=tuple(diseases[p] for p in picks), table=tuple(rows))
    return make_network(nodes, cpts)


def _agreement(spec: GenSpec, rng: np.random.Generator) -> Network:
    """Two causes, each with a private witness, sharing findings that favour agreeing causes."""
    causes = ["C0", "C1"]
    findings = [f"F{j}" for j in range(spec.findings)]
    witnesses = ["W0", "W1"]
    prior = float(rng.uniform(0.75, 0.9))
    agree = float(rng.uniform(0.88, 0.95))
    margin = float(rng.uniform(0.3, 0.7))
    # witness likelihood ratio pulls against the prior by `margin` in log-odds
    ratio = float(np.exp(-(np.log(prior / (1.0 - prior)) + margin)))
    witness_rows = ((1.0 - 0.9 * ratio, 0.9 * ratio), (0.1, 0.9))

    nodes = [Node(id=name, states=_states(2)) for name in causes]
    nodes += [Node(id=name, states=AGREEMENT_STATES) for name in findings + witnesses]
    cpts = {name: Cpt(child=name, table=(normalize_row([prior, 1.0 - prior], "probabilistic"),))
            for name in causes}
    for name in findings:
        rows = []
        for first, second in np.ndindex(2, 2):
            alarm = agree if first == second else 1.0 - agree
            rows.append(normalize_row([1.0 - alarm, alarm], "probabilistic"))
        cpts[name] = Cpt(child=name, parents=tuple(causes), table=tuple(rows))
    for cause, name in zip(causes, witnesses):
        rows = tuple(normalize_row(list(row), "probabilistic") for row in witness_rows)
        cpts[name] = Cpt(child=name, parents=(cause,), table=rows)
    return make_network(nodes, cpts)


def agreement_evidence(net: Network) -> Evidence:
    """Every finding and witness of an agreement network observed at "yes"."""
    return Evidence(observations={
        node.id: AGREEMENT_STATES[1] for node in net.nodes if net.parents(node.id)
    })


GENERATORS = {
    "random_polytree": _random_polytree,
    "pyramid": _pyramid,
    "toyqmr": _toyqmr,
    "agreement": _agreement,
}


def to_possibilistic(net: Network) -> Network:
    """Max-normalize every CPT row, turning probabilities into possibility degrees."""
    cpts = {
        x: cpt.model_copy(update={"table": tuple(normalize_row(row, "possibilistic") for row in cpt.table)})
        for x, cpt in net.cpts.items()
    }
    return make_network(list(net.nodes), cpts)


def generate(spec: GenSpec) -> Network:
    """
    Build the network described by a spec.

    random_polytree: uniform random tree skeleton, random edge directions.
    pyramid: layered DAG, each node below the top parented by 1-3 nodes of
    the layer above. toyqmr: diseases with low priors over noisy-OR findings.
    agreement: two causes whose shared findings favour equal states, each
    cause with a witness leaning against its prior.

    Args:
        spec: Generator recipe (sizes already validated by GenSpec)

    Returns:
        Network, max-normalized when spec.mode is possibilistic
    """
    net = GENERATORS[spec.family](spec, _rng(spec.seed))
    if spec.mode == "possibilistic":
        net = to_possibilistic(net)
    logger.debug("generated %s: %d nodes, %d edges", spec.label, len(net.nodes), len(net.edges))
    return net


def sample_evidence(net: Network, count: int, seed: int) -> Evidence:
    """
    Observe `count` nodes at states drawn by ancestral sampling.

    Sampled evidence always has positive weight. Possibility rows are
    sampled after rescaling them to sum to 1.
    """
    if count <= 0 or not net.nodes:
        return Evidence()
    rng = _rng(seed, EVIDENCE_STREAM)
    sample: Dict[str, int] = {}
    for x in topological_order(net):
        node, cpt = net.node(x), net.cpts[x]
        row_index = 0
        for parent in cpt.parents:
            row_index = row_index * net.node(parent).cardinality + sample[parent]
        row = np.asarray(cpt.table[row_index], dtype=float)
        sample[x] = int(rng.choice(node.cardinality, p=row / row.sum()))
    chosen = sorted(rng.choice(len(net.nodes), size=min(count, len(net.nodes)), replace=False))
    observations = {}
    for position in chosen:
        node = net.nodes[int(position)]
        observations[node.id] = node.states[sample[node.id]]
    return Evidence(observations=observations)


def add_barren_leaf(
    net: Network,
    parent: str,
    leaf: str = "Barren",
    rows: Optional[Sequence[Sequence[float]]] = None,
) -> Network:
    """Copy of the network with an extra binary unobserved leaf under `parent`."""
    card = net.node(parent).cardinality
    if rows is None:
        rows = [(0.25 + 0.5 * i / max(card - 1, 1), 0.75 - 0.5 * i / max(card - 1, 1)) for i in range(card)]
    node = Node(id=leaf, states=("no", "yes"))
    cpts = dict(net.cpts)
    cpts[leaf] = Cpt(child=leaf, parents=(parent,), table=tuple(tuple(r) for r in rows))
    return make_network(list(net.nodes) + [node], cpts)


def _l1(beliefs, reference) -> Tuple[float, float]:
    errors = list(belief_l1_errors(beliefs, reference).values())
    if not errors:
        return 0.0, 0.0
    return sum(errors) / len(errors), max(errors)


def run_study(
    specs: Iterable[GenSpec],
    engines: Sequence[str] = ("lbp",),
    opts: Optional[LbpOptions] = None,
    damping_grid: Sequence[float] = (0.0,),
    semiring: Semiring = PROB_SUM_PRODUCT,
    max_joint_states: int = ORACLE_MAX_JOINT_STATES,
) -> StudyReport:
    """
    Run the selected engines on every generated network and compare to the oracle.

    Loopy propagation runs once per damping value; Pearl's engine runs once
    per network and only on polytrees. Failures become rows with a failure
    message and never abort the study.

    Args:
        specs: Networks to generate (evidence per spec.evidence_count)
        engines: Any of "lbp" and "pearl"
        opts: Loopy options; damping is taken from the grid
        damping_grid: Damping values for loopy propagation
        semiring: Propagation semiring (networks must match its mode)
        max_joint_states: Oracle enumeration bound

    Returns:
        StudyReport with one row per (network, engine, damping)
    """
    opts = opts or LbpOptions()
    report = StudyReport(engines=tuple(engines), damping_grid=tuple(damping_grid))
    for spec in specs:
        report.rows.extend(_study_network(spec, engines, opts, damping_grid, semiring, max_joint_states))
        logger.info("studied %s", spec.label)
    return report


def _study_network(
    spec: GenSpec,
    engines: Sequence[str],
    opts: LbpOptions,
    damping_grid: Sequence[float],
    semiring: Semiring,
    max_joint_states: int,
) -> List[StudyRow]:
    base = dict(network=spec.label, family=spec.family, seed=spec.seed)
    runs = [("lbp", gamma) for gamma in damping_grid if "lbp" in engines]
    if "pearl" in engines:
        runs.append(("pearl", 0.0))
    try:
        net = generate(spec)
        ev = sample_evidence(net, spec.evidence_count, spec.seed)
    except Exception as e:
        logger.error("could not generate %s: %s", spec.label, e)
        return [
            StudyRow(**base, nodes=0, edges=0, is_polytree=False, engine=engine,
                     damping=gamma, status="failed", failure=str(e))
            for engine, gamma in runs
        ]
    base.update(nodes=len(net.nodes), edges=len(net.edges), is_polytree=is_polytree(net))

    reference = None
    refused = joint_size(net) > max_joint_states
    if not refused:
        try:
            reference = exact_posteriors(net, ev, semiring, max_joint_states)
        except OracleRefusalError:
            refused = True
        except BpkitError as e:
            logger.error("oracle failed on %s: %s", spec.label, e.detail)
            return [
                StudyRow(**base, engine=engine, damping=gamma, status="failed",
                         failure=f"oracle: {e.detail}")
                for engine, gamma in runs
            ]

    rows = []
    for engine, gamma in runs:
        row = dict(base, engine=engine, damping=gamma, oracle_refused=refused)
        try:
            if engine == "pearl":
                if not base["is_polytree"]:
                    rows.append(StudyRow(**row, status="skipped", failure="not a polytree"))
                    continue
                beliefs = pearl_beliefs(net, ev, semiring).beliefs
                row.update(status="exact")
            else:
                run_opts = opts.model_copy(update={"damping": gamma})
                result = run_lbp(net, ev, run_opts, semiring)
                beliefs = result.beliefs
                row.update(
                    status=result.status.value,
                    period=result.period,
                    iterations=result.iterations_run,
                    honest=check_convergence(result, run_opts, semiring),
                )
            if reference is not None:
                mean_error, max_error = _l1(beliefs, reference)
                row.update(l1_error_mean=mean_error, l1_error_max=max_error)
        except BpkitError as e:
            row.update(status="failed", failure=e.detail)
        rows.append(StudyRow(**row))
    return rows


@dataclass(frozen=True)
class OscillatorSearch:
    """A network found to oscillate undamped, with its damped re-run."""
    spec: GenSpec
    evidence: Evidence
    undamped: LbpResult
    damped: LbpResult
    verified: bool
    attempts: int


def verify_period(result: LbpResult, period: int, threshold: float) -> bool:
    """Check a reported period directly on the last belief snapshots."""
    history = [np.asarray(s) for s in result.history]
    if len(history) < 2 * period + 1:
        return False
    repeats = all(
        np.max(np.abs(history[-1 - i] - history[-1 - i - period])) < threshold
        for i in range(period + 1)
    )
    moving = np.max(np.abs(history[-1] - history[-2])) >= threshold
    return bool(repeats and moving)


def find_oscillator(
    attempts: int = 500,
    seed: int = 0,
    max_nodes: int = 8,
    opts: Optional[LbpOptions] = None,
    damping: float = 0.5,
) -> Optional[OscillatorSearch]:
    """
    Randomized search for a small loopy network whose undamped run oscillates with period 2.

    Candidates rotate through sharp-CPT pyramids and low-prior toyqmr
    networks with sampled evidence, and agreement networks with every
    finding and witness raised, all of at most `max_nodes` nodes. The first
    hit is verified on its snapshots and re-run with the given damping.

    Returns:
        The first oscillator found, or None
    """
    opts = opts or LbpOptions()
    search = _rng(seed, 0x05C)
    for attempt in range(1, attempts + 1):
        spec = _candidate(search, attempt, seed, max_nodes)
        net = generate(spec)
        if is_polytree(net):
            continue
        if spec.family == "agreement":
            ev = agreement_evidence(net)
        else:
            ev = sample_evidence(net, spec.evidence_count, spec.seed)
        try:
            undamped = run_lbp(net, ev, opts.model_copy(update={"damping": 0.0}))
        except BpkitError:
            continue
        if undamped.status is not LbpStatus.OSCILLATING or undamped.period != 2:
            continue
        damped = run_lbp(net, ev, opts.model_copy(update={"damping": damping}))
        logger.info(
            "oscillator after %d attempts: %s (damped: %s)",
            attempt, spec.label, damped.status_text,
        )
        return OscillatorSearch(
            spec=spec,
            evidence=ev,
            undamped=undamped,
            damped=damped,
            verified=verify_period(undamped, 2, opts.threshold),
            attempts=attempt,
        )
    return None


def _candidate(rng: np.random.Generator, attempt: int, seed: int, max_nodes: int) -> GenSpec:
    spec_seed = (seed * 1_000_003 + attempt) % 2 ** 64
    shared = min(4, max_nodes - 4)
    if attempt % 3 == 0 and shared >= 2:
        return GenSpec(family="agreement", findings=shared, seed=spec_seed)
    if attempt % 3 == 1:
        depth = int(rng.integers(2, 4))
        widths = [int(rng.integers(1, 4)) for _ in range(depth)]
        while sum(widths) > max_nodes:
            widths[int(np.argmax(widths))] -= 1
        widths[1] = max(widths[1], 2)
        widths[0] = max(widths[0], 2)
        while sum(widths) > max_nodes:
            widths.pop()
        return GenSpec(
            family="pyramid",
            widths=tuple(widths),
            seed=spec_seed,
            concentration=float(rng.uniform(0.05, 0.4)),
            evidence_count=int(rng.integers(1, 4)),
        )
    diseases = int(rng.integers(2, 4))
    findings = int(rng.integers(2, max_nodes - diseases + 1))
    return GenSpec(
        family="toyqmr",
        diseases=diseases,
        findings=findings,
        seed=spec_seed,
        prior_scale=float(rng.uniform(0.005, 0.05)),
        evidence_count=int(rng.integers(1, findings + 1)),
    )


def report_to_csv(report: StudyReport) -> str:
    """Rows as comma-separated text with a fixed header (StudyRow field order)."""
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in report.rows:
        writer.writerow({k: "" if v is None else v for k, v in row.model_dump().items()})
    return buffer.getvalue()


def report_to_text(report: StudyReport) -> str:
    """Human-readable summary: one aggregate line per engine and damping value."""
    lines = [f"networks run: {len({row.network for row in report.rows})}, rows: {len(report.rows)}"]
    for agg in report.aggregates:
        mean = "-" if agg.mean_l1_error is None else f"{agg.mean_l1_error:.3g}"
        worst = "-" if agg.max_l1_error is None else f"{agg.max_l1_error:.3g}"
        lines.append(
            f"{agg.engine} damping={agg.damping:g}: runs={agg.runs} "
            f"converged={agg.converged} ({agg.fraction_converged:.1%}) "
            f"oscillating={agg.oscillating} mean_l1={mean} max_l1={worst}"
        )
    failures = [row for row in report.rows if row.failure and row.status == "failed"]
    for row in failures:
        lines.append(f"failed: {row.network} {row.engine} damping={row.damping:g}: {row.failure}")
    return "\n".join(lines) + "\n"
