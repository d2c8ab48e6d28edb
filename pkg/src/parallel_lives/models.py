"""The four interpretation engines and their cross-model comparison.

All of them read the same forward pass of the lives engine.  They differ
only in what each carrier is said to hold:

* local realism: one predetermined value per observable (impossible here);
* inflation superdeterminism: one value per carrier, chosen after the fact;
* Parallel Lives: every life, with its fluid;
* Parallel Lives with inflation: every life, pre-split by where it will go.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import lives as L
from .causal import CausalGraph
from .engine import Execution, OutcomeKey, default_key, execute, terminal_distribution
from .hilbert import ATOL, OutcomeDistribution
from .pms import (
    Assignment,
    ContradictionReport,
    PMSquare,
    parity_product_argument,
    search_assignments,
    standard_square,
)


class ModelKind(str, Enum):
    LOCAL_REALIST = "local_realist"
    INFLATION = "inflation"
    PARALLEL_LIVES = "parallel_lives"
    PL_INFLATION = "pl_inflation"


def format_label(label: Sequence) -> str:
    return ",".join(str(x) for x in label)


def ket(label) -> str:
    return f"|{format_label(label)}⟩"


def bra(label) -> str:
    return f"⟨{format_label(label)}|"


UNKNOWN = "⟨?|"


# ---------------------------------------------------------------------------
# Tables


@dataclass
class LifeEntry:
    label: tuple
    fluid: float
    tags: tuple[str, ...] = ()

    def to_json(self) -> dict:
        out = {"label": [_jsonable(x) for x in self.label], "fluid": self.fluid}
        if self.tags:
            out["tags"] = list(self.tags)
        return out


@dataclass
class LifeRow:
    carrier: str
    lives: int
    histories: int
    entries: list[LifeEntry]
    initial_in_history: bool = False

    @property
    def fluid_total(self) -> float:
        return float(sum(e.fluid for e in self.entries))

    def to_json(self) -> dict:
        return {
            "carrier": self.carrier,
            "lives": self.lives,
            "histories": self.histories,
            "fluid_total": self.fluid_total,
            "initial_in_history": self.initial_in_history,
            "entries": [e.to_json() for e in self.entries],
        }


@dataclass
class LifeTable:
    model: str
    rows: dict[str, LifeRow]
    execution: Execution | None = field(default=None, repr=False)

    def counts(self) -> dict[str, int]:
        return {k: r.lives for k, r in self.rows.items()}

    def histories(self) -> dict[str, int]:
        return {k: r.histories for k, r in self.rows.items()}

    def marginal(self, carrier: str) -> dict[tuple, float]:
        out: dict[tuple, float] = {}
        for e in self.rows[carrier].entries:
            out[e.label] = out.get(e.label, 0.0) + e.fluid
        return out

    def to_json(self) -> dict:
        return {"model": self.model, "rows": [r.to_json() for r in self.rows.values()]}


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (int, float, str)):
        return x
    return str(x)


def _table_carriers(ex: Execution) -> list[tuple[str, L.Carrier]]:
    g = ex.graph
    out = [(e.id, ex.payloads[e.id]) for e in g.edges.values() if g.nodes[e.src].kind != "Initial"]
    out += [(n, c) for n, c in ex.terminals.items()]
    return out


def _has_record(c: L.Carrier, record_id: str | None) -> bool:
    if record_id is None or not c.lives:
        return False
    return all(any(r.record_id == record_id for r in life.history) for life in c.lives)


def run_parallel_lives(g: CausalGraph, execution: Execution | None = None) -> LifeTable:
    ex = execution or execute(g)
    rows = {}
    for name, c in _table_carriers(ex):
        entries = [LifeEntry(l.label, l.fluid) for l in c.lives]
        rows[name] = LifeRow(name, len(c.lives), c.history_count(), entries, _has_record(c, g.initial_node))
    return LifeTable(ModelKind.PARALLEL_LIVES.value, rows, ex)


# ---------------------------------------------------------------------------
# Parallel Lives with inflation


def _is_target(g: CausalGraph, edge_id: str) -> bool:
    """Whether the event at the end of this edge acts on the carrier itself
    (as opposed to reading it as a setting or passing it along)."""
    e = g.edges[edge_id]
    node = g.nodes[e.dst]
    if node.kind == "Unitary":
        return True
    if node.kind == "Measurement":
        return node.params.get("control") != edge_id
    return False


def run_pl_inflation(g: CausalGraph, execution: Execution | None = None) -> LifeTable:
    """Every life is pre-split by the future it flows into.

    A carrier that the next event acts upon gets one life per (label, routed
    output) with the route's share of fluid; settings and pass-through
    carriers keep their lives, tagged with the outputs they feed.  Tags are
    references to downstream lives, never data sent backwards.
    """
    if g.initial_node is None:
        raise ValueError("missing initial node: PL+inflation needs an inflation graph")
    ex = execution or execute(g)
    rows = {}
    for name, c in _table_carriers(ex):
        if name not in g.edges:
            entries = [LifeEntry(l.label, l.fluid, (UNKNOWN,)) for l in c.lives]
        else:
            node_routes = ex.routes[g.edges[name].dst]
            if _is_target(g, name):
                entries = [
                    LifeEntry(lab, r.fluid, (bra(r.out),))
                    for l in c.lives
                    for lab in [l.label]
                    for r in node_routes
                    if (name, lab) in r.inputs
                ]
            else:
                entries = []
                for l in c.lives:
                    outs = list(dict.fromkeys(bra(r.out) for r in node_routes if (name, l.label) in r.inputs))
                    entries.append(LifeEntry(l.label, l.fluid, tuple(outs)))
        rows[name] = LifeRow(name, len(entries), c.history_count(), entries, _has_record(c, g.initial_node))
    return LifeTable(ModelKind.PL_INFLATION.value, rows, ex)


# ---------------------------------------------------------------------------
# Inflation superdeterminism


@dataclass
class HVRow:
    carrier: str
    pre: str
    post: str | None

    def to_json(self) -> dict:
        return {"carrier": self.carrier, "pre": self.pre, "post": self.post}


@dataclass
class HiddenVariableTable:
    rows: dict[str, HVRow]

    def to_json(self) -> dict:
        return {"model": ModelKind.INFLATION.value, "rows": [r.to_json() for r in self.rows.values()]}


@dataclass
class SelectedFuture:
    outcome: tuple
    terminal: str
    seed: int
    values: dict[str, tuple]

    def to_json(self) -> dict:
        return {
            "outcome": [_jsonable(x) for x in self.outcome],
            "terminal": self.terminal,
            "seed": self.seed,
            "values": {k: [[_jsonable(x) for x in lab] for lab in v] for k, v in self.values.items()},
        }


@dataclass
class InflationRun:
    table: HiddenVariableTable
    future: SelectedFuture
    trace: LifeTable
    replay_ok: bool


def _futures(ex: Execution) -> tuple[list[tuple[str, L.Life]], np.ndarray]:
    futures = [(nid, life) for nid, c in ex.terminals.items() for life in c.lives]
    weights = np.array([life.fluid for _, life in futures])
    total = weights.sum()
    if abs(total - 1) > 1e-6:
        raise ValueError(f"terminal futures carry fluid {total:.9g}, expected 1")
    return futures, np.cumsum(weights / total)


def _pick(cdf: np.ndarray, u: float) -> int:
    return int(min(np.searchsorted(cdf, u, side="right"), len(cdf) - 1))


def sample_futures(ex: Execution, seeds: Iterable[int]) -> list[int]:
    """Index of the future each seed selects.  Seed ``s`` uses the first
    uniform draw of ``numpy.random.default_rng(s)``."""
    _, cdf = _futures(ex)
    return [_pick(cdf, np.random.default_rng(int(s)).random()) for s in seeds]


def _lineage(ex: Execution, terminal: str, life: L.Life) -> dict[str, list[tuple]]:
    """Labels on every carrier that the selected terminal life descends from."""
    out: dict[str, list[tuple]] = {terminal: [life.label]}
    stack = list(life.parents)
    seen = set()
    while stack:
        origin, label = stack.pop()
        if (origin, label) in seen or origin is None:
            continue
        seen.add((origin, label))
        out.setdefault(origin, [])
        if label not in out[origin]:
            out[origin].append(label)
        parent = next((l for l in ex.payloads[origin].lives if l.label == label), None)
        if parent is not None:
            stack.extend(parent.parents)
    return out


def _restrictions(g: CausalGraph, lineage: Mapping[str, list[tuple]], terminal: str) -> dict[str, list]:
    """Fix the settings and outcomes along the lineage; silence the rest."""
    allowed: dict[str, list] = {}
    for name, labels in lineage.items():
        node = name if name == terminal else g.edges[name].src
        if g.nodes[node].kind in ("RandomChoice", "Measurement"):
            allowed.setdefault(node, [])
            allowed[node] += [lab for lab in labels if lab not in allowed[node]]
    on_lineage = {name if name == terminal else g.edges[name].src for name in lineage} | {terminal}
    for nid, node in g.nodes.items():
        if node.kind in ("RandomChoice", "Measurement", "Block") and nid not in on_lineage:
            allowed[nid] = []
    return allowed


def replay_future(g: CausalGraph, future: SelectedFuture) -> Execution:
    return execute(g, _restrictions(g, future.values, future.terminal))


def _hv_table(g: CausalGraph, ex: Execution, lineage, terminal: str) -> HiddenVariableTable:
    rows = {}
    for name, _ in _table_carriers(ex):
        labels = lineage.get(name, [])
        if not labels:
            pre = "∅"
        elif len(labels) == 1:
            pre = ket(labels[0])
        else:
            pre = f"|ψ_{g.edges[name].src}⟩" if name in g.edges else f"|ψ_{name}⟩"
        if name not in g.edges:
            post = UNKNOWN if labels else None
        else:
            dst = g.edges[name].dst
            downstream = [lab for e in g.out_edges(dst) for lab in lineage.get(e.id, [])]
            if dst == terminal or (not g.out_edges(dst) and dst in lineage):
                downstream = lineage.get(dst, [])
            post = bra(downstream[0]) if len(downstream) == 1 else None
        rows[name] = HVRow(name, pre, post)
    return HiddenVariableTable(rows)


def run_inflation(g: CausalGraph, seed: int = 0, execution: Execution | None = None) -> InflationRun:
    """Simulate all futures, let nature pick one by fluid, then back-fill.

    The back-filled values are checked by replaying the graph with every
    setting and outcome pinned to them; exactly the selected future must
    survive.
    """
    if g.initial_node is None:
        raise ValueError("missing initial node: inflation needs an inflation graph")
    ex = execution or execute(g)
    futures, cdf = _futures(ex)
    terminal, life = futures[_pick(cdf, np.random.default_rng(int(seed)).random())]
    lineage = _lineage(ex, terminal, life)
    future = SelectedFuture(life.label, terminal, int(seed), lineage)
    replay = replay_future(g, future)
    survivors = [(n, l.label) for n, c in replay.terminals.items() for l in c.lives]
    replay_ok = survivors == [(terminal, life.label)]
    table = _hv_table(g, ex, lineage, terminal)
    return InflationRun(table, future, run_pl_inflation(g, ex), replay_ok)


def sampled_distribution(ex: Execution, samples: int, seed: int = 0, key: OutcomeKey | None = None) -> dict:
    """Empirical terminal distribution over ``samples`` consecutive seeds."""
    futures, _ = _futures(ex)
    key = key or default_key(ex)
    counts = np.bincount(sample_futures(ex, range(seed, seed + samples)), minlength=len(futures))
    out: dict = {}
    for (nid, life), n in zip(futures, counts):
        k = key(nid, ex.terminals[nid], life)
        out[k] = out.get(k, 0.0) + n / samples
    return out


# ---------------------------------------------------------------------------
# Local realism


@dataclass
class LocalRealistReport:
    satisfying: int
    total: int
    contradiction: ContradictionReport
    table: dict[str, Any] | None

    @property
    def failed(self) -> bool:
        return self.table is None

    def to_json(self) -> dict:
        return {
            "model": ModelKind.LOCAL_REALIST.value,
            "satisfying_assignments": self.satisfying,
            "assignments_tested": self.total,
            "contradiction": self.contradiction.to_json(),
            "table": self.table,
        }


def _realist_table(a: Assignment) -> dict[str, Any]:
    cells = [[a.at(r, c) for c in range(3)] for r in range(3)]
    return {
        "cells": cells,
        "m1": {str(i + 1): cells[i] for i in range(3)},
        "m2": {str(j + 1): [cells[r][j] for r in range(3)] for j in range(3)},
    }


def run_local_realist(g: CausalGraph | None = None, square: PMSquare | None = None) -> LocalRealistReport:
    """Try to give every observable a predetermined value.  For a valid
    square this fails, and the report says why."""
    if g is not None and g.meta.get("scenario") not in (None, "bell_pms"):
        raise ValueError("the local-realist engine applies to the Bell experiment only")
    sq = square or standard_square()
    result = search_assignments(sq)
    witness = result.witnesses[0] if result.witnesses else None
    report = parity_product_argument(sq, witness)
    table = _realist_table(witness) if witness is not None else None
    return LocalRealistReport(result.count, result.total, report, table)


# ---------------------------------------------------------------------------
# Comparison


def tv_distance(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return 0.5 * float(sum(abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys))


def max_abs_difference(p: Mapping, q: Mapping) -> float:
    keys = set(p) | set(q)
    return float(max((abs(p.get(k, 0.0) - q.get(k, 0.0)) for k in keys), default=0.0))


def chi_square(observed: Mapping, expected: Mapping, samples: int) -> tuple[float, float]:
    keys = [k for k in expected if expected[k] > 0]
    f_obs = np.array([observed.get(k, 0.0) * samples for k in keys])
    f_exp = np.array([expected[k] for k in keys])
    f_exp = f_exp / f_exp.sum() * f_obs.sum()
    res = stats.chisquare(f_obs, f_exp)
    return float(res.statistic), float(res.pvalue)


@dataclass
class ComparisonRow:
    model: str
    reference: str
    tv_distance: float
    max_abs_difference: float
    samples: int = 0
    chi2: float | None = None
    p_value: float | None = None


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]

    def row(self, model: str, reference: str = "oracle") -> ComparisonRow:
        return next(r for r in self.rows if r.model == model and r.reference == reference)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["model", "reference", "tv_distance", "max_abs_difference", "samples", "chi2", "p_value"])
        for r in self.rows:
            w.writerow([r.model, r.reference, f"{r.tv_distance:.6e}", f"{r.max_abs_difference:.6e}", r.samples,
                        "" if r.chi2 is None else f"{r.chi2:.6g}", "" if r.p_value is None else f"{r.p_value:.6g}"])
        return buf.getvalue()

    def to_json(self) -> list[dict]:
        return [r.__dict__.copy() for r in self.rows]


def compare_models(g: CausalGraph, oracle: Mapping, samples: int = 100_000,
                   seed: int = 0, key: OutcomeKey | None = None) -> ComparisonReport:
    """Terminal distributions of each runnable model against the oracle."""
    ex = execute(g)
    key = key or default_key(ex)
    pl = terminal_distribution(ex, key)
    rows = [ComparisonRow("parallel_lives", "oracle", tv_distance(pl, oracle), max_abs_difference(pl, oracle))]
    if samples > 0:
        sampled = sampled_distribution(ex, samples, seed, key)
        chi2, p = chi_square(sampled, oracle, samples)
        rows.append(ComparisonRow("inflation", "oracle", tv_distance(sampled, oracle),
                                  max_abs_difference(sampled, oracle), samples, chi2, p))
    if g.initial_node is not None:
        table = run_pl_inflation(g, ex)
        pli: dict = {}
        for nid, c in ex.terminals.items():
            for lab, f in table.marginal(nid).items():
                k = key(nid, c, c.life(lab))
                pli[k] = pli.get(k, 0.0) + f
        rows.append(ComparisonRow("pl_inflation", "parallel_lives", tv_distance(pli, pl), max_abs_difference(pli, pl)))
        rows.append(ComparisonRow("pl_inflation", "oracle", tv_distance(pli, oracle), max_abs_difference(pli, oracle)))
    return ComparisonReport(rows)


def as_distribution(d: Mapping[tuple, float]) -> OutcomeDistribution:
    return OutcomeDistribution({format_label(k): v for k, v in d.items()})
