"""Execute a causal graph with the lives engine.

Every event reads only the carriers on its input edges plus its own
parameters, and writes each output carrier exactly once.  The resulting
:class:`Execution` is what the locality and fluid audits inspect.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from types import MappingProxyType
from typing import Any, Callable, Hashable, Mapping

import numpy as np

from . import lives as L
from .causal import CausalGraph, EventNode, downsets, topological_schedule
from .hilbert import ATOL, prepare_state


def _as_label(x) -> tuple:
    return tuple(x) if isinstance(x, (tuple, list)) else (x,)


class WriteOnceDict(dict):
    def __setitem__(self, key, value):
        if key in self:
            raise RuntimeError(f"carrier {key!r} was already written")
        super().__setitem__(key, value)


@dataclass
class Execution:
    graph: CausalGraph
    payloads: Mapping[str, L.Carrier]
    results: Mapping[str, L.Carrier]
    routes: Mapping[str, list[L.Route]]
    restrictions: Mapping[str, Any] | None = None

    def digests(self) -> dict[str, str]:
        out = {eid: c.digest() for eid, c in self.payloads.items()}
        for n in self.graph.terminals():
            if n in self.results:
                out[f"node:{n}"] = self.results[n].digest()
        return out

    def origin(self, carrier_id: str) -> str:
        if carrier_id.startswith("node:"):
            return carrier_id[5:]
        return self.graph.edges[carrier_id].src

    def rerun(self, graph: CausalGraph) -> "Execution":
        return execute(graph, self.restrictions)

    @property
    def terminals(self) -> dict[str, L.Carrier]:
        return {n: self.results[n] for n in self.graph.terminals() if n in self.results}

    def carrier(self, name: str) -> L.Carrier:
        """Payload of an edge, or the result held at a terminal node."""
        if name in self.payloads:
            return self.payloads[name]
        return self.results[name]


# ---------------------------------------------------------------------------
# Per-kind event rules


def _initial_history(inputs: list[L.Carrier]) -> tuple:
    return L._merge_histories(life.history for c in inputs for life in c.lives)


def _run_initial(node: EventNode, g: CausalGraph) -> L.Carrier:
    state = prepare_state(node.params.get("state", {"kind": "basis_string", "value": "0"}))
    rec = L.InteractionRecord(node.id, ("universe",), state=state)
    paths = np.ones((1, 1), dtype=complex)
    life = L._finish_life(("Psi0",), paths, np.ones(1, bool), (rec,), (), np.ones((1, 1)), np.ones(1))
    return L.Carrier(node.id, (life,), (), {})


def _group_systems(carriers: list[L.Carrier]) -> list[L.Carrier]:
    groups: dict[str, list[L.Carrier]] = {}
    for c in carriers:
        groups.setdefault(c.system_id, []).append(c)
    return [L.merge_channels(members) for members in groups.values()]


def _split_inputs(g: CausalGraph, node: EventNode, payloads) -> tuple[list, list]:
    """Separate carriers from the initial event (history only) from real inputs."""
    initial, real = [], []
    for e in g.in_edges(node.id):
        c = payloads[e.id]
        (initial if g.nodes[e.src].kind == "Initial" else real).append((e, c))
    return initial, real


def _controlled_measurement(node, control: L.Carrier, system: L.Carrier):
    contexts = {_as_label(opt)[0]: [(_as_label(out), np.asarray(vec, dtype=complex)) for out, vec in ctx]
                for opt, ctx in node.params["contexts"]}
    basis = system.preferred_basis
    if basis is None:
        raise ValueError(f"measurement {node.id}: system carrier has no preferred basis")

    def interaction(la, lb):
        ctx = contexts.get(la[0])
        if ctx is None:
            raise ValueError(f"measurement {node.id} has no context for setting {la[0]!r}")
        return [(la + out, complex(np.vdot(vec, basis[lb]))) for out, vec in ctx]

    return L.join(control, system, interaction, record_id=node.id, system_id=node.id)


def _unary_measurement(node, system: L.Carrier):
    basis = node.params.get("basis", "identity")
    if basis == "identity":
        transfer = {lab: {lab: 1.0} for lab in system.labels()}
        return L.transform(system, transfer, record_id=node.id, preferred_basis=system.preferred_basis)
    if system.preferred_basis is None:
        raise ValueError(f"measurement {node.id}: system carrier has no preferred basis")
    vectors = [(_as_label(out), np.asarray(vec, dtype=complex)) for out, vec in basis]
    transfer = {out: {lab: complex(np.vdot(vec, system.preferred_basis[lab])) for lab in system.labels()}
                for out, vec in vectors}
    preferred = _outcome_basis(vectors)
    return L.transform(system, transfer, record_id=node.id, preferred_basis=preferred)


def _outcome_basis(vectors):
    """After a projective measurement the outcome vectors are the new basis."""
    mat = np.array([v for _, v in vectors])
    if mat.shape[0] == mat.shape[1] and np.allclose(mat @ mat.conj().T, np.eye(len(mat)), atol=ATOL):
        return {out: v for out, v in vectors}
    return None


def _unitary(node, system: L.Carrier):
    ins = [_as_label(x) for x in node.params["inputs"]]
    outs = [_as_label(x) for x in node.params["outputs"]]
    m = np.asarray(node.params["matrix"], dtype=complex)
    if m.shape != (len(outs), len(ins)):
        raise ValueError(f"unitary {node.id}: matrix shape {m.shape} does not match labels")
    if not np.allclose(m.conj().T @ m, np.eye(len(ins)), atol=ATOL):
        raise ValueError(f"unitary {node.id}: matrix is not an isometry")
    transfer = {o: {i: complex(m[r, c]) for c, i in enumerate(ins)} for r, o in enumerate(outs)}
    basis = None
    if system.preferred_basis is not None:
        basis = {o: sum(m[r, c] * system.preferred_basis[i] for c, i in enumerate(ins)
                        if i in system.preferred_basis) for r, o in enumerate(outs)}
    return L.transform(system, transfer, record_id=node.id, preferred_basis=basis)


def _fold_join(carriers: list[L.Carrier], node_id: str) -> L.Carrier:
    acc = carriers[0]
    for nxt in carriers[1:]:
        acc = L.join(acc, nxt, record_id=node_id, system_id=node_id)
    return acc


def _run_node(g: CausalGraph, node: EventNode, payloads) -> L.Carrier:
    initial, real = _split_inputs(g, node, payloads)
    hist = _initial_history([c for _, c in initial])
    kind = node.kind
    if kind == "Initial":
        return _run_initial(node, g)
    if kind == "Source":
        raise AssertionError("sources emit per edge")
    if kind == "RandomChoice":
        options = [_as_label(o)[0] for o in node.params["options"]]
        return L.random_choice(options, record_id=node.id, system_id=node.id, history=hist)
    systems = _group_systems([c for _, c in real])
    if hist:
        systems = [_prepend_history(c, hist) for c in systems]
    if kind == "Measurement":
        control_id = node.params.get("control")
        if control_id is not None:
            control = next(c for e, c in real if e.id == control_id)
            others = [c for c in systems if c.system_id != control.system_id]
            if len(others) != 1:
                raise ValueError(f"measurement {node.id} needs exactly one measured system")
            control = next(c for c in systems if c.system_id == control.system_id)
            return _controlled_measurement(node, control, others[0])
        if len(systems) != 1:
            raise ValueError(f"measurement {node.id} needs exactly one input system")
        return _unary_measurement(node, systems[0])
    if kind == "Unitary":
        if len(systems) != 1:
            raise ValueError(f"unitary {node.id} acts on exactly one system")
        return _unitary(node, systems[0])
    if kind == "Join":
        if len(systems) < 2:
            raise ValueError(f"join {node.id} needs at least two distinct systems")
        return _fold_join(systems, node.id)
    if kind == "Block":
        c = systems[0] if len(systems) == 1 else _fold_join(systems, node.id)
        return replace(c, absorbed=True)
    raise ValueError(f"unsupported node kind {kind}")


def _prepend_history(c: L.Carrier, hist) -> L.Carrier:
    lives = tuple(replace(l, history=L._merge_histories([hist, l.history])) for l in c.lives)
    return replace(c, lives=lives, stats=dict(c.stats))


def _restrict(c: L.Carrier, allowed) -> L.Carrier:
    if allowed is None:
        return c
    keep = {_as_label(a) for a in allowed}
    return replace(c, lives=tuple(l for l in c.lives if l.label in keep), stats=dict(c.stats))


def _emit_source(g: CausalGraph, node: EventNode, payloads) -> dict[str, L.Carrier]:
    initial, _ = _split_inputs(g, node, payloads)
    hist = _initial_history([c for _, c in initial])
    state = prepare_state(node.params["state"])
    record = L.InteractionRecord(node.id, (node.id,), state=state)
    emit = node.params.get("emit", {})
    cache: dict[str, L.Carrier] = {}
    out = {}
    for e in g.out_edges(node.id):
        spec = emit.get(e.id)
        if spec is None:
            raise ValueError(f"source {node.id} has no emission spec for edge {e.id}")
        system = spec.get("system", e.id)
        if system not in cache:
            cache[system] = L.split_on_preparation(
                state, spec["qubits"], spec.get("basis", "z"), record=record, system_id=system, history=hist)
        out[e.id] = cache[system]
    return out


def execute(g: CausalGraph, restrictions: Mapping[str, Any] | None = None) -> Execution:
    """Run every event in schedule order.

    ``restrictions`` maps node ids to the output labels allowed to survive
    there (used to replay one selected future).
    """
    restrictions = dict(restrictions or {})
    payloads: WriteOnceDict = WriteOnceDict()
    results: dict[str, L.Carrier] = {}
    routes: dict[str, list[L.Route]] = {}
    for nid in topological_schedule(g):
        node = g.nodes[nid]
        if node.kind == "Source":
            per_edge = _emit_source(g, node, payloads)
            for e in g.out_edges(nid):
                c = _restrict(per_edge[e.id], restrictions.get(nid))
                payloads[e.id] = c.select(e.select).with_origin(e.id)
            results[nid] = next(iter(per_edge.values())) if per_edge else None
            routes[nid] = []
            continue
        result = _run_node(g, node, payloads)
        routes[nid] = list(result.stats.get("routes", []))
        result = _restrict(result, restrictions.get(nid))
        results[nid] = result
        outs = g.out_edges(nid)
        if node.kind != "Initial" and sum(e.select is None for e in outs) > 1:
            raise ValueError(f"event {nid} would clone its output carrier")
        for e in outs:
            sid = e.id if node.kind == "Initial" else None
            payloads[e.id] = result.select(e.select).with_origin(e.id, sid)
    return Execution(g, MappingProxyType(dict(payloads)), MappingProxyType(results),
                     MappingProxyType(routes), restrictions or None)


# ---------------------------------------------------------------------------
# Fluid bookkeeping


@dataclass
class CutReport:
    nodes: tuple[str, ...]
    carriers: tuple[str, ...]
    fluid: float
    absorbed: float

    @property
    def passed(self) -> bool:
        return abs(self.fluid - 1) <= ATOL


@dataclass
class FluidAudit:
    cuts: list[CutReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.cuts)

    @property
    def worst(self) -> float:
        return max((abs(c.fluid - 1) for c in self.cuts), default=0.0)

    def to_json(self) -> dict:
        return {"passed": self.passed, "cuts": len(self.cuts), "max_deviation": self.worst,
                "failures": [{"nodes": list(c.nodes), "fluid": c.fluid} for c in self.cuts if not c.passed]}


def cut_carriers(ex: Execution, downset) -> list[tuple[str, L.Carrier]]:
    g = ex.graph
    out = [(e.id, ex.payloads[e.id]) for e in g.edges.values() if e.src in downset and e.dst not in downset]
    out += [(f"node:{n}", ex.results[n]) for n in sorted(downset) if not g.out_edges(n)]
    return out


def fluid_audit(ex: Execution) -> FluidAudit:
    """Check that the fluid crossing every cut of the DAG totals one.

    Fluid held at terminal events, including Block absorbers, counts as
    crossing the cut.
    """
    audit = FluidAudit()
    for d in downsets(ex.graph):
        carriers = cut_carriers(ex, d)
        fluid = L.joint_fluid([c for _, c in carriers])
        absorbed = sum(L.total_fluid(c) for _, c in carriers if c.absorbed)
        audit.cuts.append(CutReport(tuple(sorted(d)), tuple(n for n, _ in carriers), fluid, absorbed))
    return audit


OutcomeKey = Callable[[str, L.Carrier, L.Life], Hashable]


def default_key(ex: Execution) -> OutcomeKey:
    """Terminal life labels, prefixed by the event id when there are several
    terminal events."""
    if len(ex.terminals) > 1:
        return lambda nid, c, life: (nid,) + life.label
    return lambda nid, c, life: life.label


def detector_key(nid: str, c: L.Carrier, life: L.Life) -> str:
    """Which detector fired, with every absorber pooled as ``absorbed``."""
    return "absorbed" if c.absorbed else nid


def terminal_distribution(ex: Execution, key: OutcomeKey | None = None) -> dict:
    """Fluid reaching each terminal outcome."""
    key = key or default_key(ex)
    out: dict = {}
    for nid, c in ex.terminals.items():
        for life in c.lives:
            k = key(nid, c, life)
            out[k] = out.get(k, 0.0) + life.fluid
    return out
