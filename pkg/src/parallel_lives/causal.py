"""Causal DAG of experimental events, its scheduler, and the locality auditor.

Nodes are events; edges are carriers, the locally propagating systems that
move information between events.  Space-like separation is nothing more
than the absence of an ancestor relation.

Node parameters by kind (all JSON-serializable through :func:`encode`):

``Initial``
    ``state``: a :class:`~parallel_lives.hilbert.Ket` recorded in every history.
``Source``
    ``state``: the prepared Ket; ``emit``: ``{edge_id: {"qubits": [...],
    "basis": descriptor, "system": name}}``.  Edges sharing a system name
    are channels of one system, split by the edge's ``select`` labels.
``RandomChoice``
    ``options``: list of option values; each becomes a life labelled ``(option,)``.
``Measurement``
    ``control``: id of the in-edge carrying the setting, or ``None``;
    ``contexts``: ``[[option, [[outcome, vector], ...]], ...]`` when controlled,
    else ``basis``: ``[[outcome, vector], ...]`` or ``"identity"``.
``Unitary``
    ``inputs``/``outputs``: label lists; ``matrix``: outputs x inputs.
``Join`` / ``Block``
    no parameters.
"""

from __future__ import annotations

import copy
import heapq
import json
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Mapping

import numpy as np

from .hilbert import Ket, complex_from_json, complex_to_json

NODE_KINDS = ("Initial", "Source", "RandomChoice", "Measurement", "Join", "Unitary", "Block")


class GraphError(ValueError):
    pass


class CycleError(GraphError):
    pass


@dataclass(frozen=True)
class EventNode:
    id: str
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in NODE_KINDS:
            raise GraphError(f"unknown node kind {self.kind!r}")


@dataclass(frozen=True)
class CarrierEdge:
    id: str
    src: str
    dst: str
    select: tuple | None = None

    def __post_init__(self):
        if self.src == self.dst:
            raise GraphError(f"edge {self.id} is a self-loop")
        if self.select is not None:
            object.__setattr__(self, "select", tuple(tuple(s) for s in self.select))


class CausalGraph:
    """Validated DAG.  Treat instances as immutable; use :meth:`with_params`."""

    def __init__(
        self,
        nodes: Iterable[EventNode],
        edges: Iterable[CarrierEdge],
        initial_node: str | None = None,
        meta: Mapping[str, Any] | None = None,
    ):
        self.nodes: dict[str, EventNode] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise GraphError(f"duplicate node id {n.id!r}")
            self.nodes[n.id] = n
        self.edges: dict[str, CarrierEdge] = {}
        for e in edges:
            if e.id in self.edges:
                raise GraphError(f"duplicate edge id {e.id!r}")
            if e.src not in self.nodes or e.dst not in self.nodes:
                raise GraphError(f"edge {e.id} references an unknown node")
            self.edges[e.id] = e
        self.initial_node = initial_node
        self.meta = dict(meta or {})
        self.validate()

    def in_edges(self, node: str) -> list[CarrierEdge]:
        return [e for e in self.edges.values() if e.dst == node]

    def out_edges(self, node: str) -> list[CarrierEdge]:
        return [e for e in self.edges.values() if e.src == node]

    def parents(self, node: str) -> set[str]:
        return {e.src for e in self.in_edges(node)}

    def terminals(self) -> list[str]:
        return [n for n in self.nodes if not self.out_edges(n)]

    def validate(self) -> None:
        topological_schedule(self)
        for n in self.nodes.values():
            ins, outs = self.in_edges(n.id), self.out_edges(n.id)
            if n.kind == "Initial" and ins:
                raise GraphError(f"initial node {n.id} has inputs")
            if n.kind == "Source" and any(self.nodes[e.src].kind != "Initial" for e in ins):
                raise GraphError(f"source {n.id} has inputs")
            if n.kind == "Join" and len(ins) < 2:
                raise GraphError(f"join {n.id} needs at least two inputs")
            if n.kind == "Block" and outs:
                raise GraphError(f"block {n.id} has outputs")
            if n.kind == "Measurement":
                control = n.params.get("control")
                if control is not None and control not in {e.id for e in ins}:
                    raise GraphError(f"measurement {n.id} control edge {control!r} is not an input")
                if not ins:
                    raise GraphError(f"measurement {n.id} has no inputs")
        if self.initial_node is not None:
            if self.nodes.get(self.initial_node, EventNode("?", "Join")).kind != "Initial":
                raise GraphError("initial_node must name an Initial node")
            for n in self.nodes:
                if self.initial_node not in light_cone(self, n):
                    raise GraphError(f"initial node is not an ancestor of {n}")

    def with_params(self, node: str, params: Mapping[str, Any]) -> "CausalGraph":
        nodes = [EventNode(n.id, n.kind, params) if n.id == node else n for n in self.nodes.values()]
        return CausalGraph(nodes, self.edges.values(), self.initial_node, self.meta)

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n.id, "kind": n.kind, "params": encode(n.params)} for n in self.nodes.values()],
            "edges": [
                {"id": e.id, "src": e.src, "dst": e.dst, "select": encode(e.select)}
                for e in self.edges.values()
            ],
            "initial_node": self.initial_node,
            "meta": encode(self.meta),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CausalGraph":
        nodes = [EventNode(n["id"], n["kind"], decode(n["params"])) for n in data["nodes"]]
        edges = [CarrierEdge(e["id"], e["src"], e["dst"], decode(e.get("select"))) for e in data["edges"]]
        return cls(nodes, edges, data.get("initial_node"), decode(data.get("meta") or {}))

    def canonical_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


# ---------------------------------------------------------------------------
# Parameter encoding.  Tuples, complex arrays and Kets need tags to round-trip.


def encode(value: Any) -> Any:
    if isinstance(value, Ket):
        return {"__ket__": value.to_json()}
    if isinstance(value, np.ndarray):
        return {"__array__": [complex_to_json(v) for v in value.ravel()], "shape": list(value.shape)}
    if isinstance(value, (complex, np.complexfloating)):
        return {"__complex__": complex_to_json(value)}
    if isinstance(value, tuple):
        return {"__tuple__": [encode(v) for v in value]}
    if isinstance(value, list):
        return [encode(v) for v in value]
    if isinstance(value, Mapping):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating,)):
        return float(value)
    return value


def decode(value: Any) -> Any:
    if isinstance(value, list):
        return [decode(v) for v in value]
    if isinstance(value, Mapping):
        if "__ket__" in value:
            spec = value["__ket__"]
            return Ket([complex_from_json(a) for a in spec["amplitudes"]], spec["dims"])
        if "__array__" in value:
            flat = np.array([complex_from_json(v) for v in value["__array__"]], dtype=complex)
            return flat.reshape(value["shape"])
        if "__complex__" in value:
            return complex_from_json(value["__complex__"])
        if "__tuple__" in value:
            return tuple(decode(v) for v in value["__tuple__"])
        return {k: decode(v) for k, v in value.items()}
    return value


# ---------------------------------------------------------------------------
# Scheduling and light cones


def topological_schedule(g: CausalGraph) -> list[str]:
    """Kahn's algorithm, breaking ties by lexicographic node id."""
    indeg = {n: 0 for n in g.nodes}
    succ: dict[str, list[str]] = {n: [] for n in g.nodes}
    for e in g.edges.values():
        indeg[e.dst] += 1
        succ[e.src].append(e.dst)
    ready = [n for n, d in indeg.items() if d == 0]
    heapq.heapify(ready)
    order = []
    while ready:
        n = heapq.heappop(ready)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(ready, m)
    if len(order) != len(g.nodes):
        stuck = sorted(n for n, d in indeg.items() if d > 0)
        raise CycleError(f"cycle detected among {stuck}")
    return order


def light_cone(g: CausalGraph, node: str) -> frozenset[str]:
    """``node`` together with all of its ancestors."""
    if node not in g.nodes:
        raise GraphError(f"unknown node {node!r}")
    seen = {node}
    stack = [node]
    while stack:
        n = stack.pop()
        for e in g.edges.values():
            if e.dst == n and e.src not in seen:
                seen.add(e.src)
                stack.append(e.src)
    return frozenset(seen)


def downsets(g: CausalGraph, limit: int = 20000) -> list[frozenset[str]]:
    """All nonempty ancestor-closed node sets (each defines one DAG cut)."""
    preds = {n: g.parents(n) for n in g.nodes}
    seen = {frozenset()}
    frontier = [frozenset()]
    while frontier:
        nxt = []
        for d in frontier:
            for n in g.nodes:
                if n not in d and preds[n] <= d:
                    d2 = d | {n}
                    if d2 not in seen:
                        seen.add(d2)
                        nxt.append(d2)
                        if len(seen) > limit:
                            raise GraphError("too many cuts to enumerate")
        frontier = nxt
    return sorted((d for d in seen if d), key=lambda d: (len(d), sorted(d)))


def add_initial_node(g: CausalGraph, state: Ket | None = None, node_id: str = "Psi0") -> CausalGraph:
    """Return a copy of ``g`` whose every root hangs off one initial event."""
    if g.initial_node is not None:
        return g
    roots = sorted(n for n in g.nodes if not g.in_edges(n))
    state = state if state is not None else Ket([1, 0])
    nodes = [EventNode(node_id, "Initial", {"state": state}), *g.nodes.values()]
    edges = [CarrierEdge(f"{node_id.lower()}_{r}", node_id, r) for r in roots] + list(g.edges.values())
    meta = dict(g.meta)
    meta["inflation"] = True
    return CausalGraph(nodes, edges, node_id, meta)


# ---------------------------------------------------------------------------
# Locality audit

_PHASE = np.exp(0.5j)


def perturb_params(node: EventNode) -> dict | None:
    """A different but valid parameter set for ``node``, or None if it has none."""
    p = copy.deepcopy(dict(node.params))
    if node.kind in ("Source", "Initial"):
        amps = np.roll(p["state"].amplitudes, 1)
        p["state"] = Ket(amps, p["state"].dims)
        return p
    if node.kind == "RandomChoice":
        opts = list(p["options"])
        p["options"] = opts[:-1] if len(opts) > 1 else opts + [f"{opts[0]}'"]
        return p
    if node.kind == "Measurement":
        if p.get("control") is not None:
            p["contexts"] = [
                [opt, [[out, np.asarray(vec) * (_PHASE if k == 0 else 1)] for k, (out, vec) in enumerate(ctx)]]
                for opt, ctx in p["contexts"]
            ]
            return p
        if p.get("basis") == "identity":
            return None
        p["basis"] = [[out, np.asarray(vec) * (_PHASE if k == 0 else 1)] for k, (out, vec) in enumerate(p["basis"])]
        return p
    if node.kind == "Unitary":
        m = np.array(p["matrix"], dtype=complex)
        m[0] *= _PHASE
        p["matrix"] = m
        return p
    return None


@dataclass
class AuditReport:
    passed: bool
    checks: int
    violations: list[dict]
    sensitivity: dict[str, list[str]]
    skipped: list[str]

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "checks": self.checks,
            "violations": self.violations,
            "sensitivity": self.sensitivity,
            "skipped": self.skipped,
        }


def locality_audit(g: CausalGraph, execution, run: Callable[[CausalGraph], Any] | None = None) -> AuditReport:
    """Re-execute with each node perturbed and check no carrier outside its
    future light cone changes.

    ``execution`` must provide ``digests()`` (carrier id -> payload digest)
    and ``origin(carrier_id)`` (the event that wrote it); ``run`` re-executes
    a graph and defaults to ``execution.rerun``.
    """
    run = run or execution.rerun
    base = execution.digests()
    violations, skipped = [], []
    sensitivity: dict[str, list[str]] = {c: [] for c in base}
    checks = 0
    for node in g.nodes.values():
        params = perturb_params(node)
        if params is None:
            skipped.append(node.id)
            continue
        perturbed = run(g.with_params(node.id, params)).digests()
        for carrier, digest in base.items():
            cone = light_cone(g, execution.origin(carrier))
            changed = perturbed.get(carrier) != digest
            if node.id in cone:
                if changed:
                    sensitivity[carrier].append(node.id)
                continue
            checks += 1
            if changed:
                violations.append({"carrier": carrier, "node": node.id})
    return AuditReport(not violations, checks, violations, sensitivity, skipped)
