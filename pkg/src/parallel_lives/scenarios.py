"""Registered experiments: graph builders, state-vector oracles, and the
expected values each scenario checks about itself."""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping

import numpy as np

from .causal import CarrierEdge, CausalGraph, EventNode, add_initial_node
from .engine import Execution, OutcomeKey, detector_key, execute, terminal_distribution
from .hilbert import (
    BEAM_SPLITTER,
    Ket,
    apply_operator,
    apply_unitary,
    born_distribution,
    complex_from_json,
    complex_to_json,
    context_eigenvectors,
    double_bell_state,
    joint_context_distribution,
    prepare_state,
    reduced_matrix,
)
from .pms import standard_square


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioDescriptor:
    name: str
    params: Mapping[str, Any] = field(default_factory=dict)
    expected: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in REGISTRY:
            raise ScenarioError(f"unknown scenario {self.name!r}; choose from {sorted(REGISTRY)}")
        REGISTRY[self.name].validate(dict(self.params))

    def to_json(self) -> dict:
        return {
            "schema_version": "1.0",
            "name": self.name,
            "params": {k: _param_to_json(v) for k, v in self.params.items()},
            "expected": dict(self.expected),
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "ScenarioDescriptor":
        if "name" not in data:
            raise ScenarioError("scenario descriptor needs a name")
        spec = REGISTRY.get(data["name"])
        if spec is None:
            raise ScenarioError(f"unknown scenario {data['name']!r}")
        params = {k: _param_from_json(v) for k, v in (data.get("params") or {}).items()}
        base = spec.factory(**params)
        expected = data.get("expected")
        return cls(base.name, base.params, dict(expected) if expected is not None else base.expected)


def _param_to_json(v):
    if isinstance(v, complex):
        return complex_to_json(v) if v.imag else v.real
    return v


def _param_from_json(v):
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v):
        return complex_from_json(v)
    return v


@dataclass(frozen=True)
class ScenarioSpec:
    name: str
    factory: Callable[..., ScenarioDescriptor]
    builder: Callable[[Mapping[str, Any]], CausalGraph]
    oracle: Callable[[Mapping[str, Any]], dict]
    metrics: Callable[[Mapping[str, Any], Execution], dict[str, float]]
    defaults: Mapping[str, Any]

    def validate(self, params: Mapping[str, Any]) -> None:
        unknown = set(params) - set(self.defaults)
        if unknown:
            raise ScenarioError(f"{self.name}: unknown parameters {sorted(unknown)}")


REGISTRY: dict[str, ScenarioSpec] = {}


def _register(name, defaults, builder, oracle, metrics):
    def deco(factory):
        REGISTRY[name] = ScenarioSpec(name, factory, builder, oracle, metrics, defaults)
        return factory
    return deco


def _bool(v) -> bool:
    if isinstance(v, str):
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        raise ScenarioError(f"not a boolean: {v!r}")
    return bool(v)


def _number(v) -> complex:
    if isinstance(v, str):
        try:
            return complex(v.replace(" ", ""))
        except ValueError:
            pass
        if "/" in v:
            num, den = v.split("/")
            return complex(float(num) / float(den))
        raise ScenarioError(f"not a number: {v!r}")
    return complex(v)


def _amplitudes(a, b) -> tuple[complex, complex]:
    a, b = _number(a), _number(b)
    if abs(abs(a) ** 2 + abs(b) ** 2 - 1) > 1e-9:
        raise ScenarioError(f"amplitudes ({a}, {b}) are not normalized")
    return a, b


def _simplify(z: complex):
    return z.real if abs(z.imag) < 1e-15 else z


def build_graph(desc: ScenarioDescriptor) -> CausalGraph:
    spec = REGISTRY[desc.name]
    params = {**spec.defaults, **desc.params}
    g = spec.builder(params)
    g.meta["scenario"] = desc.name
    return g


def oracle_distribution(desc: ScenarioDescriptor) -> dict:
    spec = REGISTRY[desc.name]
    return spec.oracle({**spec.defaults, **desc.params})


def scenario_metrics(desc: ScenarioDescriptor, ex: Execution) -> dict[str, float]:
    spec = REGISTRY[desc.name]
    return spec.metrics({**spec.defaults, **desc.params}, ex)


@dataclass
class ExpectationResult:
    metric: str
    expected: float
    measured: float | None
    delta: float | None
    passed: bool

    def to_json(self) -> dict:
        return self.__dict__.copy()


def check_expected(desc: ScenarioDescriptor, ex: Execution, tolerance: float = 1e-9) -> list[ExpectationResult]:
    measured = scenario_metrics(desc, ex)
    out = []
    for metric, want in desc.expected.items():
        got = measured.get(metric)
        if got is None:
            out.append(ExpectationResult(metric, want, None, None, False))
            continue
        delta = abs(got - want)
        exact = isinstance(want, int) and not isinstance(want, bool)
        passed = delta == 0 if exact else delta <= tolerance
        out.append(ExpectationResult(metric, want, got, delta, passed))
    return out


def _life_metrics(ex: Execution) -> dict[str, float]:
    out = {}
    for eid, c in ex.payloads.items():
        if ex.graph.nodes[ex.graph.edges[eid].src].kind == "Initial":
            continue
        out[f"lives:{eid}"] = len(c.lives)
        out[f"histories:{eid}"] = c.history_count()
        out[f"fluid:{eid}"] = float(sum(l.fluid for l in c.lives))
    for nid, c in ex.terminals.items():
        out[f"lives:{nid}"] = len(c.lives)
        out[f"histories:{nid}"] = c.history_count()
        out[f"fluid:{nid}"] = float(sum(l.fluid for l in c.lives))
        if c.absorbed:
            out[f"absorbed:{nid}"] = out[f"fluid:{nid}"]
    return out


# ---------------------------------------------------------------------------
# Bell experiment on the Peres-Mermin square

ROW_EDGE, COL_EDGE = "m1", "m2"


def pms_contexts(kind: str) -> list:
    sq = standard_square()
    ctxs = [sq.row(i) for i in range(3)] if kind == "row" else [sq.column(j) for j in range(3)]
    return [[i + 1, [[k, vec] for k, (_, vec) in enumerate(context_eigenvectors(ctx), start=1)]]
            for i, ctx in enumerate(ctxs)]


def _build_bell(p) -> CausalGraph:
    nodes = [
        EventNode("S", "Source", {"state": double_bell_state(), "emit": {
            "s1": {"qubits": [0, 1], "basis": "z", "system": "s1"},
            "s2": {"qubits": [2, 3], "basis": "z", "system": "s2"}}}),
        EventNode("R1", "RandomChoice", {"options": [1, 2, 3]}),
        EventNode("R2", "RandomChoice", {"options": [1, 2, 3]}),
        EventNode("M1", "Measurement", {"control": "r1", "contexts": pms_contexts("row")}),
        EventNode("M2", "Measurement", {"control": "r2", "contexts": pms_contexts("col")}),
    ]
    end = "gamma" if _bool(p["gamma_block"]) else "E"
    nodes.append(EventNode(end, "Block" if end == "gamma" else "Join", {}))
    edges = [
        CarrierEdge("r1", "R1", "M1"), CarrierEdge("r2", "R2", "M2"),
        CarrierEdge("s1", "S", "M1"), CarrierEdge("s2", "S", "M2"),
        CarrierEdge("m1", "M1", end), CarrierEdge("m2", "M2", end),
    ]
    g = CausalGraph(nodes, edges)
    if _bool(p["inflation"]):
        g = add_initial_node(g, Ket([1, 0]))
    return g


def bell_oracle(p=None) -> dict[tuple, float]:
    """Born distribution of (row, row outcome, column, column outcome) with
    uniformly random settings, from the four-qubit state vector."""
    sq = standard_square()
    psi = double_bell_state()
    out = {}
    for i, j in itertools.product(range(3), repeat=2):
        joint = joint_context_distribution(psi, [(sq.row(i), [0, 1]), (sq.column(j), [2, 3])])
        for (k, l), prob in joint.items():
            if prob > 1e-15:
                out[(i + 1, k, j + 1, l)] = prob / 9
    return out


def shared_values(label: tuple) -> tuple[int, int]:
    """Values each party obtained for the observable they both measured."""
    i, k, j, l = label
    sq = standard_square()
    row_triple = sq.row(i - 1).outcomes()[k - 1]
    col_triple = sq.column(j - 1).outcomes()[l - 1]
    return row_triple[j - 1], col_triple[i - 1]


def _bell_metrics(p, ex: Execution) -> dict[str, float]:
    out = _life_metrics(ex)
    end = "gamma" if _bool(p["gamma_block"]) else "E"
    stats = ex.results[end].stats
    if "pairings_total" in stats:
        out[f"pairings_total:{end}"] = stats["pairings_total"]
        out[f"pairings_kept:{end}"] = stats["pairings_kept"]
        out[f"shared_agree:{end}"] = sum(len(set(shared_values(l.label))) == 1 for l in ex.results[end].lives)
    if ex.graph.initial_node is not None:
        from .models import run_pl_inflation
        table = run_pl_inflation(ex.graph, ex)
        for name, row in table.rows.items():
            out[f"pl_inflation_lives:{name}"] = row.lives
    return out


@_register("bell_pms", {"inflation": False, "gamma_block": False}, _build_bell, bell_oracle, _bell_metrics)
def scenario_bell_pms(inflation: bool = False, gamma_block: bool = False) -> ScenarioDescriptor:
    inflation, gamma_block = _bool(inflation), _bool(gamma_block)
    counts = {"r1": 3, "r2": 3, "s1": 4, "s2": 4, "m1": 12, "m2": 12}
    expected: dict[str, float] = {f"lives:{k}": v for k, v in counts.items()}
    expected["histories:m1"] = 48
    if gamma_block:
        expected.update({"lives:gamma": 72, "absorbed:gamma": 1.0})
    else:
        expected.update({"lives:E": 72, "histories:E": 288, "pairings_total:E": 144,
                         "pairings_kept:E": 72, "shared_agree:E": 72})
    if inflation:
        expected.update({"pl_inflation_lives:s1": 48, "pl_inflation_lives:s2": 48,
                         "pl_inflation_lives:r1": 3, "pl_inflation_lives:m1": 12})
        if not gamma_block:
            expected["pl_inflation_lives:E"] = 72
    return ScenarioDescriptor("bell_pms", {"inflation": inflation, "gamma_block": gamma_block}, expected)


# ---------------------------------------------------------------------------
# Entangled pair measured by two detectors


def _computational(d=2):
    return [[k, np.eye(d, dtype=complex)[k]] for k in range(d)]


def _build_pair(p) -> CausalGraph:
    a, b = _amplitudes(p["a"], p["b"])
    basis = p["basis"]
    nodes = [
        EventNode("S", "Source", {"state": Ket([a, 0, 0, b]), "emit": {
            "q1": {"qubits": [0], "basis": basis, "system": "q1"},
            "q2": {"qubits": [1], "basis": basis, "system": "q2"}}}),
        EventNode("D1", "Measurement", {"control": None, "basis": _computational()}),
        EventNode("D2", "Measurement", {"control": None, "basis": _computational()}),
        EventNode("X", "Join", {}),
    ]
    edges = [CarrierEdge("q1", "S", "D1"), CarrierEdge("q2", "S", "D2"),
             CarrierEdge("d1", "D1", "X"), CarrierEdge("d2", "D2", "X")]
    return CausalGraph(nodes, edges)


def pair_oracle(p) -> dict[tuple, float]:
    a, b = _amplitudes(p["a"], p["b"])
    dist = born_distribution(Ket([a, 0, 0, b]), "z")
    return {tuple(int(c) for c in lab): prob for lab, prob in dist.items()}


def _pair_metrics(p, ex: Execution) -> dict[str, float]:
    out = _life_metrics(ex)
    labels = ("+", "-") if p["basis"] == "x" else (0, 1)
    for eid, names in (("q1", labels), ("q2", labels), ("d1", (0, 1)), ("d2", (0, 1))):
        out.update({f"fluid:{eid}:{x}": 0.0 for x in names})
        for life in ex.payloads[eid].lives:
            out[f"fluid:{eid}:{','.join(map(str, life.label))}"] = life.fluid
    for life in ex.results["X"].lives:
        out[f"fluid:X:{','.join(map(str, life.label))}"] = life.fluid
    return out


@_register("entangled_pair", {"a": 0.8, "b": 0.6, "basis": "z"}, _build_pair, pair_oracle, _pair_metrics)
def scenario_entangled_pair(a=0.8, b=0.6, basis: str = "z") -> ScenarioDescriptor:
    a, b = _amplitudes(a, b)
    if basis not in ("z", "x", "computational", "X", "Z"):
        raise ScenarioError(f"unsupported basis {basis!r}")
    basis = {"computational": "z", "Z": "z", "X": "x"}.get(basis, basis)
    pa, pb = abs(a) ** 2, abs(b) ** 2
    expected: dict[str, float] = {}
    if basis == "z":
        expected.update({"fluid:q1:0": pa, "fluid:q1:1": pb})
    else:
        expected.update({"fluid:q1:+": 0.5, "fluid:q1:-": 0.5})
    expected.update({"fluid:d1:0": pa, "fluid:d1:1": pb})
    if pa > 1e-12:
        expected["fluid:X:0,0"] = pa
    if pb > 1e-12:
        expected["fluid:X:1,1"] = pb
    expected["lives:X"] = int(pa > 1e-12) + int(pb > 1e-12)
    return ScenarioDescriptor("entangled_pair", {"a": _simplify(a), "b": _simplify(b), "basis": basis}, expected)


# ---------------------------------------------------------------------------
# Mach-Zehnder interferometer, optionally with a bomb in the lower arm

_BS_SPLIT = {"inputs": [[0], [1]], "outputs": [["u"], ["l"]], "matrix": BEAM_SPLITTER}
# Output labels chosen so that the bright port of the tuned interferometer is d0.
_BS_RECOMBINE = {"inputs": [["u"], ["l"]], "outputs": [["d1"], ["d0"]], "matrix": BEAM_SPLITTER}


def _build_mz(p) -> CausalGraph:
    second, bomb = _bool(p["second_bs"]), _bool(p["bomb"])
    nodes = [
        EventNode("photon", "Source", {"state": Ket([1, 0]),
                                       "emit": {"in": {"qubits": [0], "basis": "z", "system": "photon"}}}),
        EventNode("BS1", "Unitary", _BS_SPLIT),
        EventNode("D0", "Measurement", {"control": None, "basis": "identity"}),
    ]
    edges = [CarrierEdge("in", "photon", "BS1")]
    lower_target = "bomb" if bomb else None
    if bomb:
        nodes.append(EventNode("bomb", "Block", {}))
    if second:
        nodes += [EventNode("BS2", "Unitary", _BS_RECOMBINE), EventNode("D1", "Measurement",
                                                                       {"control": None, "basis": "identity"})]
        edges += [CarrierEdge("arm_u", "BS1", "BS2", (("u",),)),
                  CarrierEdge("arm_l", "BS1", lower_target or "BS2", (("l",),)),
                  CarrierEdge("out_d0", "BS2", "D0", (("d0",),)),
                  CarrierEdge("out_d1", "BS2", "D1", (("d1",),))]
    else:
        edges.append(CarrierEdge("arm_u", "BS1", "D0", (("u",),)))
        if bomb:
            edges.append(CarrierEdge("arm_l", "BS1", "bomb", (("l",),)))
        else:
            nodes.append(EventNode("D1", "Measurement", {"control": None, "basis": "identity"}))
            edges.append(CarrierEdge("arm_l", "BS1", "D1", (("l",),)))
    return CausalGraph(nodes, edges)


def mz_oracle(p) -> dict[str, float]:
    """Path qubit (0 = upper arm) plus a bomb qubit flipped by the lower arm."""
    second, bomb = _bool(p["second_bs"]), _bool(p["bomb"])
    psi = Ket([1, 0, 0, 0])
    psi = apply_unitary(psi, BEAM_SPLITTER, [0])
    if bomb:
        psi = apply_unitary(psi, "CNOT", [0, 1])
    if second:
        psi = apply_unitary(psi, BEAM_SPLITTER, [0])
    probs = np.abs(psi.amplitudes) ** 2  # index = 2*path + bomb
    out = {"absorbed": probs[1] + probs[3]} if bomb else {}
    if second:
        out.update({"D0": probs[2], "D1": probs[0]})
    else:
        out["D0"] = probs[0]
        if not bomb:
            out["D1"] = probs[2]
    return out


def detector_fluids(ex: Execution) -> dict[str, float]:
    """Fluid at every detector; a dark detector reports 0."""
    out = {detector_key(nid, c, None): 0.0 for nid, c in ex.terminals.items()}
    out.update(terminal_distribution(ex, detector_key))
    return out


def _mz_metrics(p, ex: Execution) -> dict[str, float]:
    out = _life_metrics(ex)
    out.update({f"detector:{k}": v for k, v in detector_fluids(ex).items()})
    return out


@_register("mach_zehnder", {"second_bs": True, "bomb": False}, _build_mz, mz_oracle, _mz_metrics)
def scenario_mach_zehnder(second_bs: bool = True, bomb: bool = False) -> ScenarioDescriptor:
    second_bs, bomb = _bool(second_bs), _bool(bomb)
    if second_bs and not bomb:
        expected = {"detector:D0": 1.0, "detector:D1": 0.0}
    elif not second_bs and not bomb:
        expected = {"detector:D0": 0.5, "detector:D1": 0.5}
    elif second_bs and bomb:
        expected = {"detector:D0": 0.25, "detector:D1": 0.25, "detector:absorbed": 0.5}
    else:
        expected = {"detector:D0": 0.5, "detector:absorbed": 0.5}
    return ScenarioDescriptor("mach_zehnder", {"second_bs": second_bs, "bomb": bomb}, expected)


# ---------------------------------------------------------------------------
# Delayed-choice quantum eraser

IDLER_DETECTORS = ("A", "B", "C1", "C2")
_R = 1 / math.sqrt(2)


def screen_vectors(n: int) -> list:
    """A complete POVM on the signal path qubit, one element per screen point.

    Point ``m`` sees relative phase ``2 pi m / n`` between the two source
    paths; the elements sum to the identity.
    """
    scale = math.sqrt(2 / n) * _R
    return [[m, scale * np.array([1, np.exp(2j * np.pi * m / n)])] for m in range(n)]


def _build_eraser(p) -> CausalGraph:
    n = int(p["screen_points"])
    if n < 4:
        raise ScenarioError("screen needs at least 4 points")
    state = Ket(np.array([1, 0, 0, 1]) * _R)
    nodes = [
        EventNode("SPDC", "Source", {"state": state, "emit": {
            "signal": {"qubits": [0], "basis": "z", "system": "signal"},
            "idler_a": {"qubits": [1], "basis": "z", "system": "idler"},
            "idler_b": {"qubits": [1], "basis": "z", "system": "idler"}}}),
        EventNode("Screen", "Measurement", {"control": None, "basis": screen_vectors(n)}),
        EventNode("BS_A", "Unitary", {"inputs": [[0]], "outputs": [["A"], ["ca"]],
                                      "matrix": np.array([[1], [1j]]) * _R}),
        EventNode("BS_B", "Unitary", {"inputs": [[1]], "outputs": [["B"], ["cb"]],
                                      "matrix": np.array([[1], [1j]]) * _R}),
        EventNode("BS_C", "Unitary", {"inputs": [["ca"], ["cb"]], "outputs": [["C1"], ["C2"]],
                                      "matrix": BEAM_SPLITTER}),
        *[EventNode(f"D{d}", "Measurement", {"control": None, "basis": "identity"}) for d in IDLER_DETECTORS],
        EventNode("Coincidence", "Join", {}),
    ]
    edges = [
        CarrierEdge("signal", "SPDC", "Screen"),
        CarrierEdge("idler_a", "SPDC", "BS_A", ((0,),)),
        CarrierEdge("idler_b", "SPDC", "BS_B", ((1,),)),
        CarrierEdge("to_A", "BS_A", "DA", (("A",),)),
        CarrierEdge("to_ca", "BS_A", "BS_C", (("ca",),)),
        CarrierEdge("to_B", "BS_B", "DB", (("B",),)),
        CarrierEdge("to_cb", "BS_B", "BS_C", (("cb",),)),
        CarrierEdge("to_C1", "BS_C", "DC1", (("C1",),)),
        CarrierEdge("to_C2", "BS_C", "DC2", (("C2",),)),
        CarrierEdge("screen", "Screen", "Coincidence"),
        *[CarrierEdge(f"click_{d}", f"D{d}", "Coincidence") for d in IDLER_DETECTORS],
    ]
    return CausalGraph(nodes, edges)


def eraser_oracle(p) -> dict[tuple, float]:
    """Joint (screen point, idler detector) probabilities.

    The idler's four output modes form one qudit; the beam-splitter network
    is the isometry from its two source paths into those modes.
    """
    n = int(p["screen_points"])
    # columns: source path a, b; rows: detector modes A, B, C1, C2
    w = np.array([[1, 0], [0, 1], [1j * _R, -_R], [-_R, 1j * _R]]) * _R
    iso = np.zeros((8, 4), dtype=complex)  # signal (2) x idler modes (4)
    for s in range(2):
        for k in range(2):
            iso[s * 4:(s + 1) * 4, s * 2 + k] = w[:, k]
    psi = iso @ (np.array([1, 0, 0, 1]) * _R)
    out = {}
    for m, vec in screen_vectors(n):
        proj = np.kron(vec.conj(), np.eye(4)) @ psi
        for d, amp in zip(IDLER_DETECTORS, proj):
            out[(m, d)] = float(abs(amp) ** 2)
    return out


def fringe(dist: Mapping[tuple, float], detector: str | None, n: int) -> np.ndarray:
    """Screen pattern, conditioned on one idler detector (or summed over all)."""
    return np.array([sum(p for (m, d), p in dist.items() if m == point and (detector is None or d == detector))
                     for point in range(n)])


def visibility(pattern: np.ndarray) -> float:
    hi, lo = float(pattern.max()), float(pattern.min())
    return 0.0 if hi + lo <= 0 else (hi - lo) / (hi + lo)


def fringe_phase(pattern: np.ndarray) -> float:
    n = len(pattern)
    return float(np.angle(np.sum(pattern * np.exp(-2j * np.pi * np.arange(n) / n))))


def phase_offset(a: float, b: float) -> float:
    """Absolute phase difference folded into [0, pi]."""
    return float(abs(np.angle(np.exp(1j * (a - b)))))


def eraser_summary(dist: Mapping[tuple, float], n: int) -> dict[str, float]:
    out = {}
    for d in IDLER_DETECTORS:
        out[f"visibility:{d}"] = visibility(fringe(dist, d, n))
    out["visibility:all"] = visibility(fringe(dist, None, n))
    out["phase_offset:C1,C2"] = phase_offset(fringe_phase(fringe(dist, "C1", n)), fringe_phase(fringe(dist, "C2", n)))
    return out


def _eraser_metrics(p, ex: Execution) -> dict[str, float]:
    n = int(p["screen_points"])
    out = _life_metrics(ex)
    for d in IDLER_DETECTORS:
        out[f"idler:{d}"] = float(sum(l.fluid for l in ex.payloads[f"click_{d}"].lives))
    dist = {(lab[0], lab[1]): f for lab, f in terminal_distribution(ex).items()}
    out.update(eraser_summary(dist, n))
    return out


@_register("quantum_eraser", {"screen_points": 64}, _build_eraser, eraser_oracle, _eraser_metrics)
def scenario_quantum_eraser(screen_points: int = 64) -> ScenarioDescriptor:
    expected = {f"idler:{d}": 0.25 for d in IDLER_DETECTORS}
    expected.update({"visibility:C1": 1.0, "visibility:C2": 1.0, "phase_offset:C1,C2": math.pi,
                     "visibility:A": 0.0, "visibility:B": 0.0, "visibility:all": 0.0})
    return ScenarioDescriptor("quantum_eraser", {"screen_points": int(screen_points)}, expected)


# ---------------------------------------------------------------------------
# Wigner's friend: atom, cat, Schrodinger, Wigner


def _build_wigner(p) -> CausalGraph:
    a, b = _amplitudes(p["a"], p["b"])
    outcome = [["alive", np.array([1, 0], dtype=complex)], ["dead", np.array([0, 1], dtype=complex)]]
    ready = Ket([1, 0])
    nodes = [
        EventNode("Atom", "Source", {"state": Ket([a, b]),
                                     "emit": {"atom": {"qubits": [0], "basis": "z", "system": "atom"}}}),
        EventNode("Cat", "Measurement", {"control": None, "basis": outcome}),
        EventNode("FriendLab", "Source", {"state": ready,
                                          "emit": {"friend": {"qubits": [0], "basis": "z", "system": "friend"}}}),
        EventNode("Schrodinger", "Join", {}),
        EventNode("WignerLab", "Source", {"state": ready,
                                          "emit": {"wigner": {"qubits": [0], "basis": "z", "system": "wigner"}}}),
        EventNode("Wigner", "Join", {}),
    ]
    edges = [
        CarrierEdge("atom", "Atom", "Cat"), CarrierEdge("cat", "Cat", "Schrodinger"),
        CarrierEdge("friend", "FriendLab", "Schrodinger"), CarrierEdge("schrodinger", "Schrodinger", "Wigner"),
        CarrierEdge("wigner", "WignerLab", "Wigner"),
    ]
    return CausalGraph(nodes, edges)


def wigner_renderings(a=_R, b=_R) -> dict[str, np.ndarray]:
    """Reduced state of the non-participants (Wigner, atom) around the
    cat/Schrodinger interaction, rendered three ways.

    Register order: atom, cat, Schrodinger, Wigner.
    """
    a, b = _amplitudes(a, b)
    psi = Ket(np.kron([a, b], [1, 0, 0, 0, 0, 0, 0, 0]))
    psi = apply_unitary(psi, "CNOT", [0, 1])  # t1: the cat meets the atom
    before = reduced_matrix(psi, [3, 0])
    after = apply_unitary(psi, "CNOT", [1, 2])  # t2 seen from outside: unitary entangling
    unitary = reduced_matrix(after, [3, 0])
    # t2 seen by the participants: collapse onto each cat/Schrodinger outcome
    collapse = np.zeros((4, 4), dtype=complex)
    for k in range(2):
        proj = np.zeros((4, 4))
        proj[3 * k, 3 * k] = 1  # |kk> on (cat, Schrodinger)
        branch = apply_operator(after.amplitudes, after.dims, proj, [1, 2])
        if np.vdot(branch, branch).real > 1e-15:
            collapse += reduced_matrix(Ket(branch / np.linalg.norm(branch)), [3, 0]) * np.vdot(branch, branch).real
    return {"before": before, "unitary": unitary, "collapse": collapse}


def wigner_oracle(p) -> dict[tuple, float]:
    a, b = _amplitudes(p["a"], p["b"])
    out = {}
    if abs(a) > 1e-12:
        out[("alive", 0, 0)] = abs(a) ** 2
    if abs(b) > 1e-12:
        out[("dead", 0, 0)] = abs(b) ** 2
    return out


def _wigner_metrics(p, ex: Execution) -> dict[str, float]:
    out = _life_metrics(ex)
    r = wigner_renderings(p["a"], p["b"])
    out["relativity:unitary_vs_collapse"] = float(np.max(np.abs(r["unitary"] - r["collapse"])))
    out["relativity:before_vs_after"] = float(np.max(np.abs(r["before"] - r["unitary"])))
    return out


@_register("wigner_friend", {"a": _R, "b": _R}, _build_wigner, wigner_oracle, _wigner_metrics)
def scenario_wigner_friend(a=_R, b=_R) -> ScenarioDescriptor:
    a, b = _amplitudes(a, b)
    n = int(abs(a) > 1e-12) + int(abs(b) > 1e-12)
    expected = {"lives:cat": n, "lives:schrodinger": n, "lives:Wigner": n,
                "relativity:unitary_vs_collapse": 0.0, "relativity:before_vs_after": 0.0}
    return ScenarioDescriptor("wigner_friend", {"a": _simplify(a), "b": _simplify(b)}, expected)


def make_scenario(name: str, **params) -> ScenarioDescriptor:
    spec = REGISTRY.get(name)
    if spec is None:
        raise ScenarioError(f"unknown scenario {name!r}; choose from {sorted(REGISTRY)}")
    spec.validate(params)
    try:
        return spec.factory(**params)
    except TypeError as exc:
        raise ScenarioError(str(exc)) from exc


def load_scenario_file(path) -> ScenarioDescriptor:
    with open(path) as fh:
        return ScenarioDescriptor.from_json(json.load(fh))


def outcome_key(desc: ScenarioDescriptor) -> OutcomeKey | None:
    """How terminal lives are keyed so that they line up with the oracle."""
    return detector_key if desc.name == "mach_zehnder" else None
