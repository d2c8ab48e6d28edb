"""Systems that carry parallel lives, and the local rules that correlate them.

Each :class:`Life` stores, besides its label and amplitude, a *path vector*:
the linear functional that maps the joint labels of the prepared states it
descends from (its carrier's *slots*) to the amplitude flowing into this
life.  Those prepared states travel with the carrier as
:class:`InteractionRecord` objects, so every amplitude is evaluated from
information that is locally present:

* fluid of a life = ``A rho A^dagger``, with ``rho`` the reduced state of the
  carried records on the carrier's slots;
* when the slots cover whole records the state is pure and the life gets a
  genuine complex amplitude ``A . psi``;
* a join concatenates slots and takes tensor products of path vectors, so
  correlations recorded at a common source reappear exactly when two
  carriers meet.

Path vectors have a leading *branch* axis.  Ordinary lives have one branch;
:func:`project_merge` stacks branches so that fluid adds without
interfering.
"""

from __future__ import annotations

import hashlib
import math
from collections import OrderedDict
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Any, Callable, Hashable, Iterable, Mapping, Sequence

import numpy as np

from .hilbert import Ket, product_basis, reduced_matrix, uniform_state

PRUNE = 1e-12
FLUID_ATOL = 1e-9

Label = tuple
Slot = tuple  # (record_id, subsystem index)


def _symbol(s: str):
    return int(s) if s.isdigit() else s


@dataclass(frozen=True, eq=False)
class InteractionRecord:
    """One entry of a life's local interaction history.

    Preparation records hold the prepared Ket; event records name the
    records they conditioned on (``refs``) and the local outcome.
    """

    record_id: str
    participants: tuple[str, ...]
    state: Ket | None = None
    refs: tuple[str, ...] = ()
    local_outcome: tuple | None = None

    def __post_init__(self):
        if not self.participants:
            raise ValueError("an interaction needs participants")
        if self.state is None and not self.refs and self.local_outcome is None:
            raise ValueError("record must hold a state, references, or an outcome")

    @property
    def key(self) -> tuple:
        return (self.record_id, self.local_outcome)

    def digest(self) -> bytes:
        parts = [self.record_id, repr(self.participants), repr(self.refs), repr(self.local_outcome)]
        body = "|".join(parts).encode()
        return body + (self.state.digest() if self.state is not None else b"")


def _merge_histories(histories: Iterable[Sequence[InteractionRecord]]) -> tuple[InteractionRecord, ...]:
    out: OrderedDict = OrderedDict()
    for h in histories:
        for rec in h:
            out.setdefault(rec.key, rec)
    return tuple(out.values())


@dataclass(frozen=True, eq=False)
class Life:
    label: Label
    amplitude: complex
    paths: np.ndarray
    support: np.ndarray
    history: tuple[InteractionRecord, ...]
    parents: tuple[tuple[str | None, Label], ...] = ()
    origin: str | None = None

    def __post_init__(self):
        if not isinstance(self.label, tuple):
            raise ValueError("life labels are tuples")
        if abs(self.amplitude) ** 2 > 1 + FLUID_ATOL:
            raise ValueError(f"life {self.label} has fluid above 1")

    @property
    def fluid(self) -> float:
        return abs(self.amplitude) ** 2

    @property
    def branches(self) -> int:
        return self.paths.shape[0]


@dataclass(frozen=True)
class Route:
    """One input combination feeding an output life at an event."""

    out: Label
    inputs: tuple[tuple[str | None, Label], ...]
    coeff: complex
    fluid: float


# ---------------------------------------------------------------------------
# Reduced states on slots


def slot_state(records: Mapping[str, InteractionRecord], slots: Sequence[Slot]):
    """Density matrix (and state vector, when pure) of the records on ``slots``.

    Axes follow slot order.  Distinct records are independent preparations.
    """
    if not slots:
        return np.ones((1, 1), dtype=complex), np.ones(1, dtype=complex)
    groups: OrderedDict[str, list[int]] = OrderedDict()
    for rid, idx in slots:
        groups.setdefault(rid, []).append(idx)
    rho = np.ones((1, 1), dtype=complex)
    psi = np.ones(1, dtype=complex)
    pure = True
    grouped: list[Slot] = []
    for rid, idxs in groups.items():
        ket = records[rid].state
        if ket is None:
            raise ValueError(f"record {rid} holds no state")
        if sorted(idxs) == list(range(ket.num_qubits)):
            vec = np.moveaxis(ket.tensor(), idxs, range(len(idxs))).reshape(-1)
            psi = np.kron(psi, vec)
            rho = np.kron(rho, np.outer(vec, vec.conj()))
        else:
            pure = False
            rho = np.kron(rho, reduced_matrix(ket, idxs))
        grouped.extend((rid, i) for i in idxs)
    if grouped != list(slots):
        dims = [records[rid].state.dims[i] for rid, i in grouped]
        perm = [grouped.index(tuple(s)) for s in slots]
        n = len(dims)
        rho = rho.reshape(dims * 2).transpose(perm + [p + n for p in perm]).reshape(rho.shape)
        psi = psi.reshape(dims).transpose(perm).reshape(-1)
    return rho, (psi if pure else None)


def _fluid(paths: np.ndarray, rho: np.ndarray) -> float:
    return float(np.einsum("ri,ij,rj->", paths, rho, paths.conj()).real)


def _pad(paths: np.ndarray, branches: int) -> np.ndarray:
    if paths.shape[0] == branches:
        return paths
    out = np.zeros((branches, paths.shape[1]), dtype=complex)
    out[: paths.shape[0]] = paths
    return out


# ---------------------------------------------------------------------------
# Carriers


@dataclass(frozen=True, eq=False)
class Carrier:
    """A system on one edge of the causal graph, holding its parallel lives."""

    system_id: str
    lives: tuple[Life, ...]
    slots: tuple[Slot, ...] = ()
    records: Mapping[str, InteractionRecord] = field(default_factory=dict)
    preferred_basis: Mapping[Label, np.ndarray] | None = None
    absorbed: bool = False
    stats: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        labels = [life.label for life in self.lives]
        if len(set(labels)) != len(labels):
            raise ValueError(f"carrier {self.system_id} has repeated life labels")
        total = sum(life.fluid for life in self.lives)
        if total > 1 + FLUID_ATOL:
            raise ValueError(f"carrier {self.system_id} holds fluid {total:.12g} > 1")

    @cached_property
    def state(self):
        return slot_state(self.records, self.slots)

    @property
    def rho(self) -> np.ndarray:
        return self.state[0]

    @property
    def branches(self) -> int:
        return max((life.branches for life in self.lives), default=1)

    def life(self, label: Label) -> Life:
        for life in self.lives:
            if life.label == label:
                return life
        raise KeyError(label)

    def labels(self) -> list[Label]:
        return [life.label for life in self.lives]

    def fluid_shares(self) -> dict[Label, float]:
        return {life.label: life.fluid for life in self.lives}

    def history_count(self, life: Life | None = None) -> int:
        """Record-label combinations routed into a life (or all lives) that
        the prepared states allow."""
        allowed = np.diag(self.rho).real > 1e-15
        lives = [life] if life is not None else self.lives
        return int(sum(np.count_nonzero(l.support & allowed) for l in lives))

    def select(self, labels: Iterable[Label] | None) -> "Carrier":
        if labels is None:
            return self
        keep = set(labels)
        return replace(self, lives=tuple(l for l in self.lives if l.label in keep), stats={})

    def with_origin(self, origin: str, system_id: str | None = None) -> "Carrier":
        lives = tuple(replace(l, origin=origin) for l in self.lives)
        return replace(self, lives=lives, system_id=system_id or self.system_id, stats={})

    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(repr((self.system_id, self.absorbed, self.slots)).encode())
        for rid in sorted(self.records):
            h.update(self.records[rid].digest())
        for life in self.lives:
            h.update(repr((life.label, life.origin, life.parents)).encode())
            h.update(np.complex128(life.amplitude).tobytes())
            h.update(life.paths.tobytes())
            h.update(life.support.tobytes())
            for rec in life.history:
                h.update(rec.digest())
        return h.hexdigest()


def _finish_life(label, paths, support, history, parents, rho, psi) -> Life:
    paths = np.asarray(paths, dtype=complex)
    paths.setflags(write=False)
    support = np.asarray(support, dtype=bool)
    support.setflags(write=False)
    if psi is not None and paths.shape[0] == 1:
        amplitude = complex(paths[0] @ psi)
    else:
        amplitude = complex(math.sqrt(max(_fluid(paths, rho), 0.0)))
    return Life(label, amplitude, paths, support, tuple(history), tuple(parents))


def total_fluid(c: Carrier) -> float:
    return float(sum(life.fluid for life in c.lives))


# ---------------------------------------------------------------------------
# Operations


def split_on_preparation(
    state: Ket,
    subsystem: Sequence[int],
    basis: Any = "z",
    *,
    record: InteractionRecord | None = None,
    record_id: str = "prep",
    system_id: str | None = None,
    history: Sequence[InteractionRecord] = (),
) -> Carrier:
    """Lives of the subsystem ``subsystem`` of a freshly prepared ``state``.

    One life per preferred-basis label with nonzero marginal; its fluid is the
    reduced-state probability and its history ends with the preparation record.
    """
    subsystem = list(subsystem)
    if not subsystem:
        raise ValueError("empty subsystem")
    if record is None:
        record = InteractionRecord(record_id, (system_id or record_id,), state=state)
    rid = record.record_id
    slots = tuple((rid, i) for i in subsystem)
    records = {rid: record}
    rho, psi = slot_state(records, slots)
    per = product_basis(basis, [state.dims[i] for i in subsystem])
    lives, vectors = [], {}
    for combo in np.ndindex(*[len(sym) for sym, _ in per]):
        label = tuple(_symbol(per[k][0][j]) for k, j in enumerate(combo))
        vec = np.ones(1, dtype=complex)
        for k, j in enumerate(combo):
            vec = np.kron(vec, per[k][1][:, j])
        vectors[label] = vec
        life = _finish_life(label, vec.conj()[None, :], np.abs(vec) > 1e-15,
                            (*history, record), (), rho, psi)
        if abs(life.amplitude) >= PRUNE:
            lives.append(life)
    return Carrier(system_id or rid, tuple(lives), slots, records, vectors)


def relabel(c: Carrier, mapping: Mapping[Label, Label]) -> Carrier:
    lives = tuple(replace(l, label=mapping[l.label]) for l in c.lives)
    basis = None if c.preferred_basis is None else {mapping[k]: v for k, v in c.preferred_basis.items() if k in mapping}
    return replace(c, lives=lives, preferred_basis=basis, stats={})


def random_choice(
    options: Sequence[Hashable], *, record_id: str, system_id: str | None = None,
    history: Sequence[InteractionRecord] = (),
) -> Carrier:
    """Lives of a quantum random-number generator: one per option, equal fluid."""
    if not options:
        raise ValueError("a random choice needs at least one option")
    ket = uniform_state((len(options),))
    c = split_on_preparation(ket, [0], "z", record_id=record_id, system_id=system_id, history=history)
    return relabel(c, {(k,): (opt,) for k, opt in enumerate(options)})


def merge_channels(carriers: Sequence[Carrier]) -> Carrier:
    """Recombine channel carriers of one system into a single carrier."""
    if not carriers:
        raise ValueError("nothing to merge")
    if len(carriers) == 1:
        return carriers[0]
    first = carriers[0]
    for c in carriers[1:]:
        if c.system_id != first.system_id or c.slots != first.slots:
            raise ValueError("only channels of the same system can be merged")
    branches = max(c.branches for c in carriers)
    lives, records, basis = [], {}, {}
    for c in carriers:
        records.update(c.records)
        if c.preferred_basis is not None:
            basis.update(c.preferred_basis)
        for l in c.lives:
            lives.append(replace(l, paths=_pad(l.paths, branches)))
    return Carrier(first.system_id, tuple(lives), first.slots, records, basis or None,
                   any(c.absorbed for c in carriers))


def transform(
    c: Carrier,
    transfer: Mapping[Label, Mapping[Label, complex]],
    *,
    record_id: str,
    preferred_basis: Mapping[Label, np.ndarray] | None = None,
) -> Carrier:
    """Route the lives of one carrier through a local linear map.

    ``transfer[out][in]`` is the amplitude for input life ``in`` to flow into
    output ``out``; listing a zero entry still counts as a structural route.
    """
    rho, psi = c.state
    by_label = {l.label: l for l in c.lives}
    branches = c.branches
    dim = rho.shape[0]
    lives, routes = [], []
    for out, row in transfer.items():
        paths = np.zeros((branches, dim), dtype=complex)
        support = np.zeros(dim, dtype=bool)
        parents, hist = [], []
        for x, coeff in row.items():
            life = by_label.get(x)
            if life is None:
                continue
            contrib = coeff * _pad(life.paths, branches)
            paths += contrib
            support |= life.support
            parents.append((life.origin, x))
            hist.append(life.history)
            routes.append(Route(out, ((life.origin, x),), complex(coeff), abs(coeff) ** 2 * life.fluid))
        if not parents:
            continue
        event = InteractionRecord(record_id, (c.system_id,), refs=tuple(sorted(c.records)), local_outcome=out)
        life = _finish_life(out, paths, support, _merge_histories(hist + [[event]]), parents, rho, psi)
        if abs(life.amplitude) >= PRUNE:
            lives.append(life)
    missing = set(by_label) - {x for row in transfer.values() for x in row}
    if missing:
        raise ValueError(f"transfer map does not cover lives {sorted(missing)}")
    return Carrier(c.system_id, tuple(lives), c.slots, dict(c.records), preferred_basis,
                   stats={"routes": routes})


def _identity_pairing(la: Label, lb: Label):
    return [(la + lb, 1.0)]


def join(
    a: Carrier,
    b: Carrier,
    interaction: Callable[[Label, Label], Iterable[tuple[Label, complex]]] | None = None,
    *,
    record_id: str = "join",
    system_id: str | None = None,
) -> Carrier:
    """Pair every life of ``a`` with every life of ``b`` at a local event.

    A pairing's fluid comes from the records both carriers hold, so pairings
    the shared preparation forbids get zero weight and are pruned.  The
    ``interaction`` maps each surviving pairing to output labels with
    amplitudes; the default keeps the pair as ``label_a + label_b``.
    """
    interaction = interaction or _identity_pairing
    if set(a.slots) & set(b.slots):
        raise ValueError("carriers share slots; merge channels instead of joining")
    records = {**a.records, **b.records}
    slots = a.slots + b.slots
    rho, psi = slot_state(records, slots)
    dim = rho.shape[0]
    branches = a.branches * b.branches
    acc: OrderedDict[Label, dict] = OrderedDict()
    routes = []
    total = kept = 0
    for la in a.lives:
        pa = _pad(la.paths, a.branches)
        for lb in b.lives:
            total += 1
            pb = _pad(lb.paths, b.branches)
            pair = np.einsum("ri,sj->rsij", pa, pb).reshape(branches, dim)
            pair_fluid = _fluid(pair, rho)
            if pair_fluid < PRUNE**2:
                continue
            kept += 1
            support = np.outer(la.support, lb.support).reshape(-1)
            key = ((la.origin, la.label), (lb.origin, lb.label))
            for out, coeff in interaction(la.label, lb.label):
                slot = acc.setdefault(out, {"paths": np.zeros((branches, dim), dtype=complex),
                                             "support": np.zeros(dim, dtype=bool), "parents": [], "hist": []})
                slot["paths"] += coeff * pair
                slot["support"] |= support
                slot["parents"].extend(key)
                slot["hist"] += [la.history, lb.history]
                routes.append(Route(out, key, complex(coeff), abs(coeff) ** 2 * pair_fluid))
    participants = (a.system_id, b.system_id)
    lives = []
    for out, s in acc.items():
        event = InteractionRecord(record_id, participants, refs=tuple(sorted(records)), local_outcome=out)
        parents = tuple(OrderedDict.fromkeys(s["parents"]))
        life = _finish_life(out, s["paths"], s["support"], _merge_histories(s["hist"] + [[event]]),
                            parents, rho, psi)
        if abs(life.amplitude) >= PRUNE:
            lives.append(life)
    stats = {"pairings_total": total, "pairings_kept": kept, "routes": routes}
    return Carrier(system_id or record_id, tuple(lives), slots, records, None, stats=stats)


@dataclass(frozen=True)
class ChannelFlow:
    """Amplitude flowing into one target channel.

    ``tag`` is the which-path memory the flow carries; flows with different
    tags are orthogonal and never add amplitudes.
    """

    target: Label
    sources: tuple[tuple[Label, complex], ...]
    tag: Hashable = None

    @property
    def combined(self) -> complex:
        return complex(sum(amp for _, amp in self.sources))

    @property
    def fluid(self) -> float:
        return abs(self.combined) ** 2


def interfere(flows: Iterable[ChannelFlow]) -> list[ChannelFlow]:
    """Add the amplitudes of flows that meet in the same channel with the same tag."""
    groups: OrderedDict[tuple, list] = OrderedDict()
    for f in flows:
        groups.setdefault((f.target, f.tag), []).extend(f.sources)
    return [ChannelFlow(target, tuple(srcs), tag) for (target, tag), srcs in groups.items()]


def channel_fluids(flows: Iterable[ChannelFlow]) -> dict[Label, float]:
    out: dict[Label, float] = {}
    for f in flows:
        out[f.target] = out.get(f.target, 0.0) + f.fluid
    return out


def merge_operator(labels: Sequence[Label], channel_map: Mapping[Label, Label]) -> tuple[list[Label], np.ndarray]:
    targets = list(OrderedDict.fromkeys(channel_map[l] for l in labels))
    op = np.zeros((len(targets), len(labels)))
    for j, l in enumerate(labels):
        op[targets.index(channel_map[l]), j] = 1.0
    return targets, op


def merge_is_unitary(labels: Sequence[Label], channel_map: Mapping[Label, Label]) -> bool:
    """Whether some unitary realizes the channel map on basis states.

    A unitary keeps orthogonal inputs orthogonal, so the Gram matrix of the
    images of the input basis states must be the identity.
    """
    _, op = merge_operator(labels, channel_map)
    return bool(np.allclose(op.T @ op, np.eye(len(labels))))


def project_merge(c: Carrier, channel_map: Mapping[Label, Label]) -> Carrier:
    """Pour several channels into one; fluids add, amplitudes do not interfere."""
    missing = [l.label for l in c.lives if l.label not in channel_map]
    if missing:
        raise ValueError(f"channel map is not total: {missing}")
    rho, psi = c.state
    groups: OrderedDict[Label, list[Life]] = OrderedDict()
    for l in c.lives:
        groups.setdefault(channel_map[l.label], []).append(l)
    branches = max(len(g) for g in groups.values()) * c.branches
    lives = []
    for target, members in groups.items():
        rows = np.concatenate([l.paths for l in members], axis=0)
        support = np.logical_or.reduce([l.support for l in members])
        event = InteractionRecord("merge", (c.system_id,), refs=tuple(sorted(c.records)), local_outcome=target)
        lives.append(_finish_life(target, _pad(rows, branches), support,
                                  _merge_histories([l.history for l in members] + [[event]]),
                                  [(l.origin, l.label) for l in members], rho, psi))
    lives = [replace(l, paths=_pad(l.paths, branches)) for l in lives]
    unitary = merge_is_unitary(c.labels(), channel_map)
    return Carrier(c.system_id, tuple(lives), c.slots, dict(c.records), None,
                   stats={"unitary": unitary})


def sample_life(c: Carrier, rng: np.random.Generator | int | None) -> Life:
    """Draw one life with probability equal to its fluid share."""
    rng = np.random.default_rng(rng)
    weights = np.array([life.fluid for life in c.lives])
    total = weights.sum()
    if total <= PRUNE:
        raise ValueError("carrier holds no fluid")
    if abs(total - 1) > FLUID_ATOL:
        raise ValueError(f"carrier fluid is {total:.12g}, not 1")
    return c.lives[int(rng.choice(len(weights), p=weights / total))]


def joint_fluid(carriers: Sequence[Carrier]) -> float:
    """Total fluid of all combinations of lives across several carriers.

    Carriers with the same ``system_id`` are channels and are pooled; distinct
    systems are combined with their shared records, without enumerating
    pairings.
    """
    groups: OrderedDict[str, list[Carrier]] = OrderedDict()
    for c in carriers:
        groups.setdefault(c.system_id, []).append(c)
    slots: list[Slot] = []
    records: dict[str, InteractionRecord] = {}
    gram = np.ones((1, 1), dtype=complex)
    for members in groups.values():
        sys_slots = members[0].slots
        if any(m.slots != sys_slots for m in members):
            raise ValueError("channels of one system disagree on slots")
        if set(sys_slots) & set(slots):
            raise ValueError("two systems claim the same slot")
        slots.extend(sys_slots)
        dim = int(np.prod([m.records[r].state.dims[i] for m in members[:1] for r, i in sys_slots])) if sys_slots else 1
        q = np.zeros((dim, dim), dtype=complex)
        for m in members:
            records.update(m.records)
            for life in m.lives:
                q += life.paths.T @ life.paths.conj()
        gram = np.kron(gram, q)
    rho, _ = slot_state(records, slots)
    return float(np.trace(rho @ gram.T).real)
