"""Exact state-vector quantum mechanics for small registers.

This module is the ground truth every interpretation engine is checked
against.  Subsystem 0 is the leftmost tensor factor, so the one-based
qubit labels 1, 2, 3, 4 map to indices 0, 1, 2, 3 and the basis string
``"0110"`` reads left to right in that order.

Most registers are qubits, but a :class:`Ket` may carry subsystems of any
small dimension (a three-way random-number generator is a qutrit).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Any, Hashable, Iterable, Mapping, Sequence

import numpy as np

ATOL = 1e-9
MAX_SUBSYSTEMS = 12

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

# Symmetric 50/50 beam splitter, i on reflection.  Columns are the input
# ports (upper, lower).
BEAM_SPLITTER = np.array([[1, 1j], [1j, 1]], dtype=complex) / np.sqrt(2)

GATES = {
    "I": PAULI["I"],
    "X": PAULI["X"],
    "Y": PAULI["Y"],
    "Z": PAULI["Z"],
    "H": np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    "BS": BEAM_SPLITTER,
    "CNOT": np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
}

_SINGLE_BASES = {
    "z": (("0", "1"), np.eye(2, dtype=complex)),
    "x": (("+", "-"), np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)),
    "y": (("R", "L"), np.array([[1, 1], [1j, -1j]], dtype=complex) / np.sqrt(2)),
}
_BASIS_ALIASES = {"computational": "z", "Z": "z", "X": "x", "Y": "y"}


def _frozen(array: np.ndarray) -> np.ndarray:
    array = np.array(array, dtype=complex)
    array.setflags(write=False)
    return array


def complex_from_json(value: Any) -> complex:
    """Accept ``[re, im]`` pairs, ``{"re", "im"}`` dicts or plain numbers."""
    if isinstance(value, Mapping):
        return complex(value.get("re", 0.0), value.get("im", 0.0))
    if isinstance(value, (list, tuple)):
        if len(value) != 2:
            raise ValueError(f"complex pair must have two entries, got {value!r}")
        return complex(value[0], value[1])
    return complex(value)


def complex_to_json(value: complex) -> list[float]:
    value = complex(value)
    return [float(value.real), float(value.imag)]


@dataclass(frozen=True, eq=False)
class Ket:
    """Normalized pure state of a small register."""

    amplitudes: np.ndarray
    dims: tuple[int, ...]

    def __init__(self, amplitudes: Iterable[complex], dims: Sequence[int] | None = None):
        amps = np.asarray(list(amplitudes) if not isinstance(amplitudes, np.ndarray) else amplitudes,
                          dtype=complex).ravel()
        if dims is None:
            n = int(round(np.log2(amps.size))) if amps.size > 0 else 0
            if amps.size == 0 or 2**n != amps.size:
                raise ValueError(f"cannot infer qubit count from {amps.size} amplitudes")
            dims = (2,) * n
        dims = tuple(int(d) for d in dims)
        if not 1 <= len(dims) <= MAX_SUBSYSTEMS:
            raise ValueError(f"register must have 1..{MAX_SUBSYSTEMS} subsystems, got {len(dims)}")
        if any(d < 1 for d in dims):
            raise ValueError(f"subsystem dimensions must be positive, got {dims}")
        if int(np.prod(dims)) != amps.size:
            raise ValueError(f"dimension mismatch: dims {dims} need {int(np.prod(dims))} amplitudes, got {amps.size}")
        norm = np.vdot(amps, amps).real
        if abs(norm - 1.0) > ATOL:
            raise ValueError(f"ket is not normalized (norm^2 = {norm:.12g})")
        object.__setattr__(self, "amplitudes", _frozen(amps))
        object.__setattr__(self, "dims", dims)

    @property
    def num_qubits(self) -> int:
        # Number of tensor factors; all of them are qubits unless dims says otherwise.
        return len(self.dims)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.dims)

    def allclose(self, other: "Ket", atol: float = ATOL) -> bool:
        return self.dims == other.dims and np.allclose(self.amplitudes, other.amplitudes, atol=atol)

    def digest(self) -> bytes:
        return repr(self.dims).encode() + self.amplitudes.tobytes()

    def to_json(self) -> dict:
        return {
            "kind": "amplitudes",
            "dims": list(self.dims),
            "amplitudes": [complex_to_json(a) for a in self.amplitudes],
        }

    def __repr__(self) -> str:
        return f"Ket(dims={self.dims}, amplitudes={np.round(self.amplitudes, 6).tolist()})"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    entries: np.ndarray
    dims: tuple[int, ...]

    def __post_init__(self):
        rho = _frozen(self.entries)
        dims = tuple(int(d) for d in self.dims)
        d = int(np.prod(dims))
        if rho.shape != (d, d):
            raise ValueError(f"density matrix shape {rho.shape} does not match dims {dims}")
        if not np.allclose(rho, rho.conj().T, atol=ATOL):
            raise ValueError("density matrix is not Hermitian")
        if abs(np.trace(rho).real - 1.0) > ATOL:
            raise ValueError(f"density matrix trace is {np.trace(rho).real:.12g}, not 1")
        if np.linalg.eigvalsh(rho).min() < -ATOL:
            raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "entries", rho)
        object.__setattr__(self, "dims", dims)

    @property
    def num_qubits(self) -> int:
        return len(self.dims)

    def diagonal(self) -> np.ndarray:
        return np.diag(self.entries).real.copy()


class OutcomeDistribution(Mapping):
    """Immutable map from outcome label to probability."""

    def __init__(self, entries: Mapping[Hashable, float], atol: float = ATOL):
        probs = {k: float(v) for k, v in entries.items()}
        if any(p < -atol for p in probs.values()):
            raise ValueError("probabilities must be nonnegative")
        total = sum(probs.values())
        if abs(total - 1.0) > atol:
            raise ValueError(f"probabilities sum to {total:.12g}, not 1")
        self._probs = probs

    def __getitem__(self, key):
        return self._probs[key]

    def __iter__(self):
        return iter(self._probs)

    def __len__(self):
        return len(self._probs)

    def __repr__(self) -> str:
        return f"OutcomeDistribution({self._probs!r})"

    def support(self, tol: float = 1e-12) -> dict:
        return {k: p for k, p in self._probs.items() if p > tol}

    def tv_distance(self, other: Mapping[Hashable, float]) -> float:
        keys = set(self) | set(other)
        return 0.5 * sum(abs(self.get(k, 0.0) - other.get(k, 0.0)) for k in keys)

    def max_abs_difference(self, other: Mapping[Hashable, float]) -> float:
        keys = set(self) | set(other)
        return max((abs(self.get(k, 0.0) - other.get(k, 0.0)) for k in keys), default=0.0)


# ---------------------------------------------------------------------------
# Pauli words and measurement contexts


@dataclass(frozen=True)
class PauliWord:
    letters: str

    def __post_init__(self):
        letters = self.letters.replace("⊗", "").upper()
        if not letters or set(letters) - set(PAULI):
            raise ValueError(f"invalid Pauli word {self.letters!r}")
        object.__setattr__(self, "letters", letters)

    def __len__(self) -> int:
        return len(self.letters)

    def __str__(self) -> str:
        return self.letters

    def matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for letter in self.letters:
            out = np.kron(out, PAULI[letter])
        return out

    def commutes_with(self, other: "PauliWord") -> bool:
        # Two Pauli words commute iff they anticommute on an even number of sites.
        if len(self) != len(other):
            raise ValueError("Pauli words act on different register sizes")
        clashes = sum(
            1 for a, b in zip(self.letters, other.letters) if a != "I" and b != "I" and a != b
        )
        return clashes % 2 == 0


@dataclass(frozen=True)
class MeasurementContext:
    """Jointly measurable Pauli observables with a fixed eigenvalue product."""

    observables: tuple[PauliWord, ...]
    parity: int

    def __post_init__(self):
        obs = tuple(o if isinstance(o, PauliWord) else PauliWord(o) for o in self.observables)
        object.__setattr__(self, "observables", obs)
        if self.parity not in (1, -1):
            raise ValueError("parity must be +1 or -1")
        if len({len(o) for o in obs}) != 1:
            raise ValueError("context observables act on different register sizes")
        for a, b in itertools.combinations(obs, 2):
            if not a.commutes_with(b):
                raise ValueError(f"observables {a} and {b} do not commute")
        product = np.eye(2 ** len(obs[0]), dtype=complex)
        for o in obs:
            product = product @ o.matrix()
        if not np.allclose(product, self.parity * np.eye(product.shape[0]), atol=ATOL):
            raise ValueError(f"operator product of {[str(o) for o in obs]} is not {self.parity:+d} I")

    @property
    def num_qubits(self) -> int:
        return len(self.observables[0])

    def outcomes(self) -> list[tuple[int, ...]]:
        """Eigenvalue tuples allowed by the parity, ``+1`` sorting first."""
        return [
            t for t in itertools.product((1, -1), repeat=len(self.observables))
            if int(np.prod(t)) == self.parity
        ]

    def projector(self, eigenvalues: Sequence[int]) -> np.ndarray:
        if len(eigenvalues) != len(self.observables):
            raise ValueError("one eigenvalue per observable is required")
        dim = 2 ** self.num_qubits
        proj = np.eye(dim, dtype=complex)
        for e, o in zip(eigenvalues, self.observables):
            proj = proj @ (np.eye(dim) + e * o.matrix()) / 2
        return proj


def context_eigenvectors(ctx: MeasurementContext) -> list[tuple[tuple[int, ...], np.ndarray]]:
    """One joint eigenvector per allowed outcome of a maximal context.

    Phase convention: the largest-magnitude component (first on ties) is made
    real and positive.
    """
    out = []
    for triple in ctx.outcomes():
        proj = ctx.projector(triple)
        vals, vecs = np.linalg.eigh(proj)
        keep = np.flatnonzero(np.abs(vals - 1) < 1e-8)
        if keep.size != 1:
            raise ValueError(f"context outcome {triple} is not a rank-one projector")
        vec = vecs[:, keep[0]]
        pivot = int(np.flatnonzero(np.abs(vec) > np.abs(vec).max() - 1e-9)[0])
        vec = vec * (abs(vec[pivot]) / vec[pivot])
        out.append((triple, vec))
    return out


# ---------------------------------------------------------------------------
# State preparation


def bell_pair(a: complex, b: complex) -> Ket:
    return Ket([a, 0, 0, b])


def double_bell_state() -> Ket:
    """Two Bell pairs, qubits (1,3) and (2,4), ordered (1, 2, 3, 4)."""
    amps = np.zeros(16, dtype=complex)
    for q1, q2 in itertools.product((0, 1), repeat=2):
        amps[int(f"{q1}{q2}{q1}{q2}", 2)] = 0.5
    return Ket(amps)


def basis_state(value: str, dims: Sequence[int] | None = None) -> Ket:
    digits = [int(c) for c in value]
    dims = tuple(dims) if dims is not None else (2,) * len(digits)
    if len(dims) != len(digits) or any(d >= n for d, n in zip(digits, dims)):
        raise ValueError(f"basis string {value!r} does not fit dims {dims}")
    amps = np.zeros(int(np.prod(dims)), dtype=complex)
    amps[np.ravel_multi_index(digits, dims)] = 1.0
    return Ket(amps, dims)


def uniform_state(dims: Sequence[int]) -> Ket:
    d = int(np.prod(dims))
    return Ket(np.full(d, 1 / np.sqrt(d)), dims)


def prepare_state(spec: Any) -> Ket:
    """Build a :class:`Ket` from a serializable descriptor.

    Accepted forms: a built-in name (``"double_bell_state"``), a mapping with a
    ``kind`` key (``bell_pair`` with ``a``/``b``, ``basis_string`` with
    ``value``, ``uniform`` with ``num_qubits`` or ``dims``, ``amplitudes``
    with ``amplitudes`` and optional ``dims``), or an existing Ket.
    Explicit amplitudes are normalized; an all-zero vector is an error.
    """
    if isinstance(spec, Ket):
        return spec
    if isinstance(spec, str):
        spec = {"kind": spec}
    if not isinstance(spec, Mapping) or "kind" not in spec:
        raise ValueError(f"unrecognized state descriptor {spec!r}")
    kind = spec["kind"]
    if kind == "double_bell_state":
        return double_bell_state()
    if kind == "bell_pair":
        a, b = complex_from_json(spec["a"]), complex_from_json(spec["b"])
        return _normalized([a, 0, 0, b], (2, 2))
    if kind == "basis_string":
        return basis_state(str(spec["value"]), spec.get("dims"))
    if kind == "uniform":
        dims = spec.get("dims") or (2,) * int(spec["num_qubits"])
        return uniform_state(dims)
    if kind == "amplitudes":
        amps = [complex_from_json(a) for a in spec["amplitudes"]]
        dims = spec.get("dims")
        if dims is not None and int(np.prod(dims)) != len(amps):
            raise ValueError(f"dimension mismatch: dims {dims} vs {len(amps)} amplitudes")
        return _normalized(amps, dims)
    raise ValueError(f"unknown state kind {kind!r}")


def _normalized(amps: Sequence[complex], dims: Sequence[int] | None) -> Ket:
    vec = np.asarray(amps, dtype=complex)
    norm = np.linalg.norm(vec)
    if norm < 1e-15:
        raise ValueError("state descriptor has all-zero amplitudes")
    return Ket(vec / norm, dims)


# ---------------------------------------------------------------------------
# Bases


def product_basis(basis: Any, dims: Sequence[int]) -> list[tuple[tuple[str, ...], np.ndarray]]:
    """Expand a product-basis descriptor to per-subsystem (symbols, columns).

    ``basis`` is ``"z"``/``"computational"``, ``"x"``, ``"y"``, a per-subsystem
    list of those, or a list of matrices whose columns are the basis vectors.
    Non-qubit subsystems only support the computational basis or explicit
    matrices.
    """
    dims = tuple(dims)
    if isinstance(basis, str) or isinstance(basis, np.ndarray):
        basis = [basis] * len(dims)
    basis = list(basis)
    if len(basis) != len(dims):
        raise ValueError(f"basis covers {len(basis)} subsystems, state has {len(dims)}")
    out = []
    for entry, d in zip(basis, dims):
        if isinstance(entry, str):
            key = _BASIS_ALIASES.get(entry, entry).lower()
            if key == "z":
                out.append((tuple(str(i) for i in range(d)), np.eye(d, dtype=complex)))
                continue
            if key not in _SINGLE_BASES or d != 2:
                raise ValueError(f"basis {entry!r} unavailable for dimension {d}")
            out.append(_SINGLE_BASES[key])
        else:
            mat = np.asarray([[complex_from_json(x) for x in row] for row in entry], dtype=complex) \
                if not isinstance(entry, np.ndarray) else entry.astype(complex)
            if mat.shape != (d, d):
                raise ValueError(f"basis matrix shape {mat.shape} does not fit dimension {d}")
            if not np.allclose(mat.conj().T @ mat, np.eye(d), atol=ATOL):
                raise ValueError("basis is not orthonormal")
            out.append((tuple(str(i) for i in range(d)), mat))
    return out


def basis_labels(basis: Any, dims: Sequence[int]) -> list[str]:
    per = product_basis(basis, dims)
    return ["".join(s) for s in itertools.product(*(sym for sym, _ in per))]


def _basis_matrix(per: list[tuple[tuple[str, ...], np.ndarray]]) -> np.ndarray:
    mat = np.ones((1, 1), dtype=complex)
    for _, m in per:
        mat = np.kron(mat, m)
    return mat


def rebase(state: Ket, basis: Any) -> np.ndarray:
    """Coefficients of ``state`` in a product basis, labels per :func:`basis_labels`."""
    return _basis_matrix(product_basis(basis, state.dims)).conj().T @ state.amplitudes


def from_basis(coefficients: Sequence[complex], basis: Any, dims: Sequence[int]) -> Ket:
    """Inverse of :func:`rebase`."""
    mat = _basis_matrix(product_basis(basis, dims))
    return Ket(mat @ np.asarray(coefficients, dtype=complex), dims)


def born_distribution(state: Ket, basis: Any = "z") -> OutcomeDistribution:
    labels = basis_labels(basis, state.dims)
    probs = np.abs(rebase(state, basis)) ** 2
    return OutcomeDistribution({lab: p for lab, p in zip(labels, probs) if p > 1e-15})


# ---------------------------------------------------------------------------
# Dynamics and reduced states


def apply_operator(vector: np.ndarray, dims: Sequence[int], op: np.ndarray, qubits: Sequence[int]) -> np.ndarray:
    """Apply a (not necessarily unitary) operator to selected subsystems."""
    dims = tuple(dims)
    qubits = list(qubits)
    if len(set(qubits)) != len(qubits) or any(not 0 <= q < len(dims) for q in qubits):
        raise ValueError(f"invalid subsystem indices {qubits} for {len(dims)} subsystems")
    local = [dims[q] for q in qubits]
    d = int(np.prod(local))
    if op.shape != (d, d):
        raise ValueError(f"operator shape {op.shape} does not act on subsystems of dims {local}")
    psi = np.asarray(vector, dtype=complex).reshape(dims)
    psi = np.moveaxis(psi, qubits, range(len(qubits)))
    rest = psi.shape[len(qubits):]
    psi = (op @ psi.reshape(d, -1)).reshape(tuple(local) + rest)
    return np.moveaxis(psi, range(len(qubits)), qubits).reshape(-1)


def is_unitary(matrix: np.ndarray, atol: float = ATOL) -> bool:
    m = np.asarray(matrix, dtype=complex)
    return m.ndim == 2 and m.shape[0] == m.shape[1] and np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=atol)


def apply_unitary(state: Ket, gate: Any, qubits: Sequence[int]) -> Ket:
    mat = GATES[gate] if isinstance(gate, str) else np.asarray(gate, dtype=complex)
    if not is_unitary(mat):
        raise ValueError("gate is not unitary")
    return Ket(apply_operator(state.amplitudes, state.dims, mat, qubits), state.dims)


def reduced_matrix(state: Ket, keep: Sequence[int]) -> np.ndarray:
    """Reduced density matrix with kept subsystems in the order given."""
    keep = list(keep)
    if not keep:
        raise ValueError("keep set is empty")
    if len(set(keep)) != len(keep) or any(not 0 <= q < state.num_qubits for q in keep):
        raise ValueError(f"invalid subsystem indices {keep} for {state.num_qubits} subsystems")
    psi = np.moveaxis(state.tensor(), keep, range(len(keep)))
    dk = int(np.prod([state.dims[q] for q in keep]))
    m = psi.reshape(dk, -1)
    return m @ m.conj().T


def partial_trace(state: Ket, keep: Sequence[int]) -> DensityMatrix:
    keep = sorted(keep)
    return DensityMatrix(reduced_matrix(state, keep), tuple(state.dims[q] for q in keep))


def measure_context(state: Ket, ctx: MeasurementContext, qubits: Sequence[int]) -> OutcomeDistribution:
    """Joint eigenvalue distribution of a context, over every sign tuple.

    Tuples that violate the context parity are included so callers can
    confirm they carry no weight.
    """
    if not isinstance(ctx, MeasurementContext):
        ctx = MeasurementContext(*ctx)
    if len(qubits) != ctx.num_qubits:
        raise ValueError("context size does not match the qubit list")
    probs = {}
    for triple in itertools.product((1, -1), repeat=len(ctx.observables)):
        projected = apply_operator(state.amplitudes, state.dims, ctx.projector(triple), qubits)
        probs[triple] = float(np.vdot(projected, projected).real)
    return OutcomeDistribution(probs)


def joint_context_distribution(
    state: Ket, measurements: Sequence[tuple[MeasurementContext, Sequence[int]]]
) -> dict[tuple[int, ...], float]:
    """Probabilities of joint outcome indices for several disjoint contexts.

    Outcome indices count from 1 in :meth:`MeasurementContext.outcomes` order.
    """
    out = {}
    choices = [list(enumerate(ctx.outcomes(), start=1)) for ctx, _ in measurements]
    for combo in itertools.product(*choices):
        vec = state.amplitudes
        for (ctx, qubits), (_, triple) in zip(measurements, combo):
            vec = apply_operator(vec, state.dims, ctx.projector(triple), qubits)
        out[tuple(k for k, _ in combo)] = float(np.vdot(vec, vec).real)
    return out
