"""The Peres-Mermin square and the exhaustive no-go search over its assignments."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .hilbert import MeasurementContext, PauliWord

STANDARD_CELLS = (
    ("ZI", "IZ", "ZZ"),
    ("IX", "XI", "XX"),
    ("ZX", "XZ", "YY"),
)


@dataclass(frozen=True)
class PMSquare:
    """3x3 grid of two-qubit Pauli words with a parity per row and column.

    ``validate=False`` builds hypothetical squares (for example with a flipped
    parity) that only make sense at the level of sign bookkeeping.
    """

    cells: tuple[tuple[PauliWord, ...], ...]
    row_parities: tuple[int, int, int]
    col_parities: tuple[int, int, int]
    validate: bool = field(default=True, compare=False)

    def __post_init__(self):
        cells = tuple(tuple(c if isinstance(c, PauliWord) else PauliWord(c) for c in row) for row in self.cells)
        if len(cells) != 3 or any(len(r) != 3 for r in cells):
            raise ValueError("a Peres-Mermin square is 3x3")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "row_parities", tuple(int(p) for p in self.row_parities))
        object.__setattr__(self, "col_parities", tuple(int(p) for p in self.col_parities))
        if any(p not in (1, -1) for p in self.row_parities + self.col_parities):
            raise ValueError("parities must be +1 or -1")
        if self.validate:
            if int(np.prod(self.row_parities + self.col_parities)) != -1:
                raise ValueError("product of the six parities must be -1")
            self.contexts()  # raises if any row/column is not a valid context

    def context_cells(self, context: int) -> list[tuple[int, int]]:
        """Cell coordinates of context 0-2 (rows) or 3-5 (columns)."""
        if context < 3:
            return [(context, c) for c in range(3)]
        if context < 6:
            return [(r, context - 3) for r in range(3)]
        raise IndexError(f"context index {context} out of range 0..5")

    def parity(self, context: int) -> int:
        return self.row_parities[context] if context < 3 else self.col_parities[context - 3]

    def context(self, context: int) -> MeasurementContext:
        obs = tuple(self.cells[r][c] for r, c in self.context_cells(context))
        return MeasurementContext(obs, self.parity(context))

    def row(self, i: int) -> MeasurementContext:
        return self.context(i)

    def column(self, j: int) -> MeasurementContext:
        return self.context(3 + j)

    def contexts(self) -> list[MeasurementContext]:
        return [self.context(k) for k in range(6)]

    def permuted(self, row_perm: Sequence[int], col_perm: Sequence[int]) -> "PMSquare":
        cells = tuple(tuple(self.cells[r][c] for c in col_perm) for r in row_perm)
        return PMSquare(
            cells,
            tuple(self.row_parities[r] for r in row_perm),
            tuple(self.col_parities[c] for c in col_perm),
            validate=self.validate,
        )

    def with_parity(self, context: int, parity: int) -> "PMSquare":
        rows, cols = list(self.row_parities), list(self.col_parities)
        if context < 3:
            rows[context] = parity
        else:
            cols[context - 3] = parity
        return PMSquare(self.cells, tuple(rows), tuple(cols), validate=False)


def standard_square() -> PMSquare:
    return PMSquare(STANDARD_CELLS, (1, 1, 1), (1, 1, -1))


def _context_index(context) -> int:
    if isinstance(context, tuple):
        kind, idx = context
        return idx if kind == "row" else 3 + idx
    return int(context)


@dataclass(frozen=True)
class Assignment:
    """Nine +-1 values, one per cell, row-major."""

    values: tuple[int, ...]

    def __post_init__(self):
        values = tuple(self.values)
        if len(values) != 9 or any(type(v) is not int or v not in (1, -1) for v in values):
            raise ValueError("an assignment is nine exact integers in {+1, -1}")
        object.__setattr__(self, "values", values)

    def at(self, r: int, c: int) -> int:
        return self.values[3 * r + c]


def context_parity_holds(a: Assignment, sq: PMSquare, context) -> bool:
    k = _context_index(context)
    product = 1
    for r, c in sq.context_cells(k):
        product *= a.at(r, c)
    return product == sq.parity(k)


def all_assignments():
    for values in itertools.product((1, -1), repeat=9):
        yield Assignment(values)


@dataclass(frozen=True)
class SearchResult:
    count: int
    total: int
    witnesses: tuple[Assignment, ...]
    contexts: tuple[int, ...]


def search_assignments(sq: PMSquare, contexts: Sequence = range(6), max_witnesses: int = 16) -> SearchResult:
    """Count assignments satisfying every listed context, over all 512."""
    ks = tuple(_context_index(c) for c in contexts)
    count, total, witnesses = 0, 0, []
    for a in all_assignments():
        total += 1
        if all(context_parity_holds(a, sq, k) for k in ks):
            count += 1
            if len(witnesses) < max_witnesses:
                witnesses.append(a)
    return SearchResult(count, total, tuple(witnesses), ks)


@dataclass(frozen=True)
class ContradictionReport:
    quantum_product: int
    assignment_product: int
    contradiction: bool
    statement: str

    def to_json(self) -> dict:
        return {
            "quantum_product": self.quantum_product,
            "assignment_product": self.assignment_product,
            "contradiction": self.contradiction,
            "statement": self.statement,
        }


def assignment_product(a: Assignment, sq: PMSquare) -> int:
    """Product over all six contexts of the assigned values (each cell twice)."""
    product = 1
    for k in range(6):
        for r, c in sq.context_cells(k):
            product *= a.at(r, c)
    return product


def parity_product_argument(sq: PMSquare, a: Assignment | None = None) -> ContradictionReport:
    quantum = int(np.prod(sq.row_parities + sq.col_parities))
    assigned = assignment_product(a or Assignment((1,) * 9), sq)
    contradiction = quantum != assigned
    if contradiction:
        statement = (
            f"the six context parities multiply to {quantum:+d}, but any assignment "
            f"multiplies to {assigned:+d} because every cell appears in one row and one column"
        )
    else:
        statement = f"parities and assignments both multiply to {quantum:+d}; no contradiction"
    return ContradictionReport(quantum, assigned, contradiction, statement)


def shared_cell(row: int, col: int) -> tuple[int, int]:
    """Cell measured by both parties when one measures ``row`` and the other ``col``.

    Returns the observable's position inside the row context and inside the
    column context.
    """
    return col, row
