import itertools

import numpy as np
import pytest

from parallel_lives.hilbert import context_eigenvectors
from parallel_lives.pms import (
    Assignment,
    PMSquare,
    STANDARD_CELLS,
    all_assignments,
    assignment_product,
    context_parity_holds,
    parity_product_argument,
    search_assignments,
    shared_cell,
    standard_square,
)


def _product(ctx):
    out = np.eye(4, dtype=complex)
    for o in ctx.observables:
        out = out @ o.matrix()
    return out


def test_operator_products():
    sq = standard_square()
    assert np.allclose(_product(sq.row(0)), np.eye(4))
    assert np.allclose(_product(sq.column(2)), -np.eye(4))
    assert int(np.prod(sq.row_parities + sq.col_parities)) == -1


def test_contexts_commute():
    sq = standard_square()
    for ctx in sq.contexts():
        for a, b in itertools.combinations(ctx.observables, 2):
            comm = a.matrix() @ b.matrix() - b.matrix() @ a.matrix()
            assert np.linalg.norm(comm) < 1e-12


def test_context_parity_examples():
    sq = standard_square()
    ones = Assignment((1,) * 9)
    assert not context_parity_holds(ones, sq, ("col", 2))
    assert context_parity_holds(ones, sq, ("row", 0))
    col3 = list(ones.values)
    col3[8] = -1
    assert context_parity_holds(Assignment(tuple(col3)), sq, ("col", 2))


def test_assignment_is_exact_integers():
    with pytest.raises(ValueError):
        Assignment((1.0,) * 9)
    with pytest.raises(ValueError):
        Assignment((1,) * 8)


def test_search_examples():
    sq = standard_square()
    res = search_assignments(sq)
    assert (res.count, res.total) == (0, 512)
    relaxed = search_assignments(sq.with_parity(5, 1))
    assert relaxed.count > 0 and Assignment((1,) * 9) in relaxed.witnesses
    assert search_assignments(sq, contexts=range(5)).count > 0


def test_search_is_permutation_invariant():
    sq = standard_square()
    for rp, cp in [((1, 0, 2), (0, 1, 2)), ((2, 1, 0), (1, 2, 0)), ((0, 2, 1), (2, 0, 1))]:
        assert search_assignments(sq.permuted(rp, cp)).count == 0


def test_every_assignment_fails_somewhere():
    sq = standard_square()
    for a in all_assignments():
        assert assignment_product(a, sq) == 1
        assert not all(context_parity_holds(a, sq, k) for k in range(6))


def test_parity_argument():
    rep = parity_product_argument(standard_square())
    assert (rep.quantum_product, rep.assignment_product, rep.contradiction) == (-1, 1, True)
    all_plus = PMSquare(STANDARD_CELLS, (1, 1, 1), (1, 1, 1), validate=False)
    rep = parity_product_argument(all_plus)
    assert (rep.quantum_product, rep.assignment_product, rep.contradiction) == (1, 1, False)


def test_invalid_square_rejected():
    with pytest.raises(ValueError):
        PMSquare(STANDARD_CELLS, (1, 1, 1), (1, 1, 1))


def test_shared_cell_positions():
    sq = standard_square()
    for i, j in itertools.product(range(3), repeat=2):
        in_row, in_col = shared_cell(i, j)
        assert sq.row(i).observables[in_row] == sq.column(j).observables[in_col]


def test_eigenvector_phase_convention():
    for ctx in standard_square().contexts():
        for triple, vec in context_eigenvectors(ctx):
            pivot = int(np.argmax(np.abs(vec) > np.abs(vec).max() - 1e-9))
            assert abs(vec[pivot].imag) < 1e-12 and vec[pivot].real > 0
            for obs, e in zip(ctx.observables, triple):
                assert np.allclose(obs.matrix() @ vec, e * vec)
