import sys
import logging
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

# Add the parent directory to the Python path to make the package importable
sys.path.insert(0, str(Path(__file__).parent.parent))

from carnot_bounds.utils import *

logging.getLogger("CARNOT").setLevel(logging.DEBUG)


def random_int_matrix(rng, rows, cols, rank_hint=None):
    """Integer matrix, optionally a product of two thin factors to force low rank."""
    if rank_hint is None:
        return as_fraction_matrix(rng.integers(-4, 5, size=(rows, cols)).tolist())
    left = rng.integers(-3, 4, size=(rows, rank_hint))
    right = rng.integers(-3, 4, size=(rank_hint, cols))
    return as_fraction_matrix((left @ right).tolist())


def test_to_fraction():
    assert to_fraction("3/4") == Fraction(3, 4)
    assert to_fraction(" -2 ") == Fraction(-2)
    assert to_fraction(5) == Fraction(5)
    assert to_fraction(Fraction(1, 3)) == Fraction(1, 3)
    with pytest.raises(ValueError):
        to_fraction(0.5)
    with pytest.raises(ValueError):
        to_fraction(True)
    with pytest.raises(ZeroDivisionError):
        to_fraction("1/0")
    with pytest.raises(ValueError):
        to_fraction("one")

    assert format_fraction(Fraction(2, 3)) == "2/3"
    assert format_fraction(Fraction(4, 2)) == "2"
    assert format_fraction(Fraction(-1, 2)) == "-1/2"


def test_rank_agrees_with_naive_elimination():
    rng = np.random.default_rng(7)
    for trial in range(30):
        rows, cols = rng.integers(1, 7, size=2)
        hint = None if trial % 2 else int(rng.integers(0, min(rows, cols) + 1))
        m = random_int_matrix(rng, int(rows), int(cols), hint)
        assert bareiss_rank(m) == naive_rank(m)
        if hint is not None:
            assert bareiss_rank(m) <= hint

    # Rational entries are handled by clearing denominators row by row
    m = as_fraction_matrix([[Fraction(1, 2), Fraction(1, 3)], [Fraction(3, 2), 1]])
    assert rank(m) == 1
    assert rank(zeros(3, 0)) == 0
    assert rank(zeros(0, 3)) == 0


def test_rref_and_nullspace():
    m = as_fraction_matrix([[1, 2, 3], [2, 4, 6], [1, 0, 1]])
    reduced, pivots = rref(m)
    assert pivots == [0, 1]
    assert reduced[0, 0] == 1 and reduced[1, 1] == 1
    assert is_zero(reduced[2])

    kernel = nullspace(m)
    assert kernel.shape == (3, 1)
    assert is_zero(matmul(m, kernel))

    # No rows: everything is in the kernel
    assert matrices_equal(nullspace(zeros(0, 4), ncols=4), identity(4))


def test_canonical_basis_is_unique():
    a = as_fraction_matrix([[1, 1], [0, 1], [1, 2]])
    b = matmul(a, as_fraction_matrix([[2, 1], [1, 1]]))
    assert same_span(a, b)
    assert matrices_equal(canonical_basis(a), canonical_basis(b))
    assert canonical_basis(zeros(3, 0)).shape == (3, 0)


def test_inverse_and_pseudo_inverse():
    a = as_fraction_matrix([[2, 1], [1, 1]])
    assert matrices_equal(matmul(a, inverse(a)), identity(2))
    with pytest.raises(ValueError):
        inverse(as_fraction_matrix([[1, 2], [2, 4]]))

    rng = np.random.default_rng(3)
    for hint in (0, 1, 2, 3):
        m = random_int_matrix(rng, 4, 5, hint)
        p = pseudo_inverse(m)
        assert p.shape == (5, 4)
        # Penrose conditions
        assert matrices_equal(matmul(matmul(m, p), m), m)
        assert matrices_equal(matmul(matmul(p, m), p), p)
        assert matrices_equal(matmul(m, p).T, matmul(m, p))
        assert matrices_equal(matmul(p, m).T, matmul(p, m))

    assert pseudo_inverse(zeros(3, 0)).shape == (0, 3)


def test_integer_columns_and_blocks():
    basis = as_fraction_matrix([[Fraction(1, 2), 2], [Fraction(-1, 3), 4]])
    ints = integer_columns(basis)
    assert [int(v) for v in ints[:, 0]] == [3, -2]
    assert [int(v) for v in ints[:, 1]] == [1, 2]
    assert same_span(basis, ints)

    m = as_fraction_matrix([[1, 2, 3], [4, 5, 6]])
    assert matrices_equal(block(m, [1], [0, 2]), as_fraction_matrix([[4, 6]]))
    assert block(m, [], [0]).shape == (0, 1)


def test_log_memory_usage(caplog):
    log_memory_usage("unit test")
    assert "unit test: resident memory" in caplog.text
    assert caplog.records[-1].levelname == "DEBUG"
