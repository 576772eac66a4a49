"""
utils.py

Exact rational linear algebra shared by the exterior, cohomology, Rumin and
isotropic modules. Matrices are numpy object arrays holding Fraction entries.
"""

import logging
import math
from fractions import Fraction
from typing import Dict, List, Sequence, Tuple, Union

import numpy as np
import psutil

logger = logging.getLogger(f"CARNOT.{__name__}")

Rational = Union[int, str, Fraction]


def to_fraction(value: Rational) -> Fraction:
    """
    Parse an exact rational from an int, a Fraction or a "p/q" / "p" string.
    Floats are refused: exactness is load-bearing for every rank computation.
    """
    if isinstance(value, bool) or isinstance(value, float):
        raise ValueError(f"Refusing inexact rational {value!r}")
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if "/" in text:
            num, _, den = text.partition("/")
            if int(den) == 0:
                raise ZeroDivisionError(f"Zero denominator in {value!r}")
            return Fraction(int(num), int(den))
        return Fraction(int(text))
    raise ValueError(f"Cannot read a rational from {value!r}")


def format_fraction(value: Fraction) -> str:
    value = Fraction(value)
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def zeros(rows: int, cols: int) -> np.ndarray:
    out = np.empty((rows, cols), dtype=object)
    out.fill(Fraction(0))
    return out


def identity(size: int) -> np.ndarray:
    out = zeros(size, size)
    for i in range(size):
        out[i, i] = Fraction(1)
    return out


def as_fraction_matrix(matrix) -> np.ndarray:
    """Copy any 2-d array-like into an object array of Fractions."""
    arr = np.asarray(matrix, dtype=object)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    out = np.empty(arr.shape, dtype=object)
    for idx, value in np.ndenumerate(arr):
        out[idx] = Fraction(value)
    return out


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"Shape mismatch {a.shape} @ {b.shape}")
    if a.shape[1] == 0 or a.shape[0] == 0 or b.shape[1] == 0:
        return zeros(a.shape[0], b.shape[1])
    return as_fraction_matrix(np.dot(a, b))


def product_is_zero(a: np.ndarray, b: np.ndarray) -> bool:
    """
    a @ b == 0, decided on integer copies: rows of a and columns of b are
    scaled by the lcm of their denominators, which leaves the zero pattern
    of the product unchanged.
    """
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"Shape mismatch {a.shape} @ {b.shape}")
    if 0 in a.shape or b.shape[1] == 0:
        return True
    left = np.array(clear_denominators(a), dtype=object)
    right = np.array(clear_denominators(b.T), dtype=object).T
    return not any(v != 0 for v in np.dot(left, right).flat)


def is_zero(matrix: np.ndarray) -> bool:
    return all(v == 0 for v in np.asarray(matrix, dtype=object).flat)


def matrices_equal(a: np.ndarray, b: np.ndarray) -> bool:
    if a.shape != b.shape:
        return False
    return all(x == y for x, y in zip(a.flat, b.flat))


def clear_denominators(matrix: np.ndarray) -> List[List[int]]:
    """Scale each row by the lcm of its denominators, giving an integer matrix of equal rank."""
    rows = []
    for row in np.asarray(matrix, dtype=object):
        fracs = [Fraction(v) for v in row]
        scale = 1
        for f in fracs:
            scale = scale * f.denominator // math.gcd(scale, f.denominator)
        rows.append([int(f * scale) for f in fracs])
    return rows


def bareiss_rank(matrix: np.ndarray) -> int:
    """
    Rank by fraction-free (Bareiss) elimination over the integers.
    Every division by the previous pivot is exact, which keeps entries bounded
    by minors of the input instead of growing as products.
    """
    rows = clear_denominators(matrix)
    if not rows or not rows[0]:
        return 0
    m, n = len(rows), len(rows[0])
    rank = 0
    prev = 1
    for col in range(n):
        pivot = next((r for r in range(rank, m) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        p = rows[rank][col]
        for r in range(rank + 1, m):
            factor = rows[r][col]
            row = rows[r]
            for c in range(col, n):
                row[c] = (p * row[c] - factor * rows[rank][c]) // prev
        prev = p
        rank += 1
        if rank == m:
            break
    return rank


def naive_rank(matrix: np.ndarray) -> int:
    """Plain Gaussian elimination over Fractions; an independent check on bareiss_rank."""
    rows = [[Fraction(v) for v in row] for row in np.asarray(matrix, dtype=object)]
    if not rows or not rows[0]:
        return 0
    rank = 0
    for col in range(len(rows[0])):
        pivot = next((r for r in range(rank, len(rows)) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        for r in range(rank + 1, len(rows)):
            if rows[r][col] != 0:
                f = rows[r][col] / rows[rank][col]
                rows[r] = [x - f * y for x, y in zip(rows[r], rows[rank])]
        rank += 1
    return rank


def rref(matrix: np.ndarray) -> Tuple[np.ndarray, List[int]]:
    """Reduced row echelon form over Fractions, with the list of pivot columns."""
    a = as_fraction_matrix(matrix)
    m, n = a.shape
    pivots = []
    row = 0
    for col in range(n):
        if row == m:
            break
        pivot = next((r for r in range(row, m) if a[r, col] != 0), None)
        if pivot is None:
            continue
        if pivot != row:
            a[[row, pivot]] = a[[pivot, row]]
        a[row] = a[row] / a[row, col]
        for r in range(m):
            if r != row and a[r, col] != 0:
                a[r] = a[r] - a[r, col] * a[row]
        pivots.append(col)
        row += 1
    return a, pivots


def nullspace(matrix: np.ndarray, ncols: int = None) -> np.ndarray:
    """Basis of the right kernel, returned as the columns of an (ncols x k) matrix."""
    a = as_fraction_matrix(matrix)
    if ncols is None:
        ncols = a.shape[1]
    if a.shape[0] == 0:
        return identity(ncols)
    reduced, pivots = rref(a)
    free = [c for c in range(ncols) if c not in pivots]
    basis = zeros(ncols, len(free))
    for j, f in enumerate(free):
        basis[f, j] = Fraction(1)
        for i, p in enumerate(pivots):
            basis[p, j] = -reduced[i, f]
    return basis


def column_space(matrix: np.ndarray) -> np.ndarray:
    """Basis of the image: the pivot columns of the input."""
    a = as_fraction_matrix(matrix)
    if a.shape[1] == 0:
        return zeros(a.shape[0], 0)
    _, pivots = rref(a)
    return a[:, pivots]


def canonical_basis(columns: np.ndarray) -> np.ndarray:
    """
    Reduced column echelon form of a spanning set: the unique basis of the
    span whose pivots are ordered first. Used for stable golden output.
    """
    cols = as_fraction_matrix(columns)
    if cols.shape[1] == 0:
        return cols
    reduced, pivots = rref(cols.T)
    return reduced[:len(pivots), :].T


def rank(matrix: np.ndarray) -> int:
    return bareiss_rank(matrix)


def inverse(matrix: np.ndarray) -> np.ndarray:
    a = as_fraction_matrix(matrix)
    size = a.shape[0]
    if a.shape != (size, size):
        raise ValueError(f"Cannot invert non-square matrix of shape {a.shape}")
    if size == 0:
        return zeros(0, 0)
    reduced, pivots = rref(np.hstack([a, identity(size)]))
    if pivots[:size] != list(range(size)):
        raise ValueError("Matrix is singular")
    return reduced[:, size:]


def pseudo_inverse(matrix: np.ndarray) -> np.ndarray:
    """
    Exact Moore-Penrose pseudo-inverse from a rank factorization A = C F:
    A+ = F^T (F F^T)^-1 (C^T C)^-1 C^T.
    """
    a = as_fraction_matrix(matrix)
    m, n = a.shape
    if m == 0 or n == 0:
        return zeros(n, m)
    reduced, pivots = rref(a)
    r = len(pivots)
    if r == 0:
        return zeros(n, m)
    c = a[:, pivots]
    f = reduced[:r, :]
    ct = c.T
    ft = f.T
    return matmul(matmul(ft, inverse(matmul(f, ft))), matmul(inverse(matmul(ct, c)), ct))


def same_span(a: np.ndarray, b: np.ndarray) -> bool:
    """True when the column spans of a and b coincide."""
    if a.shape[0] != b.shape[0]:
        return False
    ra, rb = rank(a), rank(b)
    if ra != rb:
        return False
    return rank(np.hstack([as_fraction_matrix(a), as_fraction_matrix(b)])) == ra


def integer_columns(basis: np.ndarray) -> np.ndarray:
    """Rescale each column to coprime integers (same span)."""
    out = as_fraction_matrix(basis)
    for j in range(out.shape[1]):
        col = [Fraction(v) for v in out[:, j]]
        scale = 1
        for f in col:
            scale = scale * f.denominator // math.gcd(scale, f.denominator)
        ints = [int(f * scale) for f in col]
        g = 0
        for v in ints:
            g = math.gcd(g, v)
        g = g or 1
        for i, v in enumerate(ints):
            out[i, j] = Fraction(v // g)
    return out


def block(matrix: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    if len(rows) == 0 or len(cols) == 0:
        return zeros(len(rows), len(cols))
    return matrix[np.ix_(list(rows), list(cols))]


def embed(matrix: np.ndarray, rows: Sequence[int], cols: Sequence[int], piece: np.ndarray):
    """Write piece into matrix at the given rows and columns; the inverse of block()."""
    if len(rows) == 0 or len(cols) == 0:
        return
    matrix[np.ix_(list(rows), list(cols))] = piece


def pivot_order(columns: np.ndarray) -> np.ndarray:
    """Sort columns by the row of their first nonzero entry."""
    if columns.shape[1] == 0:
        return columns
    first = [next(i for i, v in enumerate(columns[:, j]) if v != 0) for j in range(columns.shape[1])]
    return columns[:, np.argsort(first, kind="stable")]


def off_block_is_zero(matrix: np.ndarray, row_blocks: Dict[int, List[int]],
                      col_blocks: Dict[int, List[int]]) -> bool:
    """True when every nonzero entry (i, j) has row i and column j in blocks with the same key."""
    row_key = {i: w for w, rows in row_blocks.items() for i in rows}
    col_key = {j: w for w, cols in col_blocks.items() for j in cols}
    for i, j in zip(*np.nonzero(matrix != 0)):
        if row_key[i] != col_key[j]:
            return False
    return True


def log_memory_usage(stage: str):
    rss = psutil.Process().memory_info().rss / 2**20
    logger.debug(f"{stage}: resident memory {rss:.1f} MiB")
