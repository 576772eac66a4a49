"""
exterior.py

Exact-rational exterior algebra over the dual of a Carnot algebra: basis
enumeration graded by degree and weight, wedge product, the Chevalley-Eilenberg
differential d0 and the Hodge star of the monomial inner product.

Sign convention: d theta(X, Y) = -theta([X, Y]), hence
    d0 theta^k = - sum_{i<j} c_{ij}^k theta^i ^ theta^j.
The monomials theta^I are declared orthonormal, so the adjoint delta0 of d0 is
the transposed matrix.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from math import comb
from typing import Dict, List, Sequence, Tuple

import numpy as np
import pandas as pd

from carnot_bounds.algebra_spec import CarnotAlgebra
from carnot_bounds.constants import MAX_DIMENSION
from carnot_bounds.utils import (
    zeros, matmul, block, matrices_equal, product_is_zero, off_block_is_zero, log_memory_usage,
)

logger = logging.getLogger(f"CARNOT.{__name__}")

MultiIndex = Tuple[int, ...]


class CapacityError(ValueError):
    """The algebra is too large for dense exact exterior algebra."""


class NotAComplexError(AssertionError):
    """d0 o d0 != 0: the structure constants do not satisfy Jacobi."""


@dataclass(frozen=True)
class FormBasisIndex:
    multi_index: MultiIndex
    weight: int

    @property
    def degree(self) -> int:
        return len(self.multi_index)


def _shuffle_sign(first: Sequence[int], second: Sequence[int]) -> int:
    """Sign of the permutation sorting first + second (both increasing, disjoint)."""
    inversions = sum(1 for a in first for b in second if a > b)
    return -1 if inversions % 2 else 1


@dataclass(frozen=True)
class Form:
    """A q-form as a sparse map multi-index -> Fraction; zero coefficients are never stored."""
    degree: int
    coefficients: Dict[MultiIndex, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for key, c in self.coefficients.items():
            if len(key) != self.degree:
                raise ValueError(f"Index {key} does not have degree {self.degree}")
            c = Fraction(c)
            if c != 0:
                clean[tuple(key)] = c
        object.__setattr__(self, "coefficients", clean)

    @staticmethod
    def one() -> "Form":
        return Form(0, {(): Fraction(1)})

    @staticmethod
    def monomial(indices: Sequence[int], coefficient=1) -> "Form":
        """theta^{i_1} ^ ... ^ theta^{i_q} for any order of 0-based indices."""
        indices = list(indices)
        if len(set(indices)) != len(indices):
            return Form(len(indices))
        inversions = sum(1 for a in range(len(indices)) for b in range(a + 1, len(indices))
                         if indices[a] > indices[b])
        sign = -1 if inversions % 2 else 1
        return Form(len(indices), {tuple(sorted(indices)): sign * Fraction(coefficient)})

    def is_zero(self) -> bool:
        return not self.coefficients

    def __add__(self, other: "Form") -> "Form":
        if other.degree != self.degree:
            raise ValueError(f"Cannot add forms of degrees {self.degree} and {other.degree}")
        out = dict(self.coefficients)
        for key, c in other.coefficients.items():
            out[key] = out.get(key, Fraction(0)) + c
        return Form(self.degree, out)

    def __neg__(self) -> "Form":
        return Form(self.degree, {k: -c for k, c in self.coefficients.items()})

    def __sub__(self, other: "Form") -> "Form":
        return self + (-other)

    def __mul__(self, scalar) -> "Form":
        s = Fraction(scalar)
        return Form(self.degree, {k: s * c for k, c in self.coefficients.items()})

    __rmul__ = __mul__

    def weights(self, weight_map: Sequence[int]) -> List[int]:
        return sorted({sum(weight_map[i] for i in key) for key in self.coefficients})

    def render(self, labels: Sequence[str] = None) -> str:
        if self.is_zero():
            return "0"
        terms = []
        for key in sorted(self.coefficients):
            c = self.coefficients[key]
            if labels is None:
                name = "^".join(f"t{i + 1}" for i in key) or "1"
            else:
                name = "^".join(f"t[{labels[i]}]" for i in key) or "1"
            terms.append(f"{c}*{name}" if c != 1 else name)
        return " + ".join(terms)

    def __str__(self) -> str:
        return self.render()


def wedge(a: Form, b: Form) -> Form:
    """Exterior product with shuffle signs; bilinear, associative, graded-anticommutative."""
    out: Dict[MultiIndex, Fraction] = {}
    for left, ca in a.coefficients.items():
        for right, cb in b.coefficients.items():
            if set(left) & set(right):
                continue
            key = tuple(sorted(left + right))
            out[key] = out.get(key, Fraction(0)) + _shuffle_sign(left, right) * ca * cb
    return Form(a.degree + b.degree, out)


class FormSpace:
    """
    Enumerated bases of Lambda^q for one algebra, lexicographic within a degree,
    with the weight w = sum of the weights of the indices.
    """

    def __init__(self, alg: CarnotAlgebra):
        if alg.n > MAX_DIMENSION:
            raise CapacityError(
                f"Algebra '{alg.name}' has dimension {alg.n} > {MAX_DIMENSION}; "
                f"dense exact exterior algebra is limited to n <= {MAX_DIMENSION}"
            )
        self.alg = alg
        self.n = alg.n
        self.Q = alg.Q
        self.weight_map = alg.weights
        self._bases = {q: list(combinations(range(self.n), q)) for q in range(self.n + 1)}
        self._positions = {q: {key: i for i, key in enumerate(basis)} for q, basis in self._bases.items()}
        self._blocks = {}
        for q, basis in self._bases.items():
            blocks = self._blocks.setdefault(q, {})
            for pos, key in enumerate(basis):
                blocks.setdefault(self.weight_of(key), []).append(pos)

    def basis(self, q: int) -> List[MultiIndex]:
        return self._bases.get(q, [])

    def basis_indices(self, q: int) -> List[FormBasisIndex]:
        return [FormBasisIndex(key, self.weight_of(key)) for key in self.basis(q)]

    def dim(self, q: int) -> int:
        return len(self.basis(q))

    def position(self, key: MultiIndex) -> int:
        return self._positions[len(key)][key]

    def weight_of(self, key: MultiIndex) -> int:
        return sum(self.weight_map[i] for i in key)

    def weight_blocks(self, q: int) -> Dict[int, List[int]]:
        """w -> positions of the basis of Lambda^{q,w} inside the basis of Lambda^q."""
        return self._blocks.get(q, {})

    def weights(self, q: int) -> List[int]:
        return sorted(self.weight_blocks(q))

    def to_vector(self, form: Form) -> np.ndarray:
        vec = zeros(self.dim(form.degree), 1)
        for key, c in form.coefficients.items():
            vec[self.position(key), 0] = c
        return vec

    def from_vector(self, q: int, vec) -> Form:
        flat = list(np.asarray(vec, dtype=object).flat)
        return Form(q, {key: flat[i] for i, key in enumerate(self.basis(q)) if flat[i] != 0})


def d0_generators(alg: CarnotAlgebra) -> List[Form]:
    """d0 theta^k for every dual basis covector."""
    out = []
    for k in range(alg.n):
        coeffs = {}
        for i, j, entries in alg.brackets:
            for kk, c in entries:
                if kk == k:
                    coeffs[(i, j)] = -c
        out.append(Form(2, coeffs))
    return out


def d0(alg: CarnotAlgebra, form: Form, generators: List[Form] = None) -> Form:
    """Apply d0 as an antiderivation: d(a ^ b) = da ^ b + (-1)^deg(a) a ^ db."""
    if generators is None:
        generators = d0_generators(alg)
    result = Form(form.degree + 1)
    for key, c in form.coefficients.items():
        for s, k in enumerate(key):
            term = wedge(wedge(Form.monomial(key[:s]), generators[k]), Form.monomial(key[s + 1:]))
            result = result + term * (c if s % 2 == 0 else -c)
    return result


@dataclass
class DifferentialMaps:
    """
    d[q]: matrix of d0 from Lambda^q to Lambda^{q+1} (rows index Lambda^{q+1});
    delta[q]: its adjoint from Lambda^{q+1} to Lambda^q.
    """
    space: FormSpace
    d: Dict[int, np.ndarray]
    delta: Dict[int, np.ndarray]

    def block(self, q: int, w: int) -> np.ndarray:
        """d0 restricted to Lambda^{q,w} -> Lambda^{q+1,w}."""
        if q < 0:
            return zeros(len(self.space.weight_blocks(0).get(w, [])), 0)
        rows = self.space.weight_blocks(q + 1).get(w, [])
        cols = self.space.weight_blocks(q).get(w, [])
        return block(self.d[q], rows, cols)

    def squares_to_zero(self, blockwise: bool = True) -> bool:
        """
        d0 o d0 = 0. For a weight-homogeneous d0 the product splits into
        Lambda^{q,w} -> Lambda^{q+2,w} blocks; otherwise the whole degrees are multiplied.
        """
        if blockwise and self.is_weight_homogeneous():
            return all(product_is_zero(self.block(q + 1, w), self.block(q, w))
                       for q in range(self.space.n) for w in self.space.weights(q))
        return all(product_is_zero(self.d[q + 1], self.d[q]) for q in range(self.space.n))

    def is_weight_homogeneous(self) -> bool:
        space = self.space
        return all(off_block_is_zero(self.d[q], space.weight_blocks(q + 1), space.weight_blocks(q))
                   for q in range(space.n + 1))


def ce_differential(alg: CarnotAlgebra, check: bool = True) -> DifferentialMaps:
    """
    Matrices of d0 and delta0 in every degree. With check=True a failure of
    d0 o d0 = 0 raises NotAComplexError, which signals a Jacobi problem upstream.
    """
    space = FormSpace(alg)
    generators = d0_generators(alg)
    d = {}
    for q in range(alg.n + 1):
        mat = zeros(space.dim(q + 1), space.dim(q))
        for col, key in enumerate(space.basis(q)):
            image = d0(alg, Form(q, {key: Fraction(1)}), generators)
            for target, c in image.coefficients.items():
                mat[space.position(target), col] = c
        d[q] = mat
    delta = {q: mat.T.copy() for q, mat in d.items()}
    maps = DifferentialMaps(space=space, d=d, delta=delta)
    log_memory_usage(f"d0 matrices for '{alg.name}'")

    if check:
        if not maps.squares_to_zero():
            raise NotAComplexError(f"d0 o d0 != 0 for '{alg.name}'; the Jacobi identity must fail")
        if not maps.is_weight_homogeneous():
            raise AssertionError(f"d0 mixes weights for '{alg.name}'; the grading must fail")
    logger.debug(f"Built d0 for '{alg.name}' in degrees 0..{alg.n}")
    return maps


def hodge_star(alg: CarnotAlgebra, f: Form) -> Form:
    """*(theta^I) = sign(I, I^c) theta^{I^c}; maps Lambda^{q,w} onto Lambda^{n-q,Q-w}."""
    everything = range(alg.n)
    out: Dict[MultiIndex, Fraction] = {}
    for key, c in f.coefficients.items():
        rest = tuple(i for i in everything if i not in key)
        out[rest] = out.get(rest, Fraction(0)) + _shuffle_sign(key, rest) * c
    return Form(alg.n - f.degree, out)


def star_matrix(space: FormSpace, q: int) -> np.ndarray:
    """Matrix of * from Lambda^q to Lambda^{n-q}."""
    mat = zeros(space.dim(space.n - q), space.dim(q))
    for col, key in enumerate(space.basis(q)):
        image = hodge_star(space.alg, Form(q, {key: Fraction(1)}))
        for target, c in image.coefficients.items():
            mat[space.position(target), col] = c
    return mat


def codifferential_signs(maps: DifferentialMaps) -> Dict[int, int]:
    """
    For each q, the sign s with delta0 = s * (* d0 *) on Lambda^{q+1}, or 0
    when neither sign matches.
    """
    space = maps.space
    n = space.n
    out = {}
    for q in range(n):
        hodge = matmul(star_matrix(space, n - q), matmul(maps.d[n - q - 1], star_matrix(space, q + 1)))
        if matrices_equal(maps.delta[q], hodge):
            out[q] = 1
        elif matrices_equal(maps.delta[q], -hodge):
            out[q] = -1
        else:
            out[q] = 0
    return out


def weight_table(alg: CarnotAlgebra) -> pd.DataFrame:
    """dim Lambda^{q,w}: one row per degree q, one column per weight w."""
    space = FormSpace(alg)
    records = [{"q": q, "w": w, "dim": len(pos)}
               for q in range(alg.n + 1) for w, pos in space.weight_blocks(q).items()]
    df = pd.DataFrame(records).pivot(index="q", columns="w", values="dim")
    df = df.reindex(columns=range(alg.Q + 1)).fillna(0).astype(int)
    assert all(df.loc[q].sum() == comb(alg.n, q) for q in df.index)
    return df
