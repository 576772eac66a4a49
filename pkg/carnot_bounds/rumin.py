"""
rumin.py

The Rumin decomposition of left-invariant forms:

    Lambda^q = E + im d0 + F,   E = ker d0 ^ ker delta0,   F = im delta0,

the partial inverse of d0 (the Moore-Penrose inverse for these orthogonal
choices), the retraction R = 1 - d0 (d0)^-1 - (d0)^-1 d0, its stabilized
projector p and the projector pi onto E along im d0 + F.

d0 preserves weight and distinct weight blocks are orthogonal, so every
operator here is block diagonal: each is computed on Lambda^{q,w} and the
blocks are assembled into Lambda^q matrices.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List

import numpy as np
import pandas as pd

from carnot_bounds.algebra_spec import CarnotAlgebra
from carnot_bounds.cohomology import compute_cohomology
from carnot_bounds.constants import MAX_RETRACTION_ITERATIONS
from carnot_bounds.exterior import DifferentialMaps, ce_differential
from carnot_bounds.utils import (
    zeros, identity, matmul, inverse, pseudo_inverse, nullspace, column_space, canonical_basis,
    rank, same_span, matrices_equal, is_zero, block, embed, pivot_order, off_block_is_zero,
    log_memory_usage,
)

logger = logging.getLogger(f"CARNOT.{__name__}")


class StabilizationError(RuntimeError):
    """The powers of the retraction did not become stationary."""

    def __init__(self, degree: int, iterations: int):
        self.degree = degree
        self.iterations = iterations
        super().__init__(f"Retraction in degree {degree} not stationary after {iterations} iterations")


@dataclass
class RuminData:
    """
    Everything is indexed by degree q. d_inv[q] is the partial inverse of
    d0: Lambda^q -> Lambda^{q+1}, so it maps Lambda^{q+1} back to Lambda^q.
    """
    alg: CarnotAlgebra
    maps: DifferentialMaps = field(repr=False)
    e_basis: Dict[int, np.ndarray] = field(default_factory=dict)
    f_basis: Dict[int, np.ndarray] = field(default_factory=dict)
    im_basis: Dict[int, np.ndarray] = field(default_factory=dict)
    d_inv: Dict[int, np.ndarray] = field(default_factory=dict)
    retraction: Dict[int, np.ndarray] = field(default_factory=dict)
    projector: Dict[int, np.ndarray] = field(default_factory=dict)
    pi: Dict[int, np.ndarray] = field(default_factory=dict)
    iterations: Dict[int, int] = field(default_factory=dict)

    def dims(self, q: int) -> Dict[str, int]:
        return {"E": self.e_basis[q].shape[1], "im_d0": self.im_basis[q].shape[1],
                "F": self.f_basis[q].shape[1]}


def _stabilize(retraction: np.ndarray, degree: int, max_iterations: int):
    current = retraction
    for j in range(1, max_iterations + 1):
        following = matmul(current, retraction)
        if matrices_equal(following, current):
            return current, j
        current = following
    raise StabilizationError(degree, max_iterations)


def _positions(maps: DifferentialMaps, q: int, w: int) -> List[int]:
    if q < 0:
        return []
    return maps.space.weight_blocks(q).get(w, [])


def _spread(size: int, positions: List[int], columns: np.ndarray) -> np.ndarray:
    """Columns given in block coordinates, written out in Lambda^q coordinates."""
    out = zeros(size, columns.shape[1])
    embed(out, positions, range(columns.shape[1]), columns)
    return out


def _restrict(columns: np.ndarray, positions: List[int]) -> np.ndarray:
    """Rows `positions` of the columns supported there."""
    inside = [j for j in range(columns.shape[1]) if any(columns[i, j] != 0 for i in positions)]
    return block(columns, positions, inside)


def build_rumin(alg: CarnotAlgebra, maps: DifferentialMaps = None,
                max_iterations: int = MAX_RETRACTION_ITERATIONS) -> RuminData:
    if maps is None:
        maps = ce_differential(alg)
    space = maps.space
    data = RuminData(alg=alg, maps=maps)
    partial = {(q, w): pseudo_inverse(maps.block(q, w)) for q in range(alg.n + 1) for w in space.weights(q)}

    for q in range(alg.n + 1):
        size = space.dim(q)
        d_inv = zeros(size, space.dim(q + 1))
        retraction, projector, pi = zeros(size, size), zeros(size, size), zeros(size, size)
        e_cols, f_cols, im_cols = [], [], []
        steps = 0
        for w, positions in sorted(space.weight_blocks(q).items()):
            k = len(positions)
            d_out, d_in = maps.block(q, w), maps.block(q - 1, w)
            d_out_inv = partial[(q, w)]
            d_in_inv = partial.get((q - 1, w), zeros(0, k))

            e = canonical_basis(nullspace(np.vstack([d_out, d_in.T]), ncols=k))
            f = canonical_basis(column_space(d_out.T))
            im = canonical_basis(column_space(d_in))
            frame = np.hstack([e, im, f])
            if frame.shape != (k, k) or rank(frame) != k:
                raise AssertionError(f"E + im d0 + F is not a direct sum decomposition of Lambda^({q},{w})")

            keep = zeros(k, k)
            for i in range(e.shape[1]):
                keep[i, i] = 1
            r = identity(k) - matmul(d_in, d_in_inv) - matmul(d_out_inv, d_out)
            p, j = _stabilize(r, q, max_iterations)
            steps = max(steps, j)

            embed(retraction, positions, positions, r)
            embed(projector, positions, positions, p)
            embed(pi, positions, positions, matmul(frame, matmul(keep, inverse(frame))))
            embed(d_inv, positions, _positions(maps, q + 1, w), d_out_inv)
            e_cols.append(_spread(size, positions, e))
            f_cols.append(_spread(size, positions, f))
            im_cols.append(_spread(size, positions, im))

        data.e_basis[q] = pivot_order(np.hstack(e_cols))
        data.f_basis[q] = pivot_order(np.hstack(f_cols))
        data.im_basis[q] = pivot_order(np.hstack(im_cols))
        data.d_inv[q] = d_inv
        data.retraction[q] = retraction
        data.projector[q] = projector
        data.pi[q] = pi
        data.iterations[q] = steps
        logger.debug(f"{alg.name}: degree {q} splits as E={data.e_basis[q].shape[1]} + "
                     f"im={data.im_basis[q].shape[1]} + F={data.f_basis[q].shape[1]}, "
                     f"stationary after {steps} iteration(s)")
    log_memory_usage(f"Rumin decomposition of '{alg.name}'")
    logger.info(f"Built Rumin decomposition of '{alg.name}'")
    return data


@dataclass
class RuminReport:
    checks: List[dict]

    @property
    def passed(self) -> bool:
        return all(check["passed"] for check in self.checks)

    def failures(self) -> List[dict]:
        return [check for check in self.checks if not check["passed"]]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.checks)


def _subcomplex_block(data: RuminData, q: int, w: int) -> np.ndarray:
    maps = data.maps
    positions = _positions(maps, q, w)
    if q > 0:
        d_in_inv = block(data.d_inv[q - 1], _positions(maps, q - 1, w), positions)
    else:
        d_in_inv = zeros(0, len(positions))
    d_out_inv = block(data.d_inv[q], positions, _positions(maps, q + 1, w))
    kills = np.vstack([d_in_inv, matmul(d_out_inv, maps.block(q, w))])
    return canonical_basis(nullspace(kills, ncols=len(positions)))


def rumin_subcomplex(data: RuminData, q: int) -> np.ndarray:
    """ker (d0)^-1 ^ ker((d0)^-1 d0) in degree q, built without reference to E."""
    space = data.maps.space
    columns = [_spread(space.dim(q), positions, _subcomplex_block(data, q, w))
               for w, positions in sorted(space.weight_blocks(q).items())]
    return pivot_order(np.hstack(columns))


def _preserves_weight_filtration(data: RuminData, q: int) -> bool:
    space = data.maps.space
    keys = space.basis(q)
    p = data.projector[q]
    for i, j in zip(*np.nonzero(p != 0)):
        if space.weight_of(keys[i]) < space.weight_of(keys[j]):
            return False
    return True


def _block_checks(data: RuminData, q: int, w: int) -> Dict[str, bool]:
    maps = data.maps
    positions = _positions(maps, q, w)
    p = block(data.projector[q], positions, positions)
    pi = block(data.pi[q], positions, positions)
    r = block(data.retraction[q], positions, positions)
    d_inv = block(data.d_inv[q], positions, _positions(maps, q + 1, w))
    d_out = maps.block(q, w)
    sub = _subcomplex_block(data, q, w)
    complement = [_restrict(data.im_basis[q], positions), _restrict(data.f_basis[q], positions)]
    e = _restrict(data.e_basis[q], positions)
    return {
        "subcomplex_dim": sub.shape[1],
        "basis_columns": e.shape[1] + sum(c.shape[1] for c in complement),
        "idempotent": matrices_equal(matmul(p, p), p),
        "image_is_subcomplex": same_span(column_space(p), sub),
        "p_pi_identity": matrices_equal(matmul(p, matmul(pi, sub)), sub),
        "retraction_kills_complement": all(is_zero(matmul(r, c)) for c in complement)
        and matrices_equal(matmul(r, e), e),
        "pseudo_inverse": matrices_equal(matmul(d_inv, matmul(d_out, d_inv)), d_inv),
    }


def verify_rumin_identities(data: RuminData) -> RuminReport:
    """
    Exact checks per degree: p idempotent; im p equals the subcomplex built
    from kernels of the partial inverse; p o pi is the identity there; its
    dimension is the Betti number; p respects the weight filtration. Also the
    retraction kills im d0 + F and the partial inverse is a generalized inverse.

    The checks run block by block once the operators are confirmed to have no
    entries between different weights; an operator that does fails its checks.
    """
    betti = compute_cohomology(data.alg, data.maps).betti
    space = data.maps.space
    checks = []

    def record(name: str, q: int, passed: bool, detail: str = ""):
        checks.append({"identity": name, "degree": q, "passed": bool(passed), "detail": detail})

    for q in range(data.alg.n + 1):
        blocks = space.weight_blocks(q)
        p_diagonal = off_block_is_zero(data.projector[q], blocks, blocks)
        pi_diagonal = off_block_is_zero(data.pi[q], blocks, blocks)
        r_diagonal = off_block_is_zero(data.retraction[q], blocks, blocks)
        inv_diagonal = off_block_is_zero(data.d_inv[q], blocks, space.weight_blocks(q + 1))
        per_block = [_block_checks(data, q, w) for w in sorted(blocks)]

        def holds(name: str) -> bool:
            return all(result[name] for result in per_block)

        sub_dim = sum(result["subcomplex_dim"] for result in per_block)
        columns = data.e_basis[q].shape[1] + data.im_basis[q].shape[1] + data.f_basis[q].shape[1]
        block_supported = sum(result["basis_columns"] for result in per_block) == columns

        record("idempotent", q, p_diagonal and holds("idempotent"))
        record("image_is_subcomplex", q, p_diagonal and holds("image_is_subcomplex"))
        record("p_pi_identity", q, p_diagonal and pi_diagonal and holds("p_pi_identity"))
        record("dimension_is_betti", q, sub_dim == betti[q], f"{sub_dim} vs {betti[q]}")
        record("weight_filtration", q, _preserves_weight_filtration(data, q))
        record("retraction_kills_complement", q,
               r_diagonal and block_supported and holds("retraction_kills_complement"))
        record("pseudo_inverse", q, inv_diagonal and holds("pseudo_inverse"))

    report = RuminReport(checks)
    for check in report.failures():
        logger.warning(f"Rumin identity '{check['identity']}' fails in degree {check['degree']} "
                       f"for '{data.alg.name}' {check['detail']}")
    return report


def rumin_frame(data: RuminData) -> pd.DataFrame:
    rows = []
    for q in range(data.alg.n + 1):
        dims = data.dims(q)
        rows.append({"q": q, "Lambda": data.maps.space.dim(q), "E": dims["E"],
                     "im_d0": dims["im_d0"], "F": dims["F"], "iterations": data.iterations[q]})
    return pd.DataFrame(rows)
