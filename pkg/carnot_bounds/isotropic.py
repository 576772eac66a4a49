"""
isotropic.py

Horizontal subspaces S of V^1 tested against the vector-valued contact form
theta, whose components are the dual covectors of strata >= 2:

  - isotropic: d0 theta^a vanishes on S x S for every a, i.e. [S, S] = 0;
  - regular:   X -> (iota_X d0 theta)|_S maps V^1 onto Hom(S, R^{n-h}).

Regular isotropic k-planes feed the richness bound (n-k)/(Q-k).
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from carnot_bounds.algebra_spec import CarnotAlgebra
from carnot_bounds.cohomology import CohomologyTable, compute_cohomology
from carnot_bounds.constants import DEFAULT_SEED, DEFAULT_TRIALS, MAX_REDRAWS, SAMPLE_RANGE
from carnot_bounds.utils import (
    as_fraction_matrix, format_fraction, integer_columns, is_zero, matmul, nullspace, rank, zeros,
)

logger = logging.getLogger(f"CARNOT.{__name__}")


@dataclass(frozen=True, eq=False)
class HorizontalSubspace:
    """Columns of `basis` are the spanning vectors, in stratum-1 coordinates."""
    basis: np.ndarray

    def __post_init__(self):
        basis = as_fraction_matrix(self.basis)
        if rank(basis) != basis.shape[1]:
            raise ValueError(f"Spanning vectors of a {basis.shape[1]}-plane are linearly dependent")
        object.__setattr__(self, "basis", basis)

    @property
    def k(self) -> int:
        return self.basis.shape[1]

    @property
    def h(self) -> int:
        return self.basis.shape[0]

    @classmethod
    def from_vectors(cls, alg: CarnotAlgebra, vectors: Sequence[Sequence]) -> "HorizontalSubspace":
        """Accept vectors either in V^1 coordinates (length h) or in full coordinates (length n)."""
        h = alg.strata_dims[0]
        columns = []
        for vec in vectors:
            vec = list(vec)
            if len(vec) == alg.n and len(vec) != h:
                if any(v != 0 for v in vec[h:]):
                    raise ValueError(f"Vector {vec} is not horizontal")
                vec = vec[:h]
            if len(vec) != h:
                raise ValueError(f"Vector {vec} has length {len(vec)}, expected {h} or {alg.n}")
            columns.append(vec)
        if not columns:
            raise ValueError("A horizontal subspace needs at least one vector")
        return cls(as_fraction_matrix(np.array(columns, dtype=object).T))

    def to_list(self) -> List[List[str]]:
        return [[format_fraction(v) for v in self.basis[:, j]] for j in range(self.k)]


@dataclass(frozen=True, eq=False)
class ThetaData:
    """
    matrices[a][i, j] = d0 theta^a (e_i, e_j) for e_i, e_j in V^1, one
    antisymmetric h x h matrix per component of theta.
    """
    h: int
    matrices: tuple
    components: tuple = field(default=())

    @property
    def codim(self) -> int:
        return len(self.matrices)


def theta_data(alg: CarnotAlgebra) -> ThetaData:
    h = alg.strata_dims[0]
    structure = alg.structure
    matrices = []
    for a in range(h, alg.n):
        mat = zeros(h, h)
        for i in range(h):
            for j in range(h):
                mat[i, j] = -structure[i, j, a]
        matrices.append(mat)
    return ThetaData(h=h, matrices=tuple(matrices), components=tuple(range(h, alg.n)))


def is_isotropic(theta: ThetaData, subspace: HorizontalSubspace) -> bool:
    basis = subspace.basis
    return all(is_zero(matmul(basis.T, matmul(m, basis))) for m in theta.matrices)


def regularity_matrix(theta: ThetaData, subspace: HorizontalSubspace) -> np.ndarray:
    """h x k*codim matrix of X -> (d0 theta^a(X, s_j))_{a, j}."""
    if theta.codim == 0:
        return zeros(theta.h, 0)
    return np.hstack([matmul(m, subspace.basis) for m in theta.matrices])


def is_regular(theta: ThetaData, subspace: HorizontalSubspace) -> bool:
    return rank(regularity_matrix(theta, subspace)) == subspace.k * theta.codim


def dimension_check(h: int, n: int, k: int) -> bool:
    """Necessary condition h - k >= (n - h) k for a regular isotropic k-plane."""
    if not 0 <= k <= h <= n:
        raise ValueError(f"Need 0 <= k <= h <= n, got k={k}, h={h}, n={n}")
    return h - k >= (n - h) * k


def max_generic_k(h: int, n: int) -> int:
    """Largest k allowed by dimension_check; what a generic rank-h distribution would offer."""
    return max(k for k in range(h + 1) if dimension_check(h, n, k))


def model_form(L, k: int, h: int, codim: int) -> ThetaData:
    """
    On R^k + R^{h-k}, the vector-valued 2-form with components
    [[0, L_a^T], [-L_a, 0]] where L_a is (h-k) x k. R^k is isotropic, and
    regular exactly when R^{h-k} -> Hom(R^k, R^codim) is onto.
    """
    blocks = np.asarray(L, dtype=object)
    if blocks.shape != (codim, h - k, k):
        raise ValueError(f"L must have shape {(codim, h - k, k)}, got {blocks.shape}")
    blocks = [as_fraction_matrix(blocks[a]) for a in range(codim)]
    stacked = np.hstack(blocks) if codim else zeros(h - k, 0)
    if rank(stacked) != k * codim:
        raise ValueError(f"L does not map R^{h - k} onto Hom(R^{k}, R^{codim}) (rank {rank(stacked)})")
    matrices = []
    for block in blocks:
        mat = zeros(h, h)
        mat[:k, k:] = block.T
        mat[k:, :k] = -block
        matrices.append(mat)
    return ThetaData(h=h, matrices=tuple(matrices), components=tuple(range(codim)))


def _compatible_directions(theta: ThetaData, chosen: List[np.ndarray]) -> np.ndarray:
    """Integer basis of the vectors v with d0 theta^a(s, v) = 0 for all chosen s and all a."""
    if not chosen or theta.codim == 0:
        return integer_columns(nullspace(zeros(0, theta.h), ncols=theta.h))
    rows = [matmul(s.T, m) for s in chosen for m in theta.matrices]
    return integer_columns(nullspace(np.vstack(rows), ncols=theta.h))


def random_search(alg: CarnotAlgebra, k: int, trials: int = DEFAULT_TRIALS, seed: int = DEFAULT_SEED,
                  transcript: Optional[list] = None, theta: ThetaData = None,
                  max_redraws: int = MAX_REDRAWS) -> Optional[HorizontalSubspace]:
    """
    Sample isotropic k-planes one vector at a time: each new vector is a
    small-integer combination of an integer basis of the directions
    compatible with the vectors already drawn. A draw that is dependent on
    the chosen vectors is redrawn, up to `max_redraws` times per vector; the
    trial fails when the directions run out or every redraw is dependent.
    Returns the first regular plane, or None after `trials` attempts.
    """
    if k < 1 or trials < 1 or max_redraws < 0:
        raise ValueError(f"Need k >= 1, trials >= 1 and max_redraws >= 0, "
                         f"got k={k}, trials={trials}, max_redraws={max_redraws}")
    if theta is None:
        theta = theta_data(alg)
    if k > theta.h:
        logger.info(f"No {k}-plane fits in V^1 of dimension {theta.h} for '{alg.name}'")
        return None
    rng = np.random.default_rng(seed)
    for trial in range(trials):
        chosen = []
        outcome = "regular"
        redraws = 0
        for _ in range(k):
            directions = _compatible_directions(theta, chosen)
            if directions.shape[1] == 0:
                outcome = "no_directions"
                break
            vec = None
            for _ in range(max_redraws + 1):
                coords = rng.integers(-SAMPLE_RANGE, SAMPLE_RANGE + 1, size=directions.shape[1])
                draw = matmul(directions, as_fraction_matrix([[int(c)] for c in coords]))
                if rank(np.hstack(chosen + [draw])) == len(chosen) + 1:
                    vec = draw
                    break
                redraws += 1
            if vec is None:
                outcome = "dependent"
                break
            chosen.append(vec)
        plane = HorizontalSubspace(np.hstack(chosen)) if len(chosen) == k else None
        if plane is not None and not is_regular(theta, plane):
            outcome = "not_regular"
        if transcript is not None:
            transcript.append({
                "trial": trial,
                "vectors": [[format_fraction(v) for v in s[:, 0]] for s in chosen],
                "outcome": outcome,
                "redraws": redraws,
            })
        if outcome == "regular":
            assert is_isotropic(theta, plane)
            logger.info(f"Found a regular isotropic {k}-plane for '{alg.name}' after {trial + 1} trial(s)")
            return plane
    logger.info(f"No regular isotropic {k}-plane for '{alg.name}' in {trials} trial(s)")
    return None


@dataclass
class VanishingReport:
    k: int
    plane_verified: bool
    step_flag: bool
    rows: List[dict]

    @property
    def passed(self) -> bool:
        return all(row["vanishes"] for row in self.rows)


def cross_check_weight_vanishing(alg: CarnotAlgebra, subspace: HorizontalSubspace,
                                 table: CohomologyTable = None, theta: ThetaData = None) -> VanishingReport:
    """
    A regular isotropic k-plane forces H^{k,w} = 0 for w >= k+1, and by
    duality H^{n-k,w} = 0 for w < Q-k. Violations are reported, not raised.
    """
    if table is None:
        table = compute_cohomology(alg)
    if theta is None:
        theta = theta_data(alg)
    k = subspace.k
    verified = is_isotropic(theta, subspace) and is_regular(theta, subspace)
    if not verified:
        logger.warning(f"Plane given for '{alg.name}' is not regular isotropic; the vanishing check is not implied")
    step_flag = alg.r >= 3
    if step_flag:
        logger.warning(f"'{alg.name}' has step {alg.r}; regularity here is the invariant d0-level notion only")

    rows = [{"q": k, "w": w, "dim": table.dim(k, w), "vanishes": table.dim(k, w) == 0}
            for w in range(k + 1, alg.Q + 1)]
    rows += [{"q": alg.n - k, "w": w, "dim": table.dim(alg.n - k, w), "vanishes": table.dim(alg.n - k, w) == 0}
             for w in range(0, alg.Q - k)]
    report = VanishingReport(k=k, plane_verified=verified, step_flag=step_flag, rows=rows)
    for row in rows:
        if not row["vanishes"]:
            logger.warning(f"H^({row['q']},{row['w']}) = {row['dim']} for '{alg.name}' despite a regular isotropic {k}-plane")
    return report
