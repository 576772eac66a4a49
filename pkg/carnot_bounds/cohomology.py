"""
cohomology.py

Bigraded Lie algebra cohomology H^{q,w} of a Carnot algebra, harmonic
representatives, Poincare duality and the closed invariant 1-forms.
"""

import logging
from dataclasses import dataclass, field
from math import comb
from typing import Dict, List, Optional, Tuple

import numpy as np
import pandas as pd

from carnot_bounds.algebra_spec import CarnotAlgebra
from carnot_bounds.exterior import DifferentialMaps, Form, ce_differential, d0_generators, wedge
from carnot_bounds.utils import rank, nullspace, canonical_basis, zeros

logger = logging.getLogger(f"CARNOT.{__name__}")


@dataclass
class CohomologyTable:
    """
    dims[(q, w)] = dim H^{q,w} for every block where Lambda^{q,w} is nonzero;
    harmonic_basis[(q, w)] spans ker d0 ^ ker delta0 inside that block.
    """
    n: int
    Q: int
    dims: Dict[Tuple[int, int], int]
    betti: Dict[int, int]
    harmonic_basis: Dict[Tuple[int, int], List[Form]]
    maps: DifferentialMaps = field(repr=False, default=None)

    def dim(self, q: int, w: int) -> int:
        return self.dims.get((q, w), 0)

    def weights(self, q: int) -> List[int]:
        """Weights carrying nonzero degree-q cohomology."""
        return sorted(w for (qq, w), d in self.dims.items() if qq == q and d > 0)

    def min_weight(self, q: int) -> Optional[int]:
        weights = self.weights(q)
        return weights[0] if weights else None

    def betti_list(self) -> List[int]:
        return [self.betti[q] for q in range(self.n + 1)]


def _harmonic_block(d_out: np.ndarray, d_in: np.ndarray, size: int) -> np.ndarray:
    """Joint kernel of d0 (outgoing) and delta0 (adjoint of incoming) in one block."""
    stacked = np.vstack([d_out, d_in.T])
    return canonical_basis(nullspace(stacked, ncols=size))


def compute_cohomology(alg: CarnotAlgebra, maps: DifferentialMaps = None) -> CohomologyTable:
    """
    dim H^{q,w} = dim ker(d0 on Lambda^{q,w}) - rank(d0 on Lambda^{q-1,w}),
    computed block by block in exact arithmetic.
    """
    if maps is None:
        maps = ce_differential(alg)
    space = maps.space
    dims = {}
    harmonic = {}
    for q in range(alg.n + 1):
        for w, positions in sorted(space.weight_blocks(q).items()):
            d_out = maps.block(q, w)
            d_in = maps.block(q - 1, w)
            dim = len(positions) - rank(d_out) - rank(d_in)
            basis = _harmonic_block(d_out, d_in, len(positions))
            if basis.shape[1] != dim:
                raise AssertionError(
                    f"Harmonic space of block ({q},{w}) has dimension {basis.shape[1]}, expected {dim}"
                )
            keys = [space.basis(q)[p] for p in positions]
            harmonic[(q, w)] = [
                Form(q, {key: basis[i, j] for i, key in enumerate(keys)}) for j in range(basis.shape[1])
            ]
            dims[(q, w)] = dim
            logger.debug(f"{alg.name}: H^({q},{w}) has dimension {dim} (block size {len(positions)})")
    betti = {q: sum(d for (qq, _), d in dims.items() if qq == q) for q in range(alg.n + 1)}
    logger.info(f"Computed cohomology of '{alg.name}': betti numbers {[betti[q] for q in range(alg.n + 1)]}")
    return CohomologyTable(n=alg.n, Q=alg.Q, dims=dims, betti=betti, harmonic_basis=harmonic, maps=maps)


@dataclass
class DualityReport:
    rows: List[dict]

    @property
    def passed(self) -> bool:
        return all(row["matched"] for row in self.rows)

    @property
    def mismatches(self) -> List[dict]:
        return [row for row in self.rows if not row["matched"]]

    def frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows)


def verify_duality(table: CohomologyTable, alg: CarnotAlgebra) -> DualityReport:
    """
    Compare dim H^{q,w} with dim H^{n-q,Q-w} for every block. A mismatch is an
    implementation bug, since the isomorphism is a theorem; it is reported,
    not raised.
    """
    rows = []
    for (q, w) in sorted(table.dims):
        dq, dw = alg.n - q, alg.Q - w
        dim, dual = table.dim(q, w), table.dim(dq, dw)
        rows.append({"q": q, "w": w, "dim": dim, "dual_q": dq, "dual_w": dw,
                     "dual_dim": dual, "matched": dim == dual})
    report = DualityReport(rows)
    for row in report.mismatches:
        logger.warning(f"Duality mismatch for '{alg.name}': H^({row['q']},{row['w']}) = {row['dim']} "
                       f"but H^({row['dual_q']},{row['dual_w']}) = {row['dual_dim']}")
    return report


def closed_one_forms(alg: CarnotAlgebra, maps: DifferentialMaps = None) -> List[Form]:
    """Basis of ker(d0: Lambda^1 -> Lambda^2), in reduced echelon form."""
    if maps is None:
        maps = ce_differential(alg)
    basis = canonical_basis(nullspace(maps.d[1], ncols=alg.n))
    return [Form(1, {(i,): basis[i, j] for i in range(alg.n)}) for j in range(basis.shape[1])]


def lefschetz_check(alg: CarnotAlgebra, table: CohomologyTable = None) -> pd.DataFrame:
    """
    Contact (Heisenberg-type) algebras: every form is eta + theta ^ beta with
    eta, beta horizontal, and d0 acts as beta -> L beta = d theta ^ beta, so
    H^{q,q} = Lambda^q / im L and H^{q,q+1} = theta ^ ker L.
    """
    if alg.r != 2 or alg.strata_dims[1] != 1:
        raise ValueError(f"'{alg.name}' is not of contact type (strata must be (2m, 1))")
    if table is None:
        table = compute_cohomology(alg)
    h = alg.strata_dims[0]
    top = alg.n - 1
    dtheta = d0_generators(alg)[top]
    bases = {p: [key for key in table.maps.space.basis(p) if top not in key] for p in range(-2, h + 3)}

    def lefschetz(p: int) -> np.ndarray:
        src, dst = bases.get(p, []), bases.get(p + 2, [])
        mat = zeros(len(dst), len(src))
        pos = {key: i for i, key in enumerate(dst)}
        for col, key in enumerate(src):
            for target, c in wedge(dtheta, Form(p, {key: 1})).coefficients.items():
                mat[pos[target], col] = c
        return mat

    rows = []
    for q in range(h + 1):
        im_l = rank(lefschetz(q - 2)) if q >= 2 else 0
        ker_l = comb(h, q - 1) - rank(lefschetz(q - 1)) if q >= 1 else 0
        coker = comb(h, q) - im_l
        rows.append({"q": q, "H_qq": table.dim(q, q), "coker_L": coker,
                     "H_qq1": table.dim(q, q + 1), "ker_L": ker_l,
                     "matched": table.dim(q, q) == coker and table.dim(q, q + 1) == ker_l})
    return pd.DataFrame(rows)


def rank2_checks(alg: CarnotAlgebra, table: CohomologyTable = None) -> Dict[str, Optional[bool]]:
    """
    Rank-2 distributions: H^{2,2} = 0 always; H^{2,3} = 0 as soon as
    [V^1, V^2] -> V^3 is injective, i.e. dim V^3 = 2.
    """
    if alg.strata_dims[0] != 2:
        raise ValueError(f"'{alg.name}' does not have a rank-2 first stratum")
    if table is None:
        table = compute_cohomology(alg)
    v3 = alg.strata_dims[2] if alg.r >= 3 else 0
    return {
        "H22_vanishes": table.dim(2, 2) == 0,
        "H23_vanishes": (table.dim(2, 3) == 0) if v3 == 2 else None,
    }


def table_frame(table: CohomologyTable) -> pd.DataFrame:
    """dim H^{q,w} pivoted to rows q and columns w; blocks with Lambda^{q,w} = 0 are left empty."""
    records = [{"q": q, "w": w, "dim": d} for (q, w), d in sorted(table.dims.items())]
    df = pd.DataFrame(records).pivot(index="q", columns="w", values="dim")
    return df.reindex(index=range(table.n + 1), columns=range(table.Q + 1)).astype("Int64")


def table_to_dict(table: CohomologyTable) -> dict:
    return {
        "dims": {f"{q},{w}": d for (q, w), d in sorted(table.dims.items())},
        "betti": table.betti_list(),
    }
