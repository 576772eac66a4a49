"""
bounds.py

Collect the lower and upper bounds on the Holder exponent alpha(M, H) of a
Carnot algebra into one report, each upper bound tagged with the rule that
produced it.
"""

import json
import logging
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Union

import pandas as pd

from carnot_bounds.algebra_spec import CarnotAlgebra
from carnot_bounds.cohomology import CohomologyTable, compute_cohomology
from carnot_bounds.constants import RULE_TRIVIAL_DIM, RULE_ISOPERIMETRIC, RULE_WEIGHT, RULE_RICHNESS
from carnot_bounds.isotropic import HorizontalSubspace, theta_data, is_isotropic, is_regular, max_generic_k
from carnot_bounds.utils import format_fraction

logger = logging.getLogger(f"CARNOT.{__name__}")


@lru_cache(maxsize=1)
def bound_rules() -> Dict[str, dict]:
    with open(f"{Path(__file__).parent}/bound_rules.json", "r") as f:
        return json.load(f)


@dataclass(frozen=True)
class UpperBound:
    value: Fraction
    rule: str
    parameter: Optional[int] = None

    @property
    def label(self) -> str:
        return self.rule if self.parameter is None else f"{self.rule}({self.parameter})"

    @property
    def cite(self) -> str:
        return bound_rules()[self.rule]["cite"]


@dataclass
class BoundsReport:
    """
    W_alg[q] is the smallest weight carrying degree-q cohomology. It certifies
    W_q >= W_alg[q]; it is not W_q itself.
    """
    name: str
    n: int
    Q: int
    r: int
    lower: Fraction
    uppers: List[UpperBound]
    W_alg: Dict[int, Optional[int]]
    generic_k: int
    richness_k: List[int] = field(default_factory=list)

    @property
    def best(self) -> UpperBound:
        return min(self.uppers, key=lambda u: u.value)

    @property
    def best_upper(self) -> Fraction:
        return self.best.value


def weight_invariant_lower(table: CohomologyTable, q: int) -> Optional[int]:
    """min{w : H^{q,w} != 0}, or None when the degree-q cohomology vanishes."""
    if not 1 <= q <= table.n - 1:
        raise ValueError(f"Weight invariant needs 1 <= q <= {table.n - 1}, got {q}")
    return table.min_weight(q)


def _verified_k(alg: CarnotAlgebra, isotropic_results: Iterable[Union[int, HorizontalSubspace]]) -> List[int]:
    """k values backed by a regular isotropic plane; planes are re-checked, bare ints are trusted."""
    theta = None
    ks = set()
    for item in isotropic_results or []:
        if isinstance(item, HorizontalSubspace):
            theta = theta or theta_data(alg)
            if not (is_isotropic(theta, item) and is_regular(theta, item)):
                logger.warning(f"Skipping a {item.k}-plane for '{alg.name}': not regular isotropic")
                continue
            ks.add(item.k)
        else:
            ks.add(int(item))
    return sorted(k for k in ks if 1 <= k < alg.n)


def holder_report(alg: CarnotAlgebra, table: CohomologyTable = None,
                  isotropic_results: Iterable[Union[int, HorizontalSubspace]] = None) -> BoundsReport:
    if table is None:
        table = compute_cohomology(alg)
    n, Q, r = alg.n, alg.Q, alg.r

    uppers = [UpperBound(Fraction(n, Q), RULE_TRIVIAL_DIM)]
    if Q > 1:
        uppers.append(UpperBound(Fraction(n - 1, Q - 1), RULE_ISOPERIMETRIC))

    W_alg = {}
    for q in range(1, n):
        w = weight_invariant_lower(table, q)
        W_alg[q] = w
        if w is not None:
            uppers.append(UpperBound(Fraction(q, w), RULE_WEIGHT, q))

    richness_k = _verified_k(alg, isotropic_results)
    for k in richness_k:
        uppers.append(UpperBound(Fraction(n - k, Q - k), RULE_RICHNESS, k))

    report = BoundsReport(name=alg.name, n=n, Q=Q, r=r, lower=Fraction(1, r), uppers=uppers, W_alg=W_alg,
                          generic_k=max_generic_k(alg.strata_dims[0], n), richness_k=richness_k)
    if report.lower > report.best_upper:
        logger.warning(f"Lower bound {report.lower} exceeds best upper bound {report.best_upper} for '{alg.name}'")
    logger.info(f"Holder exponent of '{alg.name}': {format_fraction(report.lower)} <= alpha <= "
                f"{format_fraction(report.best_upper)} ({report.best.label})")
    return report


def report_to_dict(report: BoundsReport) -> dict:
    return {
        "name": report.name,
        "n": report.n,
        "Q": report.Q,
        "r": report.r,
        "lower": format_fraction(report.lower),
        "uppers": [{"value": format_fraction(u.value), "rule": u.label, "cite": u.cite} for u in report.uppers],
        "best_upper": format_fraction(report.best_upper),
        "W_alg": {str(q): w for q, w in report.W_alg.items()},
        "generic_k": report.generic_k,
    }


def uppers_frame(report: BoundsReport) -> pd.DataFrame:
    return pd.DataFrame([{"rule": u.label, "value": format_fraction(u.value), "float": float(u.value)}
                         for u in report.uppers])
