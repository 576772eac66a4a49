"""
analyzer.py

High-level interface that runs the whole pipeline for one Carnot algebra:
validation, cohomology, Rumin decomposition, isotropic planes, Holder bounds
and optionally the metric lab.
"""

import logging
from typing import Any, Dict, List, Optional, Union

try:
    # When imported as a module
    from .algebra_spec import CarnotAlgebra, load_spec
    from .exterior import ce_differential
    from .cohomology import compute_cohomology, verify_duality, closed_one_forms
    from .rumin import build_rumin, verify_rumin_identities
    from .isotropic import random_search, theta_data, cross_check_weight_vanishing
    from .bounds import holder_report
    from .metric_lab import volume_scaling_experiment, tube_experiment
    from .utils import log_memory_usage
    from .constants import *
except ImportError:
    # When run directly as a script
    from carnot_bounds.algebra_spec import CarnotAlgebra, load_spec
    from carnot_bounds.exterior import ce_differential
    from carnot_bounds.cohomology import compute_cohomology, verify_duality, closed_one_forms
    from carnot_bounds.rumin import build_rumin, verify_rumin_identities
    from carnot_bounds.isotropic import random_search, theta_data, cross_check_weight_vanishing
    from carnot_bounds.bounds import holder_report
    from carnot_bounds.metric_lab import volume_scaling_experiment, tube_experiment
    from carnot_bounds.utils import log_memory_usage
    from carnot_bounds.constants import *

logger = logging.getLogger(f"CARNOT.{__name__}")


class CarnotAnalyzer:
    """
    Coordinates the exact and numerical analyses of a Carnot algebra.

    The d0 matrices are built once and shared by the cohomology, Rumin and
    bounds stages.
    """

    def __init__(self):
        pass

    @staticmethod
    def run(
        alg: Union[CarnotAlgebra, str],
        search_k: Optional[List[int]] = None,
        trials: int = DEFAULT_TRIALS,
        seed: int = DEFAULT_SEED,
        rumin: bool = True,
        lab: bool = False,
        samples: int = DEFAULT_SAMPLES,
    ) -> Dict[str, Any]:
        """
        Run the pipeline.

        Args:
            alg: A validated algebra, or a path / "builtin:<name>[:<m>]" pseudo-path
            search_k: Plane dimensions to hand to random_search. If None, tries
                      every k from 1 to dim V^1; verified planes feed the richness bound.
            trials: Sampling attempts per k
            seed: Seed for random_search and the metric lab
            rumin: If True, builds the Rumin decomposition and checks its identities
            lab: If True and the step is <= 2, runs the volume-scaling and tube experiments
            samples: Monte Carlo sample count for the lab

        Returns:
            Dictionary with keys "algebra", "cohomology", "duality", "closed_one_forms",
            "rumin", "rumin_report", "planes", "vanishing", "bounds" and, when requested,
            "volume_scaling" and "tube".
        """
        if isinstance(alg, str):
            alg = load_spec(alg)
        logger.info(f"Analyzing '{alg.name}' (n={alg.n}, r={alg.r}, Q={alg.Q})")

        maps = ce_differential(alg)
        results: Dict[str, Any] = {"algebra": alg}
        table = compute_cohomology(alg, maps)
        results["cohomology"] = table
        results["duality"] = verify_duality(table, alg)
        results["closed_one_forms"] = closed_one_forms(alg, maps)

        if rumin:
            data = build_rumin(alg, maps)
            results["rumin"] = data
            results["rumin_report"] = verify_rumin_identities(data)

        theta = theta_data(alg)
        if search_k is None:
            search_k = list(range(1, alg.strata_dims[0] + 1))
        planes = {}
        vanishing = {}
        for k in search_k:
            plane = random_search(alg, k, trials=trials, seed=seed, theta=theta)
            planes[k] = plane
            if plane is not None:
                vanishing[k] = cross_check_weight_vanishing(alg, plane, table=table, theta=theta)
        results["planes"] = planes
        results["vanishing"] = vanishing
        results["bounds"] = holder_report(alg, table, [p for p in planes.values() if p is not None])

        if lab:
            if alg.r > 2:
                logger.warning(f"Skipping the metric lab for '{alg.name}': step {alg.r} > 2")
            else:
                results["volume_scaling"] = volume_scaling_experiment(alg, samples=samples, seed=seed)
                results["tube"] = tube_experiment(alg, eps=DEFAULT_EPS[0], samples=samples, seed=seed)

        log_memory_usage(f"Analysis of '{alg.name}'")
        return results
