import sys
import json
import logging
from math import comb
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

# Add the parent directory to the Python path to make the package importable
sys.path.insert(0, str(Path(__file__).parent.parent))

from carnot_bounds import builtin, load_spec
from carnot_bounds.algebra_spec import random_step2
from carnot_bounds.bounds import holder_report
from carnot_bounds.cohomology import *
from carnot_bounds.exterior import Form, ce_differential
from carnot_bounds.utils import naive_rank, is_zero, matmul, rank

logging.getLogger("CARNOT").setLevel(logging.DEBUG)
DATA_DIR = f"{Path(__file__).parent}/test_data"


@pytest.fixture(scope="module")
def builtins():
    return [builtin("abelian", 3), builtin("heisenberg", 1), builtin("heisenberg", 2),
            builtin("quaternionic_heisenberg"), builtin("engel"), builtin("free_rank2_step3")]


@pytest.fixture(scope="module")
def heis_table():
    return compute_cohomology(builtin("heisenberg", 1))


def test_heisenberg_table(heis_table, caplog):
    with open(f"{DATA_DIR}/heis3_cohomology.json") as f:
        golden = json.load(f)
    assert table_to_dict(heis_table) == {"dims": golden["dims"], "betti": golden["betti"]}
    assert heis_table.dim(2, 2) == 0
    assert heis_table.dim(2, 7) == 0  # block absent
    assert heis_table.weights(2) == [3]
    assert heis_table.min_weight(1) == 1

    compute_cohomology(load_spec(f"{DATA_DIR}/heis3.json"))
    assert "betti numbers [1, 2, 2, 1]" in caplog.text


def test_abelian_is_diagonal():
    for n in (1, 2, 4):
        table = compute_cohomology(builtin("abelian", n))
        for (q, w), d in table.dims.items():
            assert w == q
            assert d == comb(n, q)


def test_contact_diagonal_vanishes():
    for m in (1, 2, 3):
        alg = builtin("heisenberg", m)
        table = compute_cohomology(alg)
        for q in range(m + 1, alg.n + 1):
            assert table.dim(q, q) == 0
        assert lefschetz_check(alg, table)["matched"].all()


def test_lefschetz_needs_contact_type():
    with pytest.raises(ValueError):
        lefschetz_check(builtin("engel"))
    with pytest.raises(ValueError):
        lefschetz_check(builtin("quaternionic_heisenberg"))


def test_quaternionic_degree_two():
    alg = builtin("quaternionic_heisenberg")
    table = compute_cohomology(alg)
    assert table.dim(2, 4) == 0
    # For m = 1, Lambda^{2,3} is 12-dimensional and d0 maps it onto Lambda^{3,3} (dim 4)
    assert table.dim(2, 3) == 8
    assert table.dim(2, 2) == 3
    assert verify_duality(table, alg).passed


def test_rank_two_distributions():
    engel = builtin("engel")
    table = compute_cohomology(engel)
    assert table.betti_list() == [1, 2, 2, 2, 1]
    assert rank2_checks(engel, table) == {"H22_vanishes": True, "H23_vanishes": None}

    free = builtin("free_rank2_step3")
    table = compute_cohomology(free)
    assert table.dim(2, 2) == 0 and table.dim(2, 3) == 0
    assert table.min_weight(2) == 4
    assert rank2_checks(free, table) == {"H22_vanishes": True, "H23_vanishes": True}

    with pytest.raises(ValueError):
        rank2_checks(builtin("heisenberg", 2))


STEP2_SHAPES = [(2, 1), (3, 1), (3, 2), (3, 3), (4, 1), (4, 2), (4, 3), (4, 4), (5, 2), (5, 3)]


def test_duality(builtins, caplog):
    algebras = builtins + [random_step2(*STEP2_SHAPES[s % len(STEP2_SHAPES)], seed=s) for s in range(50)]
    for alg in algebras:
        table = compute_cohomology(alg)
        report = verify_duality(table, alg)
        assert report.passed, (alg.name, report.mismatches)
        assert len(report.frame()) == len(table.dims)
    assert "Duality mismatch" not in caplog.text


def test_betti_invariants(builtins):
    for alg in builtins:
        table = compute_cohomology(alg)
        betti = table.betti_list()
        assert sum((-1) ** q * b for q, b in enumerate(betti)) == 0
        assert betti[0] == betti[-1] == 1
        assert betti[1] == betti[-2] == alg.strata_dims[0]
        assert table.min_weight(alg.n - 1) == alg.Q - 1


def test_harmonic_representatives(builtins):
    for alg in builtins[:4]:
        table = compute_cohomology(alg)
        maps = table.maps
        space = maps.space
        for (q, w), forms in table.harmonic_basis.items():
            assert len(forms) == table.dim(q, w)
            if not forms:
                continue
            vectors = [space.to_vector(f) for f in forms]
            for vec in vectors:
                assert is_zero(matmul(maps.d[q], vec))
                if q > 0:
                    assert is_zero(matmul(maps.delta[q - 1], vec))
            assert all(f.weights(alg.weights) == [w] for f in forms)
            assert rank(np.hstack(vectors)) == len(forms)


def test_agrees_with_naive_ranks(builtins):
    for alg in builtins:
        maps = ce_differential(alg)
        table = compute_cohomology(alg, maps)
        for (q, w), d in table.dims.items():
            size = len(maps.space.weight_blocks(q)[w])
            assert d == size - naive_rank(maps.block(q, w)) - naive_rank(maps.block(q - 1, w))


def test_closed_one_forms():
    assert closed_one_forms(builtin("heisenberg", 1)) == [Form.monomial([0]), Form.monomial([1])]
    assert len(closed_one_forms(builtin("abelian", 4))) == 4

    engel = builtin("engel")
    closed = closed_one_forms(engel)
    assert closed == [Form.monomial([0]), Form.monomial([1])]
    for alg in [builtin("quaternionic_heisenberg"), builtin("free_rank2_step3")]:
        forms = closed_one_forms(alg)
        assert len(forms) == alg.strata_dims[0]
        assert all(f.weights(alg.weights) == [1] for f in forms)


def test_table_frame(heis_table):
    df = table_frame(heis_table)
    assert list(df.index) == [0, 1, 2, 3]
    assert list(df.columns) == [0, 1, 2, 3, 4]
    assert df.loc[2, 3] == 2
    assert df.loc[0, 3] is pd.NA


@pytest.mark.slow
def test_quaternionic_rank_two_degree_two():
    alg = builtin("quaternionic_heisenberg", 2)
    assert (alg.n, alg.Q) == (11, 14)
    table = compute_cohomology(alg)
    assert table.dim(2, 3) == 0
    assert table.dim(2, 4) == 0
    # Lambda^{2,2} = Lambda^2 of the 8 horizontal covectors, minus d0 of the 3 vertical ones
    assert table.dim(2, 2) == 25
    assert table.weights(2) == [2]
    assert table.min_weight(9) == 12
    assert verify_duality(table, alg).passed

    report = holder_report(alg, table)
    assert report.W_alg[9] >= 12
    assert report.W_alg[10] == 13
