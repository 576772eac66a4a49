import sys
import logging
from fractions import Fraction
from itertools import combinations
from math import comb
from pathlib import Path

import numpy as np
import pytest

# Add the parent directory to the Python path to make the package importable
sys.path.insert(0, str(Path(__file__).parent.parent))

from carnot_bounds import builtin, load_spec, CarnotAlgebra
from carnot_bounds.exterior import *
from carnot_bounds.utils import matmul, matrices_equal, identity, as_fraction_matrix, product_is_zero, zeros

logging.getLogger("CARNOT").setLevel(logging.DEBUG)
DATA_DIR = f"{Path(__file__).parent}/test_data"


@pytest.fixture()
def algebras():
    return [builtin("abelian", 3), builtin("heisenberg", 1), builtin("heisenberg", 2),
            builtin("quaternionic_heisenberg"), builtin("engel"), builtin("free_rank2_step3")]


def test_form_arithmetic():
    t1, t2, t3 = (Form.monomial([i]) for i in range(3))
    assert Form.monomial([1, 0]) == -Form.monomial([0, 1])
    assert Form.monomial([0, 0]).is_zero()

    # Graded anticommutativity and associativity
    assert wedge(t1, t2) == -wedge(t2, t1)
    assert wedge(t1, t1).is_zero()
    a = t1 + 2 * t2
    b = wedge(t2, t3) * Fraction(1, 2)
    assert wedge(wedge(a, t3), t1) == wedge(a, wedge(t3, t1))
    assert wedge(a, b) == wedge(b, a)  # 1-form and 2-form commute

    assert (t1 - t1).is_zero()
    assert str(t1 + t2) == "t1 + t2"
    assert (3 * wedge(t1, t3)).render(["X", "Y", "Z"]) == "3*t[X]^t[Z]"
    assert Form.one().degree == 0
    with pytest.raises(ValueError):
        t1 + wedge(t1, t2)


def test_d0_heisenberg():
    alg = load_spec(f"{DATA_DIR}/heis3.json")
    theta3 = Form.monomial([2])
    # d theta(X, Y) = -theta([X, Y])
    assert d0(alg, theta3) == -Form.monomial([0, 1])
    assert d0(alg, Form.monomial([0])).is_zero()
    assert d0(alg, d0(alg, theta3)).is_zero()
    # Leibniz rule
    t1 = Form.monomial([0])
    assert d0(alg, wedge(t1, theta3)) == -wedge(t1, d0(alg, theta3))


def test_differential_is_a_weighted_complex(algebras, caplog):
    for alg in algebras:
        maps = ce_differential(alg)
        assert maps.squares_to_zero()
        assert maps.is_weight_homogeneous()
        for q in range(alg.n + 1):
            assert maps.d[q].shape == (comb(alg.n, q + 1), comb(alg.n, q))
            assert matrices_equal(maps.delta[q], maps.d[q].T)
    assert "resident memory" in caplog.text


def test_broken_jacobi_is_not_a_complex():
    # Same constants as tests/test_data/broken_jacobi.json, bypassing validation
    one = Fraction(1)
    alg = CarnotAlgebra(name="broken", strata_dims=(4, 1), labels=("X1", "X2", "Y1", "Y2", "Z"),
                        brackets=((0, 2, ((4, one),)), (0, 4, ((1, one),)), (1, 3, ((4, one),))))
    with pytest.raises(NotAComplexError):
        ce_differential(alg)
    assert not ce_differential(alg, check=False).squares_to_zero()


def test_capacity():
    with pytest.raises(CapacityError):
        FormSpace(builtin("abelian", 13))
    assert FormSpace(builtin("abelian", 12)).dim(6) == comb(12, 6)


def test_blocks_and_vectors():
    alg = builtin("heisenberg", 1)
    maps = ce_differential(alg)
    space = maps.space
    assert space.weights(1) == [1, 2]
    assert space.weight_blocks(2) == {2: [0], 3: [1, 2]}
    assert maps.block(1, 2).shape == (1, 1)
    assert maps.block(-1, 0).shape == (1, 0)
    assert maps.block(alg.n, alg.Q).shape == (0, 1)

    form = Form.monomial([0, 2]) * 5
    assert space.from_vector(2, space.to_vector(form)) == form
    assert [b.weight for b in space.basis_indices(2)] == [2, 3, 3]


def test_hodge_star(algebras):
    for alg in algebras:
        space = FormSpace(alg)
        n = alg.n
        for q in range(n + 1):
            twice = matmul(star_matrix(space, n - q), star_matrix(space, q))
            assert matrices_equal(twice, identity(space.dim(q)) * (-1) ** (q * (n - q)))
        # * maps weight w to weight Q - w
        f = Form.monomial([0])
        assert hodge_star(alg, f).weights(alg.weights) == [alg.Q - 1]

    # delta0 is +-(* d0 *) in every degree
    for alg in algebras:
        signs = codifferential_signs(ce_differential(alg))
        assert all(s in (1, -1) for s in signs.values())


def test_weight_table():
    df = weight_table(builtin("heisenberg", 1))
    assert list(df.columns) == [0, 1, 2, 3, 4]
    assert df.loc[1].tolist() == [0, 2, 1, 0, 0]
    assert df.loc[2].tolist() == [0, 0, 1, 2, 0]
    assert df.loc[3, 4] == 1

    df = weight_table(builtin("abelian", 3))
    for q in range(4):
        assert df.loc[q, q] == comb(3, q)


def random_form(rng, n, q):
    keys = list(combinations(range(n), q))
    coeffs = rng.integers(-3, 4, size=len(keys))
    return Form(q, {key: Fraction(int(c)) for key, c in zip(keys, coeffs)})


def test_leibniz_rule_on_random_forms():
    rng = np.random.default_rng(11)
    for alg in [builtin("heisenberg", 2), builtin("engel"), builtin("free_rank2_step3"),
                builtin("quaternionic_heisenberg")]:
        generators = d0_generators(alg)
        for p, q in [(1, 1), (1, 2), (2, 2), (2, 3)]:
            for _ in range(3):
                a, b = random_form(rng, alg.n, p), random_form(rng, alg.n, q)
                left = d0(alg, wedge(a, b), generators)
                right = wedge(d0(alg, a, generators), b) + wedge(a, d0(alg, b, generators)) * (-1) ** p
                assert left == right


def test_hodge_star_exchanges_weight_blocks(algebras):
    for alg in algebras:
        space = FormSpace(alg)
        n, Q = alg.n, alg.Q
        for q in range(n + 1):
            star = star_matrix(space, q)
            for w, positions in space.weight_blocks(q).items():
                targets = space.weight_blocks(n - q).get(Q - w, [])
                assert len(targets) == len(positions)
                for j in positions:
                    rows = [i for i in range(star.shape[0]) if star[i, j] != 0]
                    assert len(rows) == 1 and rows[0] in targets


def test_blockwise_square_matches_full_product(algebras):
    for alg in algebras:
        maps = ce_differential(alg)
        assert maps.squares_to_zero(blockwise=True)
        assert maps.squares_to_zero(blockwise=False)


def test_product_is_zero_ignores_denominators():
    a = as_fraction_matrix([[Fraction(1, 2), Fraction(1, 3)]])
    b = as_fraction_matrix([[Fraction(2, 5)], [Fraction(-3, 5)]])
    assert product_is_zero(a, b)
    assert not product_is_zero(a, as_fraction_matrix([[1], [1]]))
    assert product_is_zero(zeros(2, 0), zeros(0, 3))


@pytest.mark.slow
def test_square_check_in_capacity():
    # n = 11: the d0 o d0 check runs on weight blocks
    alg = builtin("quaternionic_heisenberg", 2)
    maps = ce_differential(alg)
    assert maps.is_weight_homogeneous()
    assert maps.squares_to_zero()
