import sys
import json
import logging
from fractions import Fraction
from pathlib import Path

import pytest

# Add the parent directory to the Python path to make the package importable
sys.path.insert(0, str(Path(__file__).parent.parent))

from carnot_bounds import builtin, load_spec, parse_spec, validate
from carnot_bounds import ALL_BUILTINS, HEISENBERG, ENGEL
from carnot_bounds.algebra_spec import (
    SpecError, JacobiViolation, GradingViolation, NotGenerated, serialize, random_step2, jacobiator,
    hausdorff_dimension,
)

logging.getLogger("CARNOT").setLevel(logging.DEBUG)
DATA_DIR = f"{Path(__file__).parent}/test_data"


def test_load_heis3(caplog):
    alg = load_spec(f"{DATA_DIR}/heis3.json")
    assert alg.name == "heis3"
    assert alg.n == 3 and alg.r == 2 and alg.Q == 4
    assert alg.weights == (1, 1, 2)
    assert alg.labels == ("X", "Y", "Z")
    assert alg.bracket(0, 1) == {2: Fraction(1)}
    assert alg.bracket(1, 0) == {2: Fraction(-1)}
    assert alg.stratum(2) == [2]
    assert "Validated algebra 'heis3'" in caplog.text

    abelian = load_spec(f"{DATA_DIR}/abelian3.json")
    assert abelian.Q == 3 and abelian.r == 1
    assert abelian.labels == ("e1", "e2", "e3")


def test_builtins():
    expected_q = {
        ("heisenberg", 1): 4, ("heisenberg", 2): 6, ("quaternionic_heisenberg", 1): 10,
        ("engel", None): 7, ("free_rank2_step3", None): 10, ("abelian", 4): 4,
    }
    for (name, m), q in expected_q.items():
        alg = builtin(name, m)
        assert alg.Q == q
        assert hausdorff_dimension(alg) == q

    quat = builtin("quaternionic_heisenberg")
    assert quat.strata_dims == (4, 3)
    # Every pair of quaternion units brackets into V^2 or to zero, never outside
    for i in range(4):
        for j in range(4):
            assert all(k >= 4 for k in quat.bracket(i, j))

    assert builtin(HEISENBERG).name == "heisenberg1"
    assert set(ALL_BUILTINS) >= {HEISENBERG, ENGEL}
    with pytest.raises(ValueError):
        builtin("octonionic")
    with pytest.raises(ValueError):
        builtin(HEISENBERG, 0)

    assert load_spec("builtin:heisenberg:2").n == 5
    assert load_spec("builtin:engel").n == 4


def test_jacobi_violation_witness():
    with pytest.raises(JacobiViolation) as info:
        load_spec(f"{DATA_DIR}/broken_jacobi.json")
    err = info.value
    assert err.triple == (1, 2, 4)
    assert [str(v) for v in err.jacobiator] == ["0", "-1", "0", "0", "0"]
    doc = err.to_dict()
    assert doc["error"] == "JacobiViolation"
    assert doc["triple"] == [1, 2, 4]

    alg = builtin(HEISENBERG, 2)
    assert all(v == 0 for v in jacobiator(alg.structure, 0, 1, 2))


def test_grading_and_generation():
    with pytest.raises(GradingViolation) as info:
        load_spec(f"{DATA_DIR}/bad_grading.json")
    assert (info.value.i, info.value.j, info.value.k) == (1, 3, 2)
    assert info.value.to_dict()["coefficient"] == "1"

    with pytest.raises(NotGenerated) as info:
        load_spec(f"{DATA_DIR}/not_generated.json")
    assert info.value.stratum == 2
    assert info.value.spanned == 0 and info.value.expected == 1

    # V^2 is generated but nothing brackets into V^3
    with pytest.raises(NotGenerated) as info:
        load_spec(f"{DATA_DIR}/not_generated_step3.json")
    assert info.value.stratum == 3
    assert info.value.spanned == 0 and info.value.expected == 1
    assert info.value.to_dict()["stratum"] == 3


def test_parse_errors():
    with pytest.raises(SpecError, match="i must be < j"):
        load_spec(f"{DATA_DIR}/bad_order.json")

    good = {"name": "x", "strata": [2, 1], "brackets": [{"i": 1, "j": 2, "coeffs": {"3": "1"}}]}
    bad_docs = [
        "{not json",
        json.dumps({**good, "extra": 1}),
        json.dumps({"name": "x", "strata": [2, 1]}),
        json.dumps({**good, "strata": [2, 0]}),
        json.dumps({**good, "brackets": [{"i": 1, "j": 4, "coeffs": {"3": "1"}}]}),
        json.dumps({**good, "brackets": [{"i": 1, "j": 2, "coeffs": {"3": "1/0"}}]}),
        json.dumps({**good, "brackets": [{"i": 1, "j": 2, "coeffs": {"3": 0.5}}]}),
        json.dumps({**good, "brackets": good["brackets"] * 2}),
        json.dumps({**good, "labels": ["a", "a", "b"]}),
    ]
    for text in bad_docs:
        with pytest.raises(SpecError):
            parse_spec(text)

    with pytest.raises(FileNotFoundError):
        load_spec(f"{DATA_DIR}/missing.json")


def test_serialize_round_trip():
    for alg in [builtin("quaternionic_heisenberg"), builtin(ENGEL), load_spec(f"{DATA_DIR}/heis3.json")]:
        again = validate(parse_spec(serialize(alg)))
        assert again == alg

    spec = parse_spec(json.dumps({"name": "half", "strata": [2, 1],
                                  "brackets": [{"i": 1, "j": 2, "coeffs": {"3": "1/2"}}]}))
    alg = validate(spec)
    assert '"1/2"' in serialize(alg)


def test_random_step2():
    a = random_step2(4, 2, seed=11)
    b = random_step2(4, 2, seed=11)
    assert a == b
    assert a.strata_dims == (4, 2)
    assert a.r == 2
    with pytest.raises(ValueError):
        random_step2(2, 2)
