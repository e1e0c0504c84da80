"""Tests for pattern constructions, verification and relation heatmaps."""

import numpy as np
import pytest

from neste.errors import ContractError, InfeasiblePatternError
from neste.hypercomplex import Algebra, Hyper4Vector, conjugate, hamilton
from neste.patterns import (
    TOLERANCE,
    PatternKind,
    PatternSpec,
    all_pattern_specs,
    construct_matrix,
    export_relation_heatmaps,
    first_order_witnesses,
    heatmap_matches,
    random_unit,
    read_heatmaps,
    relation_heatmaps,
    run_pattern_suite,
    sample_constraints,
    verify_dual_e_implication,
    verify_pattern,
)
from neste.scoring import NestedRelationEmbedding, init_store

SYMMETRY = PatternSpec(PatternKind.R_SYMMETRY)
IMPLICATION = PatternSpec(PatternKind.R_IMPLICATION)


def test_spec_slots():
    spec = PatternSpec(PatternKind.E_R_IMPLICATION, "head")
    assert spec.body == ("x1", "r1", "y")
    assert spec.head == ("x2", "r2", "y")
    assert spec.free_slots == frozenset({"y"})
    assert spec.bound_slots == frozenset({"x1", "x2", "r1", "r2"})
    assert spec.name == "e_r_implication[head]"
    assert SYMMETRY.bidirectional and not IMPLICATION.bidirectional


def test_spec_side_validation():
    with pytest.raises(ContractError):
        PatternSpec(PatternKind.E_IMPLICATION)
    with pytest.raises(ContractError):
        PatternSpec(PatternKind.R_SYMMETRY, "head")


def test_all_specs_cover_every_kind():
    kinds = {spec.kind for spec in all_pattern_specs()}
    assert kinds == set(PatternKind)
    assert len(all_pattern_specs()) == 11


@pytest.mark.parametrize("alg", list(Algebra))
def test_symmetry_construction_is_anti_diagonal(alg, rng):
    r = Hyper4Vector(rng.normal(size=(4, 3)))
    matrix = construct_matrix(SYMMETRY, {"r": r}, alg)
    one = Hyper4Vector.identity(3).data
    for i in range(3):
        for j in range(3):
            expected = one if i + j == 2 else np.zeros((4, 3))
            np.testing.assert_allclose(matrix.rotation[i, j], expected, atol=1e-12)
    verdict = verify_pattern(SYMMETRY, matrix, 50, rng, alg, {"r": r})
    assert verdict.passed


def test_implication_with_equal_relations_is_identity(rng):
    r = Hyper4Vector(rng.normal(size=(4, 2)))
    matrix = construct_matrix(IMPLICATION, {"r1": r, "r2": r}, "Q")
    np.testing.assert_allclose(
        matrix.rotation, NestedRelationEmbedding.identity(2).rotation, atol=1e-12
    )


def test_implication_cell_is_conjugate_product(rng):
    r1, r2 = random_unit(rng, 1), random_unit(rng, 1)
    matrix = construct_matrix(IMPLICATION, {"r1": r1, "r2": r2}, "Q")
    expected = hamilton(conjugate(r1.data), r2.data, Algebra.Q)
    np.testing.assert_allclose(matrix.rotation[1, 1], expected, atol=1e-12)


def test_identity_matrix_verifies_with_zero_deviation(rng):
    r = Hyper4Vector(rng.normal(size=(4, 4)))
    verdict = verify_pattern(
        IMPLICATION, NestedRelationEmbedding.identity(4), 20, rng, "H", {"r1": r, "r2": r}
    )
    assert verdict.passed
    assert verdict.deviation == 0.0


def test_anti_diagonal_swaps_head_and_tail(rng):
    r = Hyper4Vector(rng.normal(size=(4, 4)))
    verdict = verify_pattern(SYMMETRY, NestedRelationEmbedding.anti_diagonal(4), 20, rng, "S", {"r": r})
    assert verdict.deviation == 0.0


def test_corrupted_cell_fails(rng):
    constraints = sample_constraints(IMPLICATION, "Q", rng)
    matrix = construct_matrix(IMPLICATION, constraints, "Q")
    rotation = matrix.rotation.copy()
    rotation[1, 1] = random_unit(rng, 4).data
    verdict = verify_pattern(
        IMPLICATION, NestedRelationEmbedding(rotation, matrix.translation), 20, rng, "Q", constraints
    )
    assert not verdict.passed
    assert verdict.deviation > TOLERANCE


@pytest.mark.parametrize("alg", list(Algebra))
@pytest.mark.parametrize("spec", all_pattern_specs(), ids=lambda s: s.name)
def test_sampled_constructions_verify(spec, alg, rng):
    constraints = sample_constraints(spec, alg, rng)
    matrix = construct_matrix(spec, constraints, alg)
    if spec.kind is PatternKind.DUAL_E_IMPLICATION:
        verdict = verify_dual_e_implication(matrix, constraints, 30, rng, alg)
    else:
        verdict = verify_pattern(spec, matrix, 30, rng, alg, constraints)
    assert verdict.passed, verdict.deviation


def test_inverse_of_unrelated_relations_is_infeasible(rng):
    spec = PatternSpec(PatternKind.R_INVERSE)
    r1 = random_unit(rng, 2)
    r2 = Hyper4Vector(0.5 * random_unit(rng, 2).data)
    with pytest.raises(InfeasiblePatternError):
        construct_matrix(spec, {"r1": r1, "r2": r2}, "Q")


def test_null_element_is_infeasible_in_split_algebra():
    null = Hyper4Vector.of(1, 0, 1, 0)
    with pytest.raises(InfeasiblePatternError):
        construct_matrix(IMPLICATION, {"r1": null, "r2": Hyper4Vector.of(1, 0, 0, 0)}, "S")


def test_unit_cell_norm_rejects_scaling_cell(rng):
    r1 = random_unit(rng, 2)
    r2 = Hyper4Vector(0.5 * r1.data)
    construct_matrix(IMPLICATION, {"r1": r1, "r2": r2}, "Q", cell_norm="ball")
    with pytest.raises(InfeasiblePatternError):
        construct_matrix(IMPLICATION, {"r1": r1, "r2": r2}, "Q", cell_norm="unit")


def test_missing_constraints(rng):
    with pytest.raises(ContractError):
        construct_matrix(IMPLICATION, {"r1": random_unit(rng, 2)}, "Q")
    with pytest.raises(ContractError):
        verify_pattern(IMPLICATION, NestedRelationEmbedding.identity(2), 0, rng, "Q")


def test_witnesses_hold_for_quaternions(rng):
    deviations = first_order_witnesses("Q", rng, trials=20)
    assert set(deviations) == {"symmetry", "anti_symmetry", "inversion", "composition"}
    assert all(value <= TOLERANCE for value in deviations.values())


def test_pattern_suite_has_no_unexpected_results():
    checks = run_pattern_suite(trials=20, seed=4)
    assert all(check.ok for check in checks), [c.to_dict() for c in checks if not c.ok]
    names = {check.name for check in checks}
    assert {"corrupted_cell", "infeasible_inverse", "dual_e_implication"} <= names
    corrupted = [c for c in checks if c.name == "corrupted_cell"]
    assert all(not c.passed for c in corrupted)


# -------- heatmaps --------


def test_heatmaps_of_planted_shapes(toy_graph, tmp_path):
    store = init_store(toy_graph, dim=4, algebra="Q", seed=0)
    store.set_nested_relation(0, NestedRelationEmbedding.identity(4))
    store.set_nested_relation(1, NestedRelationEmbedding.anti_diagonal(4))
    heatmaps = relation_heatmaps(store)
    assert heatmap_matches(heatmaps["implies"], "diagonal")
    assert heatmap_matches(heatmaps["before"], "anti_diagonal")
    assert not heatmap_matches(heatmaps["implies"], "anti_diagonal")

    path = tmp_path / "heatmaps.csv"
    export_relation_heatmaps(store, path)
    assert path.read_text(encoding="utf-8").splitlines()[0].startswith("relation,c11,c12")
    loaded = read_heatmaps(path)
    for name, matrix in heatmaps.items():
        np.testing.assert_array_equal(loaded[name], matrix)
        assert np.all(np.abs(matrix) <= 1.0)
