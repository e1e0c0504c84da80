"""Tests for the planted-pattern synthetic benchmark."""

import pytest

from neste.errors import ContractError
from neste.graph_data import AtomicTriple
from neste.synthetic import IMPLICATION_RELATION, SYMMETRY_RELATION, generate_synthetic_graph


@pytest.fixture(scope="module")
def synthetic():
    return generate_synthetic_graph(seed=5)


def test_default_sizes(synthetic):
    stats = synthetic.stats()
    assert stats.entities == 200
    assert stats.relations == 6
    assert stats.atomic_triples == 2000
    assert stats.nested_relations == 2
    assert stats.nested_triples == 400
    assert stats.involved_triples == 600


def test_planted_implications(synthetic):
    implies = synthetic.nested_relations.id_of(IMPLICATION_RELATION)
    known = synthetic.known_atomic
    for nt in synthetic.all_nested:
        if nt.rel != implies:
            continue
        assert nt.head.r == 0 and nt.tail.r == 1
        assert (nt.head.h, nt.head.t) == (nt.tail.h, nt.tail.t)
        assert nt.head in known and nt.tail in known


def test_planted_symmetry_both_directions(synthetic):
    equivalent = synthetic.nested_relations.id_of(SYMMETRY_RELATION)
    facts = {nt for nt in synthetic.all_nested if nt.rel == equivalent}
    for nt in facts:
        assert nt.head == AtomicTriple(nt.tail.t, 2, nt.tail.h)
        assert type(nt)(nt.tail, nt.rel, nt.head) in facts


def test_same_seed_same_graph():
    first = generate_synthetic_graph(seed=9, num_entities=30, atomic_triples=700)
    second = generate_synthetic_graph(seed=9, num_entities=30, atomic_triples=700)
    assert first.atomic_train == second.atomic_train
    assert first.nested_test == second.nested_test


def test_rejects_too_few_triples():
    with pytest.raises(ContractError):
        generate_synthetic_graph(seed=0, atomic_triples=10)
