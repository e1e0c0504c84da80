"""Planted-pattern synthetic benchmark.

The generated graph carries one nested relation planted as a pure
R-implication (every ``x r0 y`` implies ``x r1 y``) and one planted as a
pure R-symmetry over ``r2`` (``x r2 y`` is equivalent to ``y r2 x``).
Remaining atomic triples are uniform noise over the other relations.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import ContractError
from .graph_data import AtomicTriple, NestedGraph, NestedTriple, SymbolTable, split_triples

logger = logging.getLogger(__name__)

IMPLICATION_RELATION = "implies"
SYMMETRY_RELATION = "equivalent_to"


def _distinct_pairs(rng: np.random.Generator, n_entities: int, count: int) -> list[tuple[int, int]]:
    pairs: dict[tuple[int, int], None] = {}
    while len(pairs) < count:
        x, y = (int(v) for v in rng.integers(n_entities, size=2))
        if x != y:
            pairs.setdefault((x, y))
    return list(pairs)


def generate_synthetic_graph(
    seed: int,
    num_entities: int = 200,
    num_relations: int = 6,
    implication_pairs: int = 200,
    symmetric_pairs: int = 100,
    atomic_triples: int = 2000,
) -> NestedGraph:
    """Generate the planted-pattern graph, split 8:1:1 with ``seed``.

    With the defaults this yields 2,000 atomic and 400 nested triples over
    200 entities, 6 atomic and 2 nested relations.
    """
    if num_relations < 4:
        raise ContractError("the planted patterns need at least 4 relations")
    if num_entities < 2:
        raise ContractError("need at least 2 entities")
    planted = 2 * implication_pairs + 2 * symmetric_pairs
    if atomic_triples < planted:
        raise ContractError(
            f"atomic_triples={atomic_triples} is below the {planted} planted triples"
        )
    max_noise = num_entities * (num_entities - 1) * (num_relations - 3)
    if atomic_triples - planted > max_noise:
        raise ContractError("not enough distinct triples for the requested noise")

    rng = np.random.default_rng(seed)
    entities = SymbolTable(f"e{i:04d}" for i in range(num_entities))
    relations = SymbolTable(f"r{i}" for i in range(num_relations))
    nested_relations = SymbolTable([IMPLICATION_RELATION, SYMMETRY_RELATION])
    implies = nested_relations.id_of(IMPLICATION_RELATION)
    equivalent = nested_relations.id_of(SYMMETRY_RELATION)

    atomic: dict[AtomicTriple, None] = {}
    nested: list[NestedTriple] = []

    for x, y in _distinct_pairs(rng, num_entities, implication_pairs):
        body = AtomicTriple(x, 0, y)
        head = AtomicTriple(x, 1, y)
        atomic.setdefault(body)
        atomic.setdefault(head)
        nested.append(NestedTriple(body, implies, head))

    unordered: dict[tuple[int, int], None] = {}
    while len(unordered) < symmetric_pairs:
        x, y = _distinct_pairs(rng, num_entities, 1)[0]
        unordered.setdefault((min(x, y), max(x, y)))
    for x, y in unordered:
        forward = AtomicTriple(x, 2, y)
        backward = AtomicTriple(y, 2, x)
        atomic.setdefault(forward)
        atomic.setdefault(backward)
        nested.append(NestedTriple(forward, equivalent, backward))
        nested.append(NestedTriple(backward, equivalent, forward))

    while len(atomic) < atomic_triples:
        h, t = (int(v) for v in rng.integers(num_entities, size=2))
        if h == t:
            continue
        r = int(rng.integers(3, num_relations))
        atomic.setdefault(AtomicTriple(h, r, t))

    a_train, a_valid, a_test = split_triples(list(atomic), seed=seed)
    n_train, n_valid, n_test = split_triples(nested, seed=seed + 1)
    graph = NestedGraph(
        entities=entities,
        atomic_relations=relations,
        nested_relations=nested_relations,
        atomic_train=a_train,
        atomic_valid=a_valid,
        atomic_test=a_test,
        nested_train=n_train,
        nested_valid=n_valid,
        nested_test=n_test,
        num_base_relations=num_relations,
    )
    logger.info("generated synthetic graph %r", graph)
    return graph
