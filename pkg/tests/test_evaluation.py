"""Tests for filtered ranking evaluation."""

import dataclasses
import json

import numpy as np
import pytest

from neste.errors import ContractError, EvaluationError
from neste.evaluation import (
    eval_base_link_prediction,
    eval_conditional_link_prediction,
    eval_triple_prediction,
    format_json,
    format_table,
    rank_of_truth,
    report_rows,
    summarize,
)
from neste.graph_data import AtomicTriple, NestedGraph, NestedTriple, SymbolTable
from neste.scoring import PARAMETER_BLOCKS, init_store, score_atomic, score_nested


def _naive_rank(scores: list[float], truth: int, exclude: set[int]) -> int:
    return 1 + sum(
        1 for c, s in enumerate(scores) if c != truth and c not in exclude and s >= scores[truth]
    )


def naive_triple_ranks(store, g, split, filtered=True) -> list[int]:
    involved = list(g.involved_triples)
    known = set(g.all_nested)
    ranks = []
    for nt in g.nested_split(split):
        head_scores = [score_nested(store, NestedTriple(c, nt.rel, nt.tail)) for c in involved]
        head_excl = {
            i for i, c in enumerate(involved) if filtered and NestedTriple(c, nt.rel, nt.tail) in known
        }
        tail_scores = [score_nested(store, NestedTriple(nt.head, nt.rel, c)) for c in involved]
        tail_excl = {
            i for i, c in enumerate(involved) if filtered and NestedTriple(nt.head, nt.rel, c) in known
        }
        ranks.append(_naive_rank(head_scores, involved.index(nt.head), head_excl))
        ranks.append(_naive_rank(tail_scores, involved.index(nt.tail), tail_excl))
    return ranks


def _replace(nt: NestedTriple, slot: int, e: int) -> NestedTriple:
    row = list(nt.as_row())
    row[slot] = e
    return NestedTriple(AtomicTriple(*row[0:3]), row[3], AtomicTriple(*row[4:7]))


def naive_conditional_ranks(store, g, split, filtered=True) -> list[int]:
    known = set(g.all_nested)
    ranks = []
    for nt in g.nested_split(split):
        for slot in (0, 2, 4, 6):
            candidates = [_replace(nt, slot, e) for e in range(len(g.entities))]
            scores = [score_nested(store, c) for c in candidates]
            excl = {e for e, c in enumerate(candidates) if filtered and c in known}
            ranks.append(_naive_rank(scores, nt.as_row()[slot], excl))
    return ranks


def naive_base_ranks(store, g, split, filtered=True) -> list[int]:
    known = set(g.all_atomic)
    ranks = []
    for h, r, t in g.atomic_split(split):
        for side in ("head", "tail"):
            if side == "head":
                candidates = [AtomicTriple(e, r, t) for e in range(len(g.entities))]
                truth = h
            else:
                candidates = [AtomicTriple(h, r, e) for e in range(len(g.entities))]
                truth = t
            scores = [score_atomic(store, c) for c in candidates]
            excl = {e for e, c in enumerate(candidates) if filtered and c in known}
            ranks.append(_naive_rank(scores, truth, excl))
    return ranks


@pytest.fixture(params=["Q", "H", "S"])
def scored(request, toy_graph):
    store = init_store(toy_graph, dim=3, algebra=request.param, seed=3)
    rng = np.random.default_rng(8)
    store.nested_rotation[:] = rng.normal(scale=0.6, size=store.nested_rotation.shape)
    return store, toy_graph


# -------- metrics --------


def test_summarize_examples():
    metrics = summarize([1, 2, 4])
    assert metrics.mr == pytest.approx(7 / 3)
    assert metrics.mrr == pytest.approx(0.5833333333)
    assert metrics.hits_at[10] == 1.0
    assert metrics.hits_at[1] == pytest.approx(1 / 3)

    metrics = summarize([2, 10])
    assert metrics.mr == 6.0
    assert metrics.mrr == pytest.approx(0.3)
    assert metrics.hits_at == {1: 0.0, 3: 0.5, 10: 1.0}


def test_summarize_rejects_empty():
    with pytest.raises(EvaluationError):
        summarize([])


def test_rank_of_truth_is_pessimistic():
    assert rank_of_truth([0.5, 0.5, 0.1], truth=0) == 2
    assert rank_of_truth([0.5, 0.5, 0.1], truth=0, exclude=[1]) == 1
    assert rank_of_truth([np.inf, 3.0, 2.0], truth=0) == 1


def test_rank_invariant_under_increasing_map(rng):
    scores = rng.normal(size=50)
    for truth in range(0, 50, 7):
        assert rank_of_truth(np.exp(scores), truth) == rank_of_truth(scores, truth)
        assert rank_of_truth(3 * scores + 1, truth) == rank_of_truth(scores, truth)


def test_filtering_never_increases_rank(rng):
    scores = rng.normal(size=30)
    base = rank_of_truth(scores, 4)
    excluded: list[int] = []
    for extra in (0, 9, 17, 4, 22):
        excluded.append(extra)
        rank = rank_of_truth(scores, 4, excluded)
        assert rank <= base
        base = rank


# -------- evaluators against brute force --------


def test_triple_prediction_matches_brute_force(scored):
    store, g = scored
    report = eval_triple_prediction(store, g, "test")
    assert report.ranks.tolist() == naive_triple_ranks(store, g, "test")
    unfiltered = eval_triple_prediction(store, g, "train", filtered=False)
    assert unfiltered.ranks.tolist() == naive_triple_ranks(store, g, "train", filtered=False)


def test_conditional_prediction_matches_brute_force(scored):
    store, g = scored
    report = eval_conditional_link_prediction(store, g, "test")
    assert report.ranks.tolist() == naive_conditional_ranks(store, g, "test")
    assert report.query_count == 4 * len(g.nested_test)
    train = eval_conditional_link_prediction(store, g, "train")
    assert train.ranks.tolist() == naive_conditional_ranks(store, g, "train")


def test_base_prediction_matches_brute_force(scored):
    store, g = scored
    for split in ("train", "test"):
        report = eval_base_link_prediction(store, g, split)
        assert report.ranks.tolist() == naive_base_ranks(store, g, split)


def _random_graph(rng) -> NestedGraph:
    """At most 10 entities, every split non-empty."""
    n_entities = int(rng.integers(3, 11))
    n_relations = int(rng.integers(1, 4))
    n_nested = int(rng.integers(1, 3))
    pool = [
        AtomicTriple(h, r, t)
        for h in range(n_entities)
        for r in range(n_relations)
        for t in range(n_entities)
        if h != t
    ]
    order = rng.permutation(len(pool))[: int(rng.integers(6, 16))]
    atomic = [pool[i] for i in order]
    nested: dict[NestedTriple, None] = {}
    while len(nested) < 6:
        head, tail = rng.integers(len(atomic), size=2)
        nested.setdefault(NestedTriple(atomic[head], int(rng.integers(n_nested)), atomic[tail]))
    nested_list = list(nested)
    return NestedGraph(
        entities=SymbolTable(f"e{i}" for i in range(n_entities)),
        atomic_relations=SymbolTable(f"r{i}" for i in range(n_relations)),
        nested_relations=SymbolTable(f"n{i}" for i in range(n_nested)),
        atomic_train=tuple(atomic[:-4]),
        atomic_valid=tuple(atomic[-4:-2]),
        atomic_test=tuple(atomic[-2:]),
        nested_train=tuple(nested_list[:3]),
        nested_valid=tuple(nested_list[3:4]),
        nested_test=tuple(nested_list[4:]),
        num_base_relations=n_relations,
    )


@pytest.mark.parametrize("seed", range(20))
def test_evaluators_match_brute_force_on_random_graphs(seed):
    rng = np.random.default_rng(seed)
    g = _random_graph(rng)
    algebra = ("Q", "H", "S")[seed % 3]
    cell_norm = ("unit", "ball")[seed % 2]
    store = init_store(g, dim=int(rng.integers(1, 4)), algebra=algebra, seed=seed, cell_norm=cell_norm)
    for name in PARAMETER_BLOCKS:
        block = store.block(name)
        block[:] = rng.normal(scale=0.7, size=block.shape)

    for split in ("train", "test"):
        assert eval_triple_prediction(store, g, split).ranks.tolist() == naive_triple_ranks(
            store, g, split
        )
        assert eval_conditional_link_prediction(store, g, split).ranks.tolist() == (
            naive_conditional_ranks(store, g, split)
        )
        assert eval_base_link_prediction(store, g, split).ranks.tolist() == naive_base_ranks(
            store, g, split
        )


def test_unfiltered_ranks_never_better(scored):
    store, g = scored
    filtered = eval_base_link_prediction(store, g, "train")
    unfiltered = eval_base_link_prediction(store, g, "train", filtered=False)
    assert np.all(unfiltered.ranks >= filtered.ranks)


def test_threads_give_same_report(scored):
    store, g = scored
    single = eval_conditional_link_prediction(store, g, "train")
    threaded = eval_conditional_link_prediction(store, g, "train", threads=3)
    np.testing.assert_array_equal(single.ranks, threaded.ranks)


def test_per_relation_weights_sum_to_overall(scored):
    store, g = scored
    report = eval_conditional_link_prediction(store, g, "train")
    total = sum(m.query_count for m in report.per_relation.values())
    weighted = sum(m.mrr * m.query_count for m in report.per_relation.values()) / total
    assert total == report.query_count
    assert weighted == pytest.approx(report.mrr)


def test_augmented_triples_never_filter(toy_graph):
    store = init_store(toy_graph, dim=2, algebra="Q", seed=1)
    test = toy_graph.atomic_test[0]
    fake = [AtomicTriple(e, test.r, test.t) for e in range(len(toy_graph.entities)) if e != test.h]
    augmented = toy_graph.with_augmented(fake)
    plain = eval_base_link_prediction(store, toy_graph, "test", filtered=True)
    with_aug = eval_base_link_prediction(store, augmented, "test", filtered=True)
    np.testing.assert_array_equal(plain.ranks, with_aug.ranks)


def test_single_candidate_gives_perfect_metrics():
    entities = SymbolTable(["a", "b"])
    relations = SymbolTable(["r"])
    nested = SymbolTable(["same"])
    fact = AtomicTriple(0, 0, 1)
    g = NestedGraph(
        entities=entities,
        atomic_relations=relations,
        nested_relations=nested,
        atomic_train=(fact,),
        nested_test=(NestedTriple(fact, 0, fact),),
        num_base_relations=1,
    )
    store = init_store(g, dim=2, algebra="Q", seed=0)
    report = eval_triple_prediction(store, g, "test")
    assert (report.mr, report.mrr, report.hits_at[10]) == (1.0, 1.0, 1.0)


def test_empty_split_is_an_error(toy_store, toy_graph):
    empty = dataclasses.replace(toy_graph, nested_test=(), atomic_valid=())
    with pytest.raises(EvaluationError):
        eval_triple_prediction(toy_store, empty, "test")
    with pytest.raises(EvaluationError):
        eval_base_link_prediction(toy_store, empty, "valid")


def test_unknown_split_rejected(toy_store, toy_graph):
    with pytest.raises(ContractError):
        eval_triple_prediction(toy_store, toy_graph, "dev")


# -------- output --------


def test_report_rows_and_formats(scored):
    store, g = scored
    report = eval_triple_prediction(store, g, "test")
    rows = report_rows(report)
    assert list(rows[0]) == ["task", "split", "relation", "queries", "MR", "MRR", "Hit@1", "Hit@3", "Hit@10"]
    assert rows[0]["relation"] == "(all)"
    assert rows[1]["relation"] == "before"
    table = format_table([report])
    assert "MRR" in table and "Hit@10" in table
    data = json.loads(format_json([report]))
    assert data[0]["task"] == "triple"
    assert data[0]["query_count"] == 2
    assert "before" in data[0]["per_relation"]
