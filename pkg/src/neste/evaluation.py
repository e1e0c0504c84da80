"""Filtered ranking evaluation: triple, conditional link and base link prediction.

Ranks are pessimistic: the truth is placed after every candidate with an
equal score, so ``rank = 1 + #{other candidates with score >= truth}``.
Filtered ranking drops the other candidates that complete a known fact.
"""

from __future__ import annotations

import json
import logging
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from tqdm import tqdm

from .errors import EvaluationError
from .graph_data import NestedGraph, nested_index_array
from .hypercomplex import hamilton, hamilton_left_adjoint, unit_normalize
from .scoring import EmbeddingStore, normalize_cells, rotate_matrices, triple_matrices

logger = logging.getLogger(__name__)

DEFAULT_HITS: tuple[int, ...] = (1, 3, 10)
TASKS: tuple[str, ...] = ("triple", "conditional", "base")
CHUNK = 256

# Positions inside a nested 7-tuple (h1, r1, t1, rel, h2, r2, t2) that
# conditional link prediction corrupts.
CONDITIONAL_SLOTS: tuple[int, ...] = (0, 2, 4, 6)


@dataclass(frozen=True)
class RankingMetrics:
    mr: float
    mrr: float
    hits_at: dict[int, float]
    query_count: int

    def to_dict(self) -> dict:
        return {
            "mr": self.mr,
            "mrr": self.mrr,
            "hits_at": {str(k): v for k, v in self.hits_at.items()},
            "query_count": self.query_count,
        }


@dataclass(frozen=True)
class RankingReport:
    """Global metrics, a per-relation breakdown and the raw ranks of one task."""

    task: str
    split: str
    filtered: bool
    overall: RankingMetrics
    per_relation: dict[int, RankingMetrics] = field(default_factory=dict)
    relation_names: dict[int, str] = field(default_factory=dict)
    ranks: NDArray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def mr(self) -> float:
        return self.overall.mr

    @property
    def mrr(self) -> float:
        return self.overall.mrr

    @property
    def hits_at(self) -> dict[int, float]:
        return self.overall.hits_at

    @property
    def query_count(self) -> int:
        return self.overall.query_count

    def to_dict(self) -> dict:
        return {
            "task": self.task,
            "split": self.split,
            "filtered": self.filtered,
            **self.overall.to_dict(),
            "per_relation": {
                self.relation_names.get(rel, str(rel)): metrics.to_dict()
                for rel, metrics in self.per_relation.items()
            },
        }


# -------- ranking primitives --------


def rank_of_truth(
    scores: NDArray, truth: int, exclude: Optional[Iterable[int]] = None
) -> int:
    """Pessimistic 1-based rank of ``scores[truth]`` ignoring ``exclude``."""
    scores = np.asarray(scores)
    competing = scores >= scores[truth]
    competing[truth] = False
    if exclude is not None:
        idx = np.fromiter(exclude, dtype=np.intp)
        competing[idx[idx != truth]] = False
    return 1 + int(np.count_nonzero(competing))


def _batch_ranks(
    scores: NDArray, truths: NDArray, excludes: Sequence[Optional[NDArray]]
) -> NDArray:
    rows = np.arange(len(truths))
    competing = scores >= scores[rows, truths][:, None]
    competing[rows, truths] = False
    for i, excl in enumerate(excludes):
        if excl is not None and len(excl):
            competing[i, excl] = False
            competing[i, truths[i]] = False
    return 1 + np.count_nonzero(competing, axis=1)


def summarize(ranks: Sequence[int] | NDArray, hits: Sequence[int] = DEFAULT_HITS) -> RankingMetrics:
    """MR, MRR and Hits@k of a list of ranks."""
    ranks = np.asarray(ranks, dtype=np.float64)
    if len(ranks) == 0:
        raise EvaluationError("no queries to summarize")
    return RankingMetrics(
        mr=float(np.mean(ranks)),
        mrr=float(np.mean(1.0 / ranks)),
        hits_at={k: float(np.mean(ranks <= k)) for k in sorted(set(hits))},
        query_count=len(ranks),
    )


def _build_report(
    task: str,
    split: str,
    filtered: bool,
    ranks: NDArray,
    relations: NDArray,
    names: Callable[[int], str],
    hits: Sequence[int],
) -> RankingReport:
    per_relation = {
        int(rel): summarize(ranks[relations == rel], hits) for rel in np.unique(relations)
    }
    report = RankingReport(
        task=task,
        split=split,
        filtered=filtered,
        overall=summarize(ranks, hits),
        per_relation=per_relation,
        relation_names={rel: names(rel) for rel in per_relation},
        ranks=ranks,
    )
    logger.info(
        "%s prediction on %s: MR %.3f MRR %.4f over %d queries",
        task,
        split,
        report.mr,
        report.mrr,
        report.query_count,
    )
    return report


def _run_chunks(
    fn: Callable[[slice], NDArray], total: int, threads: int, progress: bool, desc: str
) -> NDArray:
    chunks = [slice(i, min(i + CHUNK, total)) for i in range(0, total, CHUNK)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(tqdm(executor.map(fn, chunks), total=len(chunks), desc=desc, disable=not progress))
    else:
        parts = [fn(c) for c in tqdm(chunks, desc=desc, disable=not progress)]
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def _check_split(split: str, size: int, what: str) -> None:
    if size == 0:
        raise EvaluationError(f"the {what} {split} split is empty")


# -------- triple prediction --------


def eval_triple_prediction(
    store: EmbeddingStore,
    g: NestedGraph,
    split: str = "test",
    filtered: bool = True,
    hits: Sequence[int] = DEFAULT_HITS,
    threads: int = 1,
    progress: bool = False,
) -> RankingReport:
    """Rank the true head and tail triple of each nested fact among the involved triples."""
    triples = g.nested_split(split)
    _check_split(split, len(triples), "nested")
    queries = nested_index_array(g, triples)
    involved = np.asarray(g.involved_triples, dtype=np.intp).reshape(-1, 3)
    candidates = triple_matrices(store, involved)
    flat = candidates.reshape(len(candidates), -1)

    known_tails: dict[tuple[int, int], list[int]] = defaultdict(list)
    known_heads: dict[tuple[int, int], list[int]] = defaultdict(list)
    for hi, rel, ti in nested_index_array(g, g.all_nested):
        known_tails[(hi, rel)].append(ti)
        known_heads[(rel, ti)].append(hi)

    def rank_chunk(chunk: slice) -> NDArray:
        rows = queries[chunk]
        hi, rel, ti = rows[:, 0], rows[:, 1], rows[:, 2]
        shifts = store.nested_translation[rel]
        cells = normalize_cells(store.nested_rotation[rel], store.cell_norm, store.eps)
        # tail queries: <C_c, T'>
        rotated = rotate_matrices(candidates[hi] + shifts, cells, store.algebra)
        tail_scores = rotated.reshape(len(rows), -1) @ flat.T
        # head queries: <C_c + R_b, W>, W_i = Σ_j left_adj(U_ij, T_j)
        pulled = hamilton_left_adjoint(
            cells, candidates[ti][:, None, :, :, :], store.algebra
        ).sum(axis=2)
        pulled_flat = pulled.reshape(len(rows), -1)
        head_scores = pulled_flat @ flat.T + np.sum(
            shifts.reshape(len(rows), -1) * pulled_flat, axis=1, keepdims=True
        )
        tail_excl = [
            np.asarray(known_tails[(h, r)], dtype=np.intp) if filtered else None
            for h, r in zip(hi, rel)
        ]
        head_excl = [
            np.asarray(known_heads[(r, t)], dtype=np.intp) if filtered else None
            for r, t in zip(rel, ti)
        ]
        head_ranks = _batch_ranks(head_scores, hi, head_excl)
        tail_ranks = _batch_ranks(tail_scores, ti, tail_excl)
        return np.stack([head_ranks, tail_ranks], axis=1).reshape(-1)

    ranks = _run_chunks(rank_chunk, len(queries), threads, progress, "triple prediction")
    return _build_report(
        "triple",
        split,
        filtered,
        ranks,
        np.repeat(queries[:, 1], 2),
        g.nested_relations.name_of,
        hits,
    )


# -------- conditional link prediction --------


def eval_conditional_link_prediction(
    store: EmbeddingStore,
    g: NestedGraph,
    split: str = "test",
    filtered: bool = True,
    hits: Sequence[int] = DEFAULT_HITS,
    threads: int = 1,
    progress: bool = False,
) -> RankingReport:
    """Rank the true entity of each of the four entity slots of a nested fact.

    The filter of a query holds every entity completing a known nested fact
    of the same pattern (the 7-tuple with the queried slot left open).
    """
    triples = g.nested_split(split)
    _check_split(split, len(triples), "nested")
    rows = np.asarray([nt.as_row() for nt in triples], dtype=np.intp)
    entities = store.entity.reshape(store.num_entities, -1)

    completions: dict[tuple[int, ...], list[int]] = defaultdict(list)
    if filtered:
        for nt in g.all_nested:
            row = nt.as_row()
            for slot in CONDITIONAL_SLOTS:
                completions[_pattern(row, slot)].append(row[slot])

    def rank_chunk(chunk: slice) -> NDArray:
        part = rows[chunk]
        heads, rel, tails = part[:, 0:3], part[:, 3], part[:, 4:7]
        shifted = triple_matrices(store, heads) + store.nested_translation[rel]
        cells = normalize_cells(store.nested_rotation[rel], store.cell_norm, store.eps)
        tail_matrix = triple_matrices(store, tails)
        rotated = rotate_matrices(shifted, cells, store.algebra)
        pulled = hamilton_left_adjoint(
            cells, tail_matrix[:, None, :, :, :], store.algebra
        ).sum(axis=2)
        # score(e) differs from the truth's only through <E[e], column>
        columns = {0: pulled[:, 0], 2: pulled[:, 2], 4: rotated[:, 0], 6: rotated[:, 2]}
        out = np.zeros((len(part), len(CONDITIONAL_SLOTS)), dtype=np.int64)
        for q, slot in enumerate(CONDITIONAL_SLOTS):
            scores = columns[slot].reshape(len(part), -1) @ entities.T
            truths = part[:, slot]
            excl = [
                np.asarray(completions[_pattern(tuple(row), slot)], dtype=np.intp)
                if filtered
                else None
                for row in part
            ]
            out[:, q] = _batch_ranks(scores, truths, excl)
        return out.reshape(-1)

    ranks = _run_chunks(rank_chunk, len(rows), threads, progress, "conditional prediction")
    return _build_report(
        "conditional",
        split,
        filtered,
        ranks,
        np.repeat(rows[:, 3], len(CONDITIONAL_SLOTS)),
        g.nested_relations.name_of,
        hits,
    )


def _pattern(row: Sequence[int], slot: int) -> tuple[int, ...]:
    return tuple(-1 if i == slot else int(v) for i, v in enumerate(row))


# -------- base link prediction --------


def eval_base_link_prediction(
    store: EmbeddingStore,
    g: NestedGraph,
    split: str = "test",
    filtered: bool = True,
    hits: Sequence[int] = DEFAULT_HITS,
    threads: int = 1,
    progress: bool = False,
) -> RankingReport:
    """Standard head/tail entity ranking over atomic triples.

    Only the atomic train, valid and test splits filter; augmented triples
    never do.
    """
    triples = g.atomic_split(split)
    _check_split(split, len(triples), "atomic")
    rows = np.asarray(triples, dtype=np.intp).reshape(-1, 3)
    entities = store.entity.reshape(store.num_entities, -1)

    known_tails: dict[tuple[int, int], list[int]] = defaultdict(list)
    known_heads: dict[tuple[int, int], list[int]] = defaultdict(list)
    for h, r, t in g.all_atomic:
        known_tails[(h, r)].append(t)
        known_heads[(r, t)].append(h)

    def rank_chunk(chunk: slice) -> NDArray:
        part = rows[chunk]
        h, r, t = part[:, 0], part[:, 1], part[:, 2]
        rotation = unit_normalize(store.rel_rotation[r], store.eps)
        rotated = hamilton(store.entity[h] + store.rel_translation[r], rotation, store.algebra)
        tail_scores = rotated.reshape(len(part), -1) @ entities.T
        pulled = hamilton_left_adjoint(rotation, store.entity[t], store.algebra)
        head_scores = pulled.reshape(len(part), -1) @ entities.T
        head_excl = [
            np.asarray(known_heads[(rr, tt)], dtype=np.intp) if filtered else None
            for rr, tt in zip(r, t)
        ]
        tail_excl = [
            np.asarray(known_tails[(hh, rr)], dtype=np.intp) if filtered else None
            for hh, rr in zip(h, r)
        ]
        head_ranks = _batch_ranks(head_scores, h, head_excl)
        tail_ranks = _batch_ranks(tail_scores, t, tail_excl)
        return np.stack([head_ranks, tail_ranks], axis=1).reshape(-1)

    ranks = _run_chunks(rank_chunk, len(rows), threads, progress, "base link prediction")
    return _build_report(
        "base",
        split,
        filtered,
        ranks,
        np.repeat(rows[:, 1], 2),
        g.atomic_relations.name_of,
        hits,
    )


EVALUATORS: dict[str, Callable[..., RankingReport]] = {
    "triple": eval_triple_prediction,
    "conditional": eval_conditional_link_prediction,
    "base": eval_base_link_prediction,
}


# -------- report output --------


def report_rows(report: RankingReport, per_relation: bool = True) -> list[dict]:
    """Flat rows (overall first, then one per relation) for table and CSV output."""
    hits = sorted(report.hits_at)

    def row(relation: str, metrics: RankingMetrics) -> dict:
        out = {
            "task": report.task,
            "split": report.split,
            "relation": relation,
            "queries": metrics.query_count,
            "MR": metrics.mr,
            "MRR": metrics.mrr,
        }
        for k in hits:
            out[f"Hit@{k}"] = metrics.hits_at[k]
        return out

    rows = [row("(all)", report.overall)]
    if per_relation:
        for rel, metrics in report.per_relation.items():
            rows.append(row(report.relation_names.get(rel, str(rel)), metrics))
    return rows


def format_table(reports: Sequence[RankingReport], per_relation: bool = True) -> str:
    """Human-readable table with MR, MRR and Hit@k columns."""
    rows = [r for report in reports for r in report_rows(report, per_relation)]
    if not rows:
        return ""
    columns = list(rows[0])
    cells = [[_format_cell(row[c]) for c in columns] for row in rows]
    widths = [max(len(c), *(len(line[i]) for line in cells)) for i, c in enumerate(columns)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(columns, widths))]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(line, widths)) for line in cells)
    return "\n".join(lines)


def _format_cell(value) -> str:
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def format_json(reports: Sequence[RankingReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2)
