"""Composite objective, negative sampling, analytic gradients and Adagrad.

The loss of a batch is

    Σ_atomic [g(-φ⁺) + g(φ⁻)]
    + λ_nested · Σ_nested [g(-ρ⁺) + g(ρ⁻)]
    + λ_aug · Σ_augmented [g(-φ⁺) + g(φ⁻)]
    + β · ||θ_touched||²

with g the softplus. Gradients are derived by hand and applied sparsely.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from tqdm import tqdm

from .errors import ConfigError, ContractError, TrainingDivergedError
from .evaluation import eval_triple_prediction
from .graph_data import AtomicTriple, NestedGraph, NestedTriple, nested_index_array
from .hypercomplex import (
    DEFAULT_EPS,
    Algebra,
    hamilton_left_adjoint,
    hamilton_right_adjoint,
    unit_normalize_backward,
)
from .scoring import (
    CELL_NORMS,
    PARAMETER_BLOCKS,
    TRANSLATION_BLOCKS,
    EmbeddingStore,
    atomic_forward,
    init_store,
    nested_forward,
    normalize_cells_backward,
)

logger = logging.getLogger(__name__)

MODES: tuple[str, ...] = ("deterministic", "parallel")
ADAGRAD_EPS = 1e-10


@dataclass
class TrainConfig:
    """Hyperparameters of one training run."""

    dim: int = 200
    learning_rate: float = 0.1
    regularization: float = 0.1
    lambda_nested: float = 0.5
    lambda_aug: float = 0.2
    negatives: int = 10
    epochs: int = 500
    valid_every: int = 50
    batch_size: int = 256
    seed: int = 0
    algebra: Algebra = Algebra.Q
    f32: bool = False
    translation: bool = True
    cell_norm: str = "unit"
    eps: float = DEFAULT_EPS
    filtered_negatives: bool = True
    negative_retries: int = 10
    mode: str = "deterministic"
    threads: int = 1

    def __post_init__(self) -> None:
        try:
            self.algebra = Algebra.parse(self.algebra)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        checks = [
            (self.dim >= 1, "dim must be at least 1"),
            (self.learning_rate > 0, "learning_rate must be positive"),
            (self.regularization >= 0, "regularization must be non-negative"),
            (self.lambda_nested >= 0, "lambda_nested must be non-negative"),
            (self.lambda_aug >= 0, "lambda_aug must be non-negative"),
            (self.negatives >= 1, "negatives must be at least 1"),
            (self.epochs >= 0, "epochs must be non-negative"),
            (self.valid_every >= 1, "valid_every must be at least 1"),
            (self.batch_size >= 1, "batch_size must be at least 1"),
            (self.eps > 0, "eps must be positive"),
            (self.negative_retries >= 0, "negative_retries must be non-negative"),
            (self.threads >= 1, "threads must be at least 1"),
            (self.cell_norm in CELL_NORMS, f"cell_norm must be one of {', '.join(CELL_NORMS)}"),
            (self.mode in MODES, f"mode must be one of {', '.join(MODES)}"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    @classmethod
    def keys(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def to_dict(self) -> dict:
        out = {name: getattr(self, name) for name in self.keys()}
        out["algebra"] = self.algebra.value
        return out


# -------- loss primitives --------


def softplus(x):
    """``log(1 + exp(x))`` without overflow."""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return float(out) if out.ndim == 0 else out


def sigmoid(x):
    x = np.asarray(x, dtype=np.float64)
    out = np.exp(-np.logaddexp(0.0, -x))
    return float(out) if out.ndim == 0 else out


# -------- batches and negatives --------


@dataclass
class Batch:
    """Positives and their negatives for each loss term.

    Atomic and augmented rows are ``(h, r, t)`` entity/relation ids.
    Nested rows are ``(head, rel, tail)`` where head and tail index
    ``NestedGraph.involved_triples``. Negatives of positive ``i`` occupy
    rows ``i * k .. i * k + k - 1``.
    """

    atomic_pos: NDArray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.intp))
    atomic_neg: NDArray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.intp))
    nested_pos: NDArray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.intp))
    nested_neg: NDArray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.intp))
    aug_pos: NDArray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.intp))
    aug_neg: NDArray = field(default_factory=lambda: np.zeros((0, 3), dtype=np.intp))

    def __len__(self) -> int:
        return len(self.atomic_pos) + len(self.nested_pos) + len(self.aug_pos)


def _triple_array(triples: Sequence[AtomicTriple]) -> NDArray:
    if not triples:
        return np.zeros((0, 3), dtype=np.intp)
    return np.asarray(triples, dtype=np.intp).reshape(-1, 3)


class NegativeSampler:
    """Vectorized head/tail corruption of atomic and nested examples.

    In filtered mode corruptions colliding with a training fact are redrawn
    up to ``retries`` times; a corruption still equal to its positive after
    that is moved to a different candidate.
    """

    def __init__(self, g: NestedGraph, filtered: bool = True, retries: int = 10) -> None:
        self.filtered = filtered
        self.retries = retries
        self.num_entities = len(g.entities)
        self.num_relations = max(len(g.atomic_relations), 1)
        self.num_nested_relations = max(len(g.nested_relations), 1)
        self.num_involved = len(g.involved_triples)
        self.involved = _triple_array(g.involved_triples)
        self._atomic_known = np.unique(self.atomic_keys(_triple_array(g.atomic_train)))
        self._aug_known = np.unique(
            np.concatenate(
                [self._atomic_known, self.atomic_keys(_triple_array(g.augmented))]
            )
        )
        self._nested_known = np.unique(
            self.nested_keys(nested_index_array(g, g.nested_train))
        )

    def atomic_keys(self, rows: NDArray) -> NDArray:
        rows = rows.astype(np.int64)
        return (rows[:, 0] * self.num_relations + rows[:, 1]) * self.num_entities + rows[:, 2]

    def nested_keys(self, rows: NDArray) -> NDArray:
        rows = rows.astype(np.int64)
        return (rows[:, 0] * self.num_nested_relations + rows[:, 1]) * max(
            self.num_involved, 1
        ) + rows[:, 2]

    def atomic(
        self, pos: NDArray, k: int, rng: np.random.Generator, augmented: bool = False
    ) -> NDArray:
        known = self._aug_known if augmented else self._atomic_known
        return self._corrupt(pos, k, rng, self.num_entities, self.atomic_keys, known)

    def nested(self, pos: NDArray, k: int, rng: np.random.Generator) -> NDArray:
        return self._corrupt(
            pos, k, rng, self.num_involved, self.nested_keys, self._nested_known
        )

    def _corrupt(
        self,
        pos: NDArray,
        k: int,
        rng: np.random.Generator,
        pool: int,
        keys: Callable[[NDArray], NDArray],
        known: NDArray,
    ) -> NDArray:
        if k < 1:
            raise ContractError(f"need at least one negative per positive, got {k}")
        original = np.repeat(np.asarray(pos, dtype=np.intp).reshape(-1, 3), k, axis=0)
        n = len(original)
        if n == 0 or pool == 0:
            return original
        rows = np.arange(n)
        side = np.where(rng.random(n) < 0.5, 0, 2)
        out = original.copy()
        out[rows, side] = rng.integers(pool, size=n)
        if not self.filtered:
            return out
        for _ in range(self.retries):
            bad = np.flatnonzero(np.isin(keys(out), known))
            if len(bad) == 0:
                break
            out[bad, side[bad]] = rng.integers(pool, size=len(bad))
        same = np.flatnonzero(out[rows, side] == original[rows, side])
        if len(same) and pool > 1:
            shift = 1 + rng.integers(pool - 1, size=len(same))
            out[same, side[same]] = (original[same, side[same]] + shift) % pool
        return out


def sample_negatives(
    g: NestedGraph,
    pos: AtomicTriple | NestedTriple,
    n: int,
    rng: np.random.Generator,
    filtered: bool = True,
    retries: int = 10,
    augmented: bool = False,
) -> list:
    """Corrupt the head or tail of one positive ``n`` times.

    Atomic positives get a uniform random entity in the replaced slot,
    nested positives a uniform random involved triple.
    """
    if n < 1:
        raise ContractError(f"n must be at least 1, got {n}")
    sampler = NegativeSampler(g, filtered=filtered, retries=retries)
    if isinstance(pos, NestedTriple):
        rows = sampler.nested(nested_index_array(g, [pos]), n, rng)
        involved = g.involved_triples
        return [NestedTriple(involved[a], int(rel), involved[b]) for a, rel, b in rows]
    rows = sampler.atomic(_triple_array([pos]), n, rng, augmented=augmented)
    return [AtomicTriple(*(int(v) for v in row)) for row in rows]


# -------- loss and gradients --------


@dataclass
class GradientSet:
    """Sparse gradients: for each block, unique row ids and their summed gradients."""

    rows: dict[str, tuple[NDArray, NDArray]]
    loss: float
    terms: dict[str, float]

    def dense(self, store: EmbeddingStore) -> dict[str, NDArray]:
        """Scatter into zero arrays shaped like the store's blocks."""
        out = {name: np.zeros_like(block) for name, block in store.blocks().items()}
        for name, (ids, grads) in self.rows.items():
            out[name][ids] += grads
        return out


class _Accumulator:
    def __init__(self) -> None:
        self.parts: dict[str, list[tuple[NDArray, NDArray]]] = {}

    def add(self, name: str, ids: NDArray, grads: NDArray) -> None:
        self.parts.setdefault(name, []).append((np.asarray(ids, dtype=np.intp), grads))

    def reduce(self) -> dict[str, tuple[NDArray, NDArray]]:
        reduced = {}
        for name in PARAMETER_BLOCKS:
            parts = self.parts.get(name)
            if not parts:
                continue
            ids = np.concatenate([p[0] for p in parts])
            grads = np.concatenate([p[1] for p in parts])
            unique, inverse = np.unique(ids, return_inverse=True)
            summed = np.zeros((len(unique),) + grads.shape[1:], dtype=grads.dtype)
            np.add.at(summed, inverse.reshape(-1), grads)
            reduced[name] = (unique, summed)
        return reduced


def _term_coefficients(scores: NDArray, sign: float, weight: float) -> tuple[float, NDArray]:
    """Loss ``weight · g(sign · score)`` and its derivative in ``score``."""
    z = sign * scores.astype(np.float64)
    return weight * float(np.sum(softplus(z))), weight * sign * sigmoid(z)


def _atomic_term(
    store: EmbeddingStore,
    rows: NDArray,
    sign: float,
    weight: float,
    acc: Optional[_Accumulator],
) -> float:
    fwd = atomic_forward(store, rows)
    value, coef = _term_coefficients(fwd.scores, sign, weight)
    if acc is None:
        return value
    c = coef.astype(store.dtype)[:, None, None]
    g_rotated = c * fwd.tail
    g_tail = c * fwd.rotated
    g_shifted = hamilton_left_adjoint(fwd.rotation, g_rotated, store.algebra)
    g_rotation = hamilton_right_adjoint(fwd.shifted, g_rotated, store.algebra)
    h, r, t = rows[:, 0], rows[:, 1], rows[:, 2]
    acc.add("entity", h, g_shifted)
    acc.add("entity", t, g_tail)
    acc.add(
        "rel_rotation",
        r,
        unit_normalize_backward(store.rel_rotation[r], g_rotation, store.eps),
    )
    if store.translation:
        acc.add("rel_translation", r, g_shifted)
    return value


def _nested_term(
    store: EmbeddingStore,
    involved: NDArray,
    rows: NDArray,
    sign: float,
    weight: float,
    acc: Optional[_Accumulator],
) -> float:
    heads, rels, tails = involved[rows[:, 0]], rows[:, 1], involved[rows[:, 2]]
    fwd = nested_forward(store, heads, rels, tails)
    value, coef = _term_coefficients(fwd.scores, sign, weight)
    if acc is None:
        return value
    c = coef.astype(store.dtype)[:, None, None, None]
    g_rotated = c * fwd.tail
    g_tail = c * fwd.rotated
    # g_shifted[i] = Σ_j left_adj(U[i, j], G[j]); g_cells[i, j] = right_adj(A[i], G[j])
    g_shifted = hamilton_left_adjoint(
        fwd.cells, g_rotated[:, None, :, :, :], store.algebra
    ).sum(axis=2)
    g_cells = hamilton_right_adjoint(
        fwd.shifted[:, :, None, :, :], g_rotated[:, None, :, :, :], store.algebra
    )
    for side, grad in ((heads, g_shifted), (tails, g_tail)):
        acc.add("entity", side[:, 0], grad[:, 0])
        acc.add("rel_rotation", side[:, 1], grad[:, 1])
        acc.add("entity", side[:, 2], grad[:, 2])
    acc.add(
        "nested_rotation",
        rels,
        normalize_cells_backward(
            store.nested_rotation[rels], g_cells, store.cell_norm, store.eps
        ),
    )
    if store.translation:
        acc.add("nested_translation", rels, g_shifted)
    return value


def _evaluate_batch(
    batch: Batch,
    store: EmbeddingStore,
    cfg: TrainConfig,
    involved: NDArray,
    with_gradients: bool,
) -> GradientSet:
    acc = _Accumulator()
    grads_acc = acc if with_gradients else None
    terms = {"atomic": 0.0, "nested": 0.0, "augmented": 0.0, "regularization": 0.0}
    touched = _Accumulator()

    plan = (
        ("atomic", 1.0, batch.atomic_pos, batch.atomic_neg),
        ("augmented", cfg.lambda_aug, batch.aug_pos, batch.aug_neg),
    )
    for term, weight, pos, neg in plan:
        if weight == 0 or len(pos) == 0:
            continue
        for rows, sign in ((pos, -1.0), (neg, 1.0)):
            if len(rows):
                terms[term] += _atomic_term(store, rows, sign, weight, grads_acc)
                _touch_atomic(touched, store, rows)
    if cfg.lambda_nested != 0 and len(batch.nested_pos):
        for rows, sign in ((batch.nested_pos, -1.0), (batch.nested_neg, 1.0)):
            if len(rows):
                terms["nested"] += _nested_term(
                    store, involved, rows, sign, cfg.lambda_nested, grads_acc
                )
                _touch_nested(touched, store, involved, rows)

    beta = cfg.regularization
    if beta != 0:
        for name, (ids, _) in touched.reduce().items():
            theta = store.block(name)[ids]
            terms["regularization"] += beta * float(np.sum(theta.astype(np.float64) ** 2))
            if with_gradients:
                acc.add(name, ids, (2 * beta) * theta)
    rows = acc.reduce() if with_gradients else {}
    return GradientSet(rows=rows, loss=sum(terms.values()), terms=terms)


def _touch_atomic(touched: _Accumulator, store: EmbeddingStore, rows: NDArray) -> None:
    for name, ids in (
        ("entity", rows[:, 0]),
        ("entity", rows[:, 2]),
        ("rel_rotation", rows[:, 1]),
        ("rel_translation", rows[:, 1]),
    ):
        if name in TRANSLATION_BLOCKS and not store.translation:
            continue
        touched.add(name, ids, np.zeros((len(ids), 1)))


def _touch_nested(
    touched: _Accumulator, store: EmbeddingStore, involved: NDArray, rows: NDArray
) -> None:
    heads, tails = involved[rows[:, 0]], involved[rows[:, 2]]
    for name, ids in (
        ("entity", np.concatenate([heads[:, 0], heads[:, 2], tails[:, 0], tails[:, 2]])),
        ("rel_rotation", np.concatenate([heads[:, 1], tails[:, 1]])),
        ("nested_rotation", rows[:, 1]),
        ("nested_translation", rows[:, 1]),
    ):
        if name in TRANSLATION_BLOCKS and not store.translation:
            continue
        touched.add(name, ids, np.zeros((len(ids), 1)))


def loss(
    batch: Batch, store: EmbeddingStore, cfg: TrainConfig, g: Optional[NestedGraph] = None
) -> float:
    """Value of the composite objective on ``batch``.

    ``g`` is needed only when the batch carries nested examples.
    """
    return _evaluate_batch(batch, store, cfg, _involved(g), with_gradients=False).loss


def gradients(
    batch: Batch, store: EmbeddingStore, cfg: TrainConfig, g: Optional[NestedGraph] = None
) -> GradientSet:
    """Analytic gradients of ``loss`` for every touched parameter row."""
    return _evaluate_batch(batch, store, cfg, _involved(g), with_gradients=True)


def _involved(g: Optional[NestedGraph]) -> NDArray:
    if g is None:
        return np.zeros((0, 3), dtype=np.intp)
    return _triple_array(g.involved_triples)


# -------- optimizer --------


class Adagrad:
    """Per-coordinate adaptive steps: ``θ -= lr · g / (sqrt(Σ g²) + 1e-10)``."""

    def __init__(self, store: EmbeddingStore, learning_rate: float) -> None:
        self.learning_rate = learning_rate
        self.accumulators = {
            name: np.zeros_like(block) for name, block in store.blocks().items()
        }

    def step(self, store: EmbeddingStore, grads: GradientSet) -> None:
        for name, (ids, grad) in grads.rows.items():
            acc = self.accumulators[name]
            acc[ids] += grad * grad
            block = store.block(name)
            block[ids] -= self.learning_rate * grad / (np.sqrt(acc[ids]) + ADAGRAD_EPS)


# -------- training loop --------


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    atomic: float
    nested: float
    augmented: float
    regularization: float
    valid_mrr: Optional[float] = None


@dataclass
class TrainingLog:
    """Per-epoch loss terms and validation MRR."""

    records: list[EpochRecord] = field(default_factory=list)

    COLUMNS = ("epoch", "loss", "atomic", "nested", "augmented", "regularization", "valid_mrr")

    def append(self, record: EpochRecord) -> None:
        self.records.append(record)

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.COLUMNS)
            for rec in self.records:
                writer.writerow(
                    [
                        rec.epoch,
                        f"{rec.loss:.17g}",
                        f"{rec.atomic:.17g}",
                        f"{rec.nested:.17g}",
                        f"{rec.augmented:.17g}",
                        f"{rec.regularization:.17g}",
                        "" if rec.valid_mrr is None else f"{rec.valid_mrr:.17g}",
                    ]
                )

    @property
    def validation_points(self) -> list[tuple[int, float]]:
        return [(r.epoch, r.valid_mrr) for r in self.records if r.valid_mrr is not None]


@dataclass
class TrainingResult:
    store: EmbeddingStore
    log: TrainingLog
    best_epoch: int
    best_valid_mrr: Optional[float]


class _Pools:
    """Training examples of each loss term as id arrays."""

    def __init__(self, g: NestedGraph, cfg: TrainConfig) -> None:
        self.atomic = _triple_array(g.atomic_train)
        self.augmented = (
            _triple_array(g.augmented) if cfg.lambda_aug != 0 else np.zeros((0, 3), dtype=np.intp)
        )
        self.nested = (
            nested_index_array(g, g.nested_train)
            if cfg.lambda_nested != 0
            else np.zeros((0, 3), dtype=np.intp)
        )

    @property
    def epoch_length(self) -> int:
        return max(len(self.atomic), len(self.augmented), len(self.nested))

    def orders(self, rng: np.random.Generator) -> list[NDArray]:
        """One shuffled, cycled index order per pool, each of epoch length."""
        length = self.epoch_length
        out = []
        for pool in (self.atomic, self.augmented, self.nested):
            if len(pool) == 0:
                out.append(np.zeros(0, dtype=np.intp))
                continue
            perm = rng.permutation(len(pool))
            out.append(perm[np.arange(length) % len(pool)])
        return out


def _make_batch(
    pools: _Pools,
    orders: list[NDArray],
    start: int,
    stop: int,
    sampler: NegativeSampler,
    k: int,
    rng: np.random.Generator,
) -> Batch:
    atomic = pools.atomic[orders[0][start:stop]]
    augmented = pools.augmented[orders[1][start:stop]]
    nested = pools.nested[orders[2][start:stop]]
    return Batch(
        atomic_pos=atomic,
        atomic_neg=sampler.atomic(atomic, k, rng),
        aug_pos=augmented,
        aug_neg=sampler.atomic(augmented, k, rng, augmented=True),
        nested_pos=nested,
        nested_neg=sampler.nested(nested, k, rng),
    )


def train(
    g: NestedGraph,
    cfg: TrainConfig,
    progress: bool = False,
    on_epoch: Optional[Callable[[EpochRecord, EmbeddingStore], None]] = None,
    store: Optional[EmbeddingStore] = None,
) -> TrainingResult:
    """Train a model on ``g`` and keep the parameters with best validation MRR.

    Validation (filtered triple prediction on the nested valid split) runs
    every ``cfg.valid_every`` epochs and after the last epoch. Without a
    nested validation split the final parameters are returned.

    Raises:
        TrainingDivergedError: a batch loss became non-finite
    """
    if store is None:
        store = init_store(
            g,
            cfg.dim,
            cfg.algebra,
            cfg.seed,
            translation=cfg.translation,
            cell_norm=cfg.cell_norm,
            eps=cfg.eps,
            f32=cfg.f32,
        )
    log = TrainingLog()
    best_store, best_epoch, best_mrr = store.copy(), 0, None
    if cfg.epochs == 0:
        return TrainingResult(best_store, log, best_epoch, best_mrr)

    pools = _Pools(g, cfg)
    sampler = NegativeSampler(g, cfg.filtered_negatives, cfg.negative_retries)
    involved = _triple_array(g.involved_triples)
    optimizer = Adagrad(store, cfg.learning_rate)
    rng = np.random.default_rng([cfg.seed, 1])
    length = pools.epoch_length
    n_batches = math.ceil(length / cfg.batch_size)
    parallel = cfg.mode == "parallel" and cfg.threads > 1
    validate = len(g.nested_valid) > 0

    def run_batch(epoch: int, orders: list[NDArray], b: int, batch_rng) -> dict[str, float]:
        batch = _make_batch(
            pools,
            orders,
            b * cfg.batch_size,
            (b + 1) * cfg.batch_size,
            sampler,
            cfg.negatives,
            batch_rng,
        )
        grads = _evaluate_batch(batch, store, cfg, involved, with_gradients=True)
        if not math.isfinite(grads.loss):
            raise TrainingDivergedError(epoch, b, f"loss is {grads.loss}")
        optimizer.step(store, grads)
        return grads.terms

    epochs = range(1, cfg.epochs + 1)
    executor = ThreadPoolExecutor(max_workers=cfg.threads) if parallel else None
    try:
        for epoch in tqdm(epochs, desc="epochs", disable=not progress):
            orders = pools.orders(rng)
            totals = {"atomic": 0.0, "nested": 0.0, "augmented": 0.0, "regularization": 0.0}
            if executor is None:
                for b in range(n_batches):
                    for key, value in run_batch(epoch, orders, b, rng).items():
                        totals[key] += value
            else:
                seeds = np.random.SeedSequence([cfg.seed, epoch]).spawn(cfg.threads)

                def worker(w: int) -> dict[str, float]:
                    worker_rng = np.random.default_rng(seeds[w])
                    sums = dict.fromkeys(totals, 0.0)
                    for b in range(w, n_batches, cfg.threads):
                        for key, value in run_batch(epoch, orders, b, worker_rng).items():
                            sums[key] += value
                    return sums

                for sums in executor.map(worker, range(cfg.threads)):
                    for key, value in sums.items():
                        totals[key] += value

            record = EpochRecord(epoch=epoch, loss=sum(totals.values()), **totals)
            logger.debug("epoch %d loss %.6f", epoch, record.loss)
            if validate and (epoch % cfg.valid_every == 0 or epoch == cfg.epochs):
                report = eval_triple_prediction(store, g, "valid")
                record.valid_mrr = report.mrr
                logger.info(
                    "epoch %d loss %.6f valid MRR %.4f", epoch, record.loss, report.mrr
                )
                if best_mrr is None or report.mrr > best_mrr:
                    best_store, best_epoch, best_mrr = store.copy(), epoch, report.mrr
            log.append(record)
            if on_epoch is not None:
                on_epoch(record, store)
    finally:
        if executor is not None:
            executor.shutdown()

    if not validate:
        best_store, best_epoch = store.copy(), cfg.epochs
    return TrainingResult(best_store, log, best_epoch, best_mrr)


def default_threads() -> int:
    return os.cpu_count() or 1
