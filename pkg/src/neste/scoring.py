"""Parameter storage, atomic and nested scoring, and checkpoints.

Every parameter block is a dense array with channels on axis -2:

    entity              (n_entities, 4, d)
    rel_rotation        (n_relations, 4, d)      r_θ, normalized on use
    rel_translation     (n_relations, 4, d)      r_b
    nested_rotation     (n_nested, 3, 3, 4, d)   rotation matrix cells
    nested_translation  (n_nested, 3, 4, d)      1x3 translation row

An atomic triple is scored as ``<(h + r_b) ⊗ norm(r_θ), t>``. A nested
triple embeds both sides as 1x3 matrices ``[h, r_θ, t]`` and scores
``<(T_head + R_b) · R, T_tail>`` where the matrix product uses Hamilton
products for scalar multiplication.
"""

from __future__ import annotations

import io
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import CheckpointError, ContractError
from .graph_data import AtomicTriple, NestedGraph, NestedTriple
from .hypercomplex import (
    DEFAULT_EPS,
    Algebra,
    Hyper4Vector,
    ball_project,
    ball_project_backward,
    hamilton,
    inner_product,
    unit_normalize,
    unit_normalize_backward,
)

logger = logging.getLogger(__name__)

CELL_NORMS: tuple[str, ...] = ("unit", "ball")

PARAMETER_BLOCKS: tuple[str, ...] = (
    "entity",
    "rel_rotation",
    "rel_translation",
    "nested_rotation",
    "nested_translation",
)
TRANSLATION_BLOCKS: frozenset[str] = frozenset({"rel_translation", "nested_translation"})

NESTED_INIT_NOISE = 1e-2

CHECKPOINT_MAGIC = b"NESTE-CHECKPOINT"
CHECKPOINT_VERSION = 1


# -------- cell normalization --------


def normalize_cells(cells: NDArray, mode: str, eps: float = DEFAULT_EPS) -> NDArray:
    """Normalize nested rotation cells element-wise.

    ``"unit"`` (the default) scales to norm 1, exactly as atomic rotations
    are normalized, with zero as the fallback for degenerate elements so
    that empty cells stay empty. ``"ball"`` only projects onto the closed
    unit ball and lets shorter cells scale their column.
    """
    if mode == "ball":
        return ball_project(cells)
    if mode == "unit":
        return unit_normalize(cells, eps, fallback="zero")
    raise ContractError(f"Unknown cell normalization '{mode}'. Use ball or unit.")


def normalize_cells_backward(
    cells: NDArray, grad: NDArray, mode: str, eps: float = DEFAULT_EPS
) -> NDArray:
    if mode == "ball":
        return ball_project_backward(cells, grad)
    if mode == "unit":
        return unit_normalize_backward(cells, grad, eps)
    raise ContractError(f"Unknown cell normalization '{mode}'. Use ball or unit.")


# -------- typed views --------


@dataclass(frozen=True, eq=False)
class AtomicRelationEmbedding:
    """Rotation (stored unnormalized) and translation of one atomic relation."""

    r_theta: Hyper4Vector
    r_b: Hyper4Vector

    def __post_init__(self) -> None:
        if self.r_theta.d != self.r_b.d:
            raise ContractError("rotation and translation dimensions differ")


@dataclass(frozen=True, eq=False)
class NestedRelationEmbedding:
    """A 3x3 grid of rotation cells and a 1x3 row of translation cells.

    ``rotation`` has shape (3, 3, 4, d) and ``translation`` (3, 4, d).
    """

    rotation: NDArray
    translation: NDArray

    def __post_init__(self) -> None:
        rotation = np.asarray(self.rotation, dtype=np.float64)
        translation = np.asarray(self.translation, dtype=np.float64)
        if rotation.ndim != 4 or rotation.shape[:3] != (3, 3, 4):
            raise ContractError(f"rotation must have shape (3, 3, 4, d), got {rotation.shape}")
        if translation.shape != (3, 4, rotation.shape[-1]):
            raise ContractError(
                f"translation must have shape (3, 4, {rotation.shape[-1]}), "
                f"got {translation.shape}"
            )
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @property
    def d(self) -> int:
        return int(self.rotation.shape[-1])

    def cell(self, i: int, j: int) -> Hyper4Vector:
        return Hyper4Vector(self.rotation[i, j])

    @classmethod
    def from_cells(
        cls,
        cells: dict[tuple[int, int], Hyper4Vector],
        d: int,
        translation: Optional[Sequence[Hyper4Vector]] = None,
    ) -> "NestedRelationEmbedding":
        """Build from a sparse cell map; unset cells are zero."""
        rotation = np.zeros((3, 3, 4, d))
        for (i, j), value in cells.items():
            if value.d != d:
                raise ContractError(f"cell ({i}, {j}) has d={value.d}, expected {d}")
            rotation[i, j] = value.data
        trans = np.zeros((3, 4, d))
        if translation is not None:
            for i, value in enumerate(translation):
                trans[i] = value.data
        return cls(rotation, trans)

    @classmethod
    def identity(cls, d: int) -> "NestedRelationEmbedding":
        one = Hyper4Vector.identity(d)
        return cls.from_cells({(0, 0): one, (1, 1): one, (2, 2): one}, d)

    @classmethod
    def anti_diagonal(cls, d: int) -> "NestedRelationEmbedding":
        """The column-reversing matrix with identity anti-diagonal cells."""
        one = Hyper4Vector.identity(d)
        return cls.from_cells({(0, 2): one, (1, 1): one, (2, 0): one}, d)


@dataclass(frozen=True, eq=False)
class TripleEmbedding:
    """An atomic triple as the 1x3 matrix ``[h, r, t]``; ``data`` is (3, 4, d)."""

    data: NDArray

    def __post_init__(self) -> None:
        data = np.asarray(self.data, dtype=np.float64)
        if data.ndim != 3 or data.shape[:2] != (3, 4):
            raise ContractError(f"a triple embedding has shape (3, 4, d), got {data.shape}")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_columns(cls, h: Hyper4Vector, r: Hyper4Vector, t: Hyper4Vector) -> "TripleEmbedding":
        if not h.d == r.d == t.d:
            raise ContractError("triple columns must share d")
        return cls(np.stack([h.data, r.data, t.data]))

    @property
    def cols(self) -> tuple[Hyper4Vector, Hyper4Vector, Hyper4Vector]:
        return (Hyper4Vector(self.data[0]), Hyper4Vector(self.data[1]), Hyper4Vector(self.data[2]))

    @property
    def d(self) -> int:
        return int(self.data.shape[-1])


# -------- the store --------


@dataclass(eq=False)
class EmbeddingStore:
    """All trainable parameters of one model plus the names they belong to."""

    entity: NDArray
    rel_rotation: NDArray
    rel_translation: NDArray
    nested_rotation: NDArray
    nested_translation: NDArray
    algebra: Algebra
    translation: bool = True
    cell_norm: str = "unit"
    eps: float = DEFAULT_EPS
    entity_names: tuple[str, ...] = ()
    relation_names: tuple[str, ...] = ()
    nested_relation_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        self.algebra = Algebra.parse(self.algebra)
        if self.cell_norm not in CELL_NORMS:
            raise ContractError(f"Unknown cell normalization '{self.cell_norm}'.")
        d = self.entity.shape[-1] if self.entity.ndim == 3 else -1
        expected = {
            "entity": (None, 4, d),
            "rel_rotation": (None, 4, d),
            "rel_translation": (self.rel_rotation.shape[0], 4, d),
            "nested_rotation": (None, 3, 3, 4, d),
            "nested_translation": (self.nested_rotation.shape[0], 3, 4, d),
        }
        for name, shape in expected.items():
            array = getattr(self, name)
            if array.ndim != len(shape) or any(
                want is not None and want != got for want, got in zip(shape, array.shape)
            ):
                raise ContractError(f"{name} has shape {array.shape}, expected {shape}")
            if not np.all(np.isfinite(array)):
                raise ContractError(f"{name} contains non-finite values")
        if d < 1:
            raise ContractError("embedding dimension must be at least 1")
        for names, array, what in (
            (self.entity_names, self.entity, "entity"),
            (self.relation_names, self.rel_rotation, "relation"),
            (self.nested_relation_names, self.nested_rotation, "nested relation"),
        ):
            if names and len(names) != array.shape[0]:
                raise ContractError(f"{len(names)} {what} names for {array.shape[0]} rows")

    @property
    def dim(self) -> int:
        return int(self.entity.shape[-1])

    @property
    def dtype(self) -> np.dtype:
        return self.entity.dtype

    @property
    def num_entities(self) -> int:
        return int(self.entity.shape[0])

    @property
    def num_relations(self) -> int:
        return int(self.rel_rotation.shape[0])

    @property
    def num_nested_relations(self) -> int:
        return int(self.nested_rotation.shape[0])

    def block(self, name: str) -> NDArray:
        if name not in PARAMETER_BLOCKS:
            raise ContractError(f"Unknown parameter block '{name}'")
        return getattr(self, name)

    def blocks(self) -> dict[str, NDArray]:
        return {name: getattr(self, name) for name in PARAMETER_BLOCKS}

    def copy(self) -> "EmbeddingStore":
        return EmbeddingStore(
            **{name: array.copy() for name, array in self.blocks().items()},
            algebra=self.algebra,
            translation=self.translation,
            cell_norm=self.cell_norm,
            eps=self.eps,
            entity_names=self.entity_names,
            relation_names=self.relation_names,
            nested_relation_names=self.nested_relation_names,
        )

    def entity_embedding(self, e: int) -> Hyper4Vector:
        _check_id(e, self.num_entities, "entity")
        return Hyper4Vector(self.entity[e])

    def atomic_relation(self, r: int) -> AtomicRelationEmbedding:
        _check_id(r, self.num_relations, "relation")
        return AtomicRelationEmbedding(
            Hyper4Vector(self.rel_rotation[r]), Hyper4Vector(self.rel_translation[r])
        )

    def nested_relation(self, n: int) -> NestedRelationEmbedding:
        _check_id(n, self.num_nested_relations, "nested relation")
        return NestedRelationEmbedding(self.nested_rotation[n], self.nested_translation[n])

    def set_nested_relation(self, n: int, nrel: NestedRelationEmbedding) -> None:
        _check_id(n, self.num_nested_relations, "nested relation")
        if nrel.d != self.dim:
            raise ContractError(f"dimension mismatch: {nrel.d} != {self.dim}")
        self.nested_rotation[n] = nrel.rotation
        self.nested_translation[n] = nrel.translation

    def same_parameters(self, other: "EmbeddingStore") -> bool:
        """True when every block is bit-identical."""
        return self.algebra == other.algebra and all(
            a.dtype == b.dtype and a.shape == b.shape and np.array_equal(a, b)
            for a, b in zip(self.blocks().values(), other.blocks().values())
        )

    def __repr__(self) -> str:
        return (
            f"EmbeddingStore(algebra={self.algebra.value}, dim={self.dim}, "
            f"entities={self.num_entities}, relations={self.num_relations}, "
            f"nested_relations={self.num_nested_relations})"
        )


def _check_id(idx: int, bound: int, what: str) -> None:
    if not 0 <= idx < bound:
        raise ContractError(f"{what} id {idx} out of range [0, {bound})")


def init_store(
    g: NestedGraph,
    dim: int,
    algebra: Algebra | str,
    seed: int,
    translation: bool = True,
    cell_norm: str = "unit",
    eps: float = DEFAULT_EPS,
    f32: bool = False,
) -> EmbeddingStore:
    """Initialize parameters for every symbol of ``g``.

    Entities and relations are drawn from U(-0.5/sqrt(d), 0.5/sqrt(d)) per
    channel. Nested rotation matrices start near the identity. Translation
    blocks are zero when ``translation`` is off.
    """
    if dim < 1:
        raise ContractError(f"dim must be at least 1, got {dim}")
    rng = np.random.default_rng(seed)
    bound = 0.5 / np.sqrt(dim)
    n_e, n_r, n_n = len(g.entities), len(g.atomic_relations), len(g.nested_relations)

    def uniform(*shape: int) -> NDArray:
        return rng.uniform(-bound, bound, size=shape)

    entity = uniform(n_e, 4, dim)
    rel_rotation = uniform(n_r, 4, dim)
    rel_translation = uniform(n_r, 4, dim) if translation else np.zeros((n_r, 4, dim))
    nested_rotation = rng.uniform(-NESTED_INIT_NOISE, NESTED_INIT_NOISE, size=(n_n, 3, 3, 4, dim))
    for i in range(3):
        nested_rotation[:, i, i, 0, :] += 1.0
    nested_translation = uniform(n_n, 3, 4, dim) if translation else np.zeros((n_n, 3, 4, dim))

    dtype = np.float32 if f32 else np.float64
    return EmbeddingStore(
        entity=entity.astype(dtype),
        rel_rotation=rel_rotation.astype(dtype),
        rel_translation=rel_translation.astype(dtype),
        nested_rotation=nested_rotation.astype(dtype),
        nested_translation=nested_translation.astype(dtype),
        algebra=Algebra.parse(algebra),
        translation=translation,
        cell_norm=cell_norm,
        eps=eps,
        entity_names=g.entities.names,
        relation_names=g.atomic_relations.names,
        nested_relation_names=g.nested_relations.names,
    )


# -------- batch kernels --------


class AtomicForward(NamedTuple):
    """Intermediates of a batch of atomic scores, kept for the backward pass."""

    shifted: NDArray  # h + r_b
    rotation: NDArray  # normalized r_θ
    rotated: NDArray  # (h + r_b) ⊗ norm(r_θ)
    tail: NDArray
    scores: NDArray


class NestedForward(NamedTuple):
    """Intermediates of a batch of nested scores."""

    shifted: NDArray  # T_head + R_b, (n, 3, 4, d)
    cells: NDArray  # normalized rotation cells, (n, 3, 3, 4, d)
    rotated: NDArray  # T′, (n, 3, 4, d)
    tail: NDArray  # T_tail, (n, 3, 4, d)
    scores: NDArray


def atomic_forward(store: EmbeddingStore, triples: NDArray) -> AtomicForward:
    """Score atomic triples given as an (n, 3) id array."""
    triples = np.asarray(triples, dtype=np.intp).reshape(-1, 3)
    h, r, t = triples[:, 0], triples[:, 1], triples[:, 2]
    shifted = store.entity[h] + store.rel_translation[r]
    rotation = unit_normalize(store.rel_rotation[r], store.eps)
    rotated = hamilton(shifted, rotation, store.algebra)
    tail = store.entity[t]
    return AtomicForward(shifted, rotation, rotated, tail, inner_product(rotated, tail))


def triple_matrices(store: EmbeddingStore, triples: NDArray) -> NDArray:
    """Stack ``[E[h], r_θ, E[t]]`` for an (n, 3) id array into (n, 3, 4, d)."""
    triples = np.asarray(triples, dtype=np.intp).reshape(-1, 3)
    return np.stack(
        [
            store.entity[triples[:, 0]],
            store.rel_rotation[triples[:, 1]],
            store.entity[triples[:, 2]],
        ],
        axis=1,
    )


def rotate_matrices(shifted: NDArray, cells: NDArray, algebra: Algebra) -> NDArray:
    """Row-times-matrix product: ``out[..., j] = Σ_i shifted[..., i] ⊗ cells[..., i, j]``."""
    return hamilton(shifted[..., :, None, :, :], cells, algebra).sum(axis=-4)


def nested_forward(
    store: EmbeddingStore, heads: NDArray, rels: NDArray, tails: NDArray
) -> NestedForward:
    """Score nested triples from (n, 3) head ids, (n,) relation ids and (n, 3) tail ids."""
    rels = np.asarray(rels, dtype=np.intp).reshape(-1)
    shifted = triple_matrices(store, heads) + store.nested_translation[rels]
    cells = normalize_cells(store.nested_rotation[rels], store.cell_norm, store.eps)
    rotated = rotate_matrices(shifted, cells, store.algebra)
    tail = triple_matrices(store, tails)
    scores = np.sum(rotated * tail, axis=(-3, -2, -1))
    return NestedForward(shifted, cells, rotated, tail, scores)


def nested_arrays(triples: Sequence[NestedTriple]) -> tuple[NDArray, NDArray, NDArray]:
    """Split nested triples into head (n, 3), relation (n,) and tail (n, 3) id arrays."""
    if not triples:
        empty = np.zeros((0, 3), dtype=np.intp)
        return empty, np.zeros(0, dtype=np.intp), empty.copy()
    rows = np.asarray([nt.as_row() for nt in triples], dtype=np.intp)
    return rows[:, 0:3], rows[:, 3], rows[:, 4:7]


# -------- single-triple operations --------


def score_atomic(store: EmbeddingStore, triple: AtomicTriple) -> float:
    """``<(h + r_b) ⊗ norm(r_θ), t>`` under the store's algebra."""
    h, r, t = triple
    _check_id(h, store.num_entities, "entity")
    _check_id(t, store.num_entities, "entity")
    _check_id(r, store.num_relations, "relation")
    return float(atomic_forward(store, np.array([triple])).scores[0])


def triple_embedding(store: EmbeddingStore, triple: AtomicTriple) -> TripleEmbedding:
    """The 1x3 matrix ``[E[h], r_θ, E[t]]``; the relation column is the raw rotation."""
    h, r, t = triple
    _check_id(h, store.num_entities, "entity")
    _check_id(t, store.num_entities, "entity")
    _check_id(r, store.num_relations, "relation")
    return TripleEmbedding(triple_matrices(store, np.array([triple]))[0])


def rotate_triple(
    T: TripleEmbedding,
    nrel: NestedRelationEmbedding,
    alg: Algebra | str,
    cell_norm: str = "unit",
    eps: float = DEFAULT_EPS,
) -> TripleEmbedding:
    """Translate each column by its ``R_b`` cell, then multiply by the normalized rotation grid."""
    if T.d != nrel.d:
        raise ContractError(f"dimension mismatch: {T.d} != {nrel.d}")
    cells = normalize_cells(nrel.rotation, cell_norm, eps)
    return TripleEmbedding(rotate_matrices(T.data + nrel.translation, cells, Algebra.parse(alg)))


def score_nested(store: EmbeddingStore, nt: NestedTriple) -> float:
    """Matrix inner product of the rotated head triple and the tail triple."""
    _check_id(nt.rel, store.num_nested_relations, "nested relation")
    for side in (nt.head, nt.tail):
        _check_id(side.h, store.num_entities, "entity")
        _check_id(side.t, store.num_entities, "entity")
        _check_id(side.r, store.num_relations, "relation")
    heads, rels, tails = nested_arrays([nt])
    return float(nested_forward(store, heads, rels, tails).scores[0])


# -------- checkpoints --------


def save_checkpoint(store: EmbeddingStore, path: str | Path) -> None:
    """Write ``store`` as a versioned, byte-deterministic checkpoint.

    Layout: a magic/version line, one JSON header line (sorted keys), then
    the parameter blocks as consecutive ``.npy`` records.
    """
    header = {
        "algebra": store.algebra.value,
        "dim": store.dim,
        "dtype": store.dtype.name,
        "translation": store.translation,
        "cell_norm": store.cell_norm,
        "eps": store.eps,
        "blocks": list(PARAMETER_BLOCKS),
        "entities": list(store.entity_names),
        "relations": list(store.relation_names),
        "nested_relations": list(store.nested_relation_names),
    }
    buffer = io.BytesIO()
    buffer.write(CHECKPOINT_MAGIC + b" " + str(CHECKPOINT_VERSION).encode("ascii") + b"\n")
    buffer.write(json.dumps(header, sort_keys=True, ensure_ascii=True).encode("ascii") + b"\n")
    for name in PARAMETER_BLOCKS:
        np.save(buffer, np.ascontiguousarray(store.block(name)), allow_pickle=False)
    Path(path).write_bytes(buffer.getvalue())
    logger.info("wrote checkpoint %s", path)


def load_checkpoint(path: str | Path) -> EmbeddingStore:
    """Read a checkpoint written by ``save_checkpoint``.

    Raises:
        CheckpointError: bad magic, unsupported version or inconsistent blocks
    """
    buffer = io.BytesIO(Path(path).read_bytes())
    magic_line = buffer.readline().rstrip(b"\n")
    magic, _, version = magic_line.partition(b" ")
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a neste checkpoint")
    if version != str(CHECKPOINT_VERSION).encode("ascii"):
        raise CheckpointError(f"{path}: unsupported checkpoint version {version!r}")
    try:
        header = json.loads(buffer.readline().decode("ascii"))
        blocks = {name: np.load(buffer, allow_pickle=False) for name in header["blocks"]}
        store = EmbeddingStore(
            **{name: blocks[name] for name in PARAMETER_BLOCKS},
            algebra=Algebra.parse(header["algebra"]),
            translation=bool(header["translation"]),
            cell_norm=header["cell_norm"],
            eps=float(header["eps"]),
            entity_names=tuple(header["entities"]),
            relation_names=tuple(header["relations"]),
            nested_relation_names=tuple(header["nested_relations"]),
        )
    except (KeyError, ValueError, UnicodeDecodeError) as e:
        raise CheckpointError(f"{path}: malformed checkpoint ({e})") from e
    if store.dim != header["dim"]:
        raise CheckpointError(f"{path}: header dim {header['dim']} != stored {store.dim}")
    return store
