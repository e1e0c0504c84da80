"""In-memory nested factual knowledge graphs and their text file formats.

Atomic and augmented files hold one ``head relation tail`` record per line;
nested files hold ``h1 r1 t1 nested_relation h2 r2 t2``. Fields are
whitespace separated, blank lines and ``#`` comments are skipped.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple, Optional, Sequence

import numpy as np

from .errors import ContractError, GraphParseError, LoadIssue, NameResolutionError
from .tables import COMPOSITE_SEPARATOR

logger = logging.getLogger(__name__)

SPLITS: tuple[str, ...] = ("train", "valid", "test")


class AtomicTriple(NamedTuple):
    h: int
    r: int
    t: int


class NestedTriple(NamedTuple):
    head: AtomicTriple
    rel: int
    tail: AtomicTriple

    def as_row(self) -> tuple[int, ...]:
        """The seven ids in file order."""
        return (*self.head, self.rel, *self.tail)


class SymbolTable:
    """Dense 0-based ids for external names."""

    def __init__(self, names: Iterable[str] = ()) -> None:
        self._names: list[str] = []
        self._index: dict[str, int] = {}
        for name in names:
            self.add(name)

    def add(self, name: str) -> int:
        """Return the id of ``name``, registering it if new."""
        idx = self._index.get(name)
        if idx is None:
            idx = len(self._names)
            self._names.append(name)
            self._index[name] = idx
        return idx

    def id_of(self, name: str) -> int:
        return self._index[name]

    def name_of(self, idx: int) -> str:
        return self._names[idx]

    def get(self, name: str) -> Optional[int]:
        return self._index.get(name)

    def copy(self) -> "SymbolTable":
        return SymbolTable(self._names)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(self._names)

    def __contains__(self, name: object) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self._names)

    def __iter__(self) -> Iterator[str]:
        return iter(self._names)

    def __repr__(self) -> str:
        return f"SymbolTable(size={len(self)})"


@dataclass(frozen=True)
class GraphStats:
    """Graph size in the published benchmark format."""

    entities: int
    relations: int
    atomic_triples: int
    nested_relations: int
    nested_triples: int
    involved_triples: int

    def to_dict(self) -> dict[str, int]:
        return {
            "entities": self.entities,
            "relations": self.relations,
            "atomic_triples": self.atomic_triples,
            "nested_relations": self.nested_relations,
            "nested_triples": self.nested_triples,
            "involved_triples": self.involved_triples,
        }


@dataclass(frozen=True)
class NestedGraph:
    """Entities, atomic and nested relations, their split triples and
    optional augmented triples.

    ``num_base_relations`` counts atomic relations read from atomic files;
    ids at or above it belong to relations first seen in nested or
    augmented files (composites of random walks among them).
    """

    entities: SymbolTable
    atomic_relations: SymbolTable
    nested_relations: SymbolTable
    atomic_train: tuple[AtomicTriple, ...] = ()
    atomic_valid: tuple[AtomicTriple, ...] = ()
    atomic_test: tuple[AtomicTriple, ...] = ()
    nested_train: tuple[NestedTriple, ...] = ()
    nested_valid: tuple[NestedTriple, ...] = ()
    nested_test: tuple[NestedTriple, ...] = ()
    augmented: tuple[AtomicTriple, ...] = ()
    num_base_relations: int = 0
    issues: tuple[LoadIssue, ...] = field(default=(), compare=False)

    def atomic_split(self, name: str) -> tuple[AtomicTriple, ...]:
        _check_split(name)
        return getattr(self, f"atomic_{name}")

    def nested_split(self, name: str) -> tuple[NestedTriple, ...]:
        _check_split(name)
        return getattr(self, f"nested_{name}")

    @property
    def all_atomic(self) -> tuple[AtomicTriple, ...]:
        """Union of the atomic splits (augmented triples excluded)."""
        return self.atomic_train + self.atomic_valid + self.atomic_test

    @property
    def all_nested(self) -> tuple[NestedTriple, ...]:
        return self.nested_train + self.nested_valid + self.nested_test

    @cached_property
    def involved_triples(self) -> tuple[AtomicTriple, ...]:
        """Deduplicated heads and tails of all nested triples, in first-seen order."""
        seen: dict[AtomicTriple, None] = {}
        for nt in self.all_nested:
            seen.setdefault(nt.head)
            seen.setdefault(nt.tail)
        return tuple(seen)

    @cached_property
    def involved_index(self) -> dict[AtomicTriple, int]:
        return {triple: i for i, triple in enumerate(self.involved_triples)}

    @cached_property
    def known_atomic(self) -> frozenset[AtomicTriple]:
        return frozenset(self.all_atomic)

    @cached_property
    def known_nested(self) -> frozenset[NestedTriple]:
        return frozenset(self.all_nested)

    def stats(self) -> GraphStats:
        return GraphStats(
            entities=len(self.entities),
            relations=self.num_base_relations,
            atomic_triples=len(self.all_atomic),
            nested_relations=len(self.nested_relations),
            nested_triples=len(self.all_nested),
            involved_triples=len(self.involved_triples),
        )

    def with_augmented(self, triples: Sequence[AtomicTriple]) -> "NestedGraph":
        """Return a copy carrying ``triples`` as its augmented set."""
        return replace(self, augmented=tuple(dict.fromkeys(triples)))

    def __repr__(self) -> str:
        s = self.stats()
        return (
            f"NestedGraph(entities={s.entities}, relations={s.relations}, "
            f"atomic={s.atomic_triples}, nested={s.nested_triples})"
        )


def _check_split(name: str) -> None:
    if name not in SPLITS:
        raise ContractError(f"Unknown split '{name}'. Use one of {', '.join(SPLITS)}.")


# -------- parsing --------


def _read_records(path: Path, width: int) -> Iterator[tuple[int, list[str]]]:
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split()
            if len(fields) != width:
                raise GraphParseError(
                    str(path),
                    line_no,
                    f"expected {width} fields, found {len(fields)}",
                )
            yield line_no, fields


def read_records(path: str | Path, width: int) -> list[tuple[str, ...]]:
    """Raw name records of a triple file (3 fields atomic, 7 nested), in file order."""
    return [tuple(fields) for _, fields in _read_records(Path(path), width)]


class _GraphBuilder:
    """Accumulates symbol tables, triples and issues while files are read."""

    def __init__(
        self,
        strict: bool,
        entities: Optional[SymbolTable],
        atomic_relations: Optional[SymbolTable],
        nested_relations: Optional[SymbolTable],
    ) -> None:
        self.strict = strict
        self.entities = entities if entities is not None else SymbolTable()
        self.atomic_relations = (
            atomic_relations if atomic_relations is not None else SymbolTable()
        )
        self.nested_relations = (
            nested_relations if nested_relations is not None else SymbolTable()
        )
        self.issues: list[LoadIssue] = []

    def issue(self, path: Path, message: str, line: Optional[int], kind: str) -> None:
        found = LoadIssue(path=str(path), message=message, line=line, kind=kind)
        logger.warning("%s", found)
        self.issues.append(found)

    def resolve(
        self, table: SymbolTable, name: str, what: str, path: Path, line: int
    ) -> int:
        idx = table.get(name)
        if idx is not None:
            return idx
        if self.strict:
            raise NameResolutionError(str(path), line, f"unknown {what} '{name}'")
        self.issue(path, f"registered new {what} '{name}'", line, "registered-name")
        return table.add(name)

    def read_atomic(self, paths: Sequence[Path]) -> list[tuple[AtomicTriple, ...]]:
        splits: list[tuple[AtomicTriple, ...]] = []
        seen: set[AtomicTriple] = set()
        for path in paths:
            kept: dict[AtomicTriple, None] = {}
            for line_no, (h, r, t) in _read_records(path, 3):
                triple = AtomicTriple(
                    self.entities.add(h), self.atomic_relations.add(r), self.entities.add(t)
                )
                if triple in kept:
                    self.issue(path, "duplicate triple dropped", line_no, "duplicate")
                    continue
                if triple in seen:
                    self.issue(
                        path, "triple already in an earlier split", line_no, "cross-split"
                    )
                    continue
                kept[triple] = None
            seen.update(kept)
            splits.append(tuple(kept))
        return splits

    def read_nested(
        self, paths: Sequence[Path], known: frozenset[AtomicTriple]
    ) -> list[tuple[NestedTriple, ...]]:
        splits: list[tuple[NestedTriple, ...]] = []
        seen: set[NestedTriple] = set()
        for path in paths:
            kept: dict[NestedTriple, None] = {}
            for line_no, fields in _read_records(path, 7):
                head = self._atomic(fields[0:3], path, line_no)
                tail = self._atomic(fields[4:7], path, line_no)
                rel = self.nested_relations.add(fields[3])
                if self.strict:
                    for side in (head, tail):
                        if side not in known:
                            raise NameResolutionError(
                                str(path), line_no, "quoted triple is not an atomic fact"
                            )
                nt = NestedTriple(head, rel, tail)
                if nt in kept:
                    self.issue(path, "duplicate nested triple dropped", line_no, "duplicate")
                    continue
                if nt in seen:
                    self.issue(
                        path, "nested triple already in an earlier split", line_no, "cross-split"
                    )
                    continue
                kept[nt] = None
            seen.update(kept)
            splits.append(tuple(kept))
        return splits

    def read_augmented(self, path: Path) -> tuple[AtomicTriple, ...]:
        kept: dict[AtomicTriple, None] = {}
        for line_no, (h, r, t) in _read_records(path, 3):
            triple = AtomicTriple(
                self.resolve(self.entities, h, "entity", path, line_no),
                self._augmented_relation(r, path, line_no),
                self.resolve(self.entities, t, "entity", path, line_no),
            )
            kept.setdefault(triple)
        return tuple(kept)

    def _augmented_relation(self, name: str, path: Path, line_no: int) -> int:
        """Composites of known relations register silently; other names resolve as usual."""
        parts = name.split(COMPOSITE_SEPARATOR)
        if len(parts) > 1 and all(part in self.atomic_relations for part in parts):
            return self.atomic_relations.add(name)
        return self.resolve(self.atomic_relations, name, "relation", path, line_no)

    def _atomic(self, fields: Sequence[str], path: Path, line_no: int) -> AtomicTriple:
        h, r, t = fields
        return AtomicTriple(
            self.resolve(self.entities, h, "entity", path, line_no),
            self.resolve(self.atomic_relations, r, "relation", path, line_no),
            self.resolve(self.entities, t, "entity", path, line_no),
        )


def load_graph(
    atomic_paths: Sequence[str | Path],
    nested_paths: Sequence[str | Path],
    augmented_path: Optional[str | Path] = None,
    strict: bool = False,
    entities: Optional[SymbolTable] = None,
    atomic_relations: Optional[SymbolTable] = None,
    nested_relations: Optional[SymbolTable] = None,
) -> NestedGraph:
    """Read a nested factual KG from its train/valid/test files.

    Args:
        atomic_paths: train, valid and test atomic files
        nested_paths: train, valid and test nested files
        augmented_path: Optional file of precomputed augmented triples
        strict: If True, names in nested/augmented files that never occur in
                an atomic file, and quoted triples that are not atomic facts,
                raise NameResolutionError instead of being registered
        entities, atomic_relations, nested_relations: Optional symbol tables
                to seed ids from (e.g. the tables stored in a checkpoint)

    Raises:
        GraphParseError: a line has the wrong number of fields
        NameResolutionError: an unknown name in strict mode
    """
    if len(atomic_paths) != 3 or len(nested_paths) != 3:
        raise ContractError("expected three atomic and three nested paths")
    builder = _GraphBuilder(strict, entities, atomic_relations, nested_relations)
    atomic = builder.read_atomic([Path(p) for p in atomic_paths])
    num_base = len(builder.atomic_relations)
    known = frozenset(t for split in atomic for t in split)
    nested = builder.read_nested([Path(p) for p in nested_paths], known)
    augmented: tuple[AtomicTriple, ...] = ()
    if augmented_path is not None:
        augmented = builder.read_augmented(Path(augmented_path))

    graph = NestedGraph(
        entities=builder.entities,
        atomic_relations=builder.atomic_relations,
        nested_relations=builder.nested_relations,
        atomic_train=atomic[0],
        atomic_valid=atomic[1],
        atomic_test=atomic[2],
        nested_train=nested[0],
        nested_valid=nested[1],
        nested_test=nested[2],
        augmented=augmented,
        num_base_relations=num_base,
        issues=tuple(builder.issues),
    )
    logger.info("loaded %r", graph)
    return graph


# -------- writing --------


def _atomic_line(g: NestedGraph, t: AtomicTriple) -> str:
    return (
        f"{g.entities.name_of(t.h)}\t{g.atomic_relations.name_of(t.r)}\t"
        f"{g.entities.name_of(t.t)}"
    )


def _nested_line(g: NestedGraph, nt: NestedTriple) -> str:
    return (
        f"{_atomic_line(g, nt.head)}\t{g.nested_relations.name_of(nt.rel)}\t"
        f"{_atomic_line(g, nt.tail)}"
    )


def write_atomic(g: NestedGraph, triples: Iterable[AtomicTriple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for t in triples:
            fh.write(_atomic_line(g, t) + "\n")


def write_nested(g: NestedGraph, triples: Iterable[NestedTriple], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for nt in triples:
            fh.write(_nested_line(g, nt) + "\n")


def save_graph(g: NestedGraph, directory: str | Path) -> dict[str, Path]:
    """Write every split (and augmented triples, if any) as text files.

    Returns the written paths keyed by role, e.g. ``"atomic_train"``.
    """
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    for split in SPLITS:
        path = out / f"atomic_{split}.txt"
        write_atomic(g, g.atomic_split(split), path)
        written[f"atomic_{split}"] = path
    for split in SPLITS:
        path = out / f"nested_{split}.txt"
        write_nested(g, g.nested_split(split), path)
        written[f"nested_{split}"] = path
    if g.augmented:
        path = out / "augmented.txt"
        write_atomic(g, g.augmented, path)
        written["augmented"] = path
    return written


# -------- splitting and augmentation --------


def split_triples(
    triples: Sequence, seed: int, ratios: tuple[int, int, int] = (8, 1, 1)
) -> tuple[tuple, tuple, tuple]:
    """Shuffle ``triples`` with ``seed`` and cut them into train/valid/test."""
    if len(ratios) != 3 or min(ratios) < 0 or sum(ratios) == 0:
        raise ContractError(f"invalid split ratios {ratios}")
    items = list(dict.fromkeys(triples))
    order = np.random.default_rng(seed).permutation(len(items))
    total = sum(ratios)
    n_valid = len(items) * ratios[1] // total
    n_test = len(items) * ratios[2] // total
    n_train = len(items) - n_valid - n_test
    shuffled = [items[i] for i in order]
    return (
        tuple(shuffled[:n_train]),
        tuple(shuffled[n_train : n_train + n_valid]),
        tuple(shuffled[n_train + n_valid :]),
    )


def augment_by_random_walk(
    g: NestedGraph,
    samples_per_entity: int,
    seed: int,
    walk_length: int = 2,
    relations: Optional[SymbolTable] = None,
) -> list[AtomicTriple]:
    """Compose length-2 walks over atomic train triples into new triples.

    For every entity with outgoing edges, ``samples_per_entity`` walks
    e1 -r1-> e2 -r2-> e3 are drawn; each yields (e1, r1∘r2, e3). Composite
    relations get fresh ids appended to ``relations``, a copy of
    ``g.atomic_relations`` by default; ``g`` itself is never modified. Walks
    that reach an entity without outgoing edges are skipped.
    """
    if walk_length != 2:
        raise ContractError("only length-2 random walks are supported")
    if samples_per_entity < 0:
        raise ContractError("samples_per_entity must be non-negative")
    if relations is None:
        relations = g.atomic_relations.copy()

    outgoing: dict[int, list[tuple[int, int]]] = {}
    for h, r, t in g.atomic_train:
        outgoing.setdefault(h, []).append((r, t))

    rng = np.random.default_rng(seed)
    composites: dict[tuple[int, int], int] = {}
    emitted: dict[AtomicTriple, None] = {}
    for e1 in range(len(g.entities)):
        first = outgoing.get(e1)
        if not first:
            continue
        for _ in range(samples_per_entity):
            r1, e2 = first[rng.integers(len(first))]
            second = outgoing.get(e2)
            if not second:
                continue
            r2, e3 = second[rng.integers(len(second))]
            rel = composites.get((r1, r2))
            if rel is None:
                name = (
                    f"{relations.name_of(r1)}{COMPOSITE_SEPARATOR}"
                    f"{relations.name_of(r2)}"
                )
                rel = relations.add(name)
                composites[(r1, r2)] = rel
            emitted.setdefault(AtomicTriple(e1, rel, e3))
    logger.info(
        "random walks produced %d augmented triples over %d composite relations",
        len(emitted),
        len(composites),
    )
    return list(emitted)


def augment_graph(g: NestedGraph, samples_per_entity: int, seed: int) -> NestedGraph:
    """Return a copy of ``g`` carrying random-walk triples and their composite relations."""
    relations = g.atomic_relations.copy()
    triples = augment_by_random_walk(g, samples_per_entity, seed, relations=relations)
    return replace(g.with_augmented(triples), atomic_relations=relations)


def nested_index_array(g: NestedGraph, triples: Sequence[NestedTriple]) -> np.ndarray:
    """Rows ``(head, rel, tail)`` with both sides as indices into ``g.involved_triples``."""
    index = g.involved_index
    try:
        rows = [(index[nt.head], nt.rel, index[nt.tail]) for nt in triples]
    except KeyError as e:
        raise ContractError(f"atomic triple {e.args[0]} is not an involved triple") from None
    if not rows:
        return np.zeros((0, 3), dtype=np.intp)
    return np.asarray(rows, dtype=np.intp)
