"""Logical patterns of nested relations and their rotation-matrix constructions.

A pattern is a body triple and a head triple over slot names (see
``tables.PATTERN_TEMPLATES``). Free slots are sampled on every trial; bound
slots (relations and named entities) are fixed by constraints. A
construction is a 3x3 cell grid that maps every body triple embedding onto
its head triple embedding:

- a free head slot copies the body column holding the same slot (cell = 1)
- a bound relation cell solves ``body_rel ⊗ X = head_rel``
- a bound entity cell solves ``body_entity ⊗ X = head_entity``
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np
from numpy.typing import NDArray

from .errors import ContractError, InfeasiblePatternError
from .hypercomplex import (
    DEFAULT_EPS,
    Algebra,
    Hyper4Vector,
    hamilton,
    inner_product,
    right_multiplication_matrix,
    solve_left,
    unit_normalize,
)
from .scoring import EmbeddingStore, NestedRelationEmbedding, normalize_cells, rotate_matrices
from .tables import (
    BIDIRECTIONAL_PATTERNS,
    PATTERN_FREE_SLOTS,
    PATTERN_TEMPLATES,
    SIDED_PATTERNS,
)

logger = logging.getLogger(__name__)

TOLERANCE = 1e-9
SIDES: tuple[str, ...] = ("head", "tail")


class PatternKind(str, Enum):
    R_SYMMETRY = "r_symmetry"
    R_INVERSE = "r_inverse"
    R_IMPLICATION = "r_implication"
    R_INV_IMPLICATION = "r_inv_implication"
    E_IMPLICATION = "e_implication"
    E_R_IMPLICATION = "e_r_implication"
    E_R_INV_IMPLICATION = "e_r_inv_implication"
    DUAL_E_IMPLICATION = "dual_e_implication"


@dataclass(frozen=True)
class PatternSpec:
    """A pattern kind, plus ``side`` ("head"/"tail") for the entity families."""

    kind: PatternKind
    side: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", PatternKind(self.kind))
        sided = self.kind.value in SIDED_PATTERNS
        if sided and self.side not in SIDES:
            raise ContractError(f"{self.kind.value} needs side 'head' or 'tail'")
        if not sided and self.side is not None:
            raise ContractError(f"{self.kind.value} has no side variants")

    @property
    def key(self) -> tuple[str, Optional[str]]:
        return (self.kind.value, self.side)

    @property
    def body(self) -> tuple[str, str, str]:
        return PATTERN_TEMPLATES[self.key][0]

    @property
    def head(self) -> tuple[str, str, str]:
        return PATTERN_TEMPLATES[self.key][1]

    @property
    def free_slots(self) -> frozenset[str]:
        return PATTERN_FREE_SLOTS[self.key]

    @property
    def bound_slots(self) -> frozenset[str]:
        return frozenset(self.body + self.head) - self.free_slots

    @property
    def bidirectional(self) -> bool:
        return self.kind.value in BIDIRECTIONAL_PATTERNS

    @property
    def name(self) -> str:
        return self.kind.value if self.side is None else f"{self.kind.value}[{self.side}]"


def all_pattern_specs() -> list[PatternSpec]:
    """Every kind, with both sides of the entity families."""
    return [PatternSpec(PatternKind(kind), side) for kind, side in PATTERN_TEMPLATES]


def _is_relation_slot(slot: str) -> bool:
    return slot.startswith("r")


# -------- constructions --------


def _solve_cell(a: Hyper4Vector, b: Hyper4Vector, alg: Algebra, what: str) -> NDArray:
    try:
        return solve_left(a.data, b.data, alg)
    except ContractError:
        raise InfeasiblePatternError(
            f"{what}: no cell X with a ⊗ X = b under algebra {alg.value}"
        ) from None


def construct_matrix(
    spec: PatternSpec,
    constraints: Mapping[str, Hyper4Vector],
    alg: Algebra | str,
    cell_norm: str = "unit",
    eps: float = DEFAULT_EPS,
) -> NestedRelationEmbedding:
    """Solve the rotation grid of ``spec`` for the bound slot values.

    Raises:
        InfeasiblePatternError: a cell has no exact solution, would be
            changed by cell normalization, or (for two-way patterns) the head
            relation does not map back onto the body relation
    """
    alg = Algebra.parse(alg)
    missing = sorted(spec.bound_slots - set(constraints))
    if missing:
        raise ContractError(f"{spec.name}: missing constraints for {', '.join(missing)}")
    dims = {v.d for v in constraints.values()}
    if len(dims) != 1:
        raise ContractError(f"{spec.name}: constraint dimensions differ")
    d = dims.pop()

    body, head = spec.body, spec.head
    rotation = np.zeros((3, 3, 4, d))
    for j, slot in enumerate(head):
        if slot in spec.free_slots:
            rotation[body.index(slot), j] = Hyper4Vector.identity(d).data
        elif _is_relation_slot(slot):
            rotation[1, j] = _solve_cell(
                constraints[body[1]], constraints[slot], alg, f"{spec.name} relation cell"
            )
        else:
            i = _entity_source(spec, j)
            rotation[i, j] = _solve_cell(
                constraints[body[i]], constraints[slot], alg, f"{spec.name} entity cell ({i}, {j})"
            )

    if np.max(np.abs(normalize_cells(rotation, cell_norm, eps) - rotation)) > TOLERANCE:
        raise InfeasiblePatternError(
            f"{spec.name}: solved cells do not survive '{cell_norm}' normalization"
        )
    if spec.bidirectional:
        back = hamilton(constraints[head[1]].data, rotation[1, 1], alg)
        if np.max(np.abs(back - constraints[body[1]].data)) > TOLERANCE:
            raise InfeasiblePatternError(
                f"{spec.name}: the relation cell does not map the head relation back"
            )
    return NestedRelationEmbedding(rotation, np.zeros((3, 4, d)))


def _entity_source(spec: PatternSpec, j: int) -> int:
    """Body column a bound head entity is derived from."""
    bound = [
        i
        for i, slot in enumerate(spec.body)
        if i != 1 and slot not in spec.free_slots
    ]
    if not bound:
        raise ContractError(f"{spec.name}: no bound body entity for head column {j}")
    return j if j in bound else bound[0]


# -------- verification --------


@dataclass(frozen=True)
class PatternVerdict:
    passed: bool
    deviation: float


def _slot_arrays(
    spec: PatternSpec,
    constraints: Mapping[str, Hyper4Vector],
    trials: int,
    rng: np.random.Generator,
    d: int,
) -> dict[str, NDArray]:
    values = {
        slot: np.broadcast_to(value.data, (trials, 4, d)) for slot, value in constraints.items()
    }
    for slot in sorted(spec.free_slots):
        values[slot] = rng.normal(size=(trials, 4, d))
    return values


def _triple(values: Mapping[str, NDArray], slots: Sequence[str]) -> NDArray:
    return np.stack([values[s] for s in slots], axis=1)


def verify_pattern(
    spec: PatternSpec,
    matrix: NestedRelationEmbedding,
    trials: int,
    rng: np.random.Generator,
    alg: Algebra | str,
    constraints: Optional[Mapping[str, Hyper4Vector]] = None,
    cell_norm: str = "unit",
    eps: float = DEFAULT_EPS,
    tolerance: float = TOLERANCE,
) -> PatternVerdict:
    """Rotate random body triples and measure the distance to their heads.

    Free slots get fresh Gaussian values on each trial; two-way patterns are
    also checked from head to body.
    """
    if trials < 1:
        raise ContractError(f"trials must be at least 1, got {trials}")
    alg = Algebra.parse(alg)
    constraints = dict(constraints or {})
    missing = spec.bound_slots - set(constraints)
    if missing:
        raise ContractError(f"{spec.name}: missing constraints for {', '.join(sorted(missing))}")
    values = _slot_arrays(spec, constraints, trials, rng, matrix.d)
    cells = normalize_cells(matrix.rotation, cell_norm, eps)

    directions = [(spec.body, spec.head)]
    if spec.bidirectional:
        directions.append((spec.head, spec.body))
    deviation = 0.0
    for source, target in directions:
        shifted = _triple(values, source) + matrix.translation
        rotated = rotate_matrices(shifted, cells, alg)
        deviation = max(deviation, float(np.max(np.abs(rotated - _triple(values, target)))))
    return PatternVerdict(passed=deviation <= tolerance, deviation=deviation)


def verify_dual_e_implication(
    matrix: NestedRelationEmbedding,
    constraints: Mapping[str, Hyper4Vector],
    trials: int,
    rng: np.random.Generator,
    alg: Algebra | str,
    cell_norm: str = "unit",
    eps: float = DEFAULT_EPS,
) -> PatternVerdict:
    """Check the dual construction as a head-entity and a tail-entity implication.

    Each half keeps its own entity cell and sets the other one to identity.
    """
    d = matrix.d
    halves = (
        (PatternSpec(PatternKind.E_IMPLICATION, "head"), 2, {"x1": "x1", "x2": "y1"}),
        (PatternSpec(PatternKind.E_IMPLICATION, "tail"), 0, {"y1": "x2", "y2": "y2"}),
    )
    verdicts = [verify_pattern(
        PatternSpec(PatternKind.DUAL_E_IMPLICATION), matrix, trials, rng, alg, constraints,
        cell_norm, eps,
    )]
    for spec, reset, renames in halves:
        rotation = matrix.rotation.copy()
        rotation[reset, reset] = Hyper4Vector.identity(d).data
        sub = NestedRelationEmbedding(rotation, matrix.translation)
        sub_constraints = {new: constraints[old] for new, old in renames.items()}
        sub_constraints["r"] = Hyper4Vector.random(d, rng)
        verdicts.append(
            verify_pattern(spec, sub, trials, rng, alg, sub_constraints, cell_norm, eps)
        )
    return PatternVerdict(
        passed=all(v.passed for v in verdicts),
        deviation=max(v.deviation for v in verdicts),
    )


# -------- satisfiable instances --------


def random_unit(rng: np.random.Generator, d: int) -> Hyper4Vector:
    return Hyper4Vector(unit_normalize(rng.normal(size=(4, d))))


def sample_constraints(
    spec: PatternSpec, alg: Algebra | str, rng: np.random.Generator, d: int = 4
) -> dict[str, Hyper4Vector]:
    """Draw bound slot values for which ``spec`` has an exact construction.

    Body values are random; each bound head value is its body source times a
    random unit cell (``-1`` for the inverse relation, so that the cell maps
    both ways).
    """
    alg = Algebra.parse(alg)
    body, head = spec.body, spec.head
    values: dict[str, Hyper4Vector] = {}
    for slot in body:
        if slot not in spec.free_slots and slot not in values:
            values[slot] = Hyper4Vector.random(d, rng)
    for j, slot in enumerate(head):
        if slot in spec.free_slots or slot in values:
            continue
        source = values[body[1]] if _is_relation_slot(slot) else values[body[_entity_source(spec, j)]]
        if spec.kind is PatternKind.R_INVERSE:
            values[slot] = Hyper4Vector(-source.data)
        else:
            values[slot] = Hyper4Vector(hamilton(source.data, random_unit(rng, d).data, alg))
    return values


# -------- first-order witnesses --------


def _restricted(rng: np.random.Generator, shape: tuple[int, ...]) -> NDArray:
    """Random values with the j and k channels zeroed."""
    out = rng.normal(size=shape)
    out[..., 2:, :] = 0.0
    return out


def _atomic_scores(h: NDArray, rotation: NDArray, t: NDArray, alg: Algebra) -> NDArray:
    return inner_product(hamilton(h, unit_normalize(rotation), alg), t)


def _solve_transposed(rotation: NDArray, alg: Algebra) -> NDArray:
    """Restricted rotation whose right-multiplication block is the transpose of ``rotation``'s."""
    target = np.swapaxes(right_multiplication_matrix(rotation, alg)[..., :2, :2], -1, -2)
    basis = np.eye(4)[:2, :, None]  # real and i units, d=1
    columns = [right_multiplication_matrix(b, alg)[0, :2, :2].reshape(-1) for b in basis]
    design = np.stack(columns, axis=1)
    out = np.zeros_like(rotation)
    for k in range(rotation.shape[-1]):
        coef, *_ = np.linalg.lstsq(design, target[k].reshape(-1), rcond=None)
        out[:2, k] = coef
    return out


def first_order_witnesses(
    alg: Algebra | str, rng: np.random.Generator, trials: int = 100, d: int = 4
) -> dict[str, float]:
    """Max deviation of each atomic-level witness on random restricted entities.

    symmetry        r = 1:             φ(h, r, t) = φ(t, r, h)
    anti_symmetry   r = i:             φ(h, r, t) = -φ(t, r, h)
    inversion       r2 transposes r1:  φ(h, r1, t) = φ(t, r2, h)
    composition     r3 = r1 ⊗ r2:      (h ⊗ r1) ⊗ r2 = h ⊗ r3 after normalization
    """
    alg = Algebra.parse(alg)
    h = _restricted(rng, (trials, 4, d))
    t = _restricted(rng, (trials, 4, d))
    one = Hyper4Vector.identity(d).data
    i_unit = np.zeros((4, d))
    i_unit[1] = 1.0

    r1 = unit_normalize(_restricted(rng, (4, d)))
    r2 = unit_normalize(_restricted(rng, (4, d)))
    r_inv = _solve_transposed(r1, alg)
    r3 = hamilton(r1, r2, alg)
    composed = hamilton(hamilton(h, r1, alg), r2, alg)

    return {
        "symmetry": float(np.max(np.abs(_atomic_scores(h, one, t, alg) - _atomic_scores(t, one, h, alg)))),
        "anti_symmetry": float(
            np.max(np.abs(_atomic_scores(h, i_unit, t, alg) + _atomic_scores(t, i_unit, h, alg)))
        ),
        "inversion": float(
            np.max(np.abs(_atomic_scores(h, r1, t, alg) - _atomic_scores(t, r_inv, h, alg)))
        ),
        "composition": float(np.max(np.abs(composed - hamilton(h, unit_normalize(r3), alg)))),
    }


# -------- the suite --------


@dataclass(frozen=True)
class PatternCheck:
    """One row of the pattern suite.

    ``required`` checks must match ``expected``; the others are reported only.
    """

    name: str
    algebra: str
    passed: bool
    deviation: float
    expected: bool = True
    required: bool = True

    @property
    def ok(self) -> bool:
        return self.passed == self.expected or not self.required

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "algebra": self.algebra,
            "passed": self.passed,
            "deviation": self.deviation,
            "expected": self.expected,
            "required": self.required,
        }


# Witnesses that need the complex-like (i² = -1) subalgebra.
_COMPLEX_ONLY_WITNESSES = frozenset({"anti_symmetry", "composition"})


def run_pattern_suite(
    algebras: Iterable[Algebra | str] = tuple(Algebra),
    trials: int = 100,
    seed: int = 0,
    d: int = 4,
    cell_norm: str = "unit",
) -> list[PatternCheck]:
    """Verify every construction, both negative controls and the witnesses."""
    rng = np.random.default_rng(seed)
    checks: list[PatternCheck] = []
    for alg in (Algebra.parse(a) for a in algebras):
        for spec in all_pattern_specs():
            constraints = sample_constraints(spec, alg, rng, d)
            try:
                matrix = construct_matrix(spec, constraints, alg, cell_norm)
            except InfeasiblePatternError as e:
                logger.warning("%s under %s: %s", spec.name, alg.value, e)
                checks.append(PatternCheck(spec.name, alg.value, False, float("inf")))
                continue
            if spec.kind is PatternKind.DUAL_E_IMPLICATION:
                verdict = verify_dual_e_implication(matrix, constraints, trials, rng, alg, cell_norm)
            else:
                verdict = verify_pattern(spec, matrix, trials, rng, alg, constraints, cell_norm)
            checks.append(PatternCheck(spec.name, alg.value, verdict.passed, verdict.deviation))

        # corrupted cell
        spec = PatternSpec(PatternKind.R_IMPLICATION)
        constraints = sample_constraints(spec, alg, rng, d)
        matrix = construct_matrix(spec, constraints, alg, cell_norm)
        rotation = matrix.rotation.copy()
        rotation[1, 1] = random_unit(rng, d).data
        corrupted = NestedRelationEmbedding(rotation, matrix.translation)
        verdict = verify_pattern(spec, corrupted, trials, rng, alg, constraints, cell_norm)
        checks.append(
            PatternCheck("corrupted_cell", alg.value, verdict.passed, verdict.deviation, expected=False)
        )

        # unrelated inverse relations
        spec = PatternSpec(PatternKind.R_INVERSE)
        unrelated = {"r1": random_unit(rng, d), "r2": Hyper4Vector(0.5 * random_unit(rng, d).data)}
        try:
            construct_matrix(spec, unrelated, alg, cell_norm)
            feasible = True
        except InfeasiblePatternError:
            feasible = False
        checks.append(PatternCheck("infeasible_inverse", alg.value, feasible, 0.0, expected=False))

        for name, deviation in first_order_witnesses(alg, rng, trials, d).items():
            required = not (name in _COMPLEX_ONLY_WITNESSES and alg is Algebra.H)
            checks.append(
                PatternCheck(
                    f"witness_{name}", alg.value, deviation <= TOLERANCE, deviation, required=required
                )
            )
    failed = [c for c in checks if not c.ok]
    logger.info("pattern suite: %d checks, %d unexpected", len(checks), len(failed))
    return checks


# -------- heatmaps --------

HEATMAP_COLUMNS: tuple[str, ...] = tuple(f"c{i}{j}" for i in range(1, 4) for j in range(1, 4))

# Cells that carry each planted pattern in a learned matrix.
HEATMAP_SHAPES: dict[str, tuple[tuple[int, int], ...]] = {
    "diagonal": ((0, 0), (1, 1), (2, 2)),
    "anti_diagonal": ((0, 2), (2, 0)),
}


def relation_heatmaps(store: EmbeddingStore) -> dict[str, NDArray]:
    """Mean over d of the real channel of each normalized rotation cell."""
    cells = normalize_cells(store.nested_rotation, store.cell_norm, store.eps)
    means = cells[..., 0, :].mean(axis=-1)
    names = store.nested_relation_names or tuple(str(i) for i in range(len(means)))
    return {name: means[i] for i, name in enumerate(names)}


def export_relation_heatmaps(store: EmbeddingStore, path: str | Path) -> dict[str, NDArray]:
    """Write one CSV row ``relation, c11 .. c33`` per nested relation."""
    heatmaps = relation_heatmaps(store)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("relation", *HEATMAP_COLUMNS))
        for name, matrix in heatmaps.items():
            writer.writerow((name, *(f"{v:.17g}" for v in matrix.reshape(-1))))
    return heatmaps


def read_heatmaps(path: str | Path) -> dict[str, NDArray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        return {
            row["relation"]: np.array([float(row[c]) for c in HEATMAP_COLUMNS]).reshape(3, 3)
            for row in reader
        }


def heatmap_matches(matrix: NDArray, shape: str, factor: float = 2.0) -> bool:
    """True when every pattern cell exceeds ``factor`` times the mean magnitude elsewhere."""
    cells = HEATMAP_SHAPES[shape]
    magnitude = np.abs(np.asarray(matrix))
    mask = np.zeros((3, 3), dtype=bool)
    for i, j in cells:
        mask[i, j] = True
    return bool(np.min(magnitude[mask]) > factor * np.mean(magnitude[~mask]))
