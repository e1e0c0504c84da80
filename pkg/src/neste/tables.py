"""Constant tables used across neste.

Basis multiplication rules for the three 4D algebras, quadratic-form
signatures, logical-pattern templates for nested relations, and a few
published dataset statistics used to validate loaders.
"""

# ============================================================================
# BASIS MULTIPLICATION RULES
# ============================================================================

BASIS_UNITS: tuple[str, ...] = ("1", "i", "j", "k")
"""Channel order of every hypercomplex array: real, i, j, k."""

# (left unit, right unit) -> (sign, resulting unit)
QUATERNION_PRODUCTS: dict[tuple[str, str], tuple[int, str]] = {
    ("1", "1"): (1, "1"),
    ("1", "i"): (1, "i"),
    ("1", "j"): (1, "j"),
    ("1", "k"): (1, "k"),
    ("i", "1"): (1, "i"),
    ("i", "i"): (-1, "1"),
    ("i", "j"): (1, "k"),
    ("i", "k"): (-1, "j"),
    ("j", "1"): (1, "j"),
    ("j", "i"): (-1, "k"),
    ("j", "j"): (-1, "1"),
    ("j", "k"): (1, "i"),
    ("k", "1"): (1, "k"),
    ("k", "i"): (1, "j"),
    ("k", "j"): (-1, "i"),
    ("k", "k"): (-1, "1"),
}
"""Spherical quaternions: i² = j² = k² = -1, ij = k = -ji, jk = i = -kj, ki = j = -ik."""

HYPERBOLIC_QUATERNION_PRODUCTS: dict[tuple[str, str], tuple[int, str]] = {
    **QUATERNION_PRODUCTS,
    ("i", "i"): (1, "1"),
    ("j", "j"): (1, "1"),
    ("k", "k"): (1, "1"),
}
"""Hyperbolic quaternions: i² = j² = k² = +1, imaginary units anti-commute."""

SPLIT_QUATERNION_PRODUCTS: dict[tuple[str, str], tuple[int, str]] = {
    **QUATERNION_PRODUCTS,
    ("j", "j"): (1, "1"),
    ("k", "k"): (1, "1"),
    ("j", "k"): (-1, "i"),
    ("k", "j"): (1, "i"),
}
"""Split quaternions: i² = -1, j² = k² = +1, ij = k = -ji, jk = -i = -kj, ki = j = -ik."""

BASIS_PRODUCTS: dict[str, dict[tuple[str, str], tuple[int, str]]] = {
    "Q": QUATERNION_PRODUCTS,
    "H": HYPERBOLIC_QUATERNION_PRODUCTS,
    "S": SPLIT_QUATERNION_PRODUCTS,
}

# Signs of s², x², y², z² in the level-set form of each algebra.
QUADRATIC_FORM_SIGNS: dict[str, tuple[int, int, int, int]] = {
    "Q": (1, 1, 1, 1),  # hypersphere
    "H": (1, -1, -1, -1),  # Lorentz model
    "S": (1, 1, -1, -1),  # pseudo-hyperboloid
}

# Form that is multiplicative under the Hamilton product (None: no such form).
MULTIPLICATIVE_FORM: dict[str, str | None] = {
    "Q": "Q",
    "H": None,
    "S": "S",
}

# ============================================================================
# NESTED LOGICAL PATTERNS
# ============================================================================

# (kind, side) -> (body triple slots, head triple slots). Side distinguishes
# the head-entity and tail-entity variants of the entity families.
PATTERN_TEMPLATES: dict[tuple[str, str | None], tuple[tuple[str, str, str], ...]] = {
    ("r_symmetry", None): (("x", "r", "y"), ("y", "r", "x")),
    ("r_inverse", None): (("x", "r1", "y"), ("y", "r2", "x")),
    ("r_implication", None): (("x", "r1", "y"), ("x", "r2", "y")),
    ("r_inv_implication", None): (("x", "r1", "y"), ("y", "r2", "x")),
    ("e_implication", "head"): (("x1", "r", "y"), ("x2", "r", "y")),
    ("e_implication", "tail"): (("x", "r", "y1"), ("x", "r", "y2")),
    ("e_r_implication", "head"): (("x1", "r1", "y"), ("x2", "r2", "y")),
    ("e_r_implication", "tail"): (("x", "r1", "y1"), ("x", "r2", "y2")),
    ("e_r_inv_implication", "head"): (("x1", "r1", "y"), ("y", "r2", "x2")),
    ("e_r_inv_implication", "tail"): (("x", "r1", "y1"), ("y2", "r2", "x")),
    ("dual_e_implication", None): (("x1", "r", "x2"), ("y1", "r", "y2")),
}

# Slots sampled freshly on every verification trial.
PATTERN_FREE_SLOTS: dict[tuple[str, str | None], frozenset[str]] = {
    ("r_symmetry", None): frozenset({"x", "y"}),
    ("r_inverse", None): frozenset({"x", "y"}),
    ("r_implication", None): frozenset({"x", "y"}),
    ("r_inv_implication", None): frozenset({"x", "y"}),
    ("e_implication", "head"): frozenset({"y"}),
    ("e_implication", "tail"): frozenset({"x"}),
    ("e_r_implication", "head"): frozenset({"y"}),
    ("e_r_implication", "tail"): frozenset({"x"}),
    ("e_r_inv_implication", "head"): frozenset({"y"}),
    ("e_r_inv_implication", "tail"): frozenset({"x"}),
    ("dual_e_implication", None): frozenset({"r"}),
}

# Patterns written with a two-way arrow must also map head back to body.
BIDIRECTIONAL_PATTERNS: frozenset[str] = frozenset({"r_symmetry", "r_inverse"})

# Entity-family patterns that come in a head and a tail variant.
SIDED_PATTERNS: frozenset[str] = frozenset(
    {"e_implication", "e_r_implication", "e_r_inv_implication"}
)

# ============================================================================
# DATASETS
# ============================================================================

# |V|, |R|, |T|, |R̂|, |T̂|, |T|′ as published for the benchmark releases.
PUBLISHED_GRAPH_STATS: dict[str, dict[str, int]] = {
    "FBH": {
        "entities": 14541,
        "relations": 237,
        "atomic_triples": 310117,
        "nested_relations": 6,
        "nested_triples": 27062,
        "involved_triples": 33157,
    },
    "FBHE": {
        "entities": 14541,
        "relations": 237,
        "atomic_triples": 310117,
        "nested_relations": 10,
        "nested_triples": 34941,
        "involved_triples": 33719,
    },
    "DBHE": {
        "entities": 12440,
        "relations": 87,
        "atomic_triples": 68296,
        "nested_relations": 8,
        "nested_triples": 6717,
        "involved_triples": 8206,
    },
}

# Separator joining relation names of a length-2 random-walk composite.
COMPOSITE_SEPARATOR = "∘"
