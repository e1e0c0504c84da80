"""Vectorized 4D hypercomplex arithmetic for three algebras.

Arrays carry their four channels (real, i, j, k) on axis -2 and the
embedding dimension d on axis -1, so a batch of n vectors has shape
``(n, 4, d)``. The array kernels (``hamilton``, ``unit_normalize`` ...)
are used by scoring and training; ``Hyper4Vector`` and the operations
taking it are the checked public surface.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from typing import Literal

import numpy as np
from numpy.typing import NDArray

from .errors import ContractError
from .tables import BASIS_PRODUCTS, BASIS_UNITS, QUADRATIC_FORM_SIGNS

DEFAULT_EPS = 1e-12

Fallback = Literal["identity", "zero"]


class Algebra(str, Enum):
    """Multiplication-rule selector for the Hamilton product."""

    Q = "Q"  # spherical quaternions
    H = "H"  # hyperbolic quaternions
    S = "S"  # split quaternions

    @classmethod
    def parse(cls, value: "str | Algebra") -> "Algebra":
        """Accept "Q"/"H"/"S" in any case, or an Algebra instance."""
        if isinstance(value, Algebra):
            return value
        try:
            return cls(str(value).strip().upper())
        except ValueError:
            raise ContractError(
                f"Unknown algebra '{value}'. Use Q, H or S."
            ) from None

    @property
    def products(self) -> dict[tuple[str, str], tuple[int, str]]:
        """The signed basis-product table (unit_a, unit_b) -> (sign, unit)."""
        return BASIS_PRODUCTS[self.value]


@lru_cache(maxsize=None)
def sign_table(algebra: Algebra) -> tuple[NDArray[np.float64], NDArray[np.intp]]:
    """Return (sign, unit) arrays of shape (4, 4) indexed by channel pairs."""
    sign = np.zeros((4, 4), dtype=np.float64)
    unit = np.zeros((4, 4), dtype=np.intp)
    for p, left in enumerate(BASIS_UNITS):
        for q, right in enumerate(BASIS_UNITS):
            s, u = algebra.products[(left, right)]
            sign[p, q] = s
            unit[p, q] = BASIS_UNITS.index(u)
    sign.setflags(write=False)
    unit.setflags(write=False)
    return sign, unit


# -------- array kernels --------


def hamilton(a: NDArray, b: NDArray, algebra: Algebra) -> NDArray:
    """Hamilton product of broadcastable arrays with channels on axis -2."""
    sign, unit = sign_table(algebra)
    shape = np.broadcast_shapes(a.shape, b.shape)
    out = np.zeros(shape, dtype=np.result_type(a, b))
    for p in range(4):
        for q in range(4):
            out[..., unit[p, q], :] += sign[p, q] * (a[..., p, :] * b[..., q, :])
    return out


def hamilton_left_adjoint(b: NDArray, g: NDArray, algebra: Algebra) -> NDArray:
    """Gradient of ``<hamilton(a, b), g>`` with respect to ``a``."""
    sign, unit = sign_table(algebra)
    shape = np.broadcast_shapes(b.shape, g.shape)
    out = np.zeros(shape, dtype=np.result_type(b, g))
    for p in range(4):
        for q in range(4):
            out[..., p, :] += sign[p, q] * (b[..., q, :] * g[..., unit[p, q], :])
    return out


def hamilton_right_adjoint(a: NDArray, g: NDArray, algebra: Algebra) -> NDArray:
    """Gradient of ``<hamilton(a, b), g>`` with respect to ``b``."""
    sign, unit = sign_table(algebra)
    shape = np.broadcast_shapes(a.shape, g.shape)
    out = np.zeros(shape, dtype=np.result_type(a, g))
    for p in range(4):
        for q in range(4):
            out[..., q, :] += sign[p, q] * (a[..., p, :] * g[..., unit[p, q], :])
    return out


def channel_norm(a: NDArray) -> NDArray:
    """Euclidean 4-norm of every element, keeping the channel axis."""
    return np.sqrt(np.sum(a * a, axis=-2, keepdims=True))


def _identity_like(a: NDArray) -> NDArray:
    ident = np.zeros(a.shape, dtype=a.dtype)
    ident[..., 0, :] = 1.0
    return ident


def unit_normalize(
    a: NDArray, eps: float = DEFAULT_EPS, fallback: Fallback = "identity"
) -> NDArray:
    """Scale every element to Euclidean norm 1.

    Elements whose norm is below ``eps`` become the identity (1, 0, 0, 0),
    or zero when ``fallback="zero"``.
    """
    norm = channel_norm(a)
    degenerate = norm < eps
    out = a / np.where(degenerate, 1.0, norm)
    replacement = _identity_like(a) if fallback == "identity" else np.zeros_like(a)
    return np.where(degenerate, replacement, out)


def unit_normalize_backward(
    a: NDArray, g: NDArray, eps: float = DEFAULT_EPS
) -> NDArray:
    """Pull the gradient ``g`` of a normalized array back to ``a``."""
    norm = channel_norm(a)
    degenerate = norm < eps
    safe = np.where(degenerate, 1.0, norm)
    u = a / safe
    grad = (g - u * np.sum(g * u, axis=-2, keepdims=True)) / safe
    return np.where(degenerate, 0.0, grad)


def ball_project(a: NDArray) -> NDArray:
    """Project every element onto the closed Euclidean unit ball."""
    return a / np.maximum(channel_norm(a), 1.0)


def ball_project_backward(a: NDArray, g: NDArray) -> NDArray:
    """Pull the gradient ``g`` of a ball-projected array back to ``a``."""
    norm = channel_norm(a)
    outside = norm > 1.0
    return np.where(outside, unit_normalize_backward(a, g), g)


def inner_product(a: NDArray, b: NDArray) -> NDArray:
    """Sum of the four channel-wise dot products over the last two axes."""
    return np.sum(a * b, axis=(-2, -1))


def quadratic_form(a: NDArray, algebra: Algebra) -> NDArray:
    """Per-element level-set form of the algebra (channel axis reduced)."""
    signs = np.asarray(QUADRATIC_FORM_SIGNS[algebra.value], dtype=a.dtype)
    return np.sum(signs[:, None] * a * a, axis=-2)


def conjugate(a: NDArray) -> NDArray:
    """Negate the three imaginary channels."""
    out = -a
    out[..., 0, :] = a[..., 0, :]
    return out


def left_multiplication_matrix(a: NDArray, algebra: Algebra) -> NDArray:
    """Matrices M of shape (..., d, 4, 4) with ``hamilton(a, X) = M @ X``."""
    sign, unit = sign_table(algebra)
    channels_last = np.moveaxis(a, -2, -1)
    m = np.zeros(channels_last.shape[:-1] + (4, 4), dtype=a.dtype)
    for p in range(4):
        for q in range(4):
            m[..., unit[p, q], q] += sign[p, q] * channels_last[..., p]
    return m


def right_multiplication_matrix(b: NDArray, algebra: Algebra) -> NDArray:
    """Matrices M of shape (..., d, 4, 4) with ``hamilton(X, b) = M @ X``."""
    sign, unit = sign_table(algebra)
    channels_last = np.moveaxis(b, -2, -1)
    m = np.zeros(channels_last.shape[:-1] + (4, 4), dtype=b.dtype)
    for p in range(4):
        for q in range(4):
            m[..., unit[p, q], p] += sign[p, q] * channels_last[..., q]
    return m


def solve_left(
    a: NDArray, b: NDArray, algebra: Algebra, max_condition: float = 1e12
) -> NDArray:
    """Solve ``hamilton(a, X) = b`` element by element.

    Raises:
        ContractError: if some element of ``a`` is not invertible under the
            algebra (its multiplication matrix is singular or too
            ill-conditioned).
    """
    m = left_multiplication_matrix(a, algebra)
    cond = np.linalg.cond(m)
    if not np.all(np.isfinite(cond)) or np.any(cond > max_condition):
        raise ContractError("element is not invertible under this algebra")
    rhs = np.moveaxis(b, -2, -1)[..., None]
    x = np.linalg.solve(m, rhs)[..., 0]
    return np.moveaxis(x, -1, -2)


# -------- checked value type --------


@dataclass(frozen=True, eq=False)
class Hyper4Vector:
    """A length-d vector of 4D hypercomplex numbers.

    ``data`` has shape (4, d); rows are the s, x, y, z channels.
    """

    data: NDArray[np.floating]

    def __post_init__(self) -> None:
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] != 4 or data.shape[1] < 1:
            raise ContractError(
                f"Hyper4Vector needs shape (4, d) with d >= 1, got {data.shape}"
            )
        if not np.issubdtype(data.dtype, np.floating):
            data = data.astype(np.float64)
        if not np.all(np.isfinite(data)):
            raise ContractError("Hyper4Vector entries must be finite")
        object.__setattr__(self, "data", data)

    @classmethod
    def from_channels(cls, s, x, y, z) -> "Hyper4Vector":
        """Build from four equally long channel sequences."""
        channels = [np.atleast_1d(np.asarray(c, dtype=np.float64)) for c in (s, x, y, z)]
        lengths = {len(c) for c in channels}
        if len(lengths) != 1:
            raise ContractError(f"channel lengths differ: {sorted(lengths)}")
        return cls(np.stack(channels))

    @classmethod
    def of(cls, *values: float) -> "Hyper4Vector":
        """A single (d=1) element from its four components."""
        if len(values) != 4:
            raise ContractError("a hypercomplex number has exactly 4 components")
        return cls(np.asarray(values, dtype=np.float64).reshape(4, 1))

    @classmethod
    def zeros(cls, d: int) -> "Hyper4Vector":
        return cls(np.zeros((4, d)))

    @classmethod
    def identity(cls, d: int) -> "Hyper4Vector":
        data = np.zeros((4, d))
        data[0] = 1.0
        return cls(data)

    @classmethod
    def random(cls, d: int, rng: np.random.Generator, scale: float = 1.0) -> "Hyper4Vector":
        return cls(rng.normal(scale=scale, size=(4, d)))

    @property
    def d(self) -> int:
        return int(self.data.shape[1])

    @property
    def s(self) -> NDArray:
        return self.data[0]

    @property
    def x(self) -> NDArray:
        return self.data[1]

    @property
    def y(self) -> NDArray:
        return self.data[2]

    @property
    def z(self) -> NDArray:
        return self.data[3]

    def __repr__(self) -> str:
        return f"Hyper4Vector(d={self.d})"


def _check_same_d(a: Hyper4Vector, b: Hyper4Vector) -> None:
    if a.d != b.d:
        raise ContractError(f"dimension mismatch: {a.d} != {b.d}")


def hamilton_product(a: Hyper4Vector, b: Hyper4Vector, alg: Algebra) -> Hyper4Vector:
    """Element-wise Hamilton product ``a ⊗ b`` under ``alg``."""
    _check_same_d(a, b)
    return Hyper4Vector(hamilton(a.data, b.data, Algebra.parse(alg)))


def add(a: Hyper4Vector, b: Hyper4Vector) -> Hyper4Vector:
    """Channel-wise sum ``a ⊕ b``."""
    _check_same_d(a, b)
    return Hyper4Vector(a.data + b.data)


def normalize(a: Hyper4Vector, eps: float = DEFAULT_EPS) -> Hyper4Vector:
    """Scale each element to Euclidean norm 1; degenerate elements become 1."""
    if not eps > 0:
        raise ContractError(f"eps must be positive, got {eps}")
    return Hyper4Vector(unit_normalize(a.data, eps))


def inner(a: Hyper4Vector, b: Hyper4Vector) -> float:
    """Sum of the channel-wise dot products of ``a`` and ``b``."""
    _check_same_d(a, b)
    return float(inner_product(a.data, b.data))
