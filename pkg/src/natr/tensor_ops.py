"""Dense tensor primitives: vectorization, matricization, mode products.

All operations work on plain :class:`numpy.ndarray` values and are pure.
The semantic layout convention, shared with every JSON file format in this
package, is that a tensor of shape ``(I_1, ..., I_D)`` vectorizes with the
first index varying fastest (Fortran order).  Modes are 0-based in this API;
:func:`vec_index` speaks the 1-based convention of the file formats.
"""

from __future__ import annotations

from functools import reduce
from typing import Sequence

import numpy as np

from .errors import ValidationError


def vec_index(multi_index: Sequence[int], shape: Sequence[int]) -> int:
    """Map a 1-based multi-index to its 1-based position in the vectorization.

    The element ``(i_1, ..., i_D)`` of a tensor with shape ``(I_1, ..., I_D)``
    sits at position ``1 + sum_d (i_d - 1) * prod_{d' < d} I_{d'}``.  The map
    is a bijection from the index box onto ``1 .. prod_d I_d``.
    """
    if len(multi_index) != len(shape):
        raise ValidationError(
            f"multi-index has {len(multi_index)} entries for an order-{len(shape)} shape"
        )
    pos = 1
    stride = 1
    for d, (i, n) in enumerate(zip(multi_index, shape)):
        if not 1 <= i <= n:
            raise ValidationError(
                f"index {i} out of range 1..{n} in mode {d + 1}"
            )
        pos += (i - 1) * stride
        stride *= n
    return pos


def vectorize(t: np.ndarray) -> np.ndarray:
    """Flatten a tensor with the first index varying fastest."""
    return np.asarray(t).reshape(-1, order="F")


def from_vector(v: np.ndarray, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`vectorize` for the given shape."""
    v = np.asarray(v)
    size = int(np.prod(shape))
    if v.size != size:
        raise ValidationError(f"vector of length {v.size} cannot fill shape {tuple(shape)}")
    return v.reshape(tuple(shape), order="F")


def _check_mode(t: np.ndarray, mode: int) -> None:
    if not 0 <= mode < t.ndim:
        raise ValidationError(f"mode {mode} out of range for an order-{t.ndim} tensor")


def matricize(t: np.ndarray, mode: int) -> np.ndarray:
    """Mode-``mode`` matricization: rows index the mode, columns the rest.

    Columns enumerate the remaining indices in original order with the
    earliest one varying fastest, matching the vectorization convention.
    """
    t = np.asarray(t)
    _check_mode(t, mode)
    return np.moveaxis(t, mode, 0).reshape((t.shape[mode], -1), order="F")


def fold(m: np.ndarray, mode: int, shape: Sequence[int]) -> np.ndarray:
    """Inverse of :func:`matricize`: rebuild the tensor of ``shape``."""
    m = np.asarray(m)
    shape = tuple(int(s) for s in shape)
    if not 0 <= mode < len(shape):
        raise ValidationError(f"mode {mode} out of range for an order-{len(shape)} tensor")
    rest = tuple(s for d, s in enumerate(shape) if d != mode)
    expected = (shape[mode], int(np.prod(rest)) if rest else 1)
    if m.shape != expected:
        raise ValidationError(f"matrix of shape {m.shape} does not fold into {shape} at mode {mode}")
    moved = m.reshape((shape[mode],) + rest, order="F")
    return np.moveaxis(moved, 0, mode)


def mode_product(t: np.ndarray, a: np.ndarray, mode: int) -> np.ndarray:
    """Contract mode ``mode`` of ``t`` with the columns of matrix ``a``.

    ``a`` has shape ``(J, I_mode)``; the result replaces ``I_mode`` by ``J``.
    """
    t = np.asarray(t)
    a = np.asarray(a)
    _check_mode(t, mode)
    if a.ndim != 2 or a.shape[1] != t.shape[mode]:
        raise ValidationError(
            f"matrix of shape {a.shape} cannot contract mode {mode} of size {t.shape[mode]}"
        )
    new_shape = list(t.shape)
    new_shape[mode] = a.shape[0]
    return fold(a @ matricize(t, mode), mode, new_shape)


def multi_mode_product(t: np.ndarray, mats: Sequence[np.ndarray]) -> np.ndarray:
    """Apply one matrix per mode: ``t x_0 mats[0] x_1 mats[1] ...``."""
    out = np.asarray(t)
    for d, a in enumerate(mats):
        out = mode_product(out, a, d)
    return out


def inner(x: np.ndarray, y: np.ndarray) -> float:
    """Inner product: sum of elementwise products over all positions."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise ValidationError(f"inner product of mismatched shapes {x.shape} and {y.shape}")
    return float(np.dot(vectorize(x), vectorize(y)))


def outer_rank1(vectors: Sequence[np.ndarray]) -> np.ndarray:
    """Rank-one tensor from one vector per mode.

    Element ``(i_1, ..., i_D)`` equals ``v_1[i_1] * ... * v_D[i_D]``.
    """
    if len(vectors) == 0:
        raise ValidationError("outer product needs at least one vector")
    vecs = [np.asarray(v, dtype=float) for v in vectors]
    for d, v in enumerate(vecs):
        if v.ndim != 1 or v.size == 0:
            raise ValidationError(f"mode {d} operand must be a nonempty vector")
    return reduce(np.multiply.outer, vecs)
