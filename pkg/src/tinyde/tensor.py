"""Minimal dense-array numerics on top of float64 numpy arrays.

Every tensor in this package is a C-contiguous (row-major) float64
ndarray.  The functions here are thin, validating wrappers: they pin the
error contract (named shapes in messages, explicit degenerate-input
failures) that the rest of the package relies on.  Variance here is the
population variance (divide by N); the unbiased estimator lives in
:mod:`tinyde.uncertainty` where member spread is measured.
"""

from __future__ import annotations

from collections.abc import Callable, Iterable

import numpy as np

from .errors import DegenerateInputError, DimensionError

_ZIP_OPS = {
    "add": np.add,
    "sub": np.subtract,
    "mul": np.multiply,
    "div": np.divide,
    "absdiff": lambda a, b: np.abs(a - b),
}


def tensor(data) -> np.ndarray:
    """Coerce to a row-major float64 array."""
    return np.ascontiguousarray(data, dtype=np.float64)


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of two rank-2 tensors."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(
            f"matmul expects rank-2 tensors, got shapes {a.shape} and {b.shape}"
        )
    if a.shape[1] != b.shape[0]:
        raise DimensionError(
            f"matmul inner extents differ: {a.shape} x {b.shape}"
        )
    return a @ b


def reduce(t: np.ndarray, axes: Iterable[int] | int, kind: str) -> np.ndarray:
    """Reduce ``t`` over ``axes`` with mean | variance | max | sum.

    Variance is the population variance.  Reduced axes are removed from
    the result.  An empty reduction extent is an error rather than a
    NaN-producing no-op.
    """
    t = np.asarray(t)
    if isinstance(axes, int):
        axes = (axes,)
    axes = tuple(axes)
    for ax in axes:
        if not -t.ndim <= ax < t.ndim:
            raise DimensionError(f"axis {ax} invalid for rank-{t.ndim} tensor")
        if t.shape[ax] == 0:
            raise DegenerateInputError(
                f"reduction over empty axis {ax} of shape {t.shape}"
            )
    if kind == "mean":
        return np.mean(t, axis=axes)
    if kind == "variance":
        return np.var(t, axis=axes)  # population (ddof=0)
    if kind == "max":
        return np.max(t, axis=axes)
    if kind == "sum":
        return np.sum(t, axis=axes)
    raise ValueError(f"unknown reduction kind {kind!r}")


def emap(t: np.ndarray, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Elementwise map of a vectorized scalar function."""
    return f(np.asarray(t, dtype=np.float64))


def ezip(a: np.ndarray, b: np.ndarray, op: str) -> np.ndarray:
    """Elementwise combine with numpy broadcasting (an extent of 1 stretches)."""
    if op not in _ZIP_OPS:
        raise ValueError(f"unknown zip op {op!r}")
    a = np.asarray(a)
    b = np.asarray(b)
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError as exc:
        raise DimensionError(
            f"shapes {a.shape} and {b.shape} do not broadcast"
        ) from exc
    return _ZIP_OPS[op](a, b)
