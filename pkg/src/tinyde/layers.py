"""Differentiable building blocks with explicit forward/backward passes.

Layers are parameter containers plus pure functions: ``*_forward`` returns
the output together with a cache, ``*_backward`` consumes the cache and the
upstream gradient.  Gradients are hand-derived; there is no autograd.

Normalization follows the standard recipe: standardize with statistics
taken over a dimension that depends on the variant ("batch": over the
batch per feature, "layer": over features per sample), then scale/shift
with learnable gamma/beta.  The ensemble variant keeps M independent
parameter rows and normalizes M stacked input blocks in one call.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, DimensionError, StateError
from .tensor import tensor

DEFAULT_EPS = 1e-5
DEFAULT_MOMENTUM = 0.1


# ---------------------------------------------------------------------------
# Linear layer


class Linear:
    """Affine layer y = x W^T + b with an optional freeze flag.

    When ``frozen`` is set the backward pass still propagates input
    gradients, but parameter gradients must never be applied; optimizers
    check the flag.
    """

    def __init__(self, W: np.ndarray, b: np.ndarray, frozen: bool = False):
        self.W = tensor(W)
        self.b = tensor(b)
        if self.W.ndim != 2 or self.b.ndim != 1 or self.W.shape[0] != self.b.shape[0]:
            raise DimensionError(
                f"linear parameters malformed: W {self.W.shape}, b {self.b.shape}"
            )
        self.frozen = frozen

    @property
    def fan_in(self) -> int:
        return self.W.shape[1]

    @property
    def fan_out(self) -> int:
        return self.W.shape[0]

    @classmethod
    def init(cls, fan_in: int, fan_out: int, rng: np.random.Generator) -> "Linear":
        # uniform +-sqrt(1/fan_in), bias zero
        bound = np.sqrt(1.0 / fan_in)
        W = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        return cls(W, np.zeros(fan_out))


def linear_forward(layer: Linear, x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.fan_in:
        raise DimensionError(
            f"linear expects input [B,{layer.fan_in}], got {x.shape}"
        )
    y = x @ layer.W.T + layer.b
    return y, (layer, x)


def linear_backward(cache, dy: np.ndarray):
    layer, x = cache
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != (x.shape[0], layer.fan_out):
        raise StateError(
            f"gradient shape {dy.shape} does not match forward output "
            f"({x.shape[0]}, {layer.fan_out})"
        )
    dx = dy @ layer.W
    dW = dy.T @ x
    db = dy.sum(axis=0)
    return dx, dW, db


# ---------------------------------------------------------------------------
# ReLU6


def relu6_forward(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    y = np.minimum(np.maximum(x, 0.0), 6.0)
    return y, x


def relu6_backward(cache, dy: np.ndarray):
    x = cache
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != x.shape:
        raise StateError(f"gradient shape {dy.shape} != input shape {x.shape}")
    return dy * ((x > 0.0) & (x < 6.0))


# ---------------------------------------------------------------------------
# Normalization


@dataclass
class NormParams:
    """Per-feature normalization parameters for one ensemble member."""

    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = DEFAULT_EPS
    momentum: float = DEFAULT_MOMENTUM
    kind: str = "batch"  # "batch" | "layer"

    def __post_init__(self):
        if self.eps <= 0:
            raise ValueError("eps must be positive")
        if np.any(self.running_var < 0):
            raise ValueError("running_var must be nonnegative")
        if self.kind not in ("batch", "layer"):
            raise ValueError(f"unknown norm kind {self.kind!r}")

    @property
    def num_features(self) -> int:
        return self.gamma.shape[0]

    @classmethod
    def init(cls, num_features: int, eps: float = DEFAULT_EPS,
             momentum: float = DEFAULT_MOMENTUM, kind: str = "batch") -> "NormParams":
        return cls(
            gamma=np.ones(num_features),
            beta=np.zeros(num_features),
            running_mean=np.zeros(num_features),
            running_var=np.ones(num_features),
            eps=eps,
            momentum=momentum,
            kind=kind,
        )

    def reinit(self) -> None:
        """Reset to the documented init: gamma=1, beta=0, mean=0, var=1."""
        self.gamma[...] = 1.0
        self.beta[...] = 0.0
        self.running_mean[...] = 0.0
        self.running_var[...] = 1.0

    def copy(self) -> "NormParams":
        return NormParams(
            self.gamma.copy(), self.beta.copy(),
            self.running_mean.copy(), self.running_var.copy(),
            self.eps, self.momentum, self.kind,
        )


def norm_forward(p: NormParams, x: np.ndarray, train: bool):
    """Standardize ``x`` [B,F] and apply gamma/beta.

    Batch variant: per-feature statistics over the batch (population
    variance), running statistics updated as
    running <- (1-momentum)*running + momentum*batch in train mode;
    eval mode substitutes running statistics.  Layer variant: per-sample
    statistics over features, identical in train and eval, running
    buffers untouched.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.num_features:
        raise DimensionError(
            f"norm expects input [B,{p.num_features}], got {x.shape}"
        )
    B = x.shape[0]
    if p.kind == "batch":
        if train:
            if B < 2:
                raise DegenerateInputError(
                    f"batch statistics undefined for batch size {B} (need >= 2)"
                )
            mu = x.mean(axis=0)
            var = x.var(axis=0)  # population
            p.running_mean *= 1.0 - p.momentum
            p.running_mean += p.momentum * mu
            p.running_var *= 1.0 - p.momentum
            p.running_var += p.momentum * var
        else:
            mu = p.running_mean
            var = p.running_var
        inv_std = 1.0 / np.sqrt(var + p.eps)
        xhat = (x - mu) * inv_std
    else:  # layer
        if p.num_features < 2:
            raise DegenerateInputError(
                "layer statistics undefined for a single feature"
            )
        mu = x.mean(axis=1, keepdims=True)
        var = x.var(axis=1, keepdims=True)
        inv_std = 1.0 / np.sqrt(var + p.eps)
        xhat = (x - mu) * inv_std
    y = p.gamma * xhat + p.beta
    return y, (p, xhat, inv_std, train, x.shape)


def norm_backward(cache, dy: np.ndarray):
    p, xhat, inv_std, train, x_shape = cache
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != x_shape:
        raise StateError(f"gradient shape {dy.shape} != input shape {x_shape}")
    dgamma = (dy * xhat).sum(axis=0)
    dbeta = dy.sum(axis=0)
    dxhat = dy * p.gamma
    if p.kind == "batch":
        if train:
            B = x_shape[0]
            dx = (inv_std / B) * (
                B * dxhat
                - dxhat.sum(axis=0)
                - xhat * (dxhat * xhat).sum(axis=0)
            )
        else:
            dx = dxhat * inv_std
    else:
        F = x_shape[1]
        dx = (inv_std / F) * (
            F * dxhat
            - dxhat.sum(axis=1, keepdims=True)
            - xhat * (dxhat * xhat).sum(axis=1, keepdims=True)
        )
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# EnsembleNorm


@dataclass
class EnsembleNormParams:
    """M normalization parameter sets stacked along a leading member axis."""

    gamma: np.ndarray        # [M,F]
    beta: np.ndarray         # [M,F]
    running_mean: np.ndarray  # [M,F]
    running_var: np.ndarray   # [M,F]
    eps: float = DEFAULT_EPS
    momentum: float = DEFAULT_MOMENTUM
    kind: str = "batch"

    @property
    def M(self) -> int:
        return self.gamma.shape[0]

    @property
    def num_features(self) -> int:
        return self.gamma.shape[1]

    @classmethod
    def init(cls, M: int, num_features: int, eps: float = DEFAULT_EPS,
             momentum: float = DEFAULT_MOMENTUM, kind: str = "batch"):
        return cls(
            gamma=np.ones((M, num_features)),
            beta=np.zeros((M, num_features)),
            running_mean=np.zeros((M, num_features)),
            running_var=np.ones((M, num_features)),
            eps=eps,
            momentum=momentum,
            kind=kind,
        )

    def member(self, m: int) -> NormParams:
        """Member m's parameters as writable views into the stacked arrays."""
        return NormParams(
            self.gamma[m], self.beta[m],
            self.running_mean[m], self.running_var[m],
            self.eps, self.momentum, self.kind,
        )

    @classmethod
    def stack(cls, members: list[NormParams]) -> "EnsembleNormParams":
        first = members[0]
        return cls(
            gamma=np.stack([p.gamma for p in members]),
            beta=np.stack([p.beta for p in members]),
            running_mean=np.stack([p.running_mean for p in members]),
            running_var=np.stack([p.running_var for p in members]),
            eps=first.eps,
            momentum=first.momentum,
            kind=first.kind,
        )

    def unstack(self) -> list["NormParams"]:
        return [
            NormParams(
                self.gamma[m].copy(), self.beta[m].copy(),
                self.running_mean[m].copy(), self.running_var[m].copy(),
                self.eps, self.momentum, self.kind,
            )
            for m in range(self.M)
        ]


def ensemblenorm_forward(p: EnsembleNormParams, x: np.ndarray, train: bool):
    """Normalize an [M*B, F] input as M independent [B, F] member blocks.

    Block m (rows m*B .. (m+1)*B) is normalized with member m's
    parameters using the exact same kernel as :func:`norm_forward`, so the
    member-level correspondence with the sequential path is bitwise.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != p.num_features:
        raise DimensionError(
            f"ensemble norm expects input [M*B,{p.num_features}], got {x.shape}"
        )
    if x.shape[0] % p.M != 0:
        raise DimensionError(
            f"leading extent {x.shape[0]} not divisible by M={p.M}"
        )
    B = x.shape[0] // p.M
    y = np.empty_like(x)
    caches = []
    for m in range(p.M):
        block = x[m * B:(m + 1) * B]
        y_m, cache_m = norm_forward(p.member(m), block, train)
        y[m * B:(m + 1) * B] = y_m
        caches.append(cache_m)
    return y, (p, B, caches, x.shape)


def ensemblenorm_backward(cache, dy: np.ndarray):
    p, B, caches, x_shape = cache
    dy = np.asarray(dy, dtype=np.float64)
    if dy.shape != x_shape:
        raise StateError(f"gradient shape {dy.shape} != input shape {x_shape}")
    dx = np.empty_like(dy)
    dgamma = np.zeros((p.M, p.num_features))
    dbeta = np.zeros((p.M, p.num_features))
    for m in range(p.M):
        dx_m, dg, db = norm_backward(caches[m], dy[m * B:(m + 1) * B])
        dx[m * B:(m + 1) * B] = dx_m
        dgamma[m] = dg
        dbeta[m] = db
    return dx, dgamma, dbeta


# ---------------------------------------------------------------------------
# Parameter serialization

_FORMAT_VERSION = 1
_BINARY_MAGIC = b"TDNP"


def arrays_to_json(arrays: dict[str, np.ndarray]) -> str:
    """Serialize named arrays to JSON with round-trip-exact decimal floats."""
    doc = {
        "format": "tinyde-params",
        "version": _FORMAT_VERSION,
        "arrays": {
            name: {"shape": list(a.shape),
                   "data": [float(v) for v in np.ravel(a)]}
            for name, a in arrays.items()
        },
    }
    # repr of Python floats is shortest round-trip decimal (>= 17 sig digits
    # when needed); json emits it verbatim
    return json.dumps(doc)


def arrays_from_json(text: str) -> dict[str, np.ndarray]:
    doc = json.loads(text)
    if doc.get("format") != "tinyde-params" or doc.get("version") != _FORMAT_VERSION:
        raise ValueError("unrecognized parameter document")
    return {
        name: np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in doc["arrays"].items()
    }


def arrays_to_bytes(arrays: dict[str, np.ndarray]) -> bytes:
    """Flat binary export: magic, version, then per-array name/shape/raw f64."""
    out = [_BINARY_MAGIC, struct.pack("<HH", _FORMAT_VERSION, len(arrays))]
    for name, a in arrays.items():
        nb = name.encode()
        a = np.ascontiguousarray(a, dtype=np.float64)
        out.append(struct.pack("<H", len(nb)))
        out.append(nb)
        out.append(struct.pack("<H", a.ndim))
        out.append(struct.pack(f"<{a.ndim}q", *a.shape))
        out.append(a.tobytes())
    return b"".join(out)


def arrays_from_bytes(blob: bytes) -> dict[str, np.ndarray]:
    if blob[:4] != _BINARY_MAGIC:
        raise ValueError("bad magic in binary parameter blob")
    version, count = struct.unpack_from("<HH", blob, 4)
    if version != _FORMAT_VERSION:
        raise ValueError(f"unsupported parameter format version {version}")
    offset = 8
    arrays = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        name = blob[offset:offset + nlen].decode()
        offset += nlen
        (ndim,) = struct.unpack_from("<H", blob, offset)
        offset += 2
        shape = struct.unpack_from(f"<{ndim}q", blob, offset)
        offset += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        a = np.frombuffer(blob, dtype="<f8", count=size, offset=offset).reshape(shape)
        offset += 8 * size
        arrays[name] = a.copy()
    return arrays
