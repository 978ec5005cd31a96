"""Shared-weight ensemble model with per-position normalization banks.

A :class:`TinyDEModel` is an MLP stack ``linear -> norm -> relu6`` repeated,
with a final linear head.  The linear layers exist once and are shared by
all M ensemble members; each normalization position holds a bank of M
parameter sets.  Inference runs either sequentially (a per-bank counter
routes activations to one member's parameters per pass) or in parallel
(the input is tiled M times and a stacked ensemble-norm layer handles all
members in a single pass).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from . import layers as L
from .errors import DimensionError, ModeError, StateError
from .layers import (EnsembleNormParams, Linear, NormParams,
                     ensemblenorm_backward, ensemblenorm_forward,
                     linear_backward, linear_forward, norm_backward,
                     norm_forward, relu6_backward, relu6_forward)

CHECKPOINT_VERSION = 1


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    z = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


class NormBank:
    """M normalization parameter sets attached to one layer position.

    Holds either a list of per-member :class:`NormParams` (sequential
    representation) or one stacked :class:`EnsembleNormParams` (parallel
    representation); conversion between the two is lossless.
    """

    def __init__(self, members: list[NormParams] | None = None,
                 stacked: EnsembleNormParams | None = None):
        if (members is None) == (stacked is None):
            raise ValueError("exactly one representation must be given")
        self.members = members
        self.stacked = stacked
        self.counter = 0

    @property
    def M(self) -> int:
        return len(self.members) if self.members is not None else self.stacked.M

    @property
    def is_parallel(self) -> bool:
        return self.stacked is not None

    def to_parallel(self) -> None:
        if self.members is not None:
            self.stacked = EnsembleNormParams.stack(self.members)
            self.members = None

    def to_sequential(self) -> None:
        if self.stacked is not None:
            self.members = self.stacked.unstack()
            self.stacked = None

    def member(self, m: int) -> NormParams:
        if m < 0 or m >= self.M:
            raise IndexError(f"member index {m} out of range for M={self.M}")
        if self.members is not None:
            return self.members[m]
        return self.stacked.member(m)


class TinyDEModel:
    """Shared linear layers + one NormBank per normalized position."""

    def __init__(self, linears: list[Linear], banks: list[NormBank],
                 M: int, mode: str, task: str,
                 in_dim: int, hidden: list[int], out_dim: int,
                 norm_kind: str = "batch"):
        if mode not in ("sequential", "parallel"):
            raise ValueError(f"unknown mode {mode!r}")
        if task not in ("regression", "classification"):
            raise ValueError(f"unknown task {task!r}")
        self.linears = linears
        self.banks = banks
        self.M = M
        self.mode = mode
        self.task = task
        self.in_dim = in_dim
        self.hidden = list(hidden)
        self.out_dim = out_dim
        self.norm_kind = norm_kind

    # -- construction -------------------------------------------------------

    @classmethod
    def build(cls, in_dim: int, hidden: list[int], out_dim: int, M: int,
              task: str = "regression", mode: str = "sequential",
              norm_kind: str = "batch", eps: float = L.DEFAULT_EPS,
              momentum: float = L.DEFAULT_MOMENTUM, seed: int = 0) -> "TinyDEModel":
        rng = np.random.default_rng(seed)
        dims = [in_dim] + list(hidden)
        linears = [Linear.init(dims[i], dims[i + 1], rng) for i in range(len(hidden))]
        linears.append(Linear.init(dims[-1], out_dim, rng))
        banks = [
            NormBank(members=[NormParams.init(w, eps, momentum, norm_kind)
                              for _ in range(M)])
            for w in hidden
        ]
        model = cls(linears, banks, M, "sequential", task,
                    in_dim, hidden, out_dim, norm_kind)
        if mode == "parallel":
            model.to_parallel()
        return model

    # -- counters -----------------------------------------------------------

    def _counters(self) -> list[int]:
        return [bank.counter for bank in self.banks]

    def _check_lockstep(self) -> int:
        cs = self._counters()
        if cs and any(c != cs[0] for c in cs):
            raise StateError(f"per-layer counters out of lockstep: {cs}")
        return cs[0] if cs else 0

    def advance_counters(self) -> None:
        """Cyclically advance every per-layer counter: c <- (c+1) mod M."""
        if self.mode != "sequential":
            raise ModeError("counters are a sequential-mode mechanism")
        self._check_lockstep()
        for bank in self.banks:
            bank.counter = (bank.counter + 1) % self.M

    def reset_counters(self) -> None:
        for bank in self.banks:
            bank.counter = 0

    # -- forward passes -----------------------------------------------------

    def _forward_member_cached(self, x: np.ndarray, train: bool):
        c = self._check_lockstep()
        caches = []
        h = np.asarray(x, dtype=np.float64)
        for linear, bank in zip(self.linears[:-1], self.banks):
            h, lin_cache = linear_forward(linear, h)
            h, norm_cache = norm_forward(bank.member(c), h, train)
            h, act_cache = relu6_forward(h)
            caches.append((lin_cache, norm_cache, act_cache))
        out, head_cache = linear_forward(self.linears[-1], h)
        return out, (caches, head_cache, c)

    def forward_member(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """One sequential pass using the member selected by the counters.

        Counters are not advanced here; call :meth:`advance_counters`
        explicitly between passes.
        """
        if self.mode != "sequential":
            raise ModeError("forward_member requires sequential mode")
        out, _ = self._forward_member_cached(x, train)
        return out

    def backward_member(self, cache, dout: np.ndarray):
        """Gradients for the pass recorded by ``cache``.

        Returns (dx, grads) where grads maps parameter names to arrays:
        ``linear{i}.W``, ``linear{i}.b``, ``bank{i}.gamma``/``.beta``
        (the latter for the member that was active in forward).
        """
        caches, head_cache, c = cache
        grads = {}
        d, dW, db = linear_backward(head_cache, dout)
        n = len(self.linears) - 1
        grads[f"linear{n}.W"] = dW
        grads[f"linear{n}.b"] = db
        for i in reversed(range(len(self.banks))):
            lin_cache, norm_cache, act_cache = caches[i]
            d = relu6_backward(act_cache, d)
            d, dgamma, dbeta = norm_backward(norm_cache, d)
            grads[f"bank{i}.gamma"] = dgamma
            grads[f"bank{i}.beta"] = dbeta
            d, dW, db = linear_backward(lin_cache, d)
            grads[f"linear{i}.W"] = dW
            grads[f"linear{i}.b"] = db
        return d, grads, c

    def forward_all_sequential(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """M sequential passes, one per member, stacked to [M,B,K].

        Starts from counters=0 and leaves them at 0 (M cyclic advances)."""
        if self.mode != "sequential":
            raise ModeError("forward_all_sequential requires sequential mode")
        self.reset_counters()
        outs = []
        for _ in range(self.M):
            outs.append(self.forward_member(x, train))
            self.advance_counters()
        return np.stack(outs)

    def _forward_parallel_cached(self, x: np.ndarray, train: bool):
        if self.mode != "parallel":
            raise ModeError("forward_parallel requires parallel mode")
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise DimensionError(
                f"expected input [B,{self.in_dim}], got {x.shape}"
            )
        h = np.tile(x, (self.M, 1))  # member-major blocks
        caches = []
        for linear, bank in zip(self.linears[:-1], self.banks):
            h, lin_cache = linear_forward(linear, h)
            h, norm_cache = ensemblenorm_forward(bank.stacked, h, train)
            h, act_cache = relu6_forward(h)
            caches.append((lin_cache, norm_cache, act_cache))
        out, head_cache = linear_forward(self.linears[-1], h)
        return out, (caches, head_cache, x.shape[0])

    def forward_parallel(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """Single-shot pass over the M-times-tiled input, output [M,B,K]."""
        out, (_, _, B) = self._forward_parallel_cached(x, train)
        return out.reshape(self.M, B, self.out_dim)

    def backward_parallel(self, cache, dout: np.ndarray):
        """Gradients for a parallel pass; dout has the tiled shape [M*B,K]."""
        caches, head_cache, _ = cache
        grads = {}
        d, dW, db = linear_backward(head_cache, dout)
        n = len(self.linears) - 1
        grads[f"linear{n}.W"] = dW
        grads[f"linear{n}.b"] = db
        for i in reversed(range(len(self.banks))):
            lin_cache, norm_cache, act_cache = caches[i]
            d = relu6_backward(act_cache, d)
            d, dgamma, dbeta = ensemblenorm_backward(norm_cache, d)
            grads[f"bank{i}.gamma"] = dgamma  # [M,F]
            grads[f"bank{i}.beta"] = dbeta
            d, dW, db = linear_backward(lin_cache, d)
            grads[f"linear{i}.W"] = dW
            grads[f"linear{i}.b"] = db
        return d, grads

    def forward_samples(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        """[M,B,K] member outputs via whichever mode is active."""
        if self.mode == "parallel":
            return self.forward_parallel(x, train)
        return self.forward_all_sequential(x, train)

    def predict(self, x: np.ndarray):
        """Ensemble prediction: (mean [B,K], member samples [M,B,K]).

        Classification averages member softmax probabilities; regression
        averages raw outputs.
        """
        samples = self.forward_samples(x, train=False)
        if self.task == "classification":
            samples = softmax(samples, axis=-1)
        return samples.mean(axis=0), samples

    # -- parameter management -----------------------------------------------

    def freeze_shared(self) -> None:
        for linear in self.linears:
            linear.frozen = True

    def reinit_norm_member(self, m: int) -> None:
        for bank in self.banks:
            bank.member(m).reinit()

    def to_parallel(self) -> "TinyDEModel":
        for bank in self.banks:
            bank.to_parallel()
        self.mode = "parallel"
        return self

    def to_sequential(self) -> "TinyDEModel":
        for bank in self.banks:
            bank.to_sequential()
        self.reset_counters()
        self.mode = "sequential"
        return self

    def shared_weight_count(self) -> int:
        """Distinct weight-matrix storage; equals the single model's count."""
        return sum(lin.W.size + lin.b.size for lin in self.linears)

    def norm_param_count(self, include_buffers: bool = True) -> int:
        per_member = sum(bank.member(0).num_features for bank in self.banks)
        factor = 4 if include_buffers else 2
        return factor * per_member * self.M

    # -- checkpointing ------------------------------------------------------

    def _param_arrays(self) -> dict[str, np.ndarray]:
        arrays = {}
        for i, lin in enumerate(self.linears):
            arrays[f"linear{i}.W"] = lin.W
            arrays[f"linear{i}.b"] = lin.b
        for i, bank in enumerate(self.banks):
            stacked = (bank.stacked if bank.is_parallel
                       else EnsembleNormParams.stack(bank.members))
            arrays[f"bank{i}.gamma"] = stacked.gamma
            arrays[f"bank{i}.beta"] = stacked.beta
            arrays[f"bank{i}.running_mean"] = stacked.running_mean
            arrays[f"bank{i}.running_var"] = stacked.running_var
        return arrays

    def save_checkpoint(self, path) -> None:
        bank0 = self.banks[0].member(0) if self.banks else None
        header = {
            "format": "tinyde-checkpoint",
            "version": CHECKPOINT_VERSION,
            "M": self.M,
            "mode": self.mode,
            "task": self.task,
            "in_dim": self.in_dim,
            "hidden": self.hidden,
            "out_dim": self.out_dim,
            "norm_kind": self.norm_kind,
            "eps": bank0.eps if bank0 else L.DEFAULT_EPS,
            "momentum": bank0.momentum if bank0 else L.DEFAULT_MOMENTUM,
            "frozen": [lin.frozen for lin in self.linears],
        }
        doc = {
            "header": header,
            "params": json.loads(L.arrays_to_json(self._param_arrays())),
        }
        with open(path, "w") as fh:
            json.dump(doc, fh)

    @classmethod
    def load_checkpoint(cls, path) -> "TinyDEModel":
        with open(path) as fh:
            doc = json.load(fh)
        header = doc["header"]
        if header.get("format") != "tinyde-checkpoint" \
                or header.get("version") != CHECKPOINT_VERSION:
            raise ValueError("unrecognized checkpoint document")
        arrays = L.arrays_from_json(json.dumps(doc["params"]))
        n_hidden = len(header["hidden"])
        linears = []
        for i in range(n_hidden + 1):
            lin = Linear(arrays[f"linear{i}.W"], arrays[f"linear{i}.b"],
                         frozen=header["frozen"][i])
            linears.append(lin)
        banks = []
        for i in range(n_hidden):
            stacked = EnsembleNormParams(
                arrays[f"bank{i}.gamma"], arrays[f"bank{i}.beta"],
                arrays[f"bank{i}.running_mean"], arrays[f"bank{i}.running_var"],
                header["eps"], header["momentum"], header["norm_kind"],
            )
            banks.append(NormBank(stacked=stacked))
        model = cls(linears, banks, header["M"], "parallel", header["task"],
                    header["in_dim"], header["hidden"], header["out_dim"],
                    header["norm_kind"])
        if header["mode"] == "sequential":
            model.to_sequential()
        return model

    def copy(self) -> "TinyDEModel":
        import copy as _copy
        return _copy.deepcopy(self)
