"""Analytic parameter and latency census over an abstract layer list.

Latency is modeled as forward-pass-equivalent MAC counts (weighted by an
optional per-entry ``positions`` factor for spatial layers), not
wall-clock.  Memory is parameter storage in scalar units.  All relative
figures are exact rationals of the underlying integer counts.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources

from .errors import ConfigError

METHODS = (
    "single",
    "deep_ensemble",
    "mc_dropout",
    "batchensemble",
    "branch_ensemble",
    "tiny_de",            # parallel (single-shot) variant
    "tiny_de_sequential",
)

_WEIGHT_KINDS = ("linear", "conv")


@dataclass
class LayerEntry:
    kind: str            # linear | conv | norm | activation
    fan_in: int = 0
    fan_out: int = 0
    kernel_area: int = 1
    channels: int = 0
    positions: int = 1   # spatial output positions (1 for dense layers)
    branch: bool = False  # ensembled in the branch-ensemble baseline

    def params(self, norm_buffers: bool = True) -> int:
        if self.kind == "linear":
            return self.fan_in * self.fan_out + self.fan_out
        if self.kind == "conv":
            return self.kernel_area * self.fan_in * self.fan_out + self.fan_out
        if self.kind == "norm":
            return (4 if norm_buffers else 2) * self.channels
        if self.kind == "activation":
            return 0
        raise ConfigError(f"unknown layer kind {self.kind!r}")

    def learnable_norm_params(self) -> int:
        return 2 * self.channels if self.kind == "norm" else 0

    def macs(self) -> int:
        if self.kind == "linear":
            return self.fan_in * self.fan_out * self.positions
        if self.kind == "conv":
            return self.kernel_area * self.fan_in * self.fan_out * self.positions
        return 0


@dataclass
class LayerSpecModel:
    name: str
    layers: list[LayerEntry]

    def total_params(self, norm_buffers: bool = True) -> int:
        return sum(e.params(norm_buffers) for e in self.layers)

    def norm_params(self, include_buffers: bool = True) -> int:
        return sum(e.params(True) if include_buffers else e.learnable_norm_params()
                   for e in self.layers if e.kind == "norm")

    def learnable_norm_params(self) -> int:
        return self.norm_params(include_buffers=False)

    def total_macs(self) -> int:
        return sum(e.macs() for e in self.layers)

    def branch_params(self, norm_buffers: bool = True) -> int:
        return sum(e.params(norm_buffers) for e in self.layers if e.branch)

    def branch_macs(self) -> int:
        return sum(e.macs() for e in self.layers if e.branch)


@dataclass
class CostCensus:
    method: str
    M: int
    total_params: int
    learnable_norm_params: int
    forward_pass_count: int
    relative_memory: Fraction
    relative_latency: Fraction


def load_layer_spec(path) -> LayerSpecModel:
    """Load a layer spec from a JSON or TOML document."""
    text = open(path, "rb").read()
    if str(path).endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            import tomli as tomllib
        doc = tomllib.loads(text.decode())
    else:
        doc = json.loads(text)
    return _spec_from_doc(doc)


def _spec_from_doc(doc: dict) -> LayerSpecModel:
    layers = [LayerEntry(**entry) for entry in doc["layers"]]
    return LayerSpecModel(doc.get("name", "unnamed"), layers)


def resnet32_spec() -> LayerSpecModel:
    """The shipped ResNet-32-shaped spec (parameter counting only)."""
    with resources.files("tinyde").joinpath("specs/resnet32.json").open("rb") as fh:
        return _spec_from_doc(json.load(fh))


def census(spec: LayerSpecModel, method: str, M: int,
           norm_buffers: bool = True) -> CostCensus:
    """Parameter and latency census of one method relative to a single model."""
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    if M < 1:
        raise ConfigError("M must be >= 1")
    base_params = spec.total_params(norm_buffers)
    base_macs = spec.total_macs()
    norm_member = spec.norm_params(include_buffers=norm_buffers)
    passes = 1
    if method == "single":
        total_params = base_params
        total_macs = base_macs
    elif method == "deep_ensemble":
        total_params = M * base_params
        total_macs = M * base_macs
        passes = M
    elif method == "mc_dropout":
        total_params = base_params
        total_macs = M * base_macs
        passes = M
    elif method == "batchensemble":
        # two sets of M rank-1 vectors per weight layer; elementwise
        # input/output products cost 2 multiplies per activation
        rank1 = sum(M * (e.fan_in + e.fan_out) for e in spec.layers
                    if e.kind in _WEIGHT_KINDS)
        extra_macs = sum(2 * e.fan_out * e.positions for e in spec.layers
                         if e.kind in _WEIGHT_KINDS)
        total_params = base_params + (rank1 if M > 1 else 0)
        total_macs = base_macs + (extra_macs if M > 1 else 0)
    elif method == "branch_ensemble":
        total_params = base_params + (M - 1) * spec.branch_params(norm_buffers)
        total_macs = base_macs + (M - 1) * spec.branch_macs()
        passes = M
    elif method == "tiny_de":
        total_params = base_params + (M - 1) * norm_member
        total_macs = base_macs
    else:  # tiny_de_sequential
        total_params = base_params + (M - 1) * norm_member
        total_macs = M * base_macs
        passes = M
    return CostCensus(
        method=method,
        M=M,
        total_params=total_params,
        learnable_norm_params=spec.learnable_norm_params(),
        forward_pass_count=passes,
        relative_memory=Fraction(total_params, base_params),
        relative_latency=Fraction(total_macs, base_macs),
    )


def emit_cost_curves(spec: LayerSpecModel, M_range,
                     methods=METHODS, norm_buffers: bool = True):
    """Rows of (method, M, relative memory, relative latency) as floats."""
    rows = []
    for method in methods:
        for M in M_range:
            c = census(spec, method, M, norm_buffers)
            rows.append({
                "method": method,
                "M": M,
                "relative_memory": float(c.relative_memory),
                "relative_latency": float(c.relative_latency),
                "total_params": c.total_params,
                "forward_pass_count": c.forward_pass_count,
            })
    return rows


def write_cost_csv(path, rows) -> None:
    import csv
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "M", "relative_memory", "relative_latency",
                        "total_params", "forward_pass_count"])
        for r in rows:
            writer.writerow([r["method"], r["M"], repr(r["relative_memory"]),
                             repr(r["relative_latency"]), r["total_params"],
                             r["forward_pass_count"]])
