"""Behavioral compute-in-memory pipeline for sequential ensemble inference.

Per layer: DAC-quantize the input, MAC in the (simulated analog) crossbar,
ADC-quantize the result, route to one of the M normalization parameter
sets via the binary counter control word, normalize and activate at full
precision (digital periphery).  Quantization is uniform mid-rise with a
per-stage clip range; "ideal" stages pass values through unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .ensemble import TinyDEModel
from .errors import ConfigError, ModeError
from .layers import norm_forward, relu6_forward

IDEAL = "ideal"


@dataclass
class QuantSpec:
    dac_bits: int | str = IDEAL
    adc_bits: int | str = IDEAL
    dac_range: tuple[float, float] = (-1.0, 1.0)
    adc_range: tuple[float, float] = (-8.0, 8.0)

    def __post_init__(self):
        for bits in (self.dac_bits, self.adc_bits):
            if bits != IDEAL and (not isinstance(bits, int) or bits < 1):
                raise ConfigError(f"bits must be a positive int or 'ideal', got {bits!r}")
        for lo, hi in (self.dac_range, self.adc_range):
            if not hi > lo:
                raise ConfigError(f"clip range must satisfy hi > lo, got ({lo}, {hi})")

    @classmethod
    def ideal(cls) -> "QuantSpec":
        return cls()


@dataclass
class RouterState:
    Q: int
    c: int = 0

    def __post_init__(self):
        if self.Q < 1:
            raise ConfigError("control bit width Q must be >= 1")
        if not 0 <= self.c < 2 ** self.Q:
            raise ValueError(f"counter {self.c} out of range for Q={self.Q}")


def quantize(x: np.ndarray, bits: int | str, lo: float, hi: float) -> np.ndarray:
    """Clip to [lo,hi] and snap to the 2^bits mid-rise reconstruction levels."""
    if bits == IDEAL:
        return np.asarray(x, dtype=np.float64)
    levels = 2 ** bits
    step = (hi - lo) / levels
    clipped = np.clip(x, lo, hi)
    idx = np.minimum(np.floor((clipped - lo) / step), levels - 1)
    return lo + (idx + 0.5) * step


def binary_control(c: int, Q: int) -> str:
    """Big-endian Q-bit control word b_{Q-1}...b_0 for counter value c."""
    if not 0 <= c < 2 ** Q:
        raise ValueError(f"counter {c} out of range [0, 2^{Q})")
    return format(c, f"0{Q}b")


def parse_control(bits: str) -> int:
    return int(bits, 2)


def calibrate(model: TinyDEModel, X: np.ndarray,
              quantile: float = 0.999) -> QuantSpec:
    """Clip ranges from activation quantiles observed on a calibration batch.

    DAC range covers layer inputs (network input and post-activation
    values), ADC range covers raw MAC outputs, over all members.
    """
    if model.mode != "sequential":
        raise ModeError("calibration runs on a sequential-mode model")
    dac_vals: list[np.ndarray] = []
    adc_vals: list[np.ndarray] = []
    model.reset_counters()
    for _ in range(model.M):
        c = model.banks[0].counter if model.banks else 0
        h = np.asarray(X, dtype=np.float64)
        for linear, bank in zip(model.linears[:-1], model.banks):
            dac_vals.append(h.ravel())
            h = h @ linear.W.T + linear.b
            adc_vals.append(h.ravel())
            h, _ = norm_forward(bank.member(c), h, train=False)
            h, _ = relu6_forward(h)
        dac_vals.append(h.ravel())
        h = h @ model.linears[-1].W.T + model.linears[-1].b
        adc_vals.append(h.ravel())
        model.advance_counters()
    model.reset_counters()

    def _range(vals):
        flat = np.concatenate(vals)
        lo = float(np.quantile(flat, 1.0 - quantile))
        hi = float(np.quantile(flat, quantile))
        if hi <= lo:
            lo, hi = lo - 0.5, lo + 0.5
        return lo, hi

    return QuantSpec(dac_range=_range(dac_vals), adc_range=_range(adc_vals))


def run_sequential_inference(model: TinyDEModel, x: np.ndarray,
                             quant: QuantSpec, Q: int | None = None,
                             trace: list[str] | None = None) -> np.ndarray:
    """M quantized member passes through the simulated pipeline, [M,B,K].

    ``Q`` is the router control bit width (default: just wide enough for
    M).  ``trace``, when given, collects one text line per layer per pass
    recording the counter value, control word, and selected member.
    """
    if model.mode != "sequential":
        raise ModeError("the CiM pipeline simulates sequential mode")
    if Q is None:
        Q = max(1, math.ceil(math.log2(model.M))) if model.M > 1 else 1
    if model.M > 2 ** Q:
        raise ConfigError(f"M={model.M} exceeds 2^Q={2 ** Q} routing paths")
    RouterState(Q=Q)
    model.reset_counters()
    outs = []
    for m in range(model.M):
        h = np.asarray(x, dtype=np.float64)
        for li, (linear, bank) in enumerate(zip(model.linears[:-1], model.banks)):
            h = quantize(h, quant.dac_bits, *quant.dac_range)
            h = h @ linear.W.T + linear.b
            h = quantize(h, quant.adc_bits, *quant.adc_range)
            c = bank.counter
            control = binary_control(c, Q)
            member = parse_control(control)
            if member >= model.M:
                raise ConfigError(f"router selected member {member} >= M={model.M}")
            if trace is not None:
                trace.append(
                    f"pass={m} layer={li} counter={c} control={control} member={member}"
                )
            h, _ = norm_forward(bank.member(member), h, train=False)
            h, _ = relu6_forward(h)
        h = quantize(h, quant.dac_bits, *quant.dac_range)
        h = h @ model.linears[-1].W.T + model.linears[-1].b
        h = quantize(h, quant.adc_bits, *quant.adc_range)
        outs.append(h)
        model.advance_counters()
    model.reset_counters()
    return np.stack(outs)


def write_trace(path, trace: list[str]) -> None:
    with open(path, "w") as fh:
        fh.write("\n".join(trace) + ("\n" if trace else ""))
