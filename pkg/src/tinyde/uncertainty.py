"""Uncertainty metrics over member output samples [M,B,K].

Classification metrics act on member probability vectors (predictive
entropy of the member mean, pairwise maximum disagreement); regression
metrics use the unbiased variance across the member axis and a Gaussian
negative log-likelihood with a variance floor.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError

PROB_TOL = 1e-6


def _check_probs(probs: np.ndarray) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.ndim != 3:
        raise ValueError(f"expected samples [M,B,K], got shape {probs.shape}")
    if np.any(probs < -PROB_TOL):
        raise ValueError("negative probabilities")
    sums = probs.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > PROB_TOL):
        raise ValueError("probability rows do not sum to 1 within tolerance")
    return probs


def predictive_entropy(probs: np.ndarray) -> np.ndarray:
    """Shannon entropy (nats) of the member-averaged probability vector."""
    probs = _check_probs(probs)
    mean = probs.mean(axis=0)  # [B,K]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(mean > 0.0, mean * np.log(mean), 0.0)
    return -terms.sum(axis=-1)


def max_disagreement(probs: np.ndarray):
    """Running elementwise max of |p_m - p_m'| over all unordered member pairs.

    Returns (md_per_class [B,K], md_per_sample [B]); the per-sample value
    is the max over classes.  Bounded in [0,1] since inputs are
    probability vectors.
    """
    probs = _check_probs(probs)
    M, B, K = probs.shape
    md = np.zeros((B, K))
    for m in range(M - 1):
        for m2 in range(m + 1, M):
            np.maximum(md, np.abs(probs[m] - probs[m2]), out=md)
    md_per_sample = md.max(axis=-1) if K > 0 else np.zeros(B)
    return md, md_per_sample


def ensemble_variance(samples: np.ndarray) -> np.ndarray:
    """Unbiased per-output variance across the member axis; zeros for M=1."""
    samples = np.asarray(samples, dtype=np.float64)
    if samples.ndim != 3:
        raise ValueError(f"expected samples [M,B,K], got shape {samples.shape}")
    if samples.shape[0] < 2:
        return np.zeros(samples.shape[1:])
    return samples.var(axis=0, ddof=1)


def regression_nll(samples: np.ndarray, targets: np.ndarray,
                   min_var: float = 1e-6, target_scale: float = 1.0):
    """Gaussian NLL with mu = member mean and var = max(member var, min_var).

    ``samples`` and ``targets`` are in standardized target space;
    ``target_scale`` (sigma of the original targets) adds the log sigma_y
    change-of-variable correction so the returned NLL refers to
    original-scale targets.  Returns (per-sample NLL [B], dataset mean).
    """
    samples = np.asarray(samples, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.float64)
    if samples.ndim != 3 or samples.shape[0] < 2:
        raise DegenerateInputError("regression NLL needs samples [M,B,1] with M >= 2")
    mu = samples.mean(axis=0)          # [B,1]
    var = np.maximum(samples.var(axis=0, ddof=1), min_var)
    nll = 0.5 * (np.log(2.0 * np.pi) + np.log(var) + (targets - mu) ** 2 / var)
    nll = nll[:, 0] + np.log(target_scale)
    return nll, float(nll.mean())


@dataclass
class UncertaintyReport:
    """Per-sample uncertainty summary for one evaluation batch."""

    mean_prediction: np.ndarray   # [B,K]
    entropy: np.ndarray           # [B]
    max_disagreement: np.ndarray  # [B]
    variance: np.ndarray          # [B,K]
    nll: np.ndarray | None = None  # [B], regression only

    @classmethod
    def from_probs(cls, probs: np.ndarray) -> "UncertaintyReport":
        _, md = max_disagreement(probs)
        return cls(
            mean_prediction=np.asarray(probs).mean(axis=0),
            entropy=predictive_entropy(probs),
            max_disagreement=md,
            variance=ensemble_variance(probs),
        )

    def to_csv(self, path) -> None:
        B, K = self.mean_prediction.shape
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            header = [f"mean_{k}" for k in range(K)]
            header += ["entropy", "max_disagreement"]
            header += [f"variance_{k}" for k in range(K)]
            if self.nll is not None:
                header.append("nll")
            writer.writerow(["sample"] + header)
            for b in range(B):
                row = [repr(float(v)) for v in self.mean_prediction[b]]
                row += [repr(float(self.entropy[b])),
                        repr(float(self.max_disagreement[b]))]
                row += [repr(float(v)) for v in self.variance[b]]
                if self.nll is not None:
                    row.append(repr(float(self.nll[b])))
                writer.writerow([b] + row)


def histogram(values: np.ndarray, bins: int = 30,
              value_range: tuple[float, float] | None = None):
    """Plot-ready histogram: (bin_edges [bins+1], counts [bins])."""
    counts, edges = np.histogram(np.asarray(values), bins=bins, range=value_range)
    return edges, counts


def histogram_to_csv(path, edges: np.ndarray, counts: np.ndarray) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["bin_left", "bin_right", "count"])
        for i, c in enumerate(counts):
            writer.writerow([repr(float(edges[i])), repr(float(edges[i + 1])), int(c)])
