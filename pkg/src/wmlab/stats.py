"""Probability-vector arithmetic and the statistical primitives used everywhere.

A distribution is just a 1-D numpy array of non-negative reals summing to 1;
:func:`check_distribution` enforces that contract where it matters.  The rank
transform, cosine similarity and z-test implement the probe's test statistic;
KL divergence backs the prompt-pairing condition of the toy model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import LabError

SUM_TOL = 1e-9

# z-score bands for the identification verdict.
BAND_NONE = "no watermark"
BAND_MODERATE = "moderate confidence"
BAND_HIGH = "high confidence"
Z_MODERATE = 4.0
Z_HIGH = 10.0


def check_distribution(probs: np.ndarray, tol: float = SUM_TOL) -> np.ndarray:
    """Validate and return a probability vector (fresh float64 array)."""
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 1 or p.size < 1:
        raise LabError("bad-distribution", "expected a non-empty 1-D vector")
    if np.any(p < 0):
        raise LabError("bad-distribution", "negative entry")
    if abs(float(p.sum()) - 1.0) > tol:
        raise LabError("bad-distribution", f"sums to {p.sum()!r}")
    return p


def rank_transform(dist: np.ndarray) -> np.ndarray:
    """Rank of each entry: the count of entries with value >= its own.

    Ties share the tied group's maximal rank, so a uniform vector maps to
    the all-V vector and the unique maximum gets rank 1.  Works for any
    real vector, not only probability vectors.
    """
    p = np.asarray(dist, dtype=np.float64)
    order = np.sort(p)
    # count(>= x) = size - count(< x)
    return (p.size - np.searchsorted(order, p, side="left")).astype(np.int64)


def cosine_similarity(a: np.ndarray, b: np.ndarray) -> float:
    """Cosine of the angle between two vectors, with Sim(0, .) defined as 0.

    The zero-vector convention matters: the difference of two identical
    empirical distributions is legitimately all-zero and must read as
    "no signal", not an error.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise LabError("shape-mismatch", f"{a.shape} vs {b.shape}")
    na = float(np.linalg.norm(a))
    nb = float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.clip(float(a @ b) / (na * nb), -1.0, 1.0))


def kl_divergence(p: np.ndarray, q: np.ndarray) -> float:
    """Kullback-Leibler divergence sum(p * log(p / q)), in nats.

    Requires q > 0 wherever p > 0; raises ``kl-undefined`` otherwise.
    """
    p = check_distribution(p)
    q = check_distribution(q)
    if p.shape != q.shape:
        raise LabError("shape-mismatch", f"{p.shape} vs {q.shape}")
    support = p > 0
    if np.any(q[support] <= 0):
        raise LabError("kl-undefined", "q has zero mass on p's support")
    return float(np.sum(p[support] * np.log(p[support] / q[support])))


def normal_upper_tail(z: float) -> float:
    """P(Z >= z) for standard normal Z, via erfc; saturates at extreme z."""
    return 0.5 * math.erfc(z / math.sqrt(2.0))


def verdict_for_z(z: float) -> str:
    """Verdict band: z < 4 none, 4 <= z <= 10 moderate, z > 10 high.

    Band edges tolerate float rounding so arithmetic that lands on a
    boundary (for example (0.18 - 0.1) / 0.02) classifies as the boundary
    band.
    """
    if z < Z_MODERATE - 1e-9:
        return BAND_NONE
    if z <= Z_HIGH + 1e-9:
        return BAND_MODERATE
    return BAND_HIGH


@dataclass(frozen=True)
class SimilarityStats:
    """Mean similarity with its standardized test statistic."""

    mean_sim: float
    std_dev: float
    z_score: float
    p_value: float

    @property
    def verdict(self) -> str:
        return verdict_for_z(self.z_score)


def z_test(mean_sim: float, std_dev: float, mu: float) -> SimilarityStats:
    """Standardize a mean similarity against the no-watermark reference mu.

    z = (mean_sim - mu) / std_dev with the p-value from the normal upper
    tail.  A non-positive std_dev is a caller error (``degenerate-variance``).
    """
    if std_dev <= 0:
        raise LabError("degenerate-variance", f"std_dev={std_dev!r}")
    z = (mean_sim - mu) / std_dev
    return SimilarityStats(mean_sim, std_dev, z, normal_upper_tail(z))


def softmax_with_temperature(logits: np.ndarray, temperature: float) -> np.ndarray:
    """softmax(logits / T); T=1 is plain softmax.  Shifted by the max for stability."""
    if temperature <= 0:
        raise LabError("bad-temperature", f"T={temperature!r}")
    z = np.asarray(logits, dtype=np.float64) / temperature
    z = z - np.max(z)
    e = np.exp(z)
    return e / e.sum()


def conditional_entropy(conditioners: np.ndarray, labels: np.ndarray) -> float:
    """Empirical H(label | conditioner) in nats from paired observations."""
    conditioners = np.asarray(conditioners)
    labels = np.asarray(labels)
    if conditioners.shape[0] != labels.shape[0] or labels.shape[0] == 0:
        raise LabError("shape-mismatch", "need equal-length non-empty pairs")
    total = labels.shape[0]
    h = 0.0
    _, group_ids = np.unique(conditioners, axis=0, return_inverse=True)
    for g in np.unique(group_ids):
        sel = labels[group_ids == g]
        w = sel.size / total
        _, counts = np.unique(sel, return_counts=True)
        pk = counts / sel.size
        h += w * float(-(pk * np.log(pk)).sum())
    return h
