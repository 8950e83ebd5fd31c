"""Key-bag defense: several master keys plus logit-level inversions.

Each generation picks one entry of the bag uniformly and keeps it for the
whole sequence.  An inverted entry biases the complement of the green set,
so averaging the logit effects of a key and its inversion reproduces the
original logits up to a constant shift that softmax ignores.  Detection
takes the maximum green-fraction z over every master's partition and its
complement, with the threshold lifted for the number of partitions tried.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .detect import DetectionReport, kgw_green_z
from .errors import LabError
from .ngram_rules import GREEN_BIAS_SCHEMES, RuleParams, derive_key, green_partition, kgw_bias
from .prf import mix64
from .stats import Z_MODERATE

ALLOWED_BAG_SIZES = (1, 2, 4, 8)


@dataclass(frozen=True)
class KeyBag:
    """Masters plus optional paired inversions; entries = K union K-bar."""

    masters: tuple[int, ...]
    paired_inversions: bool

    def __post_init__(self):
        if not self.masters:
            raise LabError("empty-bag")
        if self.bag_size not in ALLOWED_BAG_SIZES:
            raise LabError("bad-bag-size", f"{self.bag_size!r}")

    @classmethod
    def from_seed(cls, master_seed: int, bag_size: int) -> "KeyBag":
        if bag_size not in ALLOWED_BAG_SIZES:
            raise LabError("bad-bag-size", f"{bag_size!r}")
        if bag_size == 1:
            return cls((mix64(master_seed, 1),), False)
        masters = tuple(mix64(master_seed, j) for j in range(1, bag_size // 2 + 1))
        return cls(masters, True)

    @property
    def entries(self) -> tuple[tuple[int, bool], ...]:
        if not self.paired_inversions:
            return tuple((m, False) for m in self.masters)
        out = []
        for m in self.masters:
            out.append((m, False))
            out.append((m, True))
        return tuple(out)

    @property
    def bag_size(self) -> int:
        return len(self.masters) * (2 if self.paired_inversions else 1)


def bag_pick(bag: KeyBag, rng_seed: int, generation_id: int) -> tuple[int, bool]:
    """Uniform entry for one generation; deterministic in (seed, generation_id)."""
    entries = bag.entries
    rng = np.random.default_rng((rng_seed & ((1 << 64) - 1), int(generation_id)))
    return entries[int(rng.integers(len(entries)))]


def apply_bagged_kgw(dist: np.ndarray, master: int, inverted: bool, context,
                     params: RuleParams) -> np.ndarray:
    """Green-bias transform under one bag entry; inverted entries bias the
    complement of the derived green set."""
    if params.scheme not in GREEN_BIAS_SCHEMES:
        raise LabError("bad-params", f"bag needs a green-bias scheme, got {params.scheme}")
    p = np.asarray(dist, dtype=np.float64)
    if params.delta == 0.0:
        return p.copy()
    key = derive_key(master, context, params.scheme, params.window)
    green = green_partition(key, p.size, params.gamma)
    ids = green if not inverted else np.setdiff1d(np.arange(p.size), green)
    return kgw_bias(p, ids, params.delta)


def bag_threshold(n_partitions: int, base_z: float = Z_MODERATE) -> float:
    """Bonferroni-style lift of the single-test z threshold for a max over
    n_partitions green/complement partitions."""
    tail = float(sps.norm.sf(base_z))
    return float(sps.norm.isf(tail / n_partitions))


def bag_detect(text, bag: KeyBag, params: RuleParams, vocab_size: int) -> DetectionReport:
    """Max green-fraction z over every master's partition and its complement."""
    toks = np.asarray(text, dtype=np.intp)
    if toks.size < 20:
        raise LabError("insufficient-tokens", f"{toks.size} < 20")
    z_scores = []
    n_scored = 0
    for master in bag.masters:
        z, hits, n_scored = kgw_green_z(toks, master, params, vocab_size)
        z_scores.append(z)
        # the complement partition's count is determined by the green count
        gc = 1.0 - int(params.gamma * vocab_size) / vocab_size
        z_scores.append(((n_scored - hits) - gc * n_scored)
                        / np.sqrt(n_scored * gc * (1.0 - gc)))
    n_partitions = 2 * len(bag.masters)
    threshold = bag_threshold(n_partitions)
    best = float(max(z_scores))
    return DetectionReport(
        scheme="water_bag",
        score=best,
        z_or_p=best,
        verdict=best > threshold,
        tokens_scored=n_scored,
        threshold=threshold,
    )
