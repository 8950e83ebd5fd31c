"""Detection statistics for watermarked token sequences.

Scores only positions whose full key-derivation window lies inside the text,
so detector keys match the ones used during generation regardless of what
context preceded the text.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .errors import LabError
from .ngram_rules import RuleParams, aar_r_vector, derive_key, green_partition

KGW_Z_THRESHOLD = 4.0
AAR_P_THRESHOLD = 0.01


@dataclass(frozen=True)
class DetectionReport:
    scheme: str
    score: float
    z_or_p: float
    verdict: bool
    tokens_scored: int
    threshold: float


def _green_mask(master: int, context, params: RuleParams, vocab_size: int) -> np.ndarray:
    key = derive_key(master, context, params.scheme, params.window)
    mask = np.zeros(vocab_size, dtype=bool)
    mask[green_partition(key, vocab_size, params.gamma)] = True
    return mask


def kgw_green_z(text, master: int, params: RuleParams, vocab_size: int,
                invert: bool = False) -> tuple[float, int, int]:
    """Green-fraction z statistic: (count - gamma*N) / sqrt(N*gamma*(1-gamma)).

    With ``invert`` the complement partition is scored instead (the fraction
    of the vocabulary it covers replaces gamma).
    """
    toks = np.asarray(text, dtype=np.intp)
    w = params.effective_window
    if toks.size < w + 1:
        raise LabError("insufficient-tokens", f"need more than {w} tokens")
    hits = 0
    n = 0
    for i in range(w, toks.size):
        mask = _green_mask(master, toks[i - w:i], params, vocab_size)
        if invert:
            mask = ~mask
        hits += bool(mask[toks[i]])
        n += 1
    if invert:
        g = 1.0 - int(params.gamma * vocab_size) / vocab_size
    else:
        g = params.gamma
    z = (hits - g * n) / np.sqrt(n * g * (1.0 - g))
    return float(z), hits, n


def kgw_detect(text, master: int, params: RuleParams, vocab_size: int) -> DetectionReport:
    """Count tokens landing in their step's green set; flag when z > 4."""
    z, hits, n = kgw_green_z(text, master, params, vocab_size)
    return DetectionReport(
        scheme=params.scheme,
        score=float(hits),
        z_or_p=z,
        verdict=z > KGW_Z_THRESHOLD,
        tokens_scored=n,
        threshold=KGW_Z_THRESHOLD,
    )


def _aar_score(r_values: np.ndarray) -> float:
    """Sum of -log(1 - r) over the per-step guidance values of the scored tokens."""
    r = np.asarray(r_values, dtype=np.float64)
    return float(-np.log1p(-r).sum())


def aar_detect(text, master: int, vocab_size: int, window: int = 1,
               threshold: float = AAR_P_THRESHOLD) -> DetectionReport:
    """Score under the null that each token's r value is an independent uniform.

    The score is gamma(N, 1)-distributed under the null, giving an exact
    p-value.
    """
    toks = np.asarray(text, dtype=np.intp)
    if toks.size < window + 1:
        raise LabError("insufficient-tokens", f"need more than {window} tokens")
    r_values = []
    for i in range(window, toks.size):
        key = derive_key(master, toks[i - window:i], "aar", window)
        r_values.append(aar_r_vector(key, vocab_size)[toks[i]])
    score = _aar_score(np.array(r_values))
    n = len(r_values)
    p = float(sps.gamma.sf(score, a=n))
    return DetectionReport(
        scheme="aar",
        score=score,
        z_or_p=p,
        verdict=p < threshold,
        tokens_scored=n,
        threshold=threshold,
    )
