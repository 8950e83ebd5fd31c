"""N-gram-keyed watermark rules: KGW family, Aar, DiPmark, gamma-reweight, Unigram.

Each rule is a pure transform F(P, k) of a next-token distribution P under a
derived key k.  Keys come from a fixed 64-bit mixing of the master key with a
scheme-specific view of the recent context window:

    kgw            last token
    kgw_min        minimum token id in a window of 4
    kgw_skip       left-most token id in a window of 3
    aar            last N tokens (N=1 by default)
    dipmark        last N tokens
    gamma_reweight last N tokens (alpha fixed at 0.5)
    unigram        no context at all (the master key is global)

Windows shorter than required are left-padded with PAD_TOKEN.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabError
from .prf import PAD_TOKEN, key_rng, mix64, uniform_vector

SCHEMES = ("kgw", "kgw_min", "kgw_skip", "aar", "dipmark", "gamma_reweight", "unigram")

# Schemes that bias logits of a key-seeded green subset.
GREEN_BIAS_SCHEMES = ("kgw", "kgw_min", "kgw_skip", "unigram")

_DEFAULT_WINDOW = {
    "kgw": 1,
    "kgw_min": 4,
    "kgw_skip": 3,
    "aar": 1,
    "dipmark": 1,
    "gamma_reweight": 1,
    "unigram": 0,
}


@dataclass(frozen=True)
class RuleParams:
    """Parameters of an n-gram keyed rule.

    Defaults follow the common reference settings: gamma=0.5, delta=2 for the
    green-bias family, alpha=0.45 for DiPmark, window 1 for Aar.
    """

    scheme: str
    gamma: float = 0.5
    delta: float = 2.0
    alpha: float = 0.45
    window: int | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise LabError("unknown-scheme", self.scheme)
        if not 0.0 < self.gamma < 1.0:
            raise LabError("bad-params", f"gamma={self.gamma!r}")
        if self.delta < 0:
            raise LabError("bad-params", f"delta={self.delta!r}")
        if not 0.0 <= self.alpha <= 0.5:
            raise LabError("bad-params", f"alpha={self.alpha!r}")
        if self.window is not None and self.window < 1:
            raise LabError("bad-params", f"window={self.window!r}")

    @property
    def effective_window(self) -> int:
        return self.window if self.window is not None else _DEFAULT_WINDOW[self.scheme]


def _padded_window(context, width: int) -> tuple[int, ...]:
    ctx = tuple(int(t) for t in context)
    if len(ctx) >= width:
        return ctx[-width:]
    return (PAD_TOKEN,) * (width - len(ctx)) + ctx


def derive_key(master: int, context, scheme: str, window: int | None = None) -> int:
    """Per-step watermark key from the master key and the recent window."""
    if scheme not in SCHEMES:
        raise LabError("unknown-scheme", scheme)
    if scheme == "unigram":
        return master & ((1 << 64) - 1)
    width = window if window is not None else _DEFAULT_WINDOW[scheme]
    w = _padded_window(context, width)
    if scheme == "kgw":
        return mix64(master, w[-1])
    if scheme == "kgw_min":
        return mix64(master, min(w))
    if scheme == "kgw_skip":
        return mix64(master, w[0])
    # aar / dipmark / gamma_reweight hash the whole window in order
    return mix64(master, *w)


def green_partition(key: int, vocab_size: int, gamma: float) -> np.ndarray:
    """Key-seeded pseudorandom green subset of size floor(gamma * V).

    Uniform over subsets via a seeded shuffle; returned sorted for a
    canonical representation.
    """
    if not 0.0 < gamma < 1.0:
        raise LabError("bad-params", f"gamma={gamma!r}")
    size = int(gamma * vocab_size)
    perm = key_rng(key).permutation(vocab_size)
    return np.sort(perm[:size])


def kgw_bias(dist: np.ndarray, green: np.ndarray, delta: float) -> np.ndarray:
    """Add delta to the logits of green tokens and renormalize.

    Zero-probability tokens stay at zero (log 0 = -inf survives the bias).
    """
    p = np.asarray(dist, dtype=np.float64)
    with np.errstate(divide="ignore"):
        logits = np.log(p)
    logits[np.asarray(green, dtype=np.intp)] += delta
    finite = logits[np.isfinite(logits)]
    logits = logits - finite.max()
    e = np.exp(logits)
    return e / e.sum()


def aar_r_vector(key: int, vocab_size: int) -> np.ndarray:
    """The key's pseudorandom guidance vector r over the vocabulary."""
    return uniform_vector(key, vocab_size)


def aar_choose(dist: np.ndarray, r: np.ndarray) -> int:
    """Deterministic exponential-minimum choice: argmax_i r_i ** (1 / p_i).

    Computed as argmax log(r) / p for stability; zero-probability tokens are
    never chosen.
    """
    p = np.asarray(dist, dtype=np.float64)
    r = np.asarray(r, dtype=np.float64)
    with np.errstate(divide="ignore"):
        log_r = np.log(r)
    scores = np.where(p > 0, log_r / np.maximum(p, 1e-300), -np.inf)
    return int(np.argmax(scores))


def _dipmark_apply(dist: np.ndarray, perm: np.ndarray, alpha: float) -> np.ndarray:
    """Reweight by laying probabilities on [0,1] in ``perm`` order and cutting
    the leading mass at alpha and, mirrored, at 1-alpha.

    The sum of the two cuts reallocates exactly the mass removed below alpha
    onto the tail, so the expectation over a uniform permutation reproduces
    the input exactly for every alpha; at alpha=0.5 the cuts coincide and the
    rule reads "drop the left half, double the rest".
    """
    p = np.asarray(dist, dtype=np.float64)
    pp = p[perm]
    hi = np.cumsum(pp)
    lo = np.concatenate(([0.0], hi[:-1]))
    kept = np.maximum(hi - alpha, 0.0) - np.maximum(lo - alpha, 0.0)
    kept += np.maximum(hi - (1.0 - alpha), 0.0) - np.maximum(lo - (1.0 - alpha), 0.0)
    out = np.empty_like(p)
    out[perm] = kept
    return out


def dipmark_reweight(dist: np.ndarray, key: int, alpha: float) -> np.ndarray:
    """Key-seeded permutation reweight; alpha=0 is the identity, alpha=0.5
    is the gamma-reweight special case."""
    if not 0.0 <= alpha <= 0.5:
        raise LabError("bad-params", f"alpha={alpha!r}")
    if alpha == 0.0:
        return np.asarray(dist, dtype=np.float64).copy()
    perm = key_rng(key).permutation(len(dist))
    return _dipmark_apply(dist, perm, alpha)


def one_hot(token: int, vocab_size: int) -> np.ndarray:
    v = np.zeros(vocab_size, dtype=np.float64)
    v[token] = 1.0
    return v


def apply_rule(dist: np.ndarray, master: int, context, params: RuleParams) -> np.ndarray:
    """Dispatch F(P, k) for the configured scheme.

    Always returns a distribution; Aar's deterministic choice comes back as
    a point mass.
    """
    p = np.asarray(dist, dtype=np.float64)
    key = derive_key(master, context, params.scheme, params.window)
    if params.scheme in GREEN_BIAS_SCHEMES:
        if params.delta == 0.0:
            return p.copy()
        green = green_partition(key, p.size, params.gamma)
        return kgw_bias(p, green, params.delta)
    if params.scheme == "aar":
        return one_hot(aar_choose(p, aar_r_vector(key, p.size)), p.size)
    if params.scheme == "dipmark":
        return dipmark_reweight(p, key, params.alpha)
    if params.scheme == "gamma_reweight":
        return dipmark_reweight(p, key, 0.5)
    raise LabError("unknown-scheme", params.scheme)
