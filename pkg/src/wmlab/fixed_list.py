"""Fixed-key-list watermarking: cyclic key consumption and edit-distance detection.

A key list is m pseudorandom vectors over the vocabulary, reconstructible from
(master_seed, m).  Generation picks a uniform start index s and consumes keys
cyclically; exp_edit chooses tokens by the exponential-minimum rule, its_edit
by inverse transform in a key-seeded token ordering.  Detection aligns a text
against every cyclic key window with an edit-distance DP and calibrates the
best alignment cost against freshly drawn key lists.
"""

from __future__ import annotations

import numpy as np

from .errors import LabError
from .ngram_rules import aar_choose
from .prf import key_rng, mix64, uniform_vector


class KeyList:
    """Ordered list of m derived keys, each expanded to a uniform vector over V."""

    def __init__(self, master_seed: int, length: int, vocab_size: int):
        if length < 1:
            raise LabError("empty-key-list", f"length={length!r}")
        self.master_seed = int(master_seed)
        self.length = int(length)
        self.vocab_size = int(vocab_size)
        self.keys = np.array(
            [mix64(self.master_seed, j) for j in range(1, length + 1)], dtype=np.uint64
        )
        self.vectors = np.vstack([uniform_vector(int(k), vocab_size) for k in self.keys])


def key_index(length: int, start: int, step: int) -> int:
    """1-based key index used at generation step ``step`` from start ``start``:
    ((s + i - 1) mod m) + 1."""
    if not 1 <= start <= length:
        raise LabError("bad-start-index", f"start={start!r} for m={length!r}")
    return ((start + step - 1) % length) + 1


def vector_at(key_list: KeyList, start: int, step: int) -> np.ndarray:
    return key_list.vectors[key_index(key_list.length, start, step) - 1]


def _its_state(key: int, vocab_size: int) -> tuple[np.ndarray, float]:
    """Key-seeded token ordering and uniform variate for inverse transform."""
    rng = key_rng(key)
    perm = rng.permutation(vocab_size)
    u = float(rng.random())
    return perm, u


def _inverse_transform_pick(dist: np.ndarray, perm: np.ndarray, u: float) -> int:
    """First token (in perm order) whose cumulative probability exceeds u.

    At u=0 this is the first token of the ordering with positive probability.
    """
    cum = np.cumsum(np.asarray(dist, dtype=np.float64)[perm])
    j = int(np.searchsorted(cum, u, side="right"))
    return int(perm[min(j, len(perm) - 1)])


def exp_step(dist: np.ndarray, key_list: KeyList, start: int, step: int) -> int:
    """Token chosen at generation step ``step`` under exponential-minimum sampling."""
    return aar_choose(dist, vector_at(key_list, start, step))


def its_step(dist: np.ndarray, key_list: KeyList, start: int, step: int) -> int:
    key = int(key_list.keys[key_index(key_list.length, start, step) - 1])
    perm, u = _its_state(key, key_list.vocab_size)
    return _inverse_transform_pick(dist, perm, u)


def exp_edit_generate(model, prompt, key_list: KeyList, start: int, temperature: float = 1.0,
                      rng_seed: int = 0) -> tuple[int, ...]:
    """One completion (prefix tokens + answer) with keys consumed from ``start``."""
    from .toylm import FixedListRule, ToyService

    rule = FixedListRule("exp_edit", key_list.master_seed, key_list.length)
    svc = ToyService(model, rule, temperature)
    return svc.complete(prompt, np.random.default_rng(rng_seed), start_index=start)


def its_edit_generate(model, prompt, key_list: KeyList, start: int, temperature: float = 1.0,
                      rng_seed: int = 0) -> tuple[int, ...]:
    from .toylm import FixedListRule, ToyService

    rule = FixedListRule("its_edit", key_list.master_seed, key_list.length)
    svc = ToyService(model, rule, temperature)
    return svc.complete(prompt, np.random.default_rng(rng_seed), start_index=start)


def _neglog_r_for_text(key_list: KeyList, text: np.ndarray) -> np.ndarray:
    """Matrix N[i, k] = -log r_k(y_i), clipped away from log(0)."""
    r = np.maximum(key_list.vectors[:, text], 1e-30)  # (m, L)
    return -np.log(r).T  # (L, m)


def _alignment_scores(text: np.ndarray, key_lists: list[KeyList], gamma_edit: float) -> np.ndarray:
    """Best (over all m cyclic starts) alignment cost of the text against each list.

    Global alignment of the L text tokens against the L keys following each
    start; substitution costs -log r_key(token), insertions/deletions cost
    gamma_edit.  The DP runs in float32 and is vectorized over all
    (list, start) columns; the within-row dependency of the deletion move is
    resolved by a running minimum over ``candidate - j * gamma`` (costs of
    later deletions form an affine ladder in j).
    """
    text = np.asarray(text, dtype=np.intp)
    L = text.size
    if L == 0:
        raise LabError("empty-text")
    m = key_lists[0].length
    if any(kl.length != m for kl in key_lists):
        raise LabError("bad-params", "key lists must share a length")
    neglog = np.hstack(
        [_neglog_r_for_text(kl, text) for kl in key_lists]
    ).astype(np.float32)  # (L, n*m)
    n_lists = len(key_lists)
    S = n_lists * m

    # Column s0 of list l uses key row (s0 + j) % m at key position j.
    base = np.arange(m)
    offsets = (np.arange(n_lists) * m)[:, None]
    if not np.isfinite(gamma_edit):
        # Pure diagonal substitution at the best start.
        totals = np.zeros(S, dtype=np.float64)
        for i in range(L):
            rows = (base + i + 1) % m  # j = i + 1 on the diagonal
            totals += neglog[i][(rows[None, :] + offsets).ravel()]
        return totals.reshape(n_lists, m).min(axis=1)

    gamma32 = np.float32(gamma_edit)
    j_col = np.arange(L + 1, dtype=np.float32)[:, None]  # (L+1, 1)
    jgamma = j_col * gamma32
    dp = np.broadcast_to(jgamma, (L + 1, S)).copy()
    idx = ((base[None, :] + np.arange(1, L + 1)[:, None]) % m)  # (L, m)
    idx = (idx[:, None, :] + offsets[None, :, :]).reshape(L, S).astype(np.int32)
    cand = np.empty_like(dp)
    scratch = np.empty_like(dp[1:])
    for i in range(1, L + 1):
        np.take(neglog[i - 1], idx, out=scratch)  # match y_i with key position j
        scratch += dp[:-1]
        np.add(dp[1:], gamma32, out=cand[1:])
        np.minimum(cand[1:], scratch, out=cand[1:])
        cand[0] = i * gamma32
        cand -= jgamma
        np.minimum.accumulate(cand, axis=0, out=cand)
        np.add(cand, jgamma, out=dp)
    return dp[L].reshape(n_lists, m).min(axis=1).astype(np.float64)


def edit_distance_score(text, key_list: KeyList, gamma_edit: float = 5.0) -> float:
    """Minimal alignment cost over all start indices; lower = more aligned."""
    return float(_alignment_scores(np.asarray(text), [key_list], gamma_edit)[0])


def edit_distance_detect(text, key_list: KeyList, trials: int = 20, rng_seed: int = 0,
                         gamma_edit: float = 5.0) -> float:
    """Permutation p-value: fraction of random key lists scoring <= the observed.

    Trial lists are freshly seeded with the same length and vocabulary; the
    text is flagged as watermarked when p < 0.05.
    """
    if trials < 20:
        raise LabError("too-few-trials", f"trials={trials!r}")
    rng = np.random.default_rng(rng_seed)
    seeds = rng.integers(0, 2**63, size=trials)
    lists = [key_list] + [
        KeyList(int(s), key_list.length, key_list.vocab_size) for s in seeds
    ]
    scores = _alignment_scores(np.asarray(text), lists, gamma_edit)
    observed, trial_scores = scores[0], scores[1:]
    return float(np.mean(trial_scores <= observed))
