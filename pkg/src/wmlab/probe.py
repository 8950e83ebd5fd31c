"""Black-box watermark identification probe.

The probe estimates the service's answer distribution once per
(prompt, simulated key) cell, rank-transforms the estimates, and scores the
consistency of key-pair differences across prompt pairs with the average
cosine similarity.  Repeats standardize the mean similarity into a z-score
against a no-watermark reference level.

Simulated keys are fixed prefixes (variant v1, one estimate per configured
prefix) or observed quasi-random prefixes (variant v2, grouping completions
by the emitted prefix and keeping prefixes common to every prompt).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import LabError
from .ngram_rules import apply_rule
from .prf import mix64
from .stats import SimilarityStats, normal_upper_tail, rank_transform, z_test
from .toylm import PromptSpec, ToyService, with_fixed_prefix

VARIANTS = ("v1", "v2")


@dataclass(frozen=True)
class ProbeConfig:
    variant: str
    prompts: tuple[PromptSpec, ...]
    fixed_prefixes: tuple[tuple[int, ...], ...] = ()
    samples: int = 10_000
    mu: float = 0.1
    repeats: int = 3
    rank_transform_enabled: bool = True
    min_count: int | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise LabError("bad-probe-config", f"variant={self.variant!r}")
        if len(self.prompts) < 2:
            raise LabError("bad-probe-config", "need at least 2 prompts")
        if self.samples < 100:
            raise LabError("bad-probe-config", f"samples={self.samples!r}")
        if self.repeats < 2:
            raise LabError("bad-probe-config", f"repeats={self.repeats!r}")
        if self.variant == "v1" and len(self.fixed_prefixes) < 2:
            raise LabError("bad-probe-config", "v1 needs at least 2 fixed prefixes")

    @property
    def group_min_count(self) -> int:
        """v2 keeps prefixes observed at least this often in every prompt."""
        if self.min_count is not None:
            return self.min_count
        return max(30, self.samples // 1000)


@dataclass(frozen=True, eq=False)
class ProbeResult:
    variant: str
    repeat_sims: tuple[float, ...]
    stats: SimilarityStats
    pair_counts: tuple[int, ...]
    key_labels: tuple = ()
    estimates: tuple = field(default=(), repr=False)

    @property
    def verdict(self) -> str:
        return self.stats.verdict


def collect_v1(service: ToyService, config: ProbeConfig, rng_seed: int) -> dict:
    """Empirical answer distributions per (prompt, fixed prefix).

    Each of the W total samples per prompt is split evenly over the prefixes.
    """
    per = config.samples // len(config.fixed_prefixes)
    if per < 1:
        raise LabError("bad-probe-config", "fewer samples than prefixes")
    V = service.model.vocab.size
    out = {}
    for pi, prompt in enumerate(config.prompts):
        rows = np.zeros((len(config.fixed_prefixes), V))
        for ki, prefix in enumerate(config.fixed_prefixes):
            pinned = with_fixed_prefix(prompt, prefix)
            rng = np.random.default_rng((rng_seed, pi, ki))
            rows[ki] = service.answer_counts(pinned, per, rng) / per
        out[prompt.prompt_id] = rows
    return out


def collect_v2(service: ToyService, config: ProbeConfig,
               rng_seed: int) -> tuple[tuple, dict]:
    """Empirical answer distributions per (prompt, observed prefix).

    Completions are grouped by the emitted prefix; only prefixes observed at
    least ``group_min_count`` times in every prompt survive.  Fewer than two
    surviving prefixes is an ``insufficient-common-prefixes`` error.
    """
    V = service.model.vocab.size
    mc = config.group_min_count
    per_prompt = []
    for pi, prompt in enumerate(config.prompts):
        rng = np.random.default_rng((rng_seed, pi))
        prefix, answers = service.prefix_answer_samples(prompt, config.samples, rng)
        uniq, inverse = np.unique(prefix, axis=0, return_inverse=True)
        groups = {}
        for g in range(uniq.shape[0]):
            idx = np.flatnonzero(inverse == g)
            if idx.size >= mc:
                groups[tuple(int(t) for t in uniq[g])] = answers[idx]
        per_prompt.append(groups)
    common = set(per_prompt[0])
    for groups in per_prompt[1:]:
        common &= set(groups)
    labels = tuple(sorted(common))
    if len(labels) < 2:
        raise LabError("insufficient-common-prefixes",
                       f"{len(labels)} prefixes with count >= {mc} in all prompts")
    out = {}
    for prompt, groups in zip(config.prompts, per_prompt):
        rows = np.zeros((len(labels), V))
        for ki, label in enumerate(labels):
            sel = groups[label]
            rows[ki] = np.bincount(sel, minlength=V) / sel.size
        out[prompt.prompt_id] = rows
    return labels, out


def delta_rank(est_a: np.ndarray, est_b: np.ndarray) -> np.ndarray:
    """Elementwise difference of the two estimates' rank vectors."""
    return rank_transform(est_a) - rank_transform(est_b)


def _pairwise_cosines(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """cos(a[m]-a[n], b[m]-b[n]) for every unordered key pair m < n.

    Uses Gram matrices so the K*(K-1)/2 pairs cost three matmuls; zero-norm
    differences contribute similarity 0.
    """
    gab = a @ b.T
    gaa = a @ a.T
    gbb = b @ b.T
    m, n = np.triu_indices(a.shape[0], k=1)
    dot = gab[m, m] - gab[m, n] - gab[n, m] + gab[n, n]
    na = gaa[m, m] - 2.0 * gaa[m, n] + gaa[n, n]
    nb = gbb[m, m] - 2.0 * gbb[m, n] + gbb[n, n]
    denom = np.sqrt(np.maximum(na, 0.0) * np.maximum(nb, 0.0))
    out = np.where(denom > 0.0, dot / np.where(denom > 0.0, denom, 1.0), 0.0)
    return np.clip(out, -1.0, 1.0)


def average_similarity(estimates: dict, rank_enabled: bool = True) -> float:
    """Mean cross-prompt cosine of key-pair differences over all unordered
    prompt pairs and key pairs.

    With ``rank_enabled`` the differences are taken between rank vectors;
    otherwise between the raw empirical probabilities (the ablation path).
    Swapping a pair's order flips both difference vectors, leaving the cosine
    unchanged, so unordered pairs each counted once give the same mean as the
    ordered normalization.
    """
    ids = sorted(estimates)
    if len(ids) < 2:
        raise LabError("bad-probe-config", "need at least 2 prompts")
    mats = {}
    for pid in ids:
        rows = np.asarray(estimates[pid], dtype=np.float64)
        if rows.shape[0] < 2:
            raise LabError("bad-probe-config", "need at least 2 keys per prompt")
        if rank_enabled:
            rows = np.vstack([rank_transform(r) for r in rows]).astype(np.float64)
        mats[pid] = rows
    sims = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            sims.append(_pairwise_cosines(mats[ids[i]], mats[ids[j]]))
    return float(np.mean(np.concatenate(sims)))


def _pair_count(n_prompts: int, n_keys: int) -> int:
    return n_prompts * (n_prompts - 1) * n_keys * (n_keys - 1)


def _stats_from_repeats(sims: list[float], mu: float) -> SimilarityStats:
    mean = float(np.mean(sims))
    sd = float(np.std(sims, ddof=1))
    if sd > 0.0:
        return z_test(mean, sd, mu)
    # A fully deterministic service reproduces the estimates exactly across
    # repeats; zero replicate variance is infinite evidence either way.
    if mean > mu:
        z = math.inf
    elif mean < mu:
        z = -math.inf
    else:
        z = 0.0
    return SimilarityStats(mean, 0.0, z, normal_upper_tail(z))


def probe(service: ToyService, config: ProbeConfig, rng_seed: int) -> ProbeResult:
    """Full identification run: repeats, mean similarity, z-test, verdict."""
    sims: list[float] = []
    all_labels = []
    all_estimates = []
    counts = []
    for r in range(config.repeats):
        repeat_seed = mix64(rng_seed, r)
        if config.variant == "v1":
            estimates = collect_v1(service, config, repeat_seed)
            labels = config.fixed_prefixes
        else:
            labels, estimates = collect_v2(service, config, repeat_seed)
        sims.append(average_similarity(estimates, config.rank_transform_enabled))
        counts.append(_pair_count(len(config.prompts), len(labels)))
        all_labels.append(labels)
        all_estimates.append(estimates)
    return ProbeResult(
        variant=config.variant,
        repeat_sims=tuple(sims),
        stats=_stats_from_repeats(sims, config.mu),
        pair_counts=tuple(counts),
        key_labels=tuple(all_labels),
        estimates=tuple(all_estimates),
    )


def exact_estimates(model, question_ids, rule, contexts, temperature: float = 1.0) -> dict:
    """Infinite-sample estimates: the rule applied to exact answer
    distributions, one row per simulated key context.

    Contexts are raw key material (any token tuples), not grammar prefixes;
    ``rule`` None gives the unwatermarked service, whose estimate is the
    question's base distribution for every key.
    """
    out = {}
    for qid in question_ids:
        rows = []
        for ctx in contexts:
            base = model.answer_distribution(qid, tuple(ctx), temperature)
            if rule is None:
                rows.append(base)
            else:
                rows.append(apply_rule(base, rule.master, tuple(ctx), rule.params))
        out[qid] = np.vstack(rows)
    return out
