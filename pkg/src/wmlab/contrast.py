"""Identification of globally-fixed-key watermarks against a prior distribution.

A single global key produces the same bias direction for every prompt, so the
rank signature of (estimate - prior) should agree across prompts.  The prior
is the mean base distribution of one or more proxy models.  Rank vectors of
the deviations are centered before the cosine so that zero deviations (target
equals prior exactly) and pure noise both read as similarity 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LabError
from .prf import mix64
from .probe import ProbeResult, _stats_from_repeats
from .stats import check_distribution, cosine_similarity, rank_transform
from .toylm import ToyService, base_distribution


@dataclass(frozen=True, eq=False)
class PriorModel:
    """Per-prompt prior distributions (each a valid distribution over V)."""

    distributions: dict

    def __post_init__(self):
        for pid, dist in self.distributions.items():
            check_distribution(dist)

    @classmethod
    def from_proxies(cls, proxies, prompts, temperature: float = 1.0) -> "PriorModel":
        if not proxies:
            raise LabError("bad-params", "need at least one proxy model")
        dists = {}
        for prompt in prompts:
            stack = [base_distribution(m, prompt, (), temperature) for m in proxies]
            dists[prompt.prompt_id] = np.mean(stack, axis=0)
        return cls(dists)


def _centered_deviation_ranks(estimate: np.ndarray, prior: np.ndarray,
                              active: np.ndarray) -> np.ndarray:
    dev = np.asarray(estimate, float)[active] - np.asarray(prior, float)[active]
    r = rank_transform(dev).astype(np.float64)
    return r - r.mean()


def contrast_similarity(estimates: dict, prior: PriorModel) -> float:
    """Mean pairwise cosine of centered rank-of-deviation vectors over all
    unordered prompt pairs.

    Ranks are taken over the active tokens only (positive mass in some
    estimate or prior): tokens no model can emit carry a constant tied rank
    that would correlate every pair of prompts.
    """
    ids = sorted(estimates)
    if len(ids) < 2:
        raise LabError("insufficient-prompts", f"{len(ids)} < 2")
    active = np.zeros(len(prior.distributions[ids[0]]), dtype=bool)
    for pid in ids:
        if pid not in prior.distributions:
            raise LabError("bad-params", f"prior missing prompt {pid!r}")
        active |= np.asarray(estimates[pid]) > 0
        active |= np.asarray(prior.distributions[pid]) > 0
    vecs = {
        pid: _centered_deviation_ranks(estimates[pid], prior.distributions[pid], active)
        for pid in ids
    }
    sims = []
    for i in range(len(ids)):
        for j in range(i + 1, len(ids)):
            sims.append(cosine_similarity(vecs[ids[i]], vecs[ids[j]]))
    return float(np.mean(sims))


def contrast_probe(service: ToyService, prior: PriorModel, prompts,
                   samples: int = 10_000, repeats: int = 3, mu: float = 0.1,
                   rng_seed: int = 0) -> ProbeResult:
    """Sample the target per prompt, score deviations from the prior, z-test."""
    if len(prompts) < 2:
        raise LabError("insufficient-prompts", f"{len(prompts)} < 2")
    V = service.model.vocab.size
    sims = []
    all_estimates = []
    for r in range(repeats):
        repeat_seed = mix64(rng_seed, r)
        estimates = {}
        for pi, prompt in enumerate(prompts):
            rng = np.random.default_rng((repeat_seed, pi))
            counts = service.answer_counts(prompt, samples, rng)
            estimates[prompt.prompt_id] = counts / samples
        sims.append(contrast_similarity(estimates, prior))
        all_estimates.append(estimates)
    n = len(prompts)
    return ProbeResult(
        variant="contrast",
        repeat_sims=tuple(sims),
        stats=_stats_from_repeats(sims, mu),
        pair_counts=(n * (n - 1),) * repeats,
        key_labels=(),
        estimates=tuple(all_estimates),
    )
