import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wmlab.contrast import PriorModel, contrast_probe, contrast_similarity
from wmlab.errors import LabError
from wmlab.ngram_rules import RuleParams
from wmlab.stats import check_distribution
from wmlab.toylm import (
    NgramRule,
    ToyService,
    build_default_model,
    perturb_model,
    question_prompts,
)


@pytest.fixture(scope="module")
def contrast_model():
    return build_default_model(7, answer_count=32, extra_questions=10, prefix_jitter=0.02)


@pytest.fixture(scope="module")
def contrast_prompts(contrast_model):
    qids = tuple(f"q{i}" for i in range(2, 12))
    return question_prompts(contrast_model, "none", question_ids=qids)


@pytest.fixture(scope="module")
def matched_prior(contrast_model, contrast_prompts):
    return PriorModel.from_proxies([contrast_model], contrast_prompts)


@given(st.lists(st.lists(st.integers(min_value=1, max_value=50), min_size=6, max_size=6),
                min_size=1, max_size=5))
@settings(max_examples=40, deadline=None)
def test_prior_of_valid_distributions_is_valid(rows):
    dists = [np.array(r, dtype=float) / sum(r) for r in rows]
    mean = np.mean(dists, axis=0)
    check_distribution(mean)


def test_target_equal_to_prior_scores_zero(matched_prior, contrast_prompts):
    estimates = {
        p.prompt_id: matched_prior.distributions[p.prompt_id].copy()
        for p in contrast_prompts
    }
    assert contrast_similarity(estimates, matched_prior) == 0.0


def test_contrast_requires_two_prompts(matched_prior, contrast_prompts):
    pid = contrast_prompts[0].prompt_id
    with pytest.raises(LabError):
        contrast_similarity({pid: matched_prior.distributions[pid]}, matched_prior)


def test_unigram_flagged_against_matched_prior(contrast_model, contrast_prompts, matched_prior):
    svc = ToyService(contrast_model, NgramRule(RuleParams("unigram"), 888))
    for seed in (1, 2):
        r = contrast_probe(svc, matched_prior, contrast_prompts,
                           samples=10_000, repeats=3, rng_seed=seed)
        assert r.stats.z_score > 4.0
        assert r.stats.mean_sim > 0.5


def test_unwatermarked_not_flagged(contrast_model, contrast_prompts, matched_prior):
    svc = ToyService(contrast_model, None)
    for seed in (1, 2):
        r = contrast_probe(svc, matched_prior, contrast_prompts,
                           samples=10_000, repeats=3, rng_seed=seed)
        assert r.stats.z_score < 4.0
        assert abs(r.stats.mean_sim) < 0.15


def test_unigram_zero_delta_behaves_unwatermarked(contrast_model, contrast_prompts,
                                                  matched_prior):
    svc = ToyService(contrast_model, NgramRule(RuleParams("unigram", delta=0.0), 888))
    r = contrast_probe(svc, matched_prior, contrast_prompts,
                       samples=10_000, repeats=3, rng_seed=5)
    assert r.stats.z_score < 4.0


def test_unigram_rank_signature_near_exact_at_large_samples(contrast_model,
                                                            contrast_prompts,
                                                            matched_prior):
    # global key -> one green set everywhere -> deviation ranks agree
    svc = ToyService(contrast_model, NgramRule(RuleParams("unigram"), 888))
    r = contrast_probe(svc, matched_prior, contrast_prompts,
                       samples=100_000, repeats=2, rng_seed=9)
    assert r.stats.mean_sim > 0.8


def test_offset_proxy_elevates_but_stays_below_watermark_band(contrast_model,
                                                              contrast_prompts):
    svc = ToyService(contrast_model, None)
    single = PriorModel.from_proxies(
        [perturb_model(contrast_model, 99, 1.0)], contrast_prompts)
    multi = PriorModel.from_proxies(
        [perturb_model(contrast_model, s, 1.0) for s in range(99, 107)], contrast_prompts)
    r_single = contrast_probe(svc, single, contrast_prompts,
                              samples=10_000, repeats=3, rng_seed=4)
    r_multi = contrast_probe(svc, multi, contrast_prompts,
                             samples=10_000, repeats=3, rng_seed=4)
    assert r_single.stats.mean_sim > r_multi.stats.mean_sim
    assert r_single.stats.mean_sim < 0.5
    assert r_multi.stats.z_score < r_single.stats.z_score


def test_contrast_probe_deterministic(contrast_model, contrast_prompts, matched_prior):
    svc = ToyService(contrast_model, NgramRule(RuleParams("unigram"), 888))
    a = contrast_probe(svc, matched_prior, contrast_prompts, samples=5_000, rng_seed=3)
    b = contrast_probe(svc, matched_prior, contrast_prompts, samples=5_000, rng_seed=3)
    assert a.repeat_sims == b.repeat_sims


def test_prior_missing_prompt_rejected(contrast_model, contrast_prompts, matched_prior):
    estimates = {
        "unknown": matched_prior.distributions[contrast_prompts[0].prompt_id],
        contrast_prompts[1].prompt_id:
            matched_prior.distributions[contrast_prompts[1].prompt_id],
    }
    with pytest.raises(LabError):
        contrast_similarity(estimates, matched_prior)
