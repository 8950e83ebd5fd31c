import numpy as np
import pytest
from dataclasses import replace

from wmlab.errors import LabError
from wmlab.ngram_rules import RuleParams
from wmlab.stats import kl_divergence
from wmlab.toylm import (
    FixedListRule,
    NgramRule,
    PromptSpec,
    ToyService,
    Vocab,
    base_distribution,
    build_default_model,
    empirical_distribution,
    fixed_prefix_pool,
    question_prompts,
    sample_completion,
    with_fixed_prefix,
)


def test_vocab_validation():
    Vocab(4)
    Vocab(2, ("a", "b"))
    with pytest.raises(LabError):
        Vocab(1)
    with pytest.raises(LabError):
        Vocab(2, ("a", "a"))


def test_prompt_spec_validation():
    with pytest.raises(LabError):
        PromptSpec("p", "q0", "nonsense")
    with pytest.raises(LabError):
        PromptSpec("p", "q0", "quasi_random")  # no alphabet
    with pytest.raises(LabError):
        PromptSpec("p", "q0", "fixed", ((1, 2),), (9,))  # token outside position set
    with pytest.raises(LabError):
        PromptSpec("p", "q0", "fixed", ((1, 2), (3, 4)), (1,))  # wrong length
    spec = PromptSpec("p", "q0", "fixed", ((1, 2), (3, 4)), (2, 3))
    assert spec.prefix_len == 2


def test_paired_questions_within_kl_budget(model):
    p0 = model.answer_distribution("q0", (), 1.0)
    p1 = model.answer_distribution("q1", (), 1.0)
    assert kl_divergence(p0, p1) <= 0.01


def test_zero_budget_pair_is_identical():
    m = build_default_model(3, answer_count=8, pair_kl=0.0)
    p0 = m.answer_distribution("q0", (), 1.0)
    p1 = m.answer_distribution("q1", (), 1.0)
    assert np.array_equal(p0, p1)


def test_pairing_violation_rejected(model):
    bad = dict(model.answer_logits)
    bad["q1"] = bad["q0"] + np.linspace(-2.0, 2.0, len(bad["q0"]))
    with pytest.raises(LabError):
        replace(model, answer_logits=bad)


def test_base_distribution_uniform_prefix_slot():
    m = build_default_model(3, answer_count=8, prefix_scale=0.0)
    prompt = question_prompts(m, "quasi_random", 3)[0]
    d = base_distribution(m, prompt, (), 1.0)
    letters = np.asarray(m.slot_alphabets[0])
    assert np.allclose(d[letters], 1.0 / 26.0)
    assert d.sum() == pytest.approx(1.0)


def test_base_distribution_answer_step(model, v1_prompts):
    prompt = v1_prompts[0]
    ctx = prompt.fixed_prefix_tokens
    d = base_distribution(model, prompt, ctx, 1.0)
    answers = np.asarray(model.answer_tokens)
    assert d[answers].sum() == pytest.approx(1.0)


def test_base_distribution_rejects_bad_context(model, v1_prompts, v2_prompts):
    with pytest.raises(LabError) as err:
        base_distribution(model, v1_prompts[0], (999,), 1.0)
    assert err.value.code == "bad-context"
    full = v2_prompts[0].prefix_alphabet
    too_long = (full[0][0], full[1][0], full[2][0], model.answer_tokens[0], 0)
    with pytest.raises(LabError):
        base_distribution(model, v2_prompts[0], too_long, 1.0)


def test_sample_completion_one_hot_answer():
    m = build_default_model(3, answer_count=1)
    prompt = question_prompts(m, "fixed", 3)[0]
    only = m.answer_tokens[0]
    for seed in range(5):
        toks = sample_completion(m, prompt, None, 1.0, rng_seed=seed)
        assert toks[-1] == only
        assert toks[:3] == prompt.fixed_prefix_tokens


def test_sample_completion_deterministic(model, v2_prompts):
    a = sample_completion(model, v2_prompts[0], None, 1.0, rng_seed=7)
    b = sample_completion(model, v2_prompts[0], None, 1.0, rng_seed=7)
    assert a == b
    rule = NgramRule(RuleParams("kgw"), 99)
    a = sample_completion(model, v2_prompts[0], rule, 1.0, rng_seed=7)
    b = sample_completion(model, v2_prompts[0], rule, 1.0, rng_seed=7)
    assert a == b


def test_monte_carlo_matches_exact_distribution():
    m = build_default_model(5, answer_count=8)
    prompt = question_prompts(m, "fixed", 3)[0]
    svc = ToyService(m, None)
    counts = svc.answer_counts(prompt, 100_000, np.random.default_rng(0))
    exact = base_distribution(m, prompt, prompt.fixed_prefix_tokens, 1.0)
    assert np.abs(counts / 100_000 - exact).sum() < 0.01


def test_empirical_distribution_basics():
    assert empirical_distribution([0, 0, 1, 1], 2).tolist() == [0.5, 0.5]
    assert empirical_distribution([0] * 10, 3).tolist() == [1.0, 0.0, 0.0]
    with pytest.raises(LabError) as err:
        empirical_distribution([], 4)
    assert err.value.code == "no-samples"


def test_empirical_distribution_concentration(rng):
    draws = rng.choice(2, size=10_000, p=[0.7, 0.3])
    est = empirical_distribution(draws, 2)
    assert np.abs(est - np.array([0.7, 0.3])).sum() < 0.02


def test_empirical_convergence_over_sample_counts():
    m = build_default_model(5, answer_count=8)
    prompt = question_prompts(m, "fixed", 3)[0]
    exact = base_distribution(m, prompt, prompt.fixed_prefix_tokens, 1.0)
    svc = ToyService(m, None)
    for seed in (0, 1, 2):
        errs = []
        for w in (100, 1_000, 10_000):
            counts = svc.answer_counts(prompt, w, np.random.default_rng(seed))
            errs.append(np.abs(counts / w - exact).sum())
        assert errs[0] >= errs[1] - 0.02
        assert errs[1] >= errs[2] - 0.02


def test_prefix_irrelevance_idealization(pure_model):
    # unwatermarked service: answer law identical for any legal prefix
    prompt = question_prompts(pure_model, "fixed", 3)[0]
    pool = fixed_prefix_pool(pure_model, 5)
    dists = [
        base_distribution(pure_model, with_fixed_prefix(prompt, pfx), pfx, 1.0)
        for pfx in pool
    ]
    for d in dists[1:]:
        assert np.array_equal(d, dists[0])


def test_jitter_breaks_exact_independence(model):
    prompt = question_prompts(model, "fixed", 3)[0]
    pool = fixed_prefix_pool(model, 2)
    a = base_distribution(model, with_fixed_prefix(prompt, pool[0]), pool[0], 1.0)
    b = base_distribution(model, with_fixed_prefix(prompt, pool[1]), pool[1], 1.0)
    assert not np.array_equal(a, b)


def test_ngram_key_is_function_of_prefix(model):
    # same fixed prefix -> identical watermarked answer law; the derived key
    # at the answer step only depends on the emitted prefix
    prompt = question_prompts(model, "fixed", 3)[0]
    pool = fixed_prefix_pool(model, 8)
    svc = ToyService(model, NgramRule(RuleParams("kgw"), 1234))
    p0 = with_fixed_prefix(prompt, pool[0])
    a = svc._step_distribution(p0, pool[0])
    b = svc._step_distribution(p0, pool[0])
    assert np.array_equal(a, b)
    # prefixes differing in the last token give different green sets
    other = next(p for p in pool if p[2] != pool[0][2])
    c = svc._step_distribution(with_fixed_prefix(prompt, other), other)
    assert not np.allclose(a, c)


@pytest.mark.parametrize("rule", [
    None,
    NgramRule(RuleParams("kgw"), 77),
    NgramRule(RuleParams("aar"), 78),
    FixedListRule("exp_edit", 79, 60),
])
def test_batch_sampler_matches_single_path(model, v2_prompts, rule):
    """The vectorized cell sampler and the autoregressive path share one law."""
    svc = ToyService(model, rule)
    prompt = v2_prompts[0]
    n = 8000
    prefix, answers = svc.prefix_answer_samples(prompt, n, np.random.default_rng(5))
    singles = np.array(
        [svc.complete(prompt, np.random.default_rng((9, i)))[-1] for i in range(n)]
    )
    V = model.vocab.size
    batch_freq = np.bincount(answers, minlength=V) / n
    single_freq = np.bincount(singles, minlength=V) / n
    assert np.abs(batch_freq - single_freq).sum() < 0.1


def test_answer_counts_matches_single_path_fixed_prefix(model, v1_prompts):
    svc = ToyService(model, NgramRule(RuleParams("kgw"), 55))
    prompt = with_fixed_prefix(v1_prompts[0], fixed_prefix_pool(model, 1)[0])
    n = 8000
    counts = svc.answer_counts(prompt, n, np.random.default_rng(3))
    singles = np.array(
        [svc.complete(prompt, np.random.default_rng((4, i)))[-1] for i in range(n)]
    )
    single_freq = np.bincount(singles, minlength=model.vocab.size) / n
    assert np.abs(counts / n - single_freq).sum() < 0.1


def test_generate_text_deterministic_and_in_support(model):
    svc = ToyService(model, NgramRule(RuleParams("kgw"), 1))
    a = svc.generate_text(50, np.random.default_rng(2))
    b = svc.generate_text(50, np.random.default_rng(2))
    assert np.array_equal(a, b)
    assert set(a.tolist()) <= set(model.answer_tokens)
