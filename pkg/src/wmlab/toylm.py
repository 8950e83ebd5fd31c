"""Controllable synthetic autoregressive token service.

The model emits a short structured completion per prompt: a prefix of up to
five slot tokens (letters / digits / animals / fruits / vehicles by default)
followed by one answer token, all over a single shared vocabulary.  Prompts
either pin the prefix to fixed tokens, let the service sample each slot
("quasi-random" prefixes), or skip the prefix entirely.  Questions come in
pairs whose answer distributions are within a configured KL budget of each
other.

Idealizations, stated once here:

* The answer distribution is exactly independent of which legal prefix was
  emitted, unless ``prefix_jitter`` > 0, in which case a small prefix-keyed
  logit perturbation (shared across questions) models the leakage a real
  service exhibits.
* A watermark rule transforms the temperature-applied distribution at every
  generation step.  Deterministic choosers (the exponential-minimum rule)
  consume fresh per-generation randomness on quasi-random slots - their
  marginal there is exactly the base distribution - while the answer step is
  keyed strictly by the emitted prefix n-gram.  Without this, a service asked
  for "random" tokens would emit the same prefix forever, which is not what
  deployed services do.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import LabError
from .fixed_list import KeyList, _inverse_transform_pick, _its_state, key_index
from .ngram_rules import RuleParams, aar_choose, apply_rule, one_hot
from .prf import key_rng, mix64
from .stats import kl_divergence, softmax_with_temperature
from .waterbag import KeyBag, apply_bagged_kgw

PREFIX_MODES = ("fixed", "quasi_random", "none")
DEFAULT_SLOT_SIZES = (26, 10, 4, 3, 3)


@dataclass(frozen=True)
class Vocab:
    size: int
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.size < 2:
            raise LabError("bad-vocab", f"size={self.size!r}")
        if self.labels is not None:
            if len(self.labels) != self.size or len(set(self.labels)) != self.size:
                raise LabError("bad-vocab", "labels must be unique, one per token")


@dataclass(frozen=True)
class PromptSpec:
    """Structural stand-in for a probing prompt.

    ``prefix_alphabet`` lists the candidate token ids per prefix position;
    fixed-mode prompts additionally pin one token per position.
    ``tail_tokens`` stand in for the last tokens of the prompt text itself:
    they seed key derivation for the first completion steps (real prompts
    end differently per question) but are never emitted.
    """

    prompt_id: str
    question_id: str
    prefix_mode: str
    prefix_alphabet: tuple[tuple[int, ...], ...] = ()
    fixed_prefix_tokens: tuple[int, ...] | None = None
    tail_tokens: tuple[int, ...] = ()

    def __post_init__(self):
        if self.prefix_mode not in PREFIX_MODES:
            raise LabError("bad-prompt", f"prefix_mode={self.prefix_mode!r}")
        if self.prefix_mode == "none":
            if self.prefix_alphabet:
                raise LabError("bad-prompt", "mode 'none' takes no prefix alphabet")
            return
        if not self.prefix_alphabet or any(len(a) == 0 for a in self.prefix_alphabet):
            raise LabError("bad-prompt", "each prefix position needs candidates")
        if self.prefix_mode == "fixed":
            toks = self.fixed_prefix_tokens
            if toks is None or len(toks) != len(self.prefix_alphabet):
                raise LabError("bad-prompt", "fixed mode needs one token per position")
            for pos, t in enumerate(toks):
                if t not in self.prefix_alphabet[pos]:
                    raise LabError("bad-prompt", f"token {t} not legal at position {pos}")

    @property
    def prefix_len(self) -> int:
        return len(self.prefix_alphabet)


@dataclass(frozen=True, eq=False)
class ToyLmModel:
    """Immutable model: slot logits for the prefix grammar plus per-question
    answer logits, with declared KL pairings between questions."""

    vocab: Vocab
    slot_alphabets: tuple[tuple[int, ...], ...]
    answer_tokens: tuple[int, ...]
    answer_logits: dict
    prefix_logits: tuple[np.ndarray, ...]
    pairing: tuple[tuple[str, str, float], ...] = ()
    prefix_jitter: float = 0.0
    jitter_seed: int = 0

    def __post_init__(self):
        for qa, qb, eps in self.pairing:
            pa = softmax_with_temperature(self.answer_logits[qa], 1.0)
            pb = softmax_with_temperature(self.answer_logits[qb], 1.0)
            if kl_divergence(pa, pb) > eps + 1e-12:
                raise LabError("pairing-violated", f"KL({qa}||{qb}) > {eps}")

    @property
    def context_width(self) -> int:
        return len(self.slot_alphabets)

    def slot_distribution(self, position: int, temperature: float) -> np.ndarray:
        """Full-vocabulary distribution for one quasi-random prefix slot."""
        ids = np.asarray(self.slot_alphabets[position], dtype=np.intp)
        probs = softmax_with_temperature(self.prefix_logits[position], temperature)
        out = np.zeros(self.vocab.size)
        out[ids] = probs
        return out

    def answer_distribution(self, question_id: str, prefix_context,
                            temperature: float) -> np.ndarray:
        """Full-vocabulary answer distribution, jittered by the emitted prefix."""
        logits = np.asarray(self.answer_logits[question_id], dtype=np.float64)
        if self.prefix_jitter > 0.0 and len(prefix_context) > 0:
            key = mix64(self.jitter_seed, *[int(t) for t in prefix_context])
            logits = logits + self.prefix_jitter * key_rng(key).standard_normal(logits.size)
        probs = softmax_with_temperature(logits, temperature)
        out = np.zeros(self.vocab.size)
        out[np.asarray(self.answer_tokens, dtype=np.intp)] = probs
        return out


def base_distribution(model: ToyLmModel, prompt: PromptSpec, context,
                      temperature: float) -> np.ndarray:
    """Unwatermarked next-token distribution at the position after ``context``."""
    ctx = tuple(int(t) for t in context)
    n = prompt.prefix_len
    if len(ctx) > n:
        raise LabError("bad-context", "past the answer step")
    for pos, tok in enumerate(ctx):
        if prompt.prefix_mode == "fixed":
            if tok != prompt.fixed_prefix_tokens[pos]:
                raise LabError("bad-context", f"token {tok} at position {pos}")
        elif tok not in prompt.prefix_alphabet[pos]:
            raise LabError("bad-context", f"token {tok} at position {pos}")
    pos = len(ctx)
    if pos == n:
        return model.answer_distribution(prompt.question_id, ctx, temperature)
    if prompt.prefix_mode == "fixed":
        return one_hot(prompt.fixed_prefix_tokens[pos], model.vocab.size)
    return model.slot_distribution(pos, temperature)


def empirical_distribution(samples, vocab_size: int) -> np.ndarray:
    """Normalized counts of sampled token ids over the vocabulary."""
    arr = np.asarray(samples, dtype=np.intp)
    if arr.size == 0:
        raise LabError("no-samples")
    return np.bincount(arr, minlength=vocab_size) / arr.size


# --------------------------------------------------------------------------
# Watermarked service
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class NgramRule:
    params: RuleParams
    master: int


@dataclass(frozen=True)
class FixedListRule:
    kind: str  # "exp_edit" | "its_edit"
    master_seed: int
    length: int = 420

    def __post_init__(self):
        if self.kind not in ("exp_edit", "its_edit"):
            raise LabError("unknown-scheme", self.kind)


@dataclass(frozen=True)
class BagRule:
    bag: KeyBag
    params: RuleParams


class ToyService:
    """Sampling oracle over a toy model, optionally watermarked.

    All sampling entry points are pure functions of the supplied generator,
    so independent per-cell generators give reproducible, order-independent
    collection.
    """

    def __init__(self, model: ToyLmModel, rule=None, temperature: float = 1.0):
        self.model = model
        self.rule = rule
        self.temperature = temperature
        self.key_list = None
        if isinstance(rule, FixedListRule):
            self.key_list = KeyList(rule.master_seed, rule.length, model.vocab.size)
        self._fl_tables: dict = {}

    # -- single-completion path ------------------------------------------

    def _fixed_list_pick(self, dist: np.ndarray, start: int, step: int) -> int:
        kl = self.key_list
        idx = key_index(kl.length, start, step) - 1
        if self.rule.kind == "exp_edit":
            return aar_choose(dist, kl.vectors[idx])
        perm, u = _its_state(int(kl.keys[idx]), kl.vocab_size)
        return _inverse_transform_pick(dist, perm, u)

    def _step_distribution(self, prompt: PromptSpec, context, start_index=None,
                           bag_entry=None) -> np.ndarray:
        base = base_distribution(self.model, prompt, context, self.temperature)
        rule = self.rule
        if rule is None:
            return base
        pos = len(context)
        key_ctx = prompt.tail_tokens + tuple(context)
        if isinstance(rule, NgramRule):
            if rule.params.scheme == "aar" and pos < prompt.prefix_len \
                    and prompt.prefix_mode == "quasi_random":
                return base  # fresh-entropy slot; see module docstring
            return apply_rule(base, rule.master, key_ctx, rule.params)
        if isinstance(rule, FixedListRule):
            return one_hot(self._fixed_list_pick(base, start_index, pos + 1),
                           self.model.vocab.size)
        if isinstance(rule, BagRule):
            master, inverted = bag_entry
            return apply_bagged_kgw(base, master, inverted, key_ctx, rule.params)
        raise LabError("unknown-scheme", repr(rule))

    def _init_generation_state(self, rng) -> tuple:
        start_index = None
        bag_entry = None
        if isinstance(self.rule, FixedListRule):
            start_index = int(rng.integers(1, self.rule.length + 1))
        elif isinstance(self.rule, BagRule):
            entries = self.rule.bag.entries
            bag_entry = entries[int(rng.integers(len(entries)))]
        return start_index, bag_entry

    def complete(self, prompt: PromptSpec, rng, start_index=None,
                 bag_entry=None) -> tuple[int, ...]:
        """One completion: prefix tokens plus the answer token."""
        if start_index is None and bag_entry is None:
            start_index, bag_entry = self._init_generation_state(rng)
        tokens: list[int] = []
        for _ in range(prompt.prefix_len + 1):
            dist = self._step_distribution(prompt, tuple(tokens), start_index, bag_entry)
            tokens.append(self._draw(dist, rng))
        return tuple(tokens)

    @staticmethod
    def _draw(dist: np.ndarray, rng) -> int:
        support = np.flatnonzero(dist > 0)
        if support.size == 1:
            return int(support[0])
        p = dist[support]
        return int(rng.choice(support, p=p / p.sum()))

    # -- vectorized cell samplers ----------------------------------------

    def answer_counts(self, prompt: PromptSpec, count: int, rng) -> np.ndarray:
        """Counts over the vocabulary of ``count`` answer-token samples.

        Only valid for prompts whose prefix is fully determined (fixed or
        absent); the quasi-random path is prefix_answer_samples.
        """
        if prompt.prefix_mode == "quasi_random":
            raise LabError("bad-prompt", "use prefix_answer_samples for quasi-random prompts")
        ctx = prompt.fixed_prefix_tokens or ()
        V = self.model.vocab.size
        rule = self.rule
        if rule is None or isinstance(rule, NgramRule):
            dist = self._step_distribution(prompt, ctx)
            return rng.multinomial(count, dist / dist.sum()).astype(np.int64)
        if isinstance(rule, FixedListRule):
            base = base_distribution(self.model, prompt, ctx, self.temperature)
            step = len(ctx) + 1
            table = np.array(
                [self._fixed_list_pick(base, s, step) for s in range(1, rule.length + 1)],
                dtype=np.intp,
            )
            starts = rng.integers(0, rule.length, size=count)
            return np.bincount(table[starts], minlength=V).astype(np.int64)
        if isinstance(rule, BagRule):
            entries = self.rule.bag.entries
            picks = rng.integers(0, len(entries), size=count)
            out = np.zeros(V, dtype=np.int64)
            for e, entry in enumerate(entries):
                n_e = int(np.sum(picks == e))
                if n_e == 0:
                    continue
                dist = self._step_distribution(prompt, ctx, bag_entry=entry)
                out += rng.multinomial(n_e, dist / dist.sum())
            return out
        raise LabError("unknown-scheme", repr(rule))

    def _sample_ngram_tree(self, prompt: PromptSpec, count: int, rng,
                           bag_entry=None) -> tuple[np.ndarray, np.ndarray]:
        """Level-wise sampler for rules that key each slot off the context so
        far.  Distinct contexts are expanded in sorted order so the draw
        sequence is reproducible."""
        n = prompt.prefix_len
        V = self.model.vocab.size
        prefix = np.zeros((count, n), dtype=np.intp)
        groups: list[tuple[tuple[int, ...], np.ndarray]] = [((), np.arange(count))]
        for pos in range(n):
            nxt: list[tuple[tuple[int, ...], np.ndarray]] = []
            for ctx, idx in groups:
                dist = self._step_distribution(prompt, ctx, bag_entry=bag_entry)
                support = np.flatnonzero(dist > 0)
                p = dist[support]
                draws = rng.choice(support, size=idx.size, p=p / p.sum())
                prefix[idx, pos] = draws
                for tok in np.unique(draws):
                    nxt.append((ctx + (int(tok),), idx[draws == tok]))
            groups = nxt
        answers = np.zeros(count, dtype=np.intp)
        for ctx, idx in groups:
            dist = self._step_distribution(prompt, ctx, bag_entry=bag_entry)
            support = np.flatnonzero(dist > 0)
            if support.size == 1:
                answers[idx] = support[0]
                continue
            p = dist[support]
            answers[idx] = rng.choice(support, size=idx.size, p=p / p.sum())
        return prefix, answers

    def _fixed_list_completion_table(self, prompt: PromptSpec) -> np.ndarray:
        """(m, n+1) token matrix: the deterministic completion per start index."""
        sig = (prompt.prompt_id, prompt.question_id, prompt.prefix_len)
        table = self._fl_tables.get(sig)
        if table is not None:
            return table
        m = self.rule.length
        n = prompt.prefix_len
        table = np.zeros((m, n + 1), dtype=np.intp)
        for s in range(1, m + 1):
            ctx: list[int] = []
            for pos in range(n + 1):
                base = base_distribution(self.model, prompt, ctx, self.temperature)
                tok = self._fixed_list_pick(base, s, pos + 1)
                table[s - 1, pos] = tok
                ctx.append(tok)
        self._fl_tables[sig] = table
        return table

    def prefix_answer_samples(self, prompt: PromptSpec, count: int,
                              rng) -> tuple[np.ndarray, np.ndarray]:
        """``count`` completions of a quasi-random prompt: (prefix matrix, answers)."""
        if prompt.prefix_mode != "quasi_random":
            raise LabError("bad-prompt", "prefix_answer_samples needs a quasi-random prompt")
        prefix, answers, _ = self._prefix_answer_keys(prompt, count, rng)
        return prefix, answers

    def _prefix_answer_keys(self, prompt: PromptSpec, count: int,
                            rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """As prefix_answer_samples but also reporting the hidden per-generation
        key id (start index, bag entry, derived n-gram key, or 0)."""
        n = prompt.prefix_len
        V = self.model.vocab.size
        rule = self.rule
        if isinstance(rule, FixedListRule):
            table = self._fixed_list_completion_table(prompt)
            starts = rng.integers(0, rule.length, size=count)
            rows = table[starts]
            return rows[:, :n], rows[:, n], starts + 1
        if isinstance(rule, BagRule):
            entries = rule.bag.entries
            picks = rng.integers(0, len(entries), size=count)
            prefix = np.zeros((count, n), dtype=np.intp)
            answers = np.zeros(count, dtype=np.intp)
            for e, entry in enumerate(entries):
                idx = np.flatnonzero(picks == e)
                if idx.size == 0:
                    continue
                pfx, ans = self._sample_ngram_tree(prompt, idx.size, rng, bag_entry=entry)
                prefix[idx] = pfx
                answers[idx] = ans
            return prefix, answers, picks
        if rule is None or isinstance(rule, NgramRule):
            if rule is None or (rule.params.scheme == "aar"):
                # independent slots (base law); answers grouped by prefix
                prefix = np.zeros((count, n), dtype=np.intp)
                for pos in range(n):
                    dist = self.model.slot_distribution(pos, self.temperature)
                    support = np.flatnonzero(dist > 0)
                    p = dist[support]
                    prefix[:, pos] = rng.choice(support, size=count, p=p / p.sum())
                answers = np.zeros(count, dtype=np.intp)
                uniq, inverse = np.unique(prefix, axis=0, return_inverse=True)
                for g in range(uniq.shape[0]):
                    idx = np.flatnonzero(inverse == g)
                    ctx = tuple(int(t) for t in uniq[g])
                    dist = self._step_distribution(prompt, ctx)
                    support = np.flatnonzero(dist > 0)
                    if support.size == 1:
                        answers[idx] = support[0]
                        continue
                    p = dist[support]
                    answers[idx] = rng.choice(support, size=idx.size, p=p / p.sum())
            else:
                prefix, answers = self._sample_ngram_tree(prompt, count, rng)
            if rule is None:
                keys = np.zeros(count, dtype=np.uint64)
            else:
                from .ngram_rules import derive_key

                uniq, inverse = np.unique(prefix, axis=0, return_inverse=True)
                per_group = np.array(
                    [derive_key(rule.master,
                                prompt.tail_tokens + tuple(int(t) for t in row),
                                rule.params.scheme, rule.params.window)
                     for row in uniq],
                    dtype=np.uint64,
                )
                keys = per_group[inverse]
            return prefix, answers, keys
        raise LabError("unknown-scheme", repr(rule))

    def prefix_key_samples(self, prompt: PromptSpec, count: int,
                           rng) -> tuple[np.ndarray, np.ndarray]:
        """(prefix matrix, per-generation key id) pairs for key-histogram runs."""
        prefix, _, keys = self._prefix_answer_keys(prompt, count, rng)
        return prefix, keys

    # -- free-running generation ------------------------------------------

    def generate_text(self, length: int, rng, question_id: str = "q0",
                      context_seed_len: int = 4) -> np.ndarray:
        """Autoregressive text of ``length`` tokens from the question's answer
        distribution, watermarked per the service rule.

        A few unwatermarked context tokens are drawn first (and dropped) so
        that deterministic rules still produce corpus diversity; key-list
        rules consume key steps only for emitted tokens.
        """
        V = self.model.vocab.size
        base = self.model.answer_distribution(question_id, (), self.temperature)
        support = np.flatnonzero(base > 0)
        p = base[support]
        ctx = list(rng.choice(support, size=context_seed_len, p=p / p.sum()))
        start_index, bag_entry = self._init_generation_state(rng)
        out = []
        for i in range(1, length + 1):
            rule = self.rule
            if rule is None:
                dist = base
            elif isinstance(rule, NgramRule):
                dist = apply_rule(base, rule.master, ctx, rule.params)
            elif isinstance(rule, FixedListRule):
                dist = one_hot(self._fixed_list_pick(base, start_index, i), V)
            elif isinstance(rule, BagRule):
                dist = apply_bagged_kgw(base, bag_entry[0], bag_entry[1], ctx, rule.params)
            else:
                raise LabError("unknown-scheme", repr(rule))
            tok = self._draw(dist, rng)
            ctx.append(tok)
            out.append(tok)
        return np.array(out, dtype=np.intp)


def sample_completion(model: ToyLmModel, prompt: PromptSpec, rule=None,
                      temperature: float = 1.0, rng_seed: int = 0) -> tuple[int, ...]:
    """One seeded completion from the (optionally watermarked) service."""
    svc = ToyService(model, rule, temperature)
    return svc.complete(prompt, np.random.default_rng(rng_seed))


# --------------------------------------------------------------------------
# Builders
# --------------------------------------------------------------------------


def build_default_model(model_seed: int, answer_count: int = 32, pair_kl: float = 0.01,
                        extra_questions: int = 0, prefix_jitter: float = 0.0,
                        slot_sizes: tuple[int, ...] = DEFAULT_SLOT_SIZES,
                        answer_scale: float = 1.0,
                        prefix_scale=(2.2, 1.3, 0.6, 1.0, 1.0),
                        extra_question_spread: float = 0.4) -> ToyLmModel:
    """Deterministic model: slot ids laid out consecutively, then answers.

    Questions q0/q1 are paired within ``pair_kl``; extra questions share a
    base logit vector with a moderate per-question spread (the prior-contrast
    experiments want many prompts with similar but not identical answer
    laws).  The slot logit scales skew the "random" prefix choices the way
    real services do (far from uniform, letters especially), which keeps
    frequently observed prefixes shared across prompts.
    """
    rng = np.random.default_rng(model_seed)
    slots = []
    next_id = 0
    for size in slot_sizes:
        slots.append(tuple(range(next_id, next_id + size)))
        next_id += size
    answers = tuple(range(next_id, next_id + answer_count))
    vocab = Vocab(next_id + answer_count)

    if np.isscalar(prefix_scale):
        scales = [float(prefix_scale)] * len(slot_sizes)
    else:
        scales = list(prefix_scale)[: len(slot_sizes)]
        scales += [1.0] * (len(slot_sizes) - len(scales))
    prefix_logits = tuple(
        rng.normal(0.0, s, size) for s, size in zip(scales, slot_sizes)
    )
    q0 = rng.normal(0.0, answer_scale, answer_count)
    direction = rng.normal(0.0, 1.0, answer_count)
    q1 = _scale_to_kl(q0, direction, pair_kl)
    answer_logits = {"q0": q0, "q1": q1}
    if extra_questions:
        extra_base = rng.normal(0.0, answer_scale, answer_count)
        for j in range(extra_questions):
            answer_logits[f"q{j + 2}"] = (
                extra_base + rng.normal(0.0, extra_question_spread, answer_count)
            )

    return ToyLmModel(
        vocab=vocab,
        slot_alphabets=tuple(slots),
        answer_tokens=answers,
        answer_logits=answer_logits,
        prefix_logits=prefix_logits,
        pairing=(("q0", "q1", pair_kl),),
        prefix_jitter=prefix_jitter,
        jitter_seed=mix64(model_seed, 74),
    )


def _scale_to_kl(base_logits: np.ndarray, direction: np.ndarray, eps: float) -> np.ndarray:
    """Perturb ``base_logits`` along ``direction`` to land just inside the KL budget."""
    if eps <= 0:
        return base_logits.copy()
    p0 = softmax_with_temperature(base_logits, 1.0)
    scale = np.sqrt(2.0 * eps) / max(float(np.std(direction)), 1e-9)
    for _ in range(80):
        cand = base_logits + scale * direction
        if kl_divergence(p0, softmax_with_temperature(cand, 1.0)) <= eps:
            return cand
        scale *= 0.8
    return base_logits.copy()


def perturb_model(model: ToyLmModel, seed: int, scale: float) -> ToyLmModel:
    """Copy of the model with independently perturbed answer logits (a proxy
    model that is deliberately offset from the original)."""
    rng = np.random.default_rng(seed)
    logits = {
        q: np.asarray(l, dtype=np.float64) + rng.normal(0.0, scale, len(l))
        for q, l in model.answer_logits.items()
    }
    return replace(model, answer_logits=logits, pairing=())


# Stand-in ids for the final tokens of each question's prompt text; far above
# any vocabulary id so windowed minima never select them.
_TAIL_BASE = 1 << 33


def question_prompts(model: ToyLmModel, mode: str, prefix_len: int = 3,
                     question_ids: tuple[str, ...] = ("q0", "q1")) -> tuple[PromptSpec, ...]:
    """One prompt per question id, sharing the prefix grammar of the model."""
    if mode == "none":
        alphabet: tuple[tuple[int, ...], ...] = ()
    else:
        if prefix_len > model.context_width:
            raise LabError("bad-prompt", f"prefix_len {prefix_len} > model width")
        alphabet = model.slot_alphabets[:prefix_len]
    out = []
    for qi, q in enumerate(question_ids):
        if q not in model.answer_logits:
            raise LabError("bad-prompt", f"unknown question {q!r}")
        out.append(PromptSpec(f"p-{q}", q, mode, alphabet,
                              None if mode != "fixed" else _first_fixed(alphabet),
                              tail_tokens=(_TAIL_BASE + qi,)))
    return tuple(out)


def _first_fixed(alphabet) -> tuple[int, ...]:
    return tuple(a[0] for a in alphabet)


def with_fixed_prefix(prompt: PromptSpec, tokens: tuple[int, ...]) -> PromptSpec:
    return replace(prompt, prefix_mode="fixed", fixed_prefix_tokens=tuple(tokens))


def fixed_prefix_pool(model: ToyLmModel, count: int = 50, seed: int = 2024,
                      prefix_len: int = 3) -> tuple[tuple[int, ...], ...]:
    """``count`` distinct fixed prefixes drawn from the first ``prefix_len``
    slot alphabets; the stand-ins for externally simulated watermark keys."""
    sizes = [len(model.slot_alphabets[i]) for i in range(prefix_len)]
    total = int(np.prod(sizes))
    if count > total:
        raise LabError("bad-params", f"only {total} distinct prefixes exist")
    flat = np.random.default_rng(seed).choice(total, size=count, replace=False)
    pool = []
    for f in sorted(int(x) for x in flat):
        toks = []
        for i in reversed(range(prefix_len)):
            f, r = divmod(f, sizes[i])
            toks.append(model.slot_alphabets[i][r])
        pool.append(tuple(reversed(toks)))
    return tuple(pool)
