"""Desk-scale laboratory for probing LLM services for generation-time watermarks."""

from .contrast import PriorModel, contrast_probe, contrast_similarity
from .detect import DetectionReport, aar_detect, kgw_detect
from .errors import LabError
from .fixed_list import (
    KeyList,
    edit_distance_detect,
    edit_distance_score,
    exp_edit_generate,
    its_edit_generate,
    key_index,
)
from .ngram_rules import (
    RuleParams,
    aar_choose,
    apply_rule,
    derive_key,
    dipmark_reweight,
    green_partition,
    kgw_bias,
)
from .probe import (
    ProbeConfig,
    ProbeResult,
    average_similarity,
    collect_v1,
    collect_v2,
    delta_rank,
    probe,
)
from .stats import (
    SimilarityStats,
    cosine_similarity,
    kl_divergence,
    rank_transform,
    softmax_with_temperature,
    verdict_for_z,
    z_test,
)
from .toylm import (
    BagRule,
    FixedListRule,
    NgramRule,
    PromptSpec,
    ToyLmModel,
    ToyService,
    Vocab,
    base_distribution,
    build_default_model,
    empirical_distribution,
    fixed_prefix_pool,
    question_prompts,
    sample_completion,
)
from .waterbag import KeyBag, apply_bagged_kgw, bag_detect, bag_pick

__version__ = "0.1.0"
