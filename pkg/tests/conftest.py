import numpy as np
import pytest

from wmlab.toylm import build_default_model, fixed_prefix_pool, question_prompts


@pytest.fixture(scope="session")
def model():
    """Standard experiment model: leaky prefixes, 32 answer tokens."""
    return build_default_model(7, answer_count=32, pair_kl=0.01, prefix_jitter=0.02)


@pytest.fixture(scope="session")
def pure_model():
    """Idealized model: answers exactly independent of the prefix."""
    return build_default_model(7, answer_count=32, pair_kl=0.01, prefix_jitter=0.0)


@pytest.fixture(scope="session")
def v1_prompts(model):
    return question_prompts(model, "fixed", 3)


@pytest.fixture(scope="session")
def v2_prompts(model):
    return question_prompts(model, "quasi_random", 3)


@pytest.fixture(scope="session")
def prefix_pool(model):
    return fixed_prefix_pool(model, 50)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
