import numpy as np
import pytest

from disctok.accent_sim import build_corpus, plan_from_dict
from disctok.experiment import default_isib_plan_dict


@pytest.fixture(scope="session")
def small_corpus(tmp_path_factory):
    """One small synthetic ISIB corpus shared by unit tests."""
    plan = default_isib_plan_dict(
        n_eval_sentences=8,
        n_template_speakers=2,
        n_native_eval_speakers=3,
        n_accented_speakers=4,
        n_tok_sentences=10,
        n_tok_speakers=2,
    )
    plan["seed"] = 7
    root = tmp_path_factory.mktemp("small_corpus")
    manifests = build_corpus(plan_from_dict(plan), root)
    return root, manifests


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
