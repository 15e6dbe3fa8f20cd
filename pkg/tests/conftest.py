import pytest
import torch

from jointie.estimator import JointExtractor, PairwiseExtractor
from jointie.synthetic import generate_synthetic_corpus

TINY = dict(window_length=24, stride=12, embed_dim=16, num_layers=1, num_heads=2, feedforward_dim=16,
            dropout=0.0, batch_size=2, learning_rate=1e-2, epochs=2, seed=0)


@pytest.fixture(scope="session")
def small_corpus():
    """Six short documents, two fields."""
    return generate_synthetic_corpus(seed=3, size=6, m=2, length_range=(30, 50))


@pytest.fixture
def tiny_joint(small_corpus):
    schema, _, _ = small_corpus
    return JointExtractor(schema, **TINY)


@pytest.fixture
def tiny_pairwise(small_corpus):
    schema, _, _ = small_corpus
    return PairwiseExtractor(schema, **TINY)


@pytest.fixture(autouse=True)
def _single_thread():
    torch.set_num_threads(1)


# one line per acceptance criterion, shown at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
