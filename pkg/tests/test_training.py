import json

from jointie.estimator import JointExtractor
from jointie.synthetic import generate_synthetic_corpus
from jointie.training import TrainingConfig, train

from .conftest import TINY


def test_single_example_overfit():
    """Full-batch training on one document drives the loss to near zero."""
    schema, examples, _ = generate_synthetic_corpus(seed=0, size=1, m=4)
    est = JointExtractor(schema, dropout=0.0, learning_rate=1e-3, batch_size=1, epochs=200, seed=0)
    losses = [rec["L"] for rec in est.fit(examples).history_]
    warmup = 20
    assert all(b <= a for a, b in zip(losses[warmup:], losses[warmup + 1:]))
    assert losses[-1] < 0.05


def test_train_writes_artifacts(small_corpus, tmp_path):
    schema, examples, _ = small_corpus
    cfg = TrainingConfig(epochs=3, batch_size=2, learning_rate=1e-2, window_length=24, stride=12)
    result = train(cfg, schema, examples[:4], None, tmp_path)
    records = [json.loads(x) for x in (tmp_path / "metrics.jsonl").read_text().splitlines()]
    assert [r["epoch"] for r in records] == [1, 2, 3]
    assert records[0]["dev_squad_f1"] is None
    assert result["estimator"].history_[-1]["L"] == records[-1]["L"]
    # without a dev set the best checkpoint is the last epoch
    assert (tmp_path / "best.npz").read_bytes() == (tmp_path / "final.npz").read_bytes()


def test_config_builds_matching_estimator(small_corpus):
    cfg = TrainingConfig(model="pairwise", window_length=24, stride=12, seed=5)
    est = cfg.estimator(small_corpus[0])
    assert type(est).__name__ == "PairwiseExtractor"
    assert est.get_params()["seed"] == 5 and est.window_length == 24


def test_dev_metrics_recorded(small_corpus):
    schema, examples, _ = small_corpus
    est = JointExtractor(schema, **TINY).fit(examples[:4], dev=examples[4:])
    for rec in est.history_:
        assert 0.0 <= rec["dev_squad_f1"] <= 1.0 and 0.0 <= rec["dev_conll_f1"] <= 1.0
