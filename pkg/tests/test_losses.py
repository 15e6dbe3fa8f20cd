import math

import pytest
import torch

from jointie.data import Document, LabeledExample, SpanAnnotation, ValidationError
from jointie.gradcheck import finite_difference_check
from jointie.losses import (
    LEARNABLE_ALPHA, SUM, LossCombiner, combine_losses, ner_loss, span_loss, span_targets,
)


def example(n, spans_by_field):
    anns = tuple(SpanAnnotation(i, tuple(s)) for i, s in spans_by_field.items())
    return LabeledExample(Document("d", tuple(f"w{k}" for k in range(n))), anns)


class TestSpanLoss:
    def test_perfect_prediction(self):
        logits = torch.full((1, 4), -1e4)
        logits[0, 2] = 0.0
        assert span_loss(logits, logits, torch.tensor([[2, 2]])).item() == pytest.approx(0.0, abs=1e-12)

    def test_uniform(self):
        n1 = 4
        logits = torch.zeros((1, n1), dtype=torch.float64)
        loss = span_loss(logits, logits, torch.tensor([[1, 3]]))
        assert loss.item() == pytest.approx(2 * math.log(n1), abs=1e-12)
        assert loss.item() / 2 == pytest.approx(1.3863, abs=1e-4)

    def test_targets_sentinel_and_first_span(self):
        ex = example(6, {0: [(1, 2), (4, 5)]})
        assert span_targets(ex, 2) == [(2, 3), (0, 0)]

    def test_mean_over_fields(self):
        logits = torch.zeros((2, 3), dtype=torch.float64)
        logits[0, 1] = 5.0
        s = span_loss(logits, logits, torch.tensor([[1, 1], [0, 2]]))
        ce = torch.nn.functional.cross_entropy
        want = (ce(logits[:1], torch.tensor([1])) * 2 + ce(logits[1:], torch.tensor([0]))
                + ce(logits[1:], torch.tensor([2]))) / 2
        assert s.item() == pytest.approx(want.item())

    def test_out_of_range_target(self):
        with pytest.raises(ValidationError):
            span_loss(torch.zeros(1, 3), torch.zeros(1, 3), torch.tensor([[3, 3]]))

    def test_one_hot_limit_gives_zero_gradient(self):
        logits = torch.full((2, 5), -60.0, dtype=torch.float64)
        logits[0, 3] = 60.0
        logits[1, 0] = 60.0
        logits.requires_grad_(True)
        span_loss(logits, logits, torch.tensor([[3, 3], [0, 0]])).backward()
        assert logits.grad.abs().max().item() < 1e-40


class TestNerLoss:
    def test_perfect(self):
        logits = torch.full((3, 3), -1e4)
        gold = torch.tensor([0, 2, 1])
        logits[torch.arange(3), gold] = 0.0
        assert ner_loss(logits, gold).item() == pytest.approx(0.0, abs=1e-12)

    def test_uniform(self):
        loss = ner_loss(torch.zeros((5, 3), dtype=torch.float64), torch.tensor([0, 1, 2, 0, 0]))
        assert loss.item() == pytest.approx(math.log(3), abs=1e-12)

    def test_two_rows_by_hand(self):
        logits = torch.tensor([[1.0, 0.0, 0.0], [0.0, 2.0, 1.0]], dtype=torch.float64)
        gold = torch.tensor([0, 2])
        row0 = -(1.0 - math.log(math.e + 2))
        row1 = -(1.0 - math.log(1 + math.e ** 2 + math.e))
        assert ner_loss(logits, gold).item() == pytest.approx((row0 + row1) / 2, abs=1e-12)

    def test_mask(self):
        logits = torch.zeros((1, 3, 3), dtype=torch.float64)
        logits[0, 2] = torch.tensor([50.0, -50.0, 0.0])
        mask = torch.tensor([[True, True, False]])
        loss = ner_loss(logits, torch.tensor([[0, 1, 1]]), mask)
        assert loss.item() == pytest.approx(math.log(3), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            ner_loss(torch.zeros(3, 3), torch.tensor([0, 1]))


class TestCombine:
    def test_sum(self):
        assert combine_losses(torch.tensor(0.5), torch.tensor(0.3)).item() == pytest.approx(0.8)
        a, b = torch.tensor(0.123456789, dtype=torch.float64), torch.tensor(0.987654321, dtype=torch.float64)
        assert LossCombiner(SUM)(a, b).item() == (a + b).item()

    def test_alpha_half(self):
        out = combine_losses(torch.tensor(0.5), torch.tensor(0.3), LEARNABLE_ALPHA, 0.0)
        assert out.item() == pytest.approx(0.4)
        comb = LossCombiner(LEARNABLE_ALPHA, 0.5)
        assert comb.alpha.item() == pytest.approx(0.5)
        assert comb(torch.tensor(0.5), torch.tensor(0.3)).item() == pytest.approx(0.4)

    def test_alpha_gradient(self):
        comb = LossCombiner(LEARNABLE_ALPHA, 0.3).double()
        l_span = torch.tensor(1.7, dtype=torch.float64)
        l_ner = torch.tensor(0.4, dtype=torch.float64)
        result = finite_difference_check(lambda: comb(l_span, l_ner), {"raw_alpha": comb.raw_alpha},
                                         samples_per_tensor=1)
        assert result.pass_rate == 1.0
        # dL/dalpha = L_span - L_NER, chained through the sigmoid
        a = comb.alpha.item()
        assert result.records[0][2] == pytest.approx((1.7 - 0.4) * a * (1 - a))

    def test_sum_mode_alpha_frozen(self):
        assert not LossCombiner(SUM).raw_alpha.requires_grad

    def test_bad_mode(self):
        with pytest.raises(ValueError):
            LossCombiner("mean")
