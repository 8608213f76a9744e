import math

import numpy as np
import pytest
import torch
from hypothesis import given, settings
from hypothesis import strategies as st

from ovdet.data import BBox
from ovdet.losses import (
    centerness_loss,
    giou,
    giou_loss,
    giou_tensor,
    sigmoid_focal_alignment_loss,
    total_loss,
)
from oracles import centerness_loop, focal_loop, giou_direct


def rand_boxes(rng, n):
    xy = rng.uniform(0, 50, size=(n, 2))
    wh = rng.uniform(0.5, 30, size=(n, 2))
    return np.concatenate([xy, xy + wh], axis=1)


def central_diff(f, x, h=1e-4):
    grad = torch.zeros_like(x)
    flat = x.view(-1)
    for i in range(flat.numel()):
        old = flat[i].item()
        flat[i] = old + h
        up = f(x).item()
        flat[i] = old - h
        down = f(x).item()
        flat[i] = old
        grad.view(-1)[i] = (up - down) / (2 * h)
    return grad


def rel_err(a, b):
    return (a - b).norm().item() / max(a.norm().item(), b.norm().item(), 1e-12)


class TestFocal:
    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(0)
        S = rng.normal(scale=3, size=(4, 6))
        G = (rng.random((4, 6)) < 0.3).astype(float)
        got = sigmoid_focal_alignment_loss(torch.tensor(S), torch.tensor(G), normalizer=3).item()
        assert got == pytest.approx(focal_loop(S, G, normalizer=3), abs=1e-9)

    def test_gamma_zero_no_alpha_is_bce_sum(self):
        S = torch.tensor([[0.3, -1.2], [2.0, 0.1]], dtype=torch.float64)
        G = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
        bce = torch.nn.functional.binary_cross_entropy_with_logits(S, G, reduction="sum")
        got = sigmoid_focal_alignment_loss(S, G, gamma=0.0, alpha_f=-1, normalizer=2)
        assert got.item() == pytest.approx(bce.item() / 2, abs=1e-12)

    def test_saturated_positive(self):
        S = torch.full((1, 1), 20.0, dtype=torch.float64)
        assert sigmoid_focal_alignment_loss(S, torch.ones(1, 1, dtype=torch.float64)).item() < 1e-7

    def test_nan_rejected(self):
        with pytest.raises(ValueError, match="NaN"):
            sigmoid_focal_alignment_loss(torch.tensor([[float("nan")]]), torch.zeros(1, 1))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            sigmoid_focal_alignment_loss(torch.zeros(2, 3), torch.zeros(3, 2))

    @given(st.floats(-8, 8), st.floats(0.01, 2))
    def test_monotone(self, s, step):
        lo = torch.tensor([[s]], dtype=torch.float64)
        hi = lo + step
        one, zero = torch.ones(1, 1, dtype=torch.float64), torch.zeros(1, 1, dtype=torch.float64)
        assert sigmoid_focal_alignment_loss(hi, one) < sigmoid_focal_alignment_loss(lo, one)
        assert sigmoid_focal_alignment_loss(hi, zero) > sigmoid_focal_alignment_loss(lo, zero)


class TestCenterness:
    def test_matches_scalar_loop(self):
        rng = np.random.default_rng(1)
        logits, targets = rng.normal(size=12), rng.random(12)
        mask = rng.random(12) < 0.5
        got = centerness_loss(torch.tensor(logits), torch.tensor(targets), torch.tensor(mask)).item()
        assert got == pytest.approx(centerness_loop(logits, targets, mask), abs=1e-9)

    def test_no_positives(self):
        assert centerness_loss(torch.ones(4), torch.ones(4), torch.zeros(4, dtype=torch.bool)).item() == 0.0

    def test_confident_target_one(self):
        out = centerness_loss(torch.full((3,), 20.0), torch.ones(3), torch.ones(3, dtype=torch.bool))
        assert out.item() < 1e-7


class TestGiou:
    def test_fixed_case(self):
        assert giou((0, 0, 1, 1), (2, 2, 3, 3)) == pytest.approx(-7 / 9, abs=1e-12)
        assert 1 - giou(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)) == pytest.approx(16 / 9, abs=1e-12)

    def test_identity(self):
        b = BBox(1, 2, 5, 9)
        assert giou(b, b) == 1.0
        assert giou_loss(torch.tensor([b.as_list()]), torch.tensor([b.as_list()])).item() == 0.0

    def test_degenerate_box_rejected(self):
        with pytest.raises(ValueError):
            giou((0, 0, 0, 1), (0, 0, 1, 1))

    def test_tensor_matches_oracle(self):
        rng = np.random.default_rng(2)
        a, b = rand_boxes(rng, 500), rand_boxes(rng, 500)
        got = giou_tensor(torch.tensor(a), torch.tensor(b)).numpy()
        want = np.array([giou_direct(x, y) for x, y in zip(a, b)])
        assert np.max(np.abs(got - want)) <= 1e-12

    @settings(max_examples=300)
    @given(st.lists(st.floats(0, 100), min_size=8, max_size=8))
    def test_range_and_symmetry(self, xs):
        a = (min(xs[0], xs[1]), min(xs[2], xs[3]), max(xs[0], xs[1]) + 0.1, max(xs[2], xs[3]) + 0.1)
        b = (min(xs[4], xs[5]), min(xs[6], xs[7]), max(xs[4], xs[5]) + 0.1, max(xs[6], xs[7]) + 0.1)
        g = giou(a, b)
        assert -1 - 1e-12 <= g <= 1 + 1e-12
        assert g == pytest.approx(giou(b, a), abs=1e-12)

    @given(st.floats(0, 20), st.floats(0, 20), st.floats(0.5, 10), st.floats(0.5, 10), st.floats(0, 5), st.floats(0, 5))
    def test_contained_equals_iou(self, x, y, w, h, gx, gy):
        inner = (x, y, x + w, y + h)
        outer = (x - gx, y - gy, x + w + gx, y + h + gy)
        iou = (w * h) / ((w + 2 * gx) * (h + 2 * gy))
        assert giou(inner, outer) == pytest.approx(iou, abs=1e-9)


class TestTotal:
    def _pieces(self, seed=0, N=3, M=10):
        rng = np.random.default_rng(seed)
        S = torch.tensor(rng.normal(size=(N, M)))
        G = torch.zeros(N, M, dtype=torch.float64)
        G[0, 1] = G[1, 4] = 1
        mask = G.sum(0) > 0
        ctr_l, ctr_t = torch.tensor(rng.normal(size=M)), torch.tensor(rng.random(M))
        pred = torch.tensor(rand_boxes(rng, M))
        tgt = torch.tensor(rand_boxes(rng, M))
        return S, G, ctr_l, ctr_t, mask, pred, tgt

    def test_breakdown_sum(self):
        p = self._pieces()
        out = total_loss(*p, kind="detection", alpha=0.7, beta=1.3)
        assert out.total.item() == pytest.approx(out.L_ALI.item() + 0.7 * out.L_CEN.item() + 1.3 * out.L_REG.item(),
                                                 abs=1e-6)
        assert out.num_positives == 2
        assert all(v >= 0 and math.isfinite(v) for k, v in out.as_dict().items())

    @pytest.mark.parametrize("kind", ["grounding", "imagetext"])
    def test_regression_masked_for_non_detection(self, kind):
        p = self._pieces()
        out = total_loss(*p, kind=kind)
        det = total_loss(*p, kind="detection")
        assert det.L_REG.item() > 0
        assert out.L_REG.item() == 0.0
        assert out.total.item() == pytest.approx(out.L_ALI.item() + out.L_CEN.item(), abs=1e-12)

    def test_beta_zero(self):
        p = self._pieces()
        out = total_loss(*p, kind="detection", beta=0.0)
        assert out.total.item() == pytest.approx(out.L_ALI.item() + out.L_CEN.item(), abs=1e-12)

    def test_mixed_batch_masks_per_sample(self):
        S, G, cl, ct, mask, pred, tgt = self._pieces()
        stack = lambda x: torch.stack([x, x])  # noqa: E731
        both = total_loss(stack(S), stack(G), stack(cl), stack(ct), stack(mask), stack(pred), stack(tgt),
                          ["detection", "grounding"])
        single = total_loss(S, G, cl, ct, mask, pred, tgt, "detection")
        assert both.L_REG.item() == pytest.approx(single.L_REG.item(), abs=1e-12)

    def test_permutation_invariant(self):
        S, G, cl, ct, mask, pred, tgt = self._pieces(N=5)
        perm = torch.randperm(5, generator=torch.Generator().manual_seed(0))
        a = total_loss(S, G, cl, ct, mask, pred, tgt).total.item()
        b = total_loss(S[perm], G[perm], cl, ct, mask, pred, tgt).total.item()
        assert abs(a - b) <= 1e-6 * abs(a)


class TestGradients:
    def test_focal(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            S = torch.tensor(rng.normal(size=(3, 5)), requires_grad=True)
            G = torch.tensor((rng.random((3, 5)) < 0.3).astype(float))
            f = lambda x: sigmoid_focal_alignment_loss(x, G, normalizer=2)  # noqa: E731
            f(S).backward()
            assert rel_err(S.grad, central_diff(f, S.detach().clone())) <= 1e-4

    def test_giou(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            pred = torch.tensor(rand_boxes(rng, 3), requires_grad=True)
            tgt = torch.tensor(rand_boxes(rng, 3))
            f = lambda x: giou_loss(x, tgt)  # noqa: E731
            f(pred).backward()
            assert rel_err(pred.grad, central_diff(f, pred.detach().clone())) <= 1e-4
