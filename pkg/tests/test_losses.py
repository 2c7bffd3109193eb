"""Hand oracles, algebraic identities, and gradient checks for every objective."""

import math

import numpy as np
import pytest
import torch

from fdcheck import gradient_check

from aif.emotions import KL_EPS, WHEEL, EmotionDistribution, EmotionTuple
from aif.features import (
    EmotionEnsemble,
    EnsembleWeights,
    FeatureBackbone,
    PatchConfig,
    PerspectiveClassifier,
    SentimentConfig,
)
from aif.losses import (
    GAN_EPS,
    LossWeights,
    aifb_aesthetic_loss,
    aifb_total,
    aifd_aesthetic_loss,
    aifd_total,
    anchor_sentiment_loss,
    content_loss,
    diffusion_loss,
    emotional_distribution_loss,
    feature_stat_difference,
    gan_losses,
    identity_loss,
    satisfied_margin_vectors,
    scaled_sentiment_distance,
    sentiment_metric_loss,
    style_loss,
    texture_mapping_loss,
)

TUPLE = EmotionTuple(WHEEL[0], WHEEL[0], WHEEL[1], WHEEL[4])


def small_double_ensemble():
    """Four-perspective ensemble in float64 sized for 8x8 inputs."""
    backbone = FeatureBackbone(seed=0).double()
    sizes = {"color": 48, "texture": 8, "style": 96, "patch": 64}
    classifiers = {
        name: PerspectiveClassifier(size, seed=i).double()
        for i, (name, size) in enumerate(sizes.items())
    }
    return EmotionEnsemble(
        backbone,
        classifiers,
        EnsembleWeights(np.array([1.0, 1.0, 2.0, 2.0])),
        SentimentConfig(),
        None,
        PatchConfig(size=4, count=2),
    )


class TestLossWeights:
    def test_published_defaults_exact(self):
        w = LossWeights()
        assert w.alpha == 0.02 and w.beta == 0.01
        assert w.lambda_identity_features == 0.01
        assert w.lambda_content == 5.0 and w.lambda_style == 0.3
        assert w.lambda_gan == 3.0 and w.lambda_id == 2.0
        assert w.lambda_ed_b == 140.0 and w.lambda_sm == 30.0
        assert w.lambda_as_b == 600.0 and w.lambda_ae_b == 1.0
        assert w.lambda_finetune == 0.01 and w.gamma == 0.3
        assert w.lambda_dm == 1.0 and w.lambda_tm == 0.001
        assert w.lambda_ed_d == 10.0 and w.lambda_as_d == 10.0 and w.lambda_ae_d == 1.0

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            LossWeights(lambda_content=-1.0)


class TestScaledSentimentDistance:
    def test_hand_values(self):
        vi, vj = torch.tensor([3.0, 4.0]), torch.zeros(2)
        assert scaled_sentiment_distance(vi, vj, 2).item() == pytest.approx(12.5, abs=1e-12)
        assert scaled_sentiment_distance(vi, vj, 1).item() == pytest.approx(25.0, abs=1e-12)
        assert scaled_sentiment_distance(vi, vj, 0).item() == pytest.approx(25.0, abs=1e-12)

    def test_errors(self):
        with pytest.raises(ValueError):
            scaled_sentiment_distance(torch.zeros(2), torch.zeros(3), 1)
        with pytest.raises(ValueError):
            scaled_sentiment_distance(torch.zeros(2), torch.zeros(2), -1)


class TestSentimentMetricLoss:
    def test_all_equal_vectors_pay_both_margins(self):
        v = torch.ones(6)
        loss = sentiment_metric_loss(v, v, v, v, TUPLE)
        assert loss.item() == pytest.approx(0.03, abs=1e-9)

    def test_violation_oracle(self):
        v_sed = torch.zeros(4)
        v_pos = torch.tensor([1.0, 0.0, 0.0, 0.0])
        loss = sentiment_metric_loss(v_sed, v_pos, v_sed, v_sed, TUPLE)
        # d_pos = 1, d_rel = d_neg = 0: both hinges stay active.
        assert loss.item() == pytest.approx((1.0 + 0.02) + 0.01, abs=1e-7)

    def test_satisfied_margins_give_exact_zero(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            sed = WHEEL[int(rng.integers(0, 8))]
            from aif.emotions import sample_emotion_tuple

            tup = sample_emotion_tuple(sed, rng)
            vs = satisfied_margin_vectors(tup, 16, rng)
            loss = sentiment_metric_loss(*(torch.tensor(v) for v in vs), tup)
            assert loss.item() == 0.0

    def test_gradient_check(self):
        rng = np.random.default_rng(0)
        stacked = torch.tensor(rng.normal(size=(4, 8)))

        def fn(x):
            return sentiment_metric_loss(x[0], x[1], x[2], x[3], TUPLE)

        assert gradient_check(fn, stacked) < 1e-6


class TestAnchorSentimentLoss:
    def test_mse_oracle(self):
        loss = anchor_sentiment_loss(torch.tensor([1.0, 2.0]), torch.zeros(2))
        assert loss.item() == pytest.approx(2.5, abs=1e-12)

    def test_shape_error(self):
        with pytest.raises(ValueError):
            anchor_sentiment_loss(torch.zeros(3), torch.zeros(2))

    def test_gradient_check(self):
        target = torch.tensor(np.random.default_rng(1).normal(size=12))

        def fn(x):
            return anchor_sentiment_loss(x, target)

        x = torch.tensor(np.random.default_rng(2).normal(size=12))
        assert gradient_check(fn, x) < 1e-6


class TestContentLoss:
    def test_hand_oracle(self):
        out = [torch.ones(1, 2, 2), torch.full((2, 1, 1), 2.0)]
        ref = [torch.zeros(1, 2, 2), torch.zeros(2, 1, 1)]
        assert content_loss(out, ref).item() == pytest.approx(5.0, abs=1e-12)

    def test_zero_at_identity(self):
        levels = [torch.rand(4, 3, 3)]
        assert content_loss(levels, [l.clone() for l in levels]).item() == 0.0

    def test_errors(self):
        with pytest.raises(ValueError):
            content_loss([torch.zeros(1, 2, 2)], [])
        with pytest.raises(ValueError):
            content_loss([torch.zeros(1, 2, 2)], [torch.zeros(1, 3, 3)])

    def test_gradient_check(self):
        ref = torch.tensor(np.random.default_rng(3).normal(size=(2, 4, 4)))

        def fn(x):
            return content_loss([x], [ref])

        x = torch.tensor(np.random.default_rng(4).normal(size=(2, 4, 4)))
        assert gradient_check(fn, x) < 1e-6


class TestFeatureStatDifference:
    def test_hand_oracle(self):
        a = torch.tensor([[[1.0, 3.0]], [[2.0, 2.0]]])
        b = torch.zeros(2, 1, 2)
        # Channel means (2, 2), variances (1, 0) against all-zero reference.
        expected = math.sqrt(8.0) + 1.0
        assert feature_stat_difference(a, b).item() == pytest.approx(expected, abs=1e-6)

    def test_batch_matches_single(self):
        a, b = torch.rand(3, 4, 4, dtype=torch.float64), torch.rand(3, 4, 4, dtype=torch.float64)
        single = feature_stat_difference(a, b)
        batched = feature_stat_difference(a.unsqueeze(0), b.unsqueeze(0))
        assert batched.item() == pytest.approx(single.item(), abs=1e-12)

    def test_spatial_shuffle_invariant(self):
        rng = np.random.default_rng(5)
        a = torch.tensor(rng.normal(size=(3, 4, 4)))
        b = torch.tensor(rng.normal(size=(3, 4, 4)))
        perm = torch.tensor(rng.permutation(16))
        a_shuf = a.reshape(3, 16)[:, perm].reshape(3, 4, 4)
        assert feature_stat_difference(a_shuf, b).item() == pytest.approx(
            feature_stat_difference(a, b).item(), abs=1e-12
        )

    def test_channel_mismatch_rejected(self):
        with pytest.raises(ValueError):
            feature_stat_difference(torch.zeros(2, 3, 3), torch.zeros(3, 3, 3))

    def test_gradient_check(self):
        ref = torch.tensor(np.random.default_rng(6).normal(size=(3, 4, 4)))

        def fn(x):
            return feature_stat_difference(x, ref)

        x = torch.tensor(np.random.default_rng(7).normal(size=(3, 4, 4)))
        assert gradient_check(fn, x) < 1e-5


class TestStyleLoss:
    def test_sums_per_level_stat_gaps(self):
        rng = np.random.default_rng(8)
        out = [torch.tensor(rng.normal(size=(2, 3, 3))), torch.tensor(rng.normal(size=(4, 2, 2)))]
        ref = [torch.tensor(rng.normal(size=(2, 3, 3))), torch.tensor(rng.normal(size=(4, 2, 2)))]
        expected = sum(feature_stat_difference(a, b).item() for a, b in zip(out, ref))
        assert style_loss(out, ref).item() == pytest.approx(expected, abs=1e-12)

    def test_zero_at_identity(self):
        levels = [torch.rand(2, 3, 3)]
        assert style_loss(levels, [l.clone() for l in levels]).item() == 0.0

    def test_gradient_check(self):
        rng = np.random.default_rng(9)
        ref = [torch.tensor(rng.normal(size=(2, 3, 3))), torch.tensor(rng.normal(size=(2, 2, 2)))]

        def fn(x):
            return style_loss([x, ref[1]], ref)

        x = torch.tensor(rng.normal(size=(2, 3, 3)))
        assert gradient_check(fn, x) < 1e-5


class TestGanLosses:
    def test_formula_oracle(self):
        def stub(image, z):
            if image.mean().item() > 0.5:
                return torch.tensor(0.9), torch.tensor(0.7)
            return torch.tensor(0.2), torch.tensor(0.4)

        i_acr, i_out = torch.full((1, 3, 4, 4), 0.8), torch.full((1, 3, 4, 4), 0.3)
        d_loss, g_loss = gan_losses(stub, i_acr, i_out, torch.zeros(1, 8))
        exp_d = -(math.log(0.9) + math.log(0.7) + math.log(1 - 0.2) + math.log(1 - 0.4))
        exp_g = -(math.log(0.2) + math.log(0.4))
        assert d_loss.item() == pytest.approx(exp_d, abs=1e-6)
        assert g_loss.item() == pytest.approx(exp_g, abs=1e-6)

    def test_saturated_probabilities_stay_finite(self):
        def stub(image, z):
            if image.mean().item() > 0.5:
                return torch.tensor(1.0), torch.tensor(1.0)
            return torch.tensor(0.0), torch.tensor(0.0)

        d_loss, g_loss = gan_losses(stub, torch.ones(1, 3, 2, 2), torch.zeros(1, 3, 2, 2), torch.zeros(1, 4))
        assert math.isfinite(d_loss.item()) and math.isfinite(g_loss.item())
        assert g_loss.item() == pytest.approx(-2.0 * math.log(GAN_EPS), rel=1e-6)

    def test_discriminator_loss_detaches_generator_batch(self):
        def stub(image, z):
            p = image.mean().sigmoid()
            return p, p

        # The anchor path stands in for discriminator parameters here.
        i_acr = torch.rand(1, 3, 4, 4, requires_grad=True)
        i_out = torch.rand(1, 3, 4, 4, requires_grad=True)
        d_loss, _ = gan_losses(stub, i_acr, i_out, torch.zeros(1, 2))
        d_loss.backward()
        assert i_out.grad is None
        assert i_acr.grad is not None

        _, g_loss = gan_losses(stub, i_acr.detach(), i_out, torch.zeros(1, 2))
        g_loss.backward()
        assert i_out.grad is not None and float(i_out.grad.abs().sum()) > 0


class TestIdentityLoss:
    def test_hand_oracle(self):
        i_idt, i_acr = torch.ones(3, 2, 2), torch.zeros(3, 2, 2)
        pyr_idt = [torch.full((1, 2, 2), 2.0)]
        pyr_acr = [torch.zeros(1, 2, 2)]
        # Pixel MSE 1 plus 0.01 * feature MSE 4.
        assert identity_loss(i_idt, i_acr, pyr_idt, pyr_acr).item() == pytest.approx(1.04, abs=1e-7)

    def test_shape_error(self):
        with pytest.raises(ValueError):
            identity_loss(torch.zeros(3, 2, 2), torch.zeros(3, 4, 4), [], [])

    def test_gradient_check(self):
        rng = np.random.default_rng(10)
        i_acr = torch.tensor(rng.normal(size=(3, 4, 4)))
        pyr_acr = [torch.tensor(rng.normal(size=(2, 2, 2)))]
        pyr_idt = [torch.tensor(rng.normal(size=(2, 2, 2)))]

        def fn(x):
            return identity_loss(x, i_acr, pyr_idt, pyr_acr)

        x = torch.tensor(rng.normal(size=(3, 4, 4)))
        assert gradient_check(fn, x) < 1e-6


class TestComposites:
    def test_aifb_aesthetic(self):
        parts = tuple(torch.tensor(v, dtype=torch.float64) for v in (1.0, 2.0, 3.0, 4.0))
        assert aifb_aesthetic_loss(*parts).item() == pytest.approx(22.6, abs=1e-12)

    def test_aifd_aesthetic(self):
        parts = (torch.tensor(1.0, dtype=torch.float64), torch.tensor(2.0, dtype=torch.float64))
        assert aifd_aesthetic_loss(*parts).item() == pytest.approx(1.002, abs=1e-12)

    def test_totals(self):
        parts = tuple(torch.tensor(v, dtype=torch.float64) for v in (1.0, 2.0, 3.0, 4.0))
        assert aifb_total(*parts).item() == pytest.approx(140 + 60 + 1800 + 4, abs=1e-9)
        assert aifd_total(parts[0], parts[1], parts[2]).item() == pytest.approx(33.0, abs=1e-12)

    def test_custom_weights_respected(self):
        w = LossWeights(lambda_ed_b=1.0, lambda_sm=1.0, lambda_as_b=1.0, lambda_ae_b=1.0)
        parts = tuple(torch.tensor(v, dtype=torch.float64) for v in (1.0, 2.0, 3.0, 4.0))
        assert aifb_total(*parts, weights=w).item() == pytest.approx(10.0, abs=1e-12)


class TestDiffusionLoss:
    def test_mse(self):
        a, b = torch.ones(2, 3), torch.zeros(2, 3)
        assert diffusion_loss(a, b).item() == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(ValueError):
            diffusion_loss(torch.zeros(2), torch.zeros(3))

    def test_gradient_check(self):
        ref = torch.tensor(np.random.default_rng(11).normal(size=(4, 2, 2)))

        def fn(x):
            return diffusion_loss(ref, x)

        x = torch.tensor(np.random.default_rng(12).normal(size=(4, 2, 2)))
        assert gradient_check(fn, x) < 1e-6


class TapDecoder:
    """Stub decoder exposing the input and its double as feature taps."""

    def decode_with_taps(self, z):
        return z, [z, z * 2.0]


class TestTextureMappingLoss:
    def test_geometric_weighting_oracle(self):
        rng = np.random.default_rng(13)
        za = torch.tensor(rng.normal(size=(1, 2, 2, 2)))
        zp = torch.tensor(rng.normal(size=(1, 2, 2, 2)))
        gamma = 0.3
        expected = (
            gamma**2 * feature_stat_difference(za, zp).item()
            + gamma**3 * feature_stat_difference(za * 2, zp * 2).item()
        )
        got = texture_mapping_loss(zp, za, TapDecoder(), gamma)
        assert got.item() == pytest.approx(expected, abs=1e-12)

    def test_zero_at_identity(self):
        z = torch.rand(1, 2, 2, 2)
        assert texture_mapping_loss(z, z.clone(), TapDecoder()).item() == 0.0

    def test_empty_taps_rejected(self):
        class NoTaps:
            def decode_with_taps(self, z):
                return z, []

        with pytest.raises(ValueError):
            texture_mapping_loss(torch.zeros(1, 2, 2, 2), torch.zeros(1, 2, 2, 2), NoTaps())

    def test_gradient_check(self):
        za = torch.tensor(np.random.default_rng(14).normal(size=(1, 2, 2, 2)))

        def fn(x):
            return texture_mapping_loss(x, za, TapDecoder())

        x = torch.tensor(np.random.default_rng(15).normal(size=(1, 2, 2, 2)))
        assert gradient_check(fn, x) < 1e-5


class TestEmotionalDistributionLoss:
    def kl_oracle(self, target_probs, estimate_probs):
        total = 0.0
        for t, e in zip(target_probs, estimate_probs):
            if t > 0:
                total += t * math.log(t / max(e, KL_EPS))
        return total

    def test_matches_direct_kl_on_full_forward(self, micro_ensemble):
        rng = np.random.default_rng(16)
        img = torch.tensor(rng.random((64, 64, 3)), dtype=torch.float32)
        target = EmotionDistribution(rng.dirichlet(np.ones(8)))
        loss = emotional_distribution_loss(target, img, micro_ensemble)
        estimate = micro_ensemble.distribution_torch(img).detach().numpy()
        assert loss.item() == pytest.approx(self.kl_oracle(target.probs, estimate), abs=1e-6)

    def test_diff_only_forward_matches_its_estimate(self, micro_ensemble):
        rng = np.random.default_rng(17)
        img = torch.tensor(rng.random((64, 64, 3)), dtype=torch.float32)
        target = EmotionDistribution(rng.dirichlet(np.ones(8)))
        loss = emotional_distribution_loss(target, img, micro_ensemble, include_nondiff=False)
        estimate = micro_ensemble.distribution_torch(img, include_nondiff=False).detach().numpy()
        assert loss.item() == pytest.approx(self.kl_oracle(target.probs, estimate), abs=1e-6)

    def test_gradient_check_differentiable_path(self):
        ensemble = small_double_ensemble()
        rng = np.random.default_rng(18)
        target = EmotionDistribution(rng.dirichlet(np.ones(8)))
        x = torch.tensor(rng.random((8, 8, 3)))

        def fn(img):
            return emotional_distribution_loss(target, img, ensemble, include_nondiff=False)

        assert gradient_check(fn, x) < 1e-4

    def test_zero_target_entries_ignored(self, micro_ensemble):
        img = torch.rand(64, 64, 3)
        target = EmotionDistribution.delta(WHEEL[2])
        loss = emotional_distribution_loss(target, img, micro_ensemble)
        estimate = micro_ensemble.distribution_torch(img).detach().numpy()
        assert loss.item() == pytest.approx(-math.log(max(estimate[2], KL_EPS)), abs=1e-6)
