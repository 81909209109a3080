import itertools
import math

import numpy as np
import pytest
import torch

from TA_Errors import ShapeMismatchError, ZeroCountError
from TA_SignNet import (
    ATTRIBUTES, FUR_FREE, AttributeVector, LossWeights, Predictions, SignNet, SignNetConfig,
    attr_weights, aux_from_targets, derive_color_labels, derive_fur_label, effective_weights,
    label_tensors, loss_terms, total_loss,
)
from TA_Tensor_AD import Rng

ALL_VECTORS = [AttributeVector.from_bits(bits) for bits in itertools.product((0, 1), repeat=8)]
COHORT_COUNTS = (624, 2243, 2431, 471, 4274, 2984, 4973, 833)


def _inputs(cfg: SignNetConfig, batch: int, seed: int = 0):
    rng = Rng(seed)
    return tuple(rng.normal((batch, 3, cfg.side, cfg.side)) for _ in range(3))


def _random_targets(batch: int, seed: int = 0) -> torch.Tensor:
    gen = torch.Generator().manual_seed(seed)
    return (torch.rand(batch, 8, generator=gen, dtype=torch.float64) > 0.5).to(torch.float64)


# --- labels -----------------------------------------------------------------

def test_color_labels_examples():
    assert derive_color_labels(AttributeVector(pale=1)) == (1, 0, 0, 0)
    assert derive_color_labels(AttributeVector(furyellow=1)) == (0, 1, 0, 0)
    assert derive_color_labels(AttributeVector(ecchymosis=1, redspot=1)) == (0, 0, 1, 1)
    assert derive_color_labels(AttributeVector()) == (0, 0, 0, 0)


def test_color_labels_over_every_vector():
    for t in ALL_VECTORS:
        white, yellow, black, red = derive_color_labels(t)
        assert white == int(t.pale or t.furthick)
        assert yellow == t.furyellow
        assert black == t.ecchymosis
        assert red == int(t.tipsidered or t.redspot)


@pytest.mark.parametrize("include_redspot", [False, True])
def test_fur_label_over_every_vector(include_redspot):
    for t in ALL_VECTORS:
        fur = derive_fur_label(t, include_redspot)
        expected = t.furthick or t.furyellow or (include_redspot and t.redspot)
        assert fur == int(bool(expected))
        if not (t.furthick or t.furyellow or t.redspot):
            # fur-free attributes alone never produce fur
            assert fur == 0


def test_fur_free_attributes_alone_never_set_fur():
    for name in FUR_FREE:
        t = AttributeVector(**{name: 1})
        assert derive_fur_label(t, False) == derive_fur_label(t, True) == 0


@pytest.mark.parametrize("include_redspot", [False, True])
def test_tensor_labels_agree_with_record_labels(include_redspot):
    targets, color, fur = label_tensors(ALL_VECTORS, include_redspot)
    assert targets.shape == (256, 8) and color.shape == (256, 4) and fur.shape == (256,)
    color2, fur2 = aux_from_targets(targets, include_redspot)
    assert torch.equal(color, color2)
    assert torch.equal(fur, fur2)


def test_attribute_bits_must_be_binary():
    with pytest.raises(ValueError):
        AttributeVector(pale=2)
    with pytest.raises(ValueError):
        AttributeVector.from_bits([0, 1, 0])


def test_positives_follow_attribute_order():
    assert AttributeVector(furyellow=1, pale=1).positives() == ["pale", "furyellow"]


# --- class weights ----------------------------------------------------------

def test_weights_from_published_counts():
    alpha = attr_weights(COHORT_COUNTS)
    assert abs(alpha[0] - 2337 / 624) < 1e-12
    assert abs(alpha[6] - 2337 / 4973) < 1e-12
    assert np.median(np.asarray(COHORT_COUNTS)) == 2337


def test_equal_counts_give_unit_weights():
    assert np.allclose(attr_weights([50] * 8), np.ones(8))


def test_skewed_counts():
    alpha = attr_weights([1, 1, 1, 1, 1, 1, 1, 1000])
    assert alpha[7] == pytest.approx(0.001)
    assert np.allclose(alpha[:7], 1.0)


def test_zero_count_raises():
    with pytest.raises(ZeroCountError):
        attr_weights([3, 0, 3, 3, 3, 3, 3, 3])


# --- loss -------------------------------------------------------------------

def _preds(batch: int, value: float = 0.0) -> Predictions:
    return Predictions(
        attr_logits=torch.full((batch, 8), value, dtype=torch.float64),
        color_logits=torch.full((batch, 4), value, dtype=torch.float64),
        fur_logit=torch.full((batch,), value, dtype=torch.float64),
    )


def test_zero_logits_give_closed_form_loss():
    targets = _random_targets(6)
    color, fur = aux_from_targets(targets)
    total = total_loss(_preds(6), targets, color, fur, LossWeights())
    assert abs(total.item() - 9.6 * math.log(2)) < 1e-9


def test_confident_correct_predictions_have_tiny_loss():
    targets = _random_targets(4, seed=1)
    color, fur = aux_from_targets(targets)
    pred = Predictions(attr_logits=40 * targets - 20, color_logits=40 * color - 20, fur_logit=40 * fur - 20)
    assert total_loss(pred, targets, color, fur, LossWeights()).item() < 1e-6


def test_attribute_weight_scales_its_own_term():
    rng = Rng(2)
    targets = _random_targets(5, seed=2)
    color, fur = aux_from_targets(targets)
    pred = Predictions(rng.normal((5, 8)), rng.normal((5, 4)), rng.normal((5,)))
    base = total_loss(pred, targets, color, fur, LossWeights()).item()
    doubled = total_loss(pred, targets, color, fur, LossWeights(alpha=(2.0,) + (1.0,) * 7)).item()
    pale_bce = torch.nn.functional.binary_cross_entropy_with_logits(pred.attr_logits[:, 0], targets[:, 0]).item()
    assert doubled - base == pytest.approx(pale_bce, abs=1e-12)


def test_without_auxiliary_weights_total_is_attribute_loss():
    rng = Rng(3)
    targets = _random_targets(3, seed=3)
    color, fur = aux_from_targets(targets)
    pred = Predictions(rng.normal((3, 8)), rng.normal((3, 4)), rng.normal((3,)))
    terms = loss_terms(pred, targets, color, fur, LossWeights(w_color=0.0, w_fur=0.0))
    assert terms["total"].item() == pytest.approx(terms["attr"].item(), abs=1e-15)


def test_negative_weights_are_rejected():
    with pytest.raises(ValueError):
        LossWeights(w_fur=-0.1)


def test_effective_weights_follow_fusion_flags():
    w = LossWeights(w_color=1.0, w_fur=0.6)
    cfg = SignNetConfig.toy(fuse_color=False)
    assert effective_weights(w, cfg).w_color == 0.0
    assert effective_weights(w, cfg).w_fur == 0.6
    cfg = SignNetConfig.toy(fuse_fur=False)
    assert effective_weights(w, cfg).w_fur == 0.0


# --- model ------------------------------------------------------------------

def test_forward_shapes():
    cfg = SignNetConfig.toy()
    pred = SignNet(cfg, seed=0)(*_inputs(cfg, 3))
    assert pred.attr_logits.shape == (3, 8)
    assert pred.color_logits.shape == (3, 4)
    assert pred.fur_logit.shape == (3,)


def test_zeroed_heads_give_zero_logits():
    cfg = SignNetConfig.toy()
    net = SignNet(cfg, seed=1)
    net.zero_heads()
    pred = net(*_inputs(cfg, 2))
    for logits in (pred.attr_logits, pred.color_logits, pred.fur_logit):
        assert torch.equal(logits, torch.zeros_like(logits))


def test_same_seed_same_parameters():
    cfg = SignNetConfig.toy()
    a, b = SignNet(cfg, seed=4), SignNet(cfg, seed=4)
    for (name, p), (_, q) in zip(a.named_parameters(), b.named_parameters()):
        assert torch.equal(p, q), name


def test_batch_order_does_not_matter():
    cfg = SignNetConfig.toy()
    net = SignNet(cfg, seed=2)
    whole, body, edge = _inputs(cfg, 4, seed=5)
    perm = torch.tensor([2, 0, 3, 1])
    with torch.no_grad():
        ref = net(whole, body, edge)
        out = net(whole[perm], body[perm], edge[perm])
    assert torch.allclose(out.attr_logits, ref.attr_logits[perm], atol=1e-10)
    assert torch.allclose(out.fur_logit, ref.fur_logit[perm], atol=1e-10)


def test_crack_reads_body_and_toothmark_reads_edge():
    cfg = SignNetConfig.toy()
    net = SignNet(cfg, seed=3)
    whole, body, edge = _inputs(cfg, 2, seed=6)
    other_whole, other_body, other_edge = _inputs(cfg, 2, seed=7)
    crack, tooth = ATTRIBUTES.index("crack"), ATTRIBUTES.index("toothmark")
    with torch.no_grad():
        ref = net(whole, body, edge).attr_logits
        swapped = net(other_whole, body, other_edge).attr_logits
        assert torch.equal(swapped[:, crack], ref[:, crack])
        swapped = net(other_whole, other_body, edge).attr_logits
        assert torch.equal(swapped[:, tooth], ref[:, tooth])


def test_without_fusion_region_heads_ignore_whole_image():
    cfg = SignNetConfig.toy(fuse_color=False, fuse_fur=False)
    net = SignNet(cfg, seed=4)
    whole, body, edge = _inputs(cfg, 2, seed=8)
    other_whole = _inputs(cfg, 2, seed=9)[0]
    with torch.no_grad():
        ref = net(whole, body, edge)
        out = net(other_whole, body, edge)
    assert torch.allclose(out.attr_logits, ref.attr_logits, atol=1e-12)
    assert not torch.allclose(out.color_logits, ref.color_logits)


def test_with_fusion_region_heads_see_whole_image():
    cfg = SignNetConfig.toy()
    net = SignNet(cfg, seed=4)
    whole, body, edge = _inputs(cfg, 2, seed=8)
    other_whole = _inputs(cfg, 2, seed=9)[0]
    pale = ATTRIBUTES.index("pale")
    with torch.no_grad():
        ref = net(whole, body, edge).attr_logits
        out = net(other_whole, body, edge).attr_logits
    assert not torch.allclose(out[:, pale], ref[:, pale])


def test_wrong_input_side_raises():
    cfg = SignNetConfig.toy()
    net = SignNet(cfg)
    x = torch.zeros(1, 3, cfg.side + 1, cfg.side + 1, dtype=torch.float64)
    with pytest.raises(ShapeMismatchError):
        net(x, x, x)


def test_config_dict_round_trip():
    cfg = SignNetConfig.toy(fuse_fur=False, fur_includes_redspot=True)
    assert SignNetConfig.from_dict(cfg.to_dict()) == cfg


@pytest.mark.parametrize("seed", range(20))
def test_full_loss_gradient_matches_finite_differences(seed, fd_check):
    batch = 2 + seed % 3
    cfg = SignNetConfig(widths=(2,), blocks=1, d_model=8, ffn_mult=2, side=8,
                        fuse_color=seed % 4 != 1, fuse_fur=seed % 4 != 2)
    net = SignNet(cfg, seed=10 + seed)
    inputs = _inputs(cfg, batch, seed=100 + seed)
    targets = _random_targets(batch, seed=200 + seed)
    color, fur = aux_from_targets(targets)
    gen = np.random.default_rng(seed)
    weights = effective_weights(
        LossWeights(alpha=tuple(gen.uniform(0.5, 2.0, 8)), w_color=float(gen.uniform(0.2, 1.5)),
                    w_fur=float(gen.uniform(0.2, 1.5))),
        cfg,
    )

    def loss_fn():
        return total_loss(net(*inputs), targets, color, fur, weights)

    mismatches = fd_check(loss_fn, list(net.parameters()), samples_per_tensor=2, seed=seed)
    assert not mismatches
