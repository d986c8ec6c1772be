import numpy as np
import pytest

from modules.errors import ConfigError, LabelIndexError, NumericalError, SamplerContractError
from modules.losses.l2i_losses import (
    LossConfig,
    center_point_loss,
    classification_loss,
    expected_center_point_loss,
    latent_loss,
    routed_classification_loss,
    total_loss,
)
from modules.model.network import LatentVector, ModelConfig, build_model, encode
from modules.numerics import ops
from modules.numerics.gradcheck import finite_difference_check
from modules.numerics.tensor import Tensor, backward

CFG = LossConfig()
SQRT2 = np.sqrt(2.0)


def _unit_rows(rng, n, m):
    rows = rng.normal(size=(n, m))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def test_loss_config_validation():
    LossConfig().validate()
    with pytest.raises(ConfigError):
        LossConfig(d=2.5).validate()
    with pytest.raises(ConfigError):
        LossConfig(r=1.0, d=1.9).validate()
    LossConfig(r=1.0, d=1.9).validate(margins=False)
    with pytest.raises(ConfigError):
        LossConfig(lambda_cen=-1.0).validate()


def test_classification_loss_values():
    assert classification_loss(Tensor([0.0, 0.0]), 0).item() == pytest.approx(np.log(2.0), abs=1e-15)
    logits = Tensor([0.3, -1.2, 2.0])
    assert classification_loss(logits, 2).item() == ops.softmax_cross_entropy(logits, 2).item()


def test_weighted_classification_loss():
    logits = Tensor([[0.0, 0.0], [0.0, 0.0]])
    unweighted = classification_loss(logits, [0, 1]).item()
    assert classification_loss(logits, [0, 1], weights=np.array([2.0, 0.0])).item() == pytest.approx(unweighted)


def test_routed_classification_reaches_classifier_only(small_model, rng):
    params = small_model.params
    f = encode(params, rng.normal(size=(6, 4)))
    backward(routed_classification_loss(params, f, [0, 1, 0, 1, 1, 0]))
    for t in params.theta_E:
        assert not t.grad_touched
        assert np.all(t.grad == 0)
    assert any(np.any(t.grad != 0) for t in params.theta_C)
    assert not params.theta_O.grad_touched


def test_center_point_loss_examples():
    antipodal = Tensor([[1.0, 0.0], [-1.0, 0.0]])
    assert center_point_loss(antipodal, antipodal, CFG).item() == 0.0

    orthogonal = Tensor([[1.0, 0.0], [0.0, 1.0]])
    assert center_point_loss(orthogonal, orthogonal, CFG).item() == pytest.approx((1.9 - SQRT2) ** 2, abs=1e-9)

    f_t = Tensor([[0.0, 1.0], [0.0, -1.0]])
    assert center_point_loss(f_t, antipodal, CFG).item() == pytest.approx(2 * (SQRT2 - 0.1) ** 2, abs=1e-9)


def test_center_point_loss_accepts_tagged_latents_in_any_order():
    centers = Tensor([[1.0, 0.0], [0.0, 1.0]])
    f_t = [LatentVector(Tensor([0.0, -1.0]), "target", 1), LatentVector(Tensor([0.6, 0.8]), "target", 0)]
    stacked = Tensor([[0.6, 0.8], [0.0, -1.0]])
    assert center_point_loss(f_t, centers, CFG).item() == center_point_loss(stacked, centers, CFG).item()


def test_center_point_loss_contract_errors():
    centers = Tensor([[1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(SamplerContractError):
        center_point_loss([LatentVector(Tensor([1.0, 0.0]), "target", 0)], centers, CFG)
    with pytest.raises(SamplerContractError):
        center_point_loss([LatentVector(Tensor([1.0, 0.0]), "source", 0),
                           LatentVector(Tensor([0.0, 1.0]), "target", 1)], centers, CFG)
    with pytest.raises(SamplerContractError):
        center_point_loss(Tensor([[1.0, 0.0]]), centers, CFG)


def test_center_point_loss_is_permutation_symmetric(rng):
    centers = _unit_rows(rng, 3, 5)
    f_t = _unit_rows(rng, 3, 5)
    perm = [2, 0, 1]
    base = center_point_loss(Tensor(f_t), Tensor(centers), CFG).item()
    permuted = center_point_loss(Tensor(f_t[perm]), Tensor(centers[perm]), CFG).item()
    assert permuted == pytest.approx(base, abs=1e-12)


def test_center_point_loss_gradients(rng):
    centers = Tensor(_unit_rows(rng, 3, 5), requires_grad=True)
    f_t = Tensor(_unit_rows(rng, 3, 5), requires_grad=True)
    backward(center_point_loss(f_t, centers, CFG))
    assert f_t.grad_touched and np.any(f_t.grad != 0)
    assert centers.grad_touched and np.any(centers.grad != 0)

    fixed_f = Tensor(f_t.values)
    fixed_o = Tensor(centers.values)
    assert finite_difference_check(lambda t: center_point_loss(fixed_f, t, CFG), centers) < 1e-4
    assert finite_difference_check(lambda t: center_point_loss(t, fixed_o, CFG), f_t) < 1e-4


def test_latent_loss_examples():
    o = Tensor([[1.0, 0.0], [0.0, 1.0]])
    assert latent_loss(Tensor([1.0, 0.0]), 0, o, CFG).item() == 0.0
    assert latent_loss(Tensor([1.0, 0.0]), 1, o, CFG).item() == pytest.approx((SQRT2 - 0.1) ** 2, abs=1e-9)

    half = LossConfig(r=0.5, d=1.9)
    assert latent_loss(Tensor([1.0, 0.5]), 0, o, half).item() == 0.0
    assert latent_loss(Tensor([1.0, 0.75]), 0, o, half).item() == 0.0625


def test_latent_loss_batch_is_mean_of_singles(rng):
    centers = Tensor(_unit_rows(rng, 2, 4))
    f = _unit_rows(rng, 5, 4)
    labels = [0, 1, 1, 0, 1]
    singles = [latent_loss(Tensor(f[i]), labels[i], centers, CFG).item() for i in range(5)]
    assert latent_loss(Tensor(f), labels, centers, CFG).item() == pytest.approx(np.mean(singles), abs=1e-12)
    assert latent_loss(Tensor(f), labels, centers, CFG, reduction="sum").item() == pytest.approx(np.sum(singles), abs=1e-12)


def test_latent_loss_leaves_centers_alone(rng):
    centers = Tensor(_unit_rows(rng, 2, 4), requires_grad=True)
    f = Tensor(_unit_rows(rng, 3, 4), requires_grad=True)
    backward(latent_loss(f, [0, 1, 1], centers, CFG))
    assert not centers.grad_touched
    assert np.all(centers.grad == 0)
    assert np.any(f.grad != 0)

    fixed_o = Tensor(centers.values)
    assert finite_difference_check(lambda t: latent_loss(t, [0, 1, 1], fixed_o, CFG), f) < 1e-4


def test_latent_loss_label_out_of_range():
    with pytest.raises(LabelIndexError):
        latent_loss(Tensor([1.0, 0.0]), 2, Tensor([[1.0, 0.0], [0.0, 1.0]]), CFG)


def test_expected_center_point_loss_matches_single_draw():
    centers = Tensor([[1.0, 0.0], [-1.0, 0.0]])
    f = Tensor([[0.0, 1.0], [0.0, -1.0]])
    expected = expected_center_point_loss(f, [0, 1], centers, CFG).item()
    assert expected == center_point_loss(f, centers, CFG).item()

    doubled = Tensor(np.vstack([f.values, f.values]))
    assert expected_center_point_loss(doubled, [0, 1, 0, 1], centers, CFG).item() == pytest.approx(expected, abs=1e-12)
    with pytest.raises(SamplerContractError):
        expected_center_point_loss(f, [0, 0], centers, CFG)


def test_total_loss_examples():
    total, breakdown = total_loss(Tensor(0.7), Tensor(0.01), Tensor(0.2), CFG)
    assert total.item() == pytest.approx(1.9, abs=1e-12)
    assert breakdown.total == pytest.approx(breakdown.cls + 100 * breakdown.cen + breakdown.latent, abs=1e-12)

    zero, _ = total_loss(Tensor(0.0), Tensor(0.0), Tensor(0.0), CFG)
    assert zero.item() == 0.0

    only_cls, breakdown = total_loss(Tensor(0.7), Tensor(0.5), Tensor(0.5), LossConfig(lambda_cen=0.0, lambda_latent=0.0))
    assert only_cls.item() == 0.7
    assert breakdown.total == 0.7


def test_total_loss_names_non_finite_term():
    with pytest.raises(NumericalError, match="cen"):
        total_loss(Tensor(0.7), Tensor(np.nan), Tensor(0.2), CFG)


def test_zero_loss_region():
    centers = Tensor([[1.0, 0.0], [-1.0, 0.0]])
    batch = Tensor(centers.values[[0, 1, 1, 0]])
    assert center_point_loss(Tensor(centers.values), centers, CFG).item() == 0.0
    assert latent_loss(batch, [0, 1, 1, 0], centers, CFG).item() == 0.0


def _group_grads(params):
    return {name: [t.grad.copy() for t in ts] for name, ts in params.groups().items()}


def _forward_terms(model, x, y, x_t):
    params = model.params
    f = encode(params, x)
    f_t = encode(params, x_t)
    cls = routed_classification_loss(params, f, y)
    cen = center_point_loss(f_t, params.theta_O, CFG)
    latent = latent_loss(f, y, params.theta_O, CFG)
    return cls, cen, latent


def test_each_term_reaches_only_its_groups(small_model_config, rng):
    x = rng.normal(size=(10, 4))
    y = np.array([0, 1] * 5)
    x_t = rng.normal(size=(2, 4))

    model = build_model(small_model_config)
    cls, cen, latent = _forward_terms(model, x, y, x_t)
    total, _ = total_loss(cls, cen, latent, CFG)
    backward(total)
    combined = _group_grads(model.params)

    model = build_model(small_model_config)
    cls, _, _ = _forward_terms(model, x, y, x_t)
    backward(cls)
    from_cls = _group_grads(model.params)

    model = build_model(small_model_config)
    _, cen, latent = _forward_terms(model, x, y, x_t)
    backward(ops.add(ops.mul(cen, CFG.lambda_cen), ops.mul(latent, CFG.lambda_latent)))
    from_latent_terms = _group_grads(model.params)

    model = build_model(small_model_config)
    _, cen, _ = _forward_terms(model, x, y, x_t)
    backward(ops.mul(cen, CFG.lambda_cen))
    from_cen = _group_grads(model.params)

    for g in from_latent_terms["theta_C"]:
        assert np.all(g == 0)
    for g in from_cls["theta_E"] + from_cls["theta_O"]:
        assert np.all(g == 0)
    for a, b in zip(combined["theta_C"], from_cls["theta_C"]):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
    for a, b in zip(combined["theta_E"], from_latent_terms["theta_E"]):
        np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
    np.testing.assert_allclose(combined["theta_O"][0], from_cen["theta_O"][0], rtol=1e-12, atol=1e-15)


def test_routed_terms_match_finite_differences(rng):
    params = build_model(ModelConfig(input_dim=3, encoder_hidden=[5], latent_dim=4, seed=8)).params
    x = rng.normal(size=(6, 3))
    y = np.array([0, 1, 0, 1, 1, 0])
    x_t = rng.normal(size=(2, 3))

    def cls_term(_):
        return routed_classification_loss(params, encode(params, x), y)

    def cen_term(_):
        return center_point_loss(encode(params, x_t), params.theta_O, CFG)

    def latent_term(_):
        return latent_loss(encode(params, x), y, params.theta_O, CFG)

    for t in params.theta_C:
        assert finite_difference_check(cls_term, t) < 1e-4
    for t in params.theta_E:
        assert finite_difference_check(cen_term, t) < 1e-4
        assert finite_difference_check(latent_term, t) < 1e-4
    assert finite_difference_check(cen_term, params.theta_O) < 1e-4


@pytest.mark.parametrize("seed", range(10))
def test_total_loss_matches_finite_differences(seed):
    rng = np.random.default_rng(100 + seed)
    params = build_model(ModelConfig(input_dim=3, encoder_hidden=[5], latent_dim=4, seed=seed)).params
    x = rng.normal(size=(6, 3))
    y = np.array([0, 1, 0, 1, 1, 0])
    x_t = rng.normal(size=(2, 3))
    # the latent term reads the centers as constants
    frozen_centers = Tensor(params.theta_O.values.copy())

    def objective(_):
        f = encode(params, x)
        cls = routed_classification_loss(params, f, y)
        cen = center_point_loss(encode(params, x_t), params.theta_O, CFG)
        latent = latent_loss(f, y, frozen_centers, CFG)
        return total_loss(cls, cen, latent, CFG)[0]

    for t in params.theta_C:
        assert finite_difference_check(objective, t, eps=1e-5) < 1e-4
    assert finite_difference_check(objective, params.theta_O, eps=1e-5) < 1e-4
