"""
The three-part network: encoder E (MLP, ReLU hidden layers) producing unit
latent vectors, a linear classifier C on those vectors, and the center
points theta_O, one unit row per class.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from modules.errors import ConfigError, DimensionError
from modules.model.centers import fixed_center_points, init_center_points
from modules.numerics import ops
from modules.numerics.tensor import Tensor, no_grad

logger = logging.getLogger(__name__)


@dataclass
class ModelConfig:
    input_dim: int = 40
    encoder_hidden: List[int] = field(default_factory=lambda: [64, 64])
    latent_dim: int = 16
    num_classes: int = 2
    seed: int = 0

    def validate(self):
        if self.input_dim < 1:
            raise ConfigError(f"model.input_dim must be >= 1, got {self.input_dim}")
        if self.latent_dim < 2:
            raise ConfigError(f"model.latent_dim must be >= 2, got {self.latent_dim}")
        if self.num_classes < 2:
            raise ConfigError(f"model.num_classes must be >= 2, got {self.num_classes}")
        for width in self.encoder_hidden:
            if width < 1:
                raise ConfigError(f"model.encoder_hidden widths must be >= 1, got {self.encoder_hidden}")


@dataclass
class ModelParams:
    theta_E: List[Tensor]
    theta_C: List[Tensor]
    theta_O: Tensor

    def groups(self):
        return {"theta_E": self.theta_E, "theta_C": self.theta_C, "theta_O": [self.theta_O]}

    def tensors(self):
        return [*self.theta_E, *self.theta_C, self.theta_O]

    def zero_grad(self):
        for t in self.tensors():
            t.zero_grad()

    def snapshot(self):
        return [t.values.copy() for t in self.tensors()]

    def restore(self, snapshot):
        for t, values in zip(self.tensors(), snapshot):
            t.values[...] = values


@dataclass
class LatentVector:
    f: Tensor
    domain_tag: str = "source"
    class_tag: Optional[int] = None


@dataclass
class Model:
    config: ModelConfig
    params: ModelParams

    @property
    def centers_frozen(self):
        return not self.params.theta_O.requires_grad


def _linear_layer(rng, fan_in, fan_out, gain):
    weight = rng.normal(0.0, np.sqrt(gain / fan_in), size=(fan_in, fan_out))
    return [Tensor(weight, requires_grad=True), Tensor(np.zeros(fan_out), requires_grad=True)]


def build_model(config, fixed_centers=False):
    """Seeded parameters for all three groups; `fixed_centers` freezes theta_O."""
    config.validate()
    encoder_seq, classifier_seq, center_seq = np.random.SeedSequence(config.seed).spawn(3)

    rng = np.random.default_rng(encoder_seq)
    widths = [config.input_dim, *config.encoder_hidden, config.latent_dim]
    theta_E = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        theta_E.extend(_linear_layer(rng, fan_in, fan_out, gain=2.0))

    rng = np.random.default_rng(classifier_seq)
    theta_C = _linear_layer(rng, config.latent_dim, config.num_classes, gain=1.0)

    if fixed_centers:
        theta_O = fixed_center_points(config.num_classes, config.latent_dim)
    else:
        center_seed = int(center_seq.generate_state(1)[0])
        theta_O = init_center_points(config.num_classes, config.latent_dim, center_seed)

    return Model(config=config, params=ModelParams(theta_E=theta_E, theta_C=theta_C, theta_O=theta_O))


def encoder_forward(params, x):
    """MLP output before normalization."""
    h = x if isinstance(x, Tensor) else Tensor(x)
    first = params.theta_E[0]
    if h.shape[-1] != first.shape[0]:
        raise DimensionError(f"encoder expects {first.shape[0]} input features, got shape {h.shape}")
    layers = len(params.theta_E) // 2
    for i in range(layers):
        h = ops.add(ops.matmul(h, params.theta_E[2 * i]), params.theta_E[2 * i + 1])
        if i < layers - 1:
            h = ops.relu(h)
    return h


def encode(params, x):
    """f = l2_normalize(MLP(x)); one vector for x of shape [D], rows for [B, D]."""
    return ops.l2_normalize(encoder_forward(params, x))


def encode_sample(params, sample):
    return LatentVector(f=encode(params, sample.x), domain_tag=sample.domain_role,
                        class_tag=sample.class_label)


def classify_logits(params, f):
    f = f.f if isinstance(f, LatentVector) else f
    weight, bias = params.theta_C
    return ops.add(ops.matmul(f, weight), bias)


def classify(params, f):
    """Softmax class scores p = softmax(C(f))."""
    with no_grad():
        logits = classify_logits(params, f)
    return Tensor(ops.softmax(logits.values))


def predict(params, features):
    """Argmax labels and class scores for a [B, D] feature matrix."""
    with no_grad():
        scores = ops.softmax(classify_logits(params, encode(params, np.asarray(features))).values)
    return scores.argmax(axis=-1), scores
