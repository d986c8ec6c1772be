import logging
from dataclasses import dataclass, field
from typing import List

import numpy as np

from modules.errors import ConfigError
from modules.model.centers import project_rows_to_sphere

logger = logging.getLogger(__name__)


@dataclass
class OptimizerConfig:
    beta1: float = 0.9
    beta2: float = 0.999
    weight_decay: float = 5e-5
    lr_O: float = 1e-4
    lr_EC: float = 5e-5
    eps: float = 1e-8

    def validate(self):
        for name in ("beta1", "beta2"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigError(f"optimizer.{name} must be in (0, 1), got {value}")
        for name in ("lr_O", "lr_EC", "eps"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"optimizer.{name} must be > 0, got {getattr(self, name)}")
        if self.weight_decay < 0:
            raise ConfigError(f"optimizer.weight_decay must be >= 0, got {self.weight_decay}")


@dataclass
class AdamState:
    m: List[np.ndarray] = field(default_factory=list)
    v: List[np.ndarray] = field(default_factory=list)
    t: int = 0

    @classmethod
    def for_params(cls, params):
        return cls(m=[np.zeros_like(p.values) for p in params],
                   v=[np.zeros_like(p.values) for p in params])


def adam_step(params, grads, state, cfg, lr, weight_decay=0.0, project_sphere=False):
    """
    One bias-corrected Adam update of `params` in place. Weight decay is
    coupled (added to the gradient before the moment updates). A `None`
    gradient leaves its parameter and moments untouched.
    """
    if all(g is None for g in grads):
        return
    state.t += 1
    bc1 = 1.0 - cfg.beta1 ** state.t
    bc2 = 1.0 - cfg.beta2 ** state.t
    step_size = lr / bc1

    for p, g, m, v in zip(params, grads, state.m, state.v):
        if g is None:
            continue
        if weight_decay:
            g = g + weight_decay * p.values
        m *= cfg.beta1
        m += (1.0 - cfg.beta1) * g
        v *= cfg.beta2
        v += (1.0 - cfg.beta2) * (g * g)
        p.values -= step_size * m / (np.sqrt(v / bc2) + cfg.eps)

    if project_sphere:
        for p in params:
            project_rows_to_sphere(p)


@dataclass
class ParamGroup:
    name: str
    params: list
    lr: float
    weight_decay: float
    project_sphere: bool = False
    state: AdamState = None

    def __post_init__(self):
        if self.state is None:
            self.state = AdamState.for_params(self.params)


class GroupedAdam:
    """
    Adam over the three parameter groups: theta_E and theta_C at lr_EC with
    weight decay, theta_O at lr_O without decay and re-projected onto the
    sphere after every update. A frozen theta_O gets no group.
    """

    def __init__(self, model_params, cfg):
        self.cfg = cfg
        self.model_params = model_params
        self.groups = [
            ParamGroup("theta_E", model_params.theta_E, cfg.lr_EC, cfg.weight_decay),
            ParamGroup("theta_C", model_params.theta_C, cfg.lr_EC, cfg.weight_decay),
        ]
        if model_params.theta_O.requires_grad:
            self.groups.append(ParamGroup("theta_O", [model_params.theta_O], cfg.lr_O, 0.0, project_sphere=True))

    def step(self):
        for group in self.groups:
            grads = [p.grad if p.grad_touched else None for p in group.params]
            adam_step(group.params, grads, group.state, self.cfg, group.lr,
                      weight_decay=group.weight_decay, project_sphere=group.project_sphere)
        self.model_params.zero_grad()
