from dataclasses import replace
from enum import Enum

from modules.errors import ConfigError


class Variant(str, Enum):
    L2I = "L2I"
    VANILLA = "Vanilla"
    CLASS_AWARE = "ClassAware"
    WEIGHTED = "Weighted"
    FIXED = "Fixed"
    NO_MARGIN = "NoMargin"

    @property
    def uses_latent_losses(self):
        return self in (Variant.L2I, Variant.FIXED, Variant.NO_MARGIN)

    @property
    def uses_margins(self):
        return self in (Variant.L2I, Variant.FIXED)

    @property
    def fixed_centers(self):
        return self is Variant.FIXED

    @property
    def class_aware(self):
        return self is Variant.CLASS_AWARE

    @property
    def weighted(self):
        return self is Variant.WEIGHTED

    @property
    def validation_quantity(self):
        return "total" if self.uses_latent_losses else "cls"

    def effective_loss_config(self, cfg):
        if self is Variant.NO_MARGIN:
            return replace(cfg, d=2.0, r=0.0)
        if not self.uses_latent_losses:
            return replace(cfg, lambda_cen=0.0, lambda_latent=0.0)
        return cfg


_ALIASES = {v.value.lower(): v for v in Variant}
_ALIASES.update({"class-aware": Variant.CLASS_AWARE, "no-margin": Variant.NO_MARGIN})

ALL_VARIANTS = list(Variant)


def parse_variant(name):
    key = name.strip().lower()
    if key not in _ALIASES:
        raise ConfigError(f"unknown variant {name!r}; expected one of {[v.value for v in Variant]}")
    return _ALIASES[key]


def parse_variant_list(text):
    names = [part for part in text.split(",") if part.strip()]
    if not names:
        raise ConfigError("variant list is empty")
    return [parse_variant(n) for n in names]
