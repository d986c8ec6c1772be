import json
import logging
from dataclasses import asdict

import numpy as np

from modules.errors import ConfigError
from modules.io_utils import read_json, write_json_atomic
from modules.model.network import Model, ModelConfig, ModelParams
from modules.numerics.tensor import Tensor

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1


def _dump_tensor(t):
    return {"shape": list(t.shape), "values": t.values.ravel().tolist()}


def _load_tensor(entry, requires_grad):
    values = np.array(entry["values"], dtype=np.float64).reshape(entry["shape"])
    return Tensor(values, requires_grad=requires_grad)


def save_checkpoint(model, path):
    """Write config and all three parameter groups as JSON (floats round-trip exactly)."""
    params = model.params
    payload = {
        "format_version": FORMAT_VERSION,
        "model_config": asdict(model.config),
        "theta_E": [_dump_tensor(t) for t in params.theta_E],
        "theta_C": [_dump_tensor(t) for t in params.theta_C],
        "theta_O": _dump_tensor(params.theta_O),
        "theta_O_trainable": params.theta_O.requires_grad,
    }
    write_json_atomic(payload, path)
    logger.info(f"Saved checkpoint to {path}")


def _model_from_payload(payload, path):
    if not isinstance(payload, dict) or payload.get("format_version") != FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint format in {path}")
    config = ModelConfig(**payload["model_config"])
    config.validate()
    params = ModelParams(
        theta_E=[_load_tensor(e, True) for e in payload["theta_E"]],
        theta_C=[_load_tensor(e, True) for e in payload["theta_C"]],
        theta_O=_load_tensor(payload["theta_O"], payload["theta_O_trainable"]),
    )
    return Model(config=config, params=params)


def load_checkpoint(path):
    try:
        return _model_from_payload(read_json(path), path)
    except ConfigError:
        raise
    except json.JSONDecodeError as e:
        raise ConfigError(f"checkpoint {path} is not valid JSON: {e}") from None
    except KeyError as e:
        raise ConfigError(f"checkpoint {path} is missing {e}") from None
    except (ValueError, TypeError) as e:
        raise ConfigError(f"checkpoint {path} is malformed: {e}") from None
