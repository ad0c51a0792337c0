"""
Network checkpoints: a JSON document `{"layers": [{"w": [[...]], "b": [...], "act": "tanh"}, ...]}`.
Numbers are written in their shortest round-trip form, so a reloaded network is bit-identical.
"""

import json
from pathlib import Path
from typing import Any

from ..base import Exceptions
from ..util import Log
from ..util.serialization import write_json
from .mlp import Layer, MlpParams


def params_to_dict(params: MlpParams) -> dict[str, Any]:
    return {
        "layers": [{"w": layer.w, "b": layer.b, "act": layer.act} for layer in params],
    }


def params_from_dict(document: Any) -> MlpParams:
    if not isinstance(document, dict) or not isinstance(document.get("layers"), list):
        raise Exceptions.ParameterError("checkpoint must be an object with a 'layers' list")
    layers = []
    for index, entry in enumerate(document["layers"]):
        if not isinstance(entry, dict) or {"w", "b", "act"} - entry.keys():
            raise Exceptions.ParameterError(f"checkpoint layer {index} needs 'w', 'b' and 'act'")
        layers.append(Layer(entry["w"], entry["b"], entry["act"]))
    return MlpParams(layers)


def save_checkpoint(params: MlpParams, path: str | Path):
    write_json(params_to_dict(params), path)
    Log.info(f"Wrote checkpoint with ${len(params)} layer$ to |{path}|.")


def load_checkpoint(path: str | Path) -> MlpParams:
    try:
        with open(path, encoding="utf-8") as file:
            document = json.load(file)
    except OSError as error:
        raise Exceptions.ParameterError(f"cannot read checkpoint {path} ({error.strerror})")
    except json.JSONDecodeError as error:
        raise Exceptions.ParameterError(f"checkpoint {path} is not valid JSON ({error.msg})")
    return params_from_dict(document)
