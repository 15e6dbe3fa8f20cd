"""Checkpoint archive: one ``.npz`` file with a JSON header and named arrays.

Layout (format version 1):

``__meta__``
    UTF-8 JSON (stored as a uint8 array) with ``format_version``,
    ``model`` (``"joint"`` or ``"pairwise"``), the estimator parameters,
    the schema field names and the vocabulary.
``encoder.*``
    Encoder weights, e.g. ``encoder.layer0.attn.wq.weight``.
``span.V``, ``span.start.<field>.<depth>``, ``span.end.<field>.<depth>``
    Query embeddings and per-field start/end maps of the joint model.
``ner.W``, ``ner.bias``, ``combiner.raw_alpha``
    BIO head and loss weight of the joint model.
``pairwise.start``, ``pairwise.end``
    Projection vectors of the pairwise baseline.
"""

from __future__ import annotations

import io
import json
import re
from pathlib import Path

import numpy as np
import torch

from .data import FieldSchema
from .encoder import Vocabulary
from .estimator import JointExtractor, PairwiseExtractor

FORMAT_VERSION = 1

_MODELS = {"joint": JointExtractor, "pairwise": PairwiseExtractor}
_STACK_KEY = re.compile(r"^span\.(start|end)\.(\d+)$")
_FIELD_KEY = re.compile(r"^span\.(start|end)\.(\d+)\.(\d+)$")


class CheckpointError(ValueError):
    pass


def model_kind(est) -> str:
    return "pairwise" if isinstance(est, PairwiseExtractor) else "joint"


def _export_state(est) -> dict[str, np.ndarray]:
    arrays = {}
    for key, value in est.network_.state_dict().items():
        value = value.detach().cpu().numpy()
        stack = _STACK_KEY.match(key)
        if stack:
            which, depth = stack.groups()
            for i, w in enumerate(value):
                arrays[f"span.{which}.{i}.{depth}"] = w
        elif key in ("start", "end"):
            arrays[f"pairwise.{key}"] = value
        else:
            arrays[key] = value
    return arrays


def _import_state(arrays: dict[str, np.ndarray]) -> dict[str, torch.Tensor]:
    state, stacks = {}, {}
    for key, value in arrays.items():
        field = _FIELD_KEY.match(key)
        if field:
            which, i, depth = field.groups()
            stacks.setdefault((which, int(depth)), {})[int(i)] = value
        elif key.startswith("pairwise."):
            state[key.split(".", 1)[1]] = torch.from_numpy(value)
        else:
            state[key] = torch.from_numpy(value)
    for (which, depth), per_field in stacks.items():
        state[f"span.{which}.{depth}"] = torch.from_numpy(np.stack([per_field[i] for i in sorted(per_field)]))
    return state


def _params_json(est) -> dict:
    params = est.get_params(deep=False)
    params.pop("schema")
    params["betas"] = list(params["betas"])
    return params


def save_checkpoint(est, path) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "model": model_kind(est),
        "params": _params_json(est),
        "schema": est.schema_.names,
        "vocab": est.vocab_.itos,
    }
    arrays = _export_state(est)
    arrays["__meta__"] = np.frombuffer(json.dumps(meta).encode("utf-8"), dtype=np.uint8)
    buf = io.BytesIO()
    np.savez(buf, **arrays)
    Path(path).write_bytes(buf.getvalue())


def load_checkpoint(path):
    """Rebuild a fitted estimator from a checkpoint file."""
    try:
        with np.load(path, allow_pickle=False) as z:
            arrays = {k: z[k] for k in z.files}
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    if "__meta__" not in arrays:
        raise CheckpointError(f"{path}: missing __meta__ header")
    meta = json.loads(arrays.pop("__meta__").tobytes().decode("utf-8"))
    if meta.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint format {meta.get('format_version')}")
    params = dict(meta["params"])
    params["betas"] = tuple(params["betas"])
    est = _MODELS[meta["model"]](FieldSchema.from_names(meta["schema"]), **params)
    est._initialize(Vocabulary(meta["vocab"]))
    state = _import_state(arrays)
    est.network_.load_state_dict(state)
    est.history_ = []
    return est
