"""JSON checkpoint: a config header followed by base64-encoded tensors."""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np
import torch

from .network import ModelConfig, Seq2SeqTransformer
from .vocab import Vocab

FORMAT = "kgtextgen-checkpoint"
VERSION = 1


def save_checkpoint(path, model: Seq2SeqTransformer, vocab: Vocab, extra: dict | None = None) -> None:
    tensors = {}
    for name, value in model.state_dict().items():
        arr = value.detach().cpu().numpy()
        tensors[name] = {
            "dtype": str(arr.dtype),
            "shape": list(arr.shape),
            "data": base64.b64encode(np.ascontiguousarray(arr).tobytes()).decode("ascii"),
        }
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "config": model.config.to_dict(),
        "vocab": vocab.to_json(),
        "extra": extra or {},
        "tensors": tensors,
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")


def load_checkpoint(path) -> tuple[Seq2SeqTransformer, Vocab, dict]:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    if payload.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} file")
    if payload.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {payload.get('version')}")
    model = Seq2SeqTransformer(ModelConfig.from_dict(payload["config"]))
    state = {}
    for name, spec in payload["tensors"].items():
        arr = np.frombuffer(base64.b64decode(spec["data"]), dtype=spec["dtype"]).reshape(spec["shape"])
        state[name] = torch.from_numpy(arr.copy())
    model.load_state_dict(state)
    model.eval()
    return model, Vocab.from_json(payload["vocab"]), payload.get("extra", {})
