"""Versioned binary checkpoints: magic "EAXL", little-endian throughout.

Layout:
    magic      4 bytes  b"EAXL"
    version    u16
    tag        u16 length + utf-8 bytes ("classifier" | "chatbot")
    config     u32 length + utf-8 JSON (dims, hyperparameters, vocabulary)
    count      u32
    tensors    count * (u16 name length + name, u8 rank, rank * u32 dims,
                        prod(dims) * f32 data)

Tensor data is stored as raw 32-bit floats; running the pipeline in float32
makes save -> load an exact bitwise round trip.
"""

from __future__ import annotations

import dataclasses
import json
import os
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import ClassifierConfig, ClassifierParams, init_classifier
from .model import ChatbotParams, ModelConfig, init_chatbot
from .tensor import Tensor, default_dtype
from .textproc import Vocabulary

MAGIC = b"EAXL"
VERSION = 1
COMPONENT_CLASSIFIER = "classifier"
COMPONENT_CHATBOT = "chatbot"


class CheckpointError(Exception):
    """Base class for persistence failures."""


class CorruptCheckpointError(CheckpointError):
    pass


class ComponentMismatchError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    component: str
    config: dict
    tensors: dict[str, np.ndarray]


def save_checkpoint(path: str | Path, component: str, config: dict,
                    tensors: dict[str, np.ndarray | Tensor]) -> None:
    """Atomic write (temp file in the target directory, then rename)."""
    path = Path(path)
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<H", VERSION)
    tag = component.encode("utf-8")
    blob += struct.pack("<H", len(tag)) + tag
    cfg = json.dumps(config).encode("utf-8")
    blob += struct.pack("<I", len(cfg)) + cfg
    blob += struct.pack("<I", len(tensors))
    for name, value in tensors.items():
        arr = value.data if isinstance(value, Tensor) else np.asarray(value)
        data = np.ascontiguousarray(arr, dtype="<f4")
        nb = name.encode("utf-8")
        blob += struct.pack("<H", len(nb)) + nb
        blob += struct.pack("<B", arr.ndim)
        blob += struct.pack(f"<{arr.ndim}I", *arr.shape)
        blob += data.tobytes()
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(blob))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CorruptCheckpointError(
                f"corrupt checkpoint: wanted {n} bytes at offset {self.pos}, "
                f"file has {len(self.data)}")
        out = self.data[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path: str | Path, expect_component: str | None = None) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    r = _Reader(path.read_bytes())
    if r.take(4) != MAGIC:
        raise CorruptCheckpointError(f"corrupt checkpoint: bad magic in {path}")
    (version,) = r.unpack("<H")
    if version != VERSION:
        raise CorruptCheckpointError(f"unsupported checkpoint version {version}")
    (tag_len,) = r.unpack("<H")
    component = r.take(tag_len).decode("utf-8")
    (cfg_len,) = r.unpack("<I")
    try:
        config = json.loads(r.take(cfg_len).decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CorruptCheckpointError(f"corrupt checkpoint: bad config block ({e})") from None
    (count,) = r.unpack("<I")
    tensors: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode("utf-8")
        (rank,) = r.unpack("<B")
        dims = r.unpack(f"<{rank}I")
        n = int(np.prod(dims)) if rank else 1
        raw = r.take(4 * n)
        tensors[name] = np.frombuffer(raw, dtype="<f4").reshape(dims).copy()
    if r.pos != len(r.data):
        raise CorruptCheckpointError(f"corrupt checkpoint: {len(r.data) - r.pos} trailing bytes")
    if expect_component is not None and component != expect_component:
        raise ComponentMismatchError(
            f"checkpoint component is {component!r}, command needs {expect_component!r}")
    return Checkpoint(component=component, config=config, tensors=tensors)


def _load_into(named: dict[str, Tensor], stored: dict[str, np.ndarray], path) -> None:
    missing = set(named) - set(stored)
    extra = set(stored) - set(named)
    if missing or extra:
        raise CorruptCheckpointError(
            f"tensor table mismatch in {path}: missing {sorted(missing)}, extra {sorted(extra)}")
    for name, tensor in named.items():
        arr = stored[name].astype(default_dtype())
        if arr.shape != tensor.data.shape:
            raise CorruptCheckpointError(
                f"tensor {name} has shape {arr.shape}, expected {tensor.data.shape}")
        tensor.data = np.ascontiguousarray(arr)


def save_classifier(params: ClassifierParams, vocab: Vocabulary, path: str | Path) -> None:
    config = {"config": dataclasses.asdict(params.config), "vocab": vocab.id_to_token}
    save_checkpoint(path, COMPONENT_CLASSIFIER, config, params.named())


def load_classifier(path: str | Path) -> tuple[ClassifierParams, Vocabulary]:
    ckpt = load_checkpoint(path, expect_component=COMPONENT_CLASSIFIER)
    try:
        config = ClassifierConfig(**ckpt.config["config"])
        vocab = Vocabulary(list(ckpt.config["vocab"]))
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptCheckpointError(f"corrupt checkpoint: bad classifier config ({e})") from None
    params = init_classifier(config)
    _load_into(params.named(), ckpt.tensors, path)
    return params, vocab


def save_chatbot(params: ChatbotParams, vocab: Vocabulary, path: str | Path) -> None:
    config = {"config": dataclasses.asdict(params.config), "vocab": vocab.id_to_token}
    save_checkpoint(path, COMPONENT_CHATBOT, config, params.named())


def load_chatbot(path: str | Path) -> tuple[ChatbotParams, Vocabulary]:
    ckpt = load_checkpoint(path, expect_component=COMPONENT_CHATBOT)
    try:
        config = ModelConfig(**ckpt.config["config"])
        vocab = Vocabulary(list(ckpt.config["vocab"]))
    except (KeyError, TypeError, ValueError) as e:
        raise CorruptCheckpointError(f"corrupt checkpoint: bad chatbot config ({e})") from None
    params = init_chatbot(config)
    _load_into(params.named(), ckpt.tensors, path)
    return params, vocab
