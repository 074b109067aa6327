"""Run configuration: defaults < JSON config file < command-line flags."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .classifier import ClassifierConfig
from .model import ModelConfig


@dataclass
class RunConfig:
    # training
    epochs: int = 50
    batch: int = 64
    lr: float = 0.001
    dropout: float = 0.1
    seed: int = 0
    precision: str = "f32"          # pipeline width; numeric tests use f64
    # chatbot architecture
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    n_heads: int = 8
    d_model: int = 256
    d_ff: int = 100
    mem_len: int = 32
    max_gen_len: int = 40
    max_len: int = 64
    rel_base: float = 10000.0
    # classifier architecture
    d_emb: int = 256
    hidden: int = 300
    dense: int = 100
    # vocabulary
    min_freq: int = 2
    max_size: int = 20000

    def dtype(self):
        if self.precision == "f32":
            return np.float32
        if self.precision == "f64":
            return np.float64
        raise ValueError(f"precision must be f32 or f64, got {self.precision!r}")

    def model_config(self, vocab_size: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size, n_enc_layers=self.n_enc_layers,
            n_dec_layers=self.n_dec_layers, n_heads=self.n_heads,
            d_model=self.d_model, d_ff=self.d_ff, mem_len=self.mem_len,
            dropout=self.dropout, max_gen_len=self.max_gen_len,
            max_len=self.max_len, rel_base=self.rel_base, epochs=self.epochs,
            batch_size=self.batch, lr=self.lr, seed=self.seed,
        )

    def classifier_config(self, vocab_size: int) -> ClassifierConfig:
        return ClassifierConfig(
            vocab_size=vocab_size, d_emb=self.d_emb, hidden=self.hidden,
            dense=self.dense, dropout=self.dropout, max_len=self.max_len,
            epochs=self.epochs, batch_size=self.batch, lr=self.lr, seed=self.seed,
        )


def resolve_run_config(config_path: str | None, flag_values: dict) -> RunConfig:
    """Merge: dataclass defaults, then file values, then non-None flags."""
    merged = dataclasses.asdict(RunConfig())
    if config_path:
        loaded = json.loads(Path(config_path).read_text(encoding="utf-8"))
        if not isinstance(loaded, dict):
            raise ValueError("config file must hold a JSON object of flat keys")
        unknown = set(loaded) - set(merged)
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        merged.update(loaded)
    for key, value in flag_values.items():
        if key in merged and value is not None:
            merged[key] = value
    return RunConfig(**merged)
