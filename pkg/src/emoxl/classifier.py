"""First-stage emotion detector: embedding -> LSTM -> dense -> softmax(8)."""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .dataset import COARSE_LABELS, EmotionTaxonomy, DEFAULT_TAXONOMY, UtterancePair
from .optim import AdamState, adam_step
from .rng import Rng
from .tensor import Tensor
from .textproc import Vocabulary, normalize_text, tokenize, truncate_left


@dataclass
class ClassifierConfig:
    vocab_size: int
    d_emb: int = 256
    hidden: int = 300
    dense: int = 100
    n_classes: int = 8
    dropout: float = 0.1
    max_len: int = 64
    epochs: int = 50
    batch_size: int = 64
    lr: float = 0.001
    seed: int = 0


@dataclass
class LstmParams:
    """Input/recurrent weights and biases for the four gates (i, f, o, g)."""

    w_i: Tensor; u_i: Tensor; b_i: Tensor
    w_f: Tensor; u_f: Tensor; b_f: Tensor
    w_o: Tensor; u_o: Tensor; b_o: Tensor
    w_g: Tensor; u_g: Tensor; b_g: Tensor

    @property
    def hidden(self) -> int:
        return self.u_i.shape[0]

    def named(self, prefix: str = "lstm") -> dict[str, Tensor]:
        return {f"{prefix}.{name}": getattr(self, name)
                for name in ("w_i", "u_i", "b_i", "w_f", "u_f", "b_f",
                             "w_o", "u_o", "b_o", "w_g", "u_g", "b_g")}


@dataclass
class ClassifierParams:
    embedding: Tensor
    lstm: LstmParams
    dense_w: Tensor
    dense_b: Tensor
    out_w: Tensor
    out_b: Tensor
    config: ClassifierConfig

    def named(self) -> dict[str, Tensor]:
        out = {"embedding": self.embedding, "dense_w": self.dense_w,
               "dense_b": self.dense_b, "out_w": self.out_w, "out_b": self.out_b}
        out.update(self.lstm.named())
        return out

    def all(self) -> list[Tensor]:
        return list(self.named().values())


def init_lstm(d_in: int, hidden: int, rng: Rng) -> LstmParams:
    """Uniform(-0.08, 0.08) init with the forget-gate bias shifted to +1."""
    def w(r, c):
        return Tensor(rng.uniform(-0.08, 0.08, size=(r, c)), requires_grad=True)

    def b():
        return Tensor(rng.uniform(-0.08, 0.08, size=(hidden,)), requires_grad=True)

    p = LstmParams(
        w_i=w(d_in, hidden), u_i=w(hidden, hidden), b_i=b(),
        w_f=w(d_in, hidden), u_f=w(hidden, hidden), b_f=b(),
        w_o=w(d_in, hidden), u_o=w(hidden, hidden), b_o=b(),
        w_g=w(d_in, hidden), u_g=w(hidden, hidden), b_g=b(),
    )
    p.b_f.data += 1.0
    return p


def init_classifier(config: ClassifierConfig, rng: Rng | None = None) -> ClassifierParams:
    rng = rng or Rng(config.seed)

    def w(r, c):
        return Tensor(rng.uniform(-0.08, 0.08, size=(r, c)), requires_grad=True)

    return ClassifierParams(
        embedding=w(config.vocab_size, config.d_emb),
        lstm=init_lstm(config.d_emb, config.hidden, rng),
        dense_w=w(config.hidden, config.dense),
        dense_b=Tensor(np.zeros(config.dense), requires_grad=True),
        out_w=w(config.dense, config.n_classes),
        out_b=Tensor(np.zeros(config.n_classes), requires_grad=True),
        config=config,
    )


def lstm_step(x_t: Tensor, h_prev: Tensor, c_prev: Tensor, p: LstmParams) -> tuple[Tensor, Tensor]:
    """One LSTM cell update for a [B, d_in] input row block.

    i = sig(xW_i + hU_i + b_i), f = sig(xW_f + hU_f + b_f),
    o = sig(xW_o + hU_o + b_o), g = tanh(xW_g + hU_g + b_g),
    c = f*c_prev + i*g,  h = o*tanh(c).
    """
    def gate(w, u, b, act):
        return act(T.add(T.add(T.matmul(x_t, w), T.matmul(h_prev, u)), b))

    i = gate(p.w_i, p.u_i, p.b_i, T.sigmoid)
    f = gate(p.w_f, p.u_f, p.b_f, T.sigmoid)
    o = gate(p.w_o, p.u_o, p.b_o, T.sigmoid)
    g = gate(p.w_g, p.u_g, p.b_g, T.tanh)
    c = T.add(T.mul(f, c_prev), T.mul(i, g))
    h = T.mul(o, T.tanh(c))
    return h, c


def classifier_logits(token_ids, params: ClassifierParams, *,
                      training: bool = False, rng: Rng | None = None) -> Tensor:
    """[1, n_classes] logits for one id sequence (dropout after the dense ReLU)."""
    ids = list(token_ids)
    if not ids:
        raise ValueError("classify needs a non-empty token sequence")
    embedded = T.gather_rows(params.embedding, ids)
    hidden = params.lstm.hidden
    h = Tensor(np.zeros((1, hidden)))
    c = Tensor(np.zeros((1, hidden)))
    for t in range(len(ids)):
        x_t = T.slice_(embedded, 0, t, t + 1)
        h, c = lstm_step(x_t, h, c, params.lstm)
    dense = T.relu(T.add(T.matmul(h, params.dense_w), params.dense_b))
    if training:
        dense = T.dropout(dense, params.config.dropout, rng, training=True)
    return T.add(T.matmul(dense, params.out_w), params.out_b)


def classify(token_ids, params: ClassifierParams) -> Tensor:
    """Probability vector over the 8 coarse emotions (sums to 1)."""
    return T.softmax(classifier_logits(token_ids, params), axis=-1)


@dataclass
class EmotionPrediction:
    coarse_id: int
    probs: np.ndarray
    empty_input: bool = False

    @property
    def label(self) -> str:
        return COARSE_LABELS[self.coarse_id]


def predict_emotion(utterance: str, params: ClassifierParams, vocab: Vocabulary,
                    tax: EmotionTaxonomy = DEFAULT_TAXONOMY) -> EmotionPrediction:
    """normalize -> tokenize -> classify -> argmax (ties break to lowest id).

    Empty normalized input cannot be classified; it yields the uniform
    prior's argmax with the empty_input flag set.
    """
    normalized = normalize_text(utterance)
    if not normalized:
        n = len(COARSE_LABELS)
        return EmotionPrediction(0, np.full(n, 1.0 / n), empty_input=True)
    ids = truncate_left(tokenize(normalized, vocab), params.config.max_len)
    probs = classify(ids, params).data.reshape(-1)
    return EmotionPrediction(int(np.argmax(probs)), probs)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    accuracy: float
    wall_ms: int


def train_classifier(pairs: list[UtterancePair], config: ClassifierConfig,
                     params: ClassifierParams | None = None
                     ) -> tuple[ClassifierParams, list[EpochStats]]:
    """Mini-batch Adam training on coarse labels; deterministic under the seed."""
    if not pairs:
        raise ValueError("cannot train on an empty corpus")
    for p in pairs:
        if not (0 <= p.coarse_emotion_id < config.n_classes):
            raise ValueError(f"label {p.coarse_emotion_id} outside [0,{config.n_classes})")
    rng = Rng(config.seed)
    params = params or init_classifier(config, rng)
    param_list = params.all()
    state = AdamState(lr=config.lr)
    history: list[EpochStats] = []
    order = list(range(len(pairs)))
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        rng.shuffle(order)
        loss_sum = 0.0
        n_seen = 0
        n_correct = 0
        for start in range(0, len(order), config.batch_size):
            batch = [pairs[i] for i in order[start:start + config.batch_size]]
            targets = np.array([p.coarse_emotion_id for p in batch])
            with T.Tape() as tape:
                logits = T.concat([
                    classifier_logits(truncate_left(p.input_ids, config.max_len),
                                      params, training=True, rng=rng)
                    for p in batch
                ], axis=0)
                loss = T.cross_entropy(logits, targets)
            T.zero_grads(param_list)
            T.backward(loss, tape)
            adam_step(param_list, state)
            loss_sum += loss.item() * len(batch)
            n_seen += len(batch)
            n_correct += int((logits.data.argmax(axis=1) == targets).sum())
        history.append(EpochStats(
            epoch=epoch,
            loss=loss_sum / n_seen,
            accuracy=n_correct / n_seen,
            wall_ms=int((time.perf_counter() - t0) * 1000),
        ))
    return params, history


def accuracy(pairs: list[UtterancePair], params: ClassifierParams) -> float:
    """Fraction of pairs whose argmax class matches the gold coarse label."""
    if not pairs:
        raise ValueError("accuracy over an empty pair list")
    hits = 0
    for p in pairs:
        probs = classify(truncate_left(p.input_ids, params.config.max_len), params)
        hits += int(np.argmax(probs.data.reshape(-1))) == p.coarse_emotion_id
    return hits / len(pairs)
