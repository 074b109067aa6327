"""Emotion-fused Transformer-XL encoder-decoder for response generation.

The encoder consumes word embeddings fused with an emotion embedding
(add, then per-position standardize) and supports segment recurrence: the
previous segment's per-layer hidden states are cached, gradient-detached,
and attended to as extra key/value rows.  Self-attention uses the relative
positional decomposition with sinusoidal distance encodings and the global
content/position biases; decoder cross-attention over the encoder output is
plain content attention.  Blocks are post-norm (residual, then layer-norm).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .dataset import UtterancePair
from .optim import AdamState, adam_step
from .rng import Rng
from .tensor import ShapeError, Tensor
from .textproc import BOS_ID, EOS_ID, PAD_ID, truncate_left

FUSION_EPS = 1e-5
_MASKED = -1e30  # additive pre-softmax mask; finite so debug checks stay valid


@dataclass
class ModelConfig:
    vocab_size: int
    n_enc_layers: int = 2
    n_dec_layers: int = 2
    n_heads: int = 8
    d_model: int = 256
    d_ff: int = 100
    mem_len: int = 32
    dropout: float = 0.1
    max_gen_len: int = 40
    max_len: int = 64
    n_emotions: int = 8
    use_emotion_fusion: bool = True
    rel_base: float = 10000.0   # sinusoid wavelength base; scale to context
    epochs: int = 50
    batch_size: int = 64
    lr: float = 0.001
    seed: int = 0

    def __post_init__(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.d_model % 2 != 0:
            raise ValueError("d_model must be even for the sinusoidal encoding")
        if self.mem_len < 0:
            raise ValueError("mem_len must be >= 0")
        for name in ("vocab_size", "n_enc_layers", "n_dec_layers", "n_heads",
                     "d_model", "d_ff", "max_gen_len", "max_len", "n_emotions"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads


@dataclass
class LayerNormParams:
    gain: Tensor
    bias: Tensor


@dataclass
class RelAttentionParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    wr: Tensor          # projection of the relative encodings
    u: Tensor           # [n_heads, d_head] global content bias
    v: Tensor           # [n_heads, d_head] global position bias


@dataclass
class CrossAttentionParams:
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor


@dataclass
class FfnParams:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor


@dataclass
class EncoderLayerParams:
    attn: RelAttentionParams
    ffn: FfnParams
    ln_attn: LayerNormParams
    ln_ffn: LayerNormParams


@dataclass
class DecoderLayerParams:
    self_attn: RelAttentionParams
    cross: CrossAttentionParams
    ffn: FfnParams
    ln_self: LayerNormParams
    ln_cross: LayerNormParams
    ln_ffn: LayerNormParams


@dataclass
class MemoryState:
    """Per-encoder-layer cache of the previous segment's hidden rows.

    Stored as plain detached arrays: no gradient ever flows into them.
    """

    layers: list[np.ndarray] = field(default_factory=list)

    @property
    def n_rows(self) -> int:
        return self.layers[0].shape[0] if self.layers else 0


@dataclass
class ChatbotParams:
    tok_emb: Tensor
    emo_emb: Tensor
    enc_layers: list[EncoderLayerParams]
    dec_layers: list[DecoderLayerParams]
    out_w: Tensor
    out_b: Tensor
    config: ModelConfig

    def named(self) -> dict[str, Tensor]:
        out = {"tok_emb": self.tok_emb, "emo_emb": self.emo_emb,
               "out_w": self.out_w, "out_b": self.out_b}

        def put(prefix, obj):
            for fname, val in vars(obj).items():
                out[f"{prefix}.{fname}"] = val

        for i, layer in enumerate(self.enc_layers):
            put(f"enc.{i}.attn", layer.attn)
            put(f"enc.{i}.ffn", layer.ffn)
            put(f"enc.{i}.ln_attn", layer.ln_attn)
            put(f"enc.{i}.ln_ffn", layer.ln_ffn)
        for i, layer in enumerate(self.dec_layers):
            put(f"dec.{i}.self", layer.self_attn)
            put(f"dec.{i}.cross", layer.cross)
            put(f"dec.{i}.ffn", layer.ffn)
            put(f"dec.{i}.ln_self", layer.ln_self)
            put(f"dec.{i}.ln_cross", layer.ln_cross)
            put(f"dec.{i}.ln_ffn", layer.ln_ffn)
        return out

    def all(self) -> list[Tensor]:
        return list(self.named().values())


def _init_ln(d: int) -> LayerNormParams:
    return LayerNormParams(Tensor(np.ones(d), requires_grad=True),
                           Tensor(np.zeros(d), requires_grad=True))


def init_chatbot(config: ModelConfig, rng: Rng | None = None) -> ChatbotParams:
    """Scaled-normal (std 0.02) projections, zero biases, unit layer-norms."""
    rng = rng or Rng(config.seed)
    d, heads, dh, ff = config.d_model, config.n_heads, config.d_head, config.d_ff

    def w(r, c):
        return Tensor(rng.normal(0.0, 0.02, size=(r, c)), requires_grad=True)

    def zeros(n):
        return Tensor(np.zeros(n), requires_grad=True)

    def rel():
        return RelAttentionParams(wq=w(d, d), wk=w(d, d), wv=w(d, d), wo=w(d, d),
                                  wr=w(d, d), u=w(heads, dh), v=w(heads, dh))

    def ffn():
        return FfnParams(w1=w(d, ff), b1=zeros(ff), w2=w(ff, d), b2=zeros(d))

    enc = [EncoderLayerParams(attn=rel(), ffn=ffn(), ln_attn=_init_ln(d),
                              ln_ffn=_init_ln(d))
           for _ in range(config.n_enc_layers)]
    dec = [DecoderLayerParams(self_attn=rel(),
                              cross=CrossAttentionParams(wq=w(d, d), wk=w(d, d),
                                                         wv=w(d, d), wo=w(d, d)),
                              ffn=ffn(), ln_self=_init_ln(d),
                              ln_cross=_init_ln(d), ln_ffn=_init_ln(d))
           for _ in range(config.n_dec_layers)]
    return ChatbotParams(
        tok_emb=w(config.vocab_size, d),
        emo_emb=w(config.n_emotions, d),
        enc_layers=enc,
        dec_layers=dec,
        out_w=w(d, config.vocab_size),
        out_b=zeros(config.vocab_size),
        config=config,
    )


def layer_norm(x: Tensor, ln: LayerNormParams) -> Tensor:
    return T.add(T.mul(T.row_standardize(x, eps=FUSION_EPS), ln.gain), ln.bias)


def fuse_emotion(word_embs: Tensor, emo_emb: Tensor) -> Tensor:
    """Add the emotion vector to every word embedding, then standardize.

    Per position t: z = w_t + e; output (z - mean(z)) / (popstd(z) + 1e-5),
    with mean/std over the embedding coordinates.  A constant z maps to
    exactly zero.
    """
    e = emo_emb.data
    if e.reshape(-1).shape[0] != word_embs.shape[-1]:
        raise ShapeError(
            f"emotion embedding length {e.reshape(-1).shape[0]} vs d_model {word_embs.shape[-1]}")
    return T.row_standardize(T.add(word_embs, emo_emb), eps=FUSION_EPS)


def relative_encoding(distances: np.ndarray, d_model: int,
                      base: float = 10000.0) -> np.ndarray:
    """Sinusoidal encoding of signed relative distances, [n, d_model].

    Row d is [sin(d*f_0)..sin(d*f_{D/2-1}), cos(d*f_0)..cos(d*f_{D/2-1})]
    with f_k = base^(-2k/D).
    """
    half = d_model // 2
    inv_freq = 1.0 / (base ** (np.arange(half) * 2.0 / d_model))
    ang = np.asarray(distances, dtype=np.float64)[:, None] * inv_freq[None, :]
    return np.concatenate([np.sin(ang), np.cos(ang)], axis=1)


def rel_attention(h: Tensor, mem: Tensor | None, attn: RelAttentionParams,
                  ln: LayerNormParams, *, n_heads: int, mem_len: int,
                  causal: bool, dropout_p: float = 0.0, rng: Rng | None = None,
                  training: bool = False, rel_base: float = 10000.0) -> Tensor:
    """Relative-position multi-head self-attention sublayer (post-norm).

    Keys/values cover concat(mem, h).  Per head, the score for query row i
    against key row j is

        [(q_i + u) . k_j  +  (q_i + v) . (W_r R_{d(i,j)})] / sqrt(d_head)

    where d(i, j) = (M + i) - j is the signed relative distance and R is the
    sinusoidal table.  ``causal`` masks keys after the query; memory rows
    are always visible.  Returns layer_norm(h + W_o @ heads).
    """
    L, d_model = h.shape
    m_rows = 0 if mem is None else mem.shape[0]
    if m_rows > mem_len:
        raise ShapeError(f"memory rows {m_rows} exceed mem_len {mem_len}")
    seq = h if m_rows == 0 else T.concat([mem, h], axis=0)
    klen = m_rows + L

    q = T.matmul(h, attn.wq)
    k = T.matmul(seq, attn.wk)
    v = T.matmul(seq, attn.wv)

    hi = klen - 1                      # largest distance: first key vs last query
    distances = np.arange(hi, -L, -1)  # down to -(L-1): keys after the query
    rel = Tensor(relative_encoding(distances, d_model, rel_base))
    pos_proj = T.matmul(rel, attn.wr)  # [n_dist, d_model]

    # table row index for the distance between query i and key j
    i_idx = np.arange(L)[:, None]
    j_idx = np.arange(klen)[None, :]
    gather_idx = hi - ((m_rows + i_idx) - j_idx)

    mask = None
    if causal:
        mask = Tensor(np.where(j_idx <= m_rows + i_idx, 0.0, _MASKED))

    dh = d_model // n_heads
    inv_sqrt = 1.0 / np.sqrt(dh)
    heads = []
    for head in range(n_heads):
        lo, hi_col = head * dh, (head + 1) * dh
        qh = T.slice_(q, 1, lo, hi_col)
        kh = T.slice_(k, 1, lo, hi_col)
        vh = T.slice_(v, 1, lo, hi_col)
        ph = T.slice_(pos_proj, 1, lo, hi_col)
        u_h = T.slice_(attn.u, 0, head, head + 1)
        v_h = T.slice_(attn.v, 0, head, head + 1)
        content = T.matmul(T.add(qh, u_h), T.transpose(kh))
        pos = T.row_gather(T.matmul(T.add(qh, v_h), T.transpose(ph)), gather_idx)
        scores = T.scale(T.add(content, pos), inv_sqrt)
        if mask is not None:
            scores = T.add(scores, mask)
        weights = T.softmax(scores, axis=-1)
        if training and dropout_p > 0.0:
            weights = T.dropout(weights, dropout_p, rng, training)
        heads.append(T.matmul(weights, vh))
    out = T.matmul(T.concat(heads, axis=1), attn.wo)
    if training and dropout_p > 0.0:
        out = T.dropout(out, dropout_p, rng, training)
    return layer_norm(T.add(h, out), ln)


def cross_attention(x: Tensor, enc_hidden: Tensor, attn: CrossAttentionParams,
                    ln: LayerNormParams, *, n_heads: int, dropout_p: float = 0.0,
                    rng: Rng | None = None, training: bool = False) -> Tensor:
    """Plain content attention of decoder rows over the encoder output."""
    d_model = x.shape[1]
    q = T.matmul(x, attn.wq)
    k = T.matmul(enc_hidden, attn.wk)
    v = T.matmul(enc_hidden, attn.wv)
    dh = d_model // n_heads
    inv_sqrt = 1.0 / np.sqrt(dh)
    heads = []
    for head in range(n_heads):
        lo, hi_col = head * dh, (head + 1) * dh
        qh = T.slice_(q, 1, lo, hi_col)
        kh = T.slice_(k, 1, lo, hi_col)
        vh = T.slice_(v, 1, lo, hi_col)
        weights = T.softmax(T.scale(T.matmul(qh, T.transpose(kh)), inv_sqrt), axis=-1)
        if training and dropout_p > 0.0:
            weights = T.dropout(weights, dropout_p, rng, training)
        heads.append(T.matmul(weights, vh))
    out = T.matmul(T.concat(heads, axis=1), attn.wo)
    if training and dropout_p > 0.0:
        out = T.dropout(out, dropout_p, rng, training)
    return layer_norm(T.add(x, out), ln)


def ffn_block(x: Tensor, ffn: FfnParams, ln: LayerNormParams, *,
              dropout_p: float = 0.0, rng: Rng | None = None,
              training: bool = False) -> Tensor:
    inner = T.relu(T.add(T.matmul(x, ffn.w1), ffn.b1))
    out = T.add(T.matmul(inner, ffn.w2), ffn.b2)
    if training and dropout_p > 0.0:
        out = T.dropout(out, dropout_p, rng, training)
    return layer_norm(T.add(x, out), ln)


def encoder_forward(fused: Tensor, mem: MemoryState | None, params: ChatbotParams,
                    *, training: bool = False, rng: Rng | None = None
                    ) -> tuple[Tensor, MemoryState]:
    """Encoder stack over an already-fused segment, with recurrence memory.

    The new memory caches the last min(L, mem_len) input rows of every
    layer, detached from the tape.
    """
    cfg = params.config
    L = fused.shape[0]
    keep = min(L, cfg.mem_len)
    x = fused
    new_layers = []
    for li, layer in enumerate(params.enc_layers):
        new_layers.append(x.data[L - keep:].copy())
        mem_t = None
        if mem is not None and mem.layers and mem.layers[li].shape[0] > 0:
            mem_t = Tensor(mem.layers[li])
        x = rel_attention(x, mem_t, layer.attn, layer.ln_attn,
                          n_heads=cfg.n_heads, mem_len=cfg.mem_len, causal=False,
                          dropout_p=cfg.dropout, rng=rng, training=training,
                          rel_base=cfg.rel_base)
        x = ffn_block(x, layer.ffn, layer.ln_ffn,
                      dropout_p=cfg.dropout, rng=rng, training=training)
    return x, MemoryState(new_layers)


def encode_utterance(input_ids, coarse_emotion_id: int, params: ChatbotParams,
                     mem: MemoryState | None = None, *, training: bool = False,
                     rng: Rng | None = None) -> tuple[Tensor, MemoryState]:
    """Embed, fuse with the emotion row (or zeros when fusion is off), encode."""
    ids = list(input_ids)
    if not ids:
        raise ValueError("cannot encode an empty utterance")
    cfg = params.config
    if not (0 <= coarse_emotion_id < cfg.n_emotions):
        raise ValueError(f"emotion id {coarse_emotion_id} outside [0,{cfg.n_emotions})")
    word_embs = T.gather_rows(params.tok_emb, ids)
    if cfg.use_emotion_fusion:
        emo_row = T.gather_rows(params.emo_emb, [coarse_emotion_id])
    else:
        emo_row = Tensor(np.zeros((1, cfg.d_model)))
    fused = fuse_emotion(word_embs, emo_row)
    return encoder_forward(fused, mem, params, training=training, rng=rng)


def decoder_forward(prefix_ids, enc_hidden: Tensor, params: ChatbotParams, *,
                    training: bool = False, rng: Rng | None = None) -> Tensor:
    """Logits [len(prefix), V] for a BOS-started target prefix.

    Self-attention is causally masked relative attention without memory;
    editing a later prefix position never changes earlier logits.
    """
    ids = list(prefix_ids)
    if not ids:
        raise ValueError("decoder prefix is empty")
    if ids[0] != BOS_ID:
        raise ValueError(f"decoder prefix must start with BOS={BOS_ID}, got {ids[0]}")
    cfg = params.config
    x = T.gather_rows(params.tok_emb, ids)
    for layer in params.dec_layers:
        x = rel_attention(x, None, layer.self_attn, layer.ln_self,
                          n_heads=cfg.n_heads, mem_len=0, causal=True,
                          dropout_p=cfg.dropout, rng=rng, training=training,
                          rel_base=cfg.rel_base)
        x = cross_attention(x, enc_hidden, layer.cross, layer.ln_cross,
                            n_heads=cfg.n_heads, dropout_p=cfg.dropout,
                            rng=rng, training=training)
        x = ffn_block(x, layer.ffn, layer.ln_ffn,
                      dropout_p=cfg.dropout, rng=rng, training=training)
    return T.add(T.matmul(x, params.out_w), params.out_b)


def chatbot_batch_loss(batch: list[UtterancePair], params: ChatbotParams, *,
                       training: bool = False, rng: Rng | None = None) -> Tensor:
    """Teacher-forced mean token cross-entropy over a batch of pairs."""
    if not batch:
        raise ValueError("empty batch")
    cfg = params.config
    logit_blocks = []
    target_blocks = []
    for pair in batch:
        inp = truncate_left(pair.input_ids, cfg.max_len)
        resp = truncate_left(pair.response_ids, cfg.max_len)
        enc_hidden, _ = encode_utterance(inp, pair.coarse_emotion_id, params,
                                         training=training, rng=rng)
        dec_input = [BOS_ID] + resp[:-1]
        logit_blocks.append(decoder_forward(dec_input, enc_hidden, params,
                                            training=training, rng=rng))
        target_blocks.append(np.asarray(resp, dtype=np.int64))
    logits = T.concat(logit_blocks, axis=0)
    targets = np.concatenate(target_blocks)
    return T.cross_entropy(logits, targets, ignore_id=PAD_ID)


def train_step(batch: list[UtterancePair], params: ChatbotParams,
               state: AdamState, rng: Rng) -> float:
    """One teacher-forced Adam step over the batch; returns the pre-step loss."""
    param_list = params.all()
    with T.Tape() as tape:
        loss = chatbot_batch_loss(batch, params, training=True, rng=rng)
    T.zero_grads(param_list)
    T.backward(loss, tape)
    adam_step(param_list, state)
    return loss.item()


@dataclass
class EpochStats:
    epoch: int
    loss: float
    wall_ms: int


def train_chatbot(pairs: list[UtterancePair], config: ModelConfig,
                  params: ChatbotParams | None = None
                  ) -> tuple[ChatbotParams, list[EpochStats]]:
    """Epoch loop over shuffled mini-batches; deterministic under the seed."""
    if not pairs:
        raise ValueError("cannot train on an empty corpus")
    rng = Rng(config.seed)
    params = params or init_chatbot(config, rng)
    state = AdamState(lr=config.lr)
    history: list[EpochStats] = []
    order = list(range(len(pairs)))
    for epoch in range(config.epochs):
        t0 = time.perf_counter()
        rng.shuffle(order)
        loss_sum = 0.0
        n_seen = 0
        for start in range(0, len(order), config.batch_size):
            batch = [pairs[i] for i in order[start:start + config.batch_size]]
            loss = train_step(batch, params, state, rng)
            loss_sum += loss * len(batch)
            n_seen += len(batch)
        history.append(EpochStats(epoch=epoch, loss=loss_sum / n_seen,
                                  wall_ms=int((time.perf_counter() - t0) * 1000)))
    return params, history


@dataclass
class SamplingConfig:
    top_k: int
    temperature: float = 1.0
    seed: int = 0


def greedy_decode(enc_hidden: Tensor, params: ChatbotParams,
                  sampling: SamplingConfig | None = None) -> list[int]:
    """Autoregressive decode from BOS until EOS or max_gen_len tokens.

    Greedy argmax by default; with a SamplingConfig, draws from the
    temperature-scaled softmax over the top-k logits.
    """
    cfg = params.config
    rng = Rng(sampling.seed) if sampling else None
    prefix = [BOS_ID]
    out: list[int] = []
    while len(out) < cfg.max_gen_len:
        logits = decoder_forward(prefix, enc_hidden, params)
        last = logits.data[-1]
        if sampling is None:
            tok = int(np.argmax(last))
        else:
            k = min(sampling.top_k, last.shape[0])
            top = np.argsort(last)[::-1][:k]
            z = last[top] / max(sampling.temperature, 1e-6)
            z = z - z.max()
            p = np.exp(z)
            p /= p.sum()
            tok = int(top[np.searchsorted(np.cumsum(p), rng.uniform())])
        if tok == EOS_ID:
            break
        out.append(tok)
        prefix.append(tok)
    return out


def generate(utterance_ids, coarse_emotion_id: int, params: ChatbotParams,
             mem: MemoryState | None = None,
             sampling: SamplingConfig | None = None) -> list[int]:
    """Encode once, decode a response; BOS/EOS are not part of the result."""
    enc_hidden, _ = encode_utterance(utterance_ids, coarse_emotion_id, params, mem)
    return greedy_decode(enc_hidden, params, sampling)
