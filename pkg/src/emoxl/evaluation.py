"""BLEU-4 scoring with per-reference averaging, plus the fusion ablation.

Scores are sentence-level: clipped 1..4-gram precisions, geometric mean,
brevity penalty.  Multi-reference items average the per-reference scores
(arithmetic mean, not max-clipped multi-reference counting).  Candidates
and references are compared in the same normalized-token space.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, replace
from typing import Protocol, Sequence

import numpy as np

from .dataset import Corpus, UtterancePair
from .model import ModelConfig, generate, train_chatbot
from .rng import Rng
from .textproc import Vocabulary, normalize_text

SMOOTHING_EPS = 1e-9
TOKENIZER_ID = "normalize-whitespace-v1"
MAX_ORDER = 4


def score_tokens(text: str) -> list[str]:
    """Normalized whitespace tokens used on both sides of the comparison."""
    return normalize_text(text).split()


@dataclass
class BleuBreakdown:
    precisions: tuple[float, float, float, float]   # smoothed p1..p4
    brevity_penalty: float
    candidate_len: int
    reference_len: int
    score: float


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def bleu4(candidate: Sequence[str], reference: Sequence[str]) -> BleuBreakdown:
    """Sentence BLEU-4 of a candidate against a single reference.

    p_n = clipped n-gram matches / candidate n-gram count; any p_n with
    zero matches becomes SMOOTHING_EPS before the geometric mean.
    BP = 1 when the candidate is longer than the reference, else
    exp(1 - r/c).  An empty candidate scores 0 with BP defined as 0.
    """
    reference = list(reference)
    if not reference:
        raise ValueError("bleu4 needs a non-empty reference")
    candidate = list(candidate)
    c, r = len(candidate), len(reference)
    if c == 0:
        return BleuBreakdown((0.0,) * MAX_ORDER, 0.0, 0, r, 0.0)
    precisions = []
    for n in range(1, MAX_ORDER + 1):
        cand_counts = _ngrams(candidate, n)
        ref_counts = _ngrams(reference, n)
        matches = sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
        total = max(c - n + 1, 0)
        precisions.append(matches / total if matches > 0 else SMOOTHING_EPS)
    bp = 1.0 if c > r else float(np.exp(1.0 - r / c))
    score = bp * float(np.exp(sum(np.log(p) for p in precisions) / MAX_ORDER))
    return BleuBreakdown(tuple(precisions), bp, c, r, score)


def multi_ref_bleu(candidate: Sequence[str], references: Sequence[Sequence[str]]) -> float:
    """Arithmetic mean of bleu4 against each reference."""
    if not references:
        raise ValueError("multi_ref_bleu needs at least one reference")
    return sum(bleu4(candidate, ref).score for ref in references) / len(references)


@dataclass
class EvalReport:
    item_scores: list[float]
    corpus_mean: float
    item_count: int
    config: dict

    @classmethod
    def build(cls, scores: list[float], extra: dict | None = None) -> "EvalReport":
        cfg = {"smoothing_eps": SMOOTHING_EPS, "tokenizer": TOKENIZER_ID}
        if extra:
            cfg.update(extra)
        return cls(item_scores=list(scores),
                   corpus_mean=sum(scores) / len(scores),
                   item_count=len(scores), config=cfg)

    def to_dict(self) -> dict:
        return {"item_scores": self.item_scores, "corpus_mean": self.corpus_mean,
                "item_count": self.item_count, "config": self.config}


class Responder(Protocol):
    """Anything that maps an input id sequence to response token strings."""

    def respond_to_ids(self, input_ids: list[int]) -> list[str]: ...


def _reference_token_lists(pair: UtterancePair) -> list[list[str]]:
    refs = [score_tokens(r) for r in pair.references]
    refs = [r for r in refs if r]
    if not refs:
        raise ValueError("pair has no non-empty references")
    return refs


def corpus_eval(model: Responder, pairs: list[UtterancePair],
                extra_config: dict | None = None) -> EvalReport:
    """Generate for every pair and average multi_ref_bleu in fixed order."""
    if not pairs:
        raise ValueError("corpus_eval over an empty pair list")
    scores = [
        multi_ref_bleu(model.respond_to_ids(p.input_ids), _reference_token_lists(p))
        for p in pairs
    ]
    return EvalReport.build(scores, extra_config)


def evaluate_chatbot(params, pairs: list[UtterancePair], vocab: Vocabulary,
                     extra_config: dict | None = None) -> EvalReport:
    """Gold-emotion greedy evaluation of a bare chatbot (no classifier)."""
    if not pairs:
        raise ValueError("evaluate_chatbot over an empty pair list")
    scores = []
    for p in pairs:
        out_ids = generate(p.input_ids, p.coarse_emotion_id, params)
        candidate = [vocab.token_of(i) for i in out_ids]
        scores.append(multi_ref_bleu(candidate, _reference_token_lists(p)))
    return EvalReport.build(scores, extra_config)


def split_pairs(pairs: list[UtterancePair], seed: int,
                eval_fraction: float = 0.25) -> tuple[list[UtterancePair], list[UtterancePair]]:
    """Deterministic shuffled train/eval split."""
    order = list(range(len(pairs)))
    Rng(seed).shuffle(order)
    n_eval = max(1, int(len(pairs) * eval_fraction))
    eval_idx = set(order[:n_eval])
    train = [p for i, p in enumerate(pairs) if i not in eval_idx]
    held = [p for i, p in enumerate(pairs) if i in eval_idx]
    return train, held


@dataclass
class AblationResult:
    seed: int
    fusion_on: EvalReport
    fusion_off: EvalReport

    @property
    def difference(self) -> float:
        return self.fusion_on.corpus_mean - self.fusion_off.corpus_mean


def ablation_compare(corpus: Corpus, config: ModelConfig, seed: int) -> AblationResult:
    """Train twin chatbots (emotion fusion on vs zeroed) and compare BLEU.

    Both runs share the seed, so initialization and batch order match; the
    only difference is that the ablated model swaps the emotion embedding
    for the zero vector before the fusion normalization.  Evaluation is
    greedy with gold emotion ids on a held-out quarter of the corpus.
    """
    train, held = split_pairs(corpus.pairs, seed)
    results = []
    for fusion in (True, False):
        cfg = replace(config, vocab_size=corpus.vocab.size,
                      use_emotion_fusion=fusion, seed=seed)
        params, _ = train_chatbot(train, cfg)
        results.append(evaluate_chatbot(params, held, corpus.vocab,
                                        {"fusion": fusion, "seed": seed}))
    return AblationResult(seed=seed, fusion_on=results[0], fusion_off=results[1])
