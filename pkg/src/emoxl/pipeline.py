"""Classifier + chatbot composed into one conversational handle."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .classifier import ClassifierParams, classify, predict_emotion
from .dataset import COARSE_LABELS, DEFAULT_TAXONOMY, EmotionTaxonomy
from .model import ChatbotParams, MemoryState, encode_utterance, greedy_decode
from .textproc import Vocabulary, detokenize, normalize_text, tokenize, truncate_left


@dataclass
class ChatResult:
    emotion_label: str
    emotion_probs: list[float]
    response_text: str
    token_count: int
    latency_ms: int
    new_mem: MemoryState | None = None


@dataclass
class ChatPipeline:
    """Predict the utterance emotion, then generate a fused response."""

    classifier: ClassifierParams
    classifier_vocab: Vocabulary
    chatbot: ChatbotParams
    chatbot_vocab: Vocabulary
    taxonomy: EmotionTaxonomy = field(default=DEFAULT_TAXONOMY)

    @property
    def emotion_labels(self) -> tuple[str, ...]:
        return COARSE_LABELS

    @property
    def shared_vocab(self) -> bool:
        return self.classifier_vocab.id_to_token == self.chatbot_vocab.id_to_token

    def respond(self, text: str, emotion_override: str | None = None,
                mem: MemoryState | None = None) -> ChatResult:
        t0 = time.perf_counter()
        pred = predict_emotion(text, self.classifier, self.classifier_vocab, self.taxonomy)
        if emotion_override is not None:
            if emotion_override not in COARSE_LABELS:
                raise ValueError(f"unknown emotion label {emotion_override!r}")
            emotion_id = COARSE_LABELS.index(emotion_override)
            label = emotion_override
        else:
            emotion_id = pred.coarse_id
            label = pred.label
        ids = truncate_left(tokenize(normalize_text(text), self.chatbot_vocab),
                            self.chatbot.config.max_len)
        enc_hidden, new_mem = encode_utterance(ids, emotion_id, self.chatbot, mem)
        out_ids = greedy_decode(enc_hidden, self.chatbot)
        return ChatResult(
            emotion_label=label,
            emotion_probs=[float(p) for p in pred.probs],
            response_text=detokenize(out_ids, self.chatbot_vocab),
            token_count=len(out_ids),
            latency_ms=int((time.perf_counter() - t0) * 1000),
            new_mem=new_mem,
        )

    def respond_to_ids(self, input_ids: list[int]) -> list[str]:
        """Response token strings for an already-tokenized input (scoring path)."""
        if not self.shared_vocab:
            raise ValueError("id-level scoring needs classifier and chatbot "
                             "checkpoints trained on the same vocabulary")
        probs = classify(truncate_left(input_ids, self.classifier.config.max_len),
                         self.classifier).data.reshape(-1)
        emotion_id = int(np.argmax(probs))
        enc_hidden, _ = encode_utterance(
            truncate_left(input_ids, self.chatbot.config.max_len), emotion_id, self.chatbot)
        return [self.chatbot_vocab.token_of(i) for i in greedy_decode(enc_hidden, self.chatbot)]
