"""Emotion-aware Transformer-XL dialogue agent, built from scratch.

An LSTM classifier predicts one of 8 coarse emotions from the user
utterance; the chatbot fuses that emotion's embedding into every input
word embedding (add, then standardize) before a Transformer-XL
encoder-decoder generates the response.  All numerics run on the package's
own tape-based reverse-mode autodiff.
"""

from .checkpoint import load_chatbot, load_classifier, save_chatbot, save_classifier
from .classifier import ClassifierConfig, classify, predict_emotion, train_classifier
from .dataset import (COARSE_LABELS, DEFAULT_TAXONOMY, Corpus, UtterancePair,
                      coarse_emotion, load_ed_corpus, parse_ed_csv, synth_corpus)
from .evaluation import bleu4, corpus_eval, ablation_compare, multi_ref_bleu
from .gradcheck import finite_diff_check
from .model import (ChatbotParams, MemoryState, ModelConfig, decoder_forward,
                    encoder_forward, fuse_emotion, generate, rel_attention,
                    train_chatbot, train_step)
from .optim import AdamState, adam_step
from .pipeline import ChatPipeline
from .rng import Rng
from .tensor import Tape, Tensor, backward, set_default_dtype, using_dtype
from .textproc import Vocabulary, build_vocab, normalize_text, tokenize

__version__ = "0.1.0"

__all__ = [
    "AdamState", "ChatPipeline", "ChatbotParams", "ClassifierConfig",
    "COARSE_LABELS", "Corpus", "DEFAULT_TAXONOMY", "MemoryState", "ModelConfig",
    "Rng", "Tape", "Tensor", "UtterancePair", "Vocabulary", "adam_step",
    "ablation_compare", "backward", "bleu4", "build_vocab", "classify",
    "coarse_emotion", "corpus_eval", "decoder_forward", "encoder_forward",
    "finite_diff_check", "fuse_emotion", "generate", "load_chatbot",
    "load_classifier", "load_ed_corpus", "multi_ref_bleu", "normalize_text",
    "parse_ed_csv", "predict_emotion", "rel_attention", "save_chatbot",
    "save_classifier", "set_default_dtype", "synth_corpus", "tokenize",
    "train_chatbot", "train_classifier", "train_step", "using_dtype",
]
