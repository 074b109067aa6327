"""Text normalization, a pinned suffix stemmer, tokenization, vocabulary."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

PAD_ID = 0
UNK_ID = 1
BOS_ID = 2
EOS_ID = 3
SPECIAL_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>")

_PUNCT = '.,!?;:"()'
_PUNCT_TABLE = str.maketrans({c: " " for c in _PUNCT})

# Suffix table applied by stem(): longest match first, strip at most one
# suffix, and only when the remaining stem keeps at least 3 characters.
_SUFFIXES = ("ing", "ed", "es", "ly", "s")
_MIN_STEM = 3


def stem(token: str) -> str:
    """Strip one of ing/ed/es/ly/s when the stem stays >= 3 chars."""
    for suf in _SUFFIXES:
        if token.endswith(suf) and len(token) - len(suf) >= _MIN_STEM:
            return token[: -len(suf)]
    return token


def normalize_text(s: str) -> str:
    """Lowercase, strip listed punctuation, keep in-word apostrophes, stem.

    Punctuation characters . , ! ? ; : " ( ) become spaces.  Apostrophes
    survive only between other characters ("don't" keeps its, "'hi'" loses
    both).  Each remaining token goes through :func:`stem`, and whitespace
    collapses to single spaces.  The result may be empty.
    """
    lowered = s.lower().translate(_PUNCT_TABLE)
    tokens = []
    for raw in lowered.split():
        word = raw.strip("'")
        if not word:
            continue
        tokens.append(stem(word))
    return " ".join(tokens)


@dataclass
class Vocabulary:
    """Bijective token<->id map with reserved ids PAD=0, UNK=1, BOS=2, EOS=3."""

    id_to_token: list[str]
    token_to_id: dict[str, int] = field(init=False)

    def __post_init__(self):
        if tuple(self.id_to_token[:4]) != SPECIAL_TOKENS:
            raise ValueError(f"vocabulary must start with {SPECIAL_TOKENS}")
        self.token_to_id = {tok: i for i, tok in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise ValueError("duplicate token in vocabulary")

    def __len__(self) -> int:
        return len(self.id_to_token)

    @property
    def size(self) -> int:
        return len(self.id_to_token)

    def id_of(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    def token_of(self, idx: int) -> str:
        return self.id_to_token[idx]


def build_vocab(corpus: Iterable[str], min_freq: int = 2, max_size: int = 20_000) -> Vocabulary:
    """Frequency-filtered vocabulary over already-normalized texts.

    Tokens with frequency >= min_freq are kept, ordered by descending
    frequency with lexicographic tie-break, truncated to max_size - 4;
    the four specials occupy ids 0-3.
    """
    counts: Counter[str] = Counter()
    n_texts = 0
    for text in corpus:
        n_texts += 1
        counts.update(text.split())
    if n_texts == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    kept = sorted(
        (tok for tok, c in counts.items() if c >= min_freq),
        key=lambda tok: (-counts[tok], tok),
    )[: max(0, max_size - len(SPECIAL_TOKENS))]
    return Vocabulary(list(SPECIAL_TOKENS) + kept)


def tokenize(s: str, vocab: Vocabulary) -> list[int]:
    """Whitespace-split an already-normalized string to ids, appending EOS."""
    ids = [vocab.id_of(tok) for tok in s.split()]
    ids.append(EOS_ID)
    return ids


def detokenize(ids: Sequence[int], vocab: Vocabulary) -> str:
    """Inverse of tokenize on in-vocabulary text; specials are dropped."""
    return " ".join(
        vocab.token_of(i) for i in ids
        if i not in (PAD_ID, BOS_ID, EOS_ID) and 0 <= i < vocab.size
    )


def truncate_left(ids: list[int], max_len: int) -> list[int]:
    """Keep the most recent max_len ids (drop from the front)."""
    return ids if len(ids) <= max_len else ids[-max_len:]
