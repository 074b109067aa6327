"""Dialogue corpus ingestion, emotion taxonomy, pairing, synthetic data.

The CSV schema is the empathetic-dialogues distribution: header plus 8
columns (conv_id, utterance_idx, context, prompt, speaker_idx, utterance,
selfeval, tags), with literal commas escaped as "_comma_" inside fields.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from pathlib import Path

from .rng import Rng
from .textproc import Vocabulary, build_vocab, normalize_text, tokenize, truncate_left

ED_COLUMNS = ("conv_id", "utterance_idx", "context", "prompt",
              "speaker_idx", "utterance", "selfeval", "tags")


class DataError(ValueError):
    """Malformed corpus input (CSV rows, labels, cache files)."""


@dataclass(frozen=True)
class EmotionTaxonomy:
    """Coarse grouping of the 32 fine dialogue-emotion labels into 8 groups."""

    coarse_labels: tuple[str, ...]
    mapping: dict[str, str]

    @property
    def fine_labels(self) -> tuple[str, ...]:
        return tuple(self.mapping)

    def coarse_of(self, fine: str) -> str:
        try:
            return self.mapping[fine]
        except KeyError:
            raise DataError(f"unknown fine emotion label: {fine!r}") from None

    def coarse_id(self, fine: str) -> int:
        return self.coarse_labels.index(self.coarse_of(fine))

    def group(self, coarse: str) -> tuple[str, ...]:
        return tuple(f for f, c in self.mapping.items() if c == coarse)


_GROUPS: dict[str, tuple[str, ...]] = {
    "excited": ("excited", "surprised", "joyful"),
    "afraid": ("afraid", "terrified", "anxious", "apprehensive"),
    "disgusted": ("disgusted", "embarrassed", "guilty", "ashamed"),
    "annoyed": ("angry", "annoyed", "jealous", "furious"),
    "grateful": ("faithful", "trusting", "grateful", "caring", "hopeful"),
    "disappointed": ("sad", "disappointed", "devastated", "lonely",
                     "nostalgic", "sentimental"),
    "impressed": ("proud", "impressed", "content"),
    "prepared": ("anticipating", "prepared", "confident"),
}

DEFAULT_TAXONOMY = EmotionTaxonomy(
    coarse_labels=tuple(_GROUPS),
    mapping={fine: coarse for coarse, fines in _GROUPS.items() for fine in fines},
)

COARSE_LABELS = DEFAULT_TAXONOMY.coarse_labels


def coarse_emotion(fine: str, tax: EmotionTaxonomy = DEFAULT_TAXONOMY) -> str:
    return tax.coarse_of(fine)


@dataclass
class DialogueRecord:
    conv_id: str
    utterance_idx: int
    context: str
    prompt: str
    speaker_idx: int
    utterance: str
    selfeval: str
    tags: str


@dataclass
class UtterancePair:
    """One (input, response) unit: ids end with EOS, references are raw text."""

    input_ids: list[int]
    response_ids: list[int]
    coarse_emotion_id: int
    fine_emotion: str
    references: list[str]


@dataclass
class Corpus:
    pairs: list[UtterancePair]
    vocab: Vocabulary


def _unescape(fieldtext: str) -> str:
    return fieldtext.replace("_comma_", ",")


def _escape(fieldtext: str) -> str:
    return fieldtext.replace(",", "_comma_")


def parse_ed_csv(data: bytes, tax: EmotionTaxonomy = DEFAULT_TAXONOMY) -> list[DialogueRecord]:
    """Decode a dialogue CSV into records, validating arity and labels.

    Row numbers in error messages count the header as row 1.
    """
    text = data.decode("utf-8")
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty CSV: missing header row") from None
    if tuple(h.strip() for h in header) != ED_COLUMNS:
        raise DataError(f"unexpected header {header!r}, want {list(ED_COLUMNS)}")
    records = []
    for row_no, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(ED_COLUMNS):
            raise DataError(f"row {row_no}: expected 8 fields, got {len(row)}")
        fields = [_unescape(f) for f in row]
        context = fields[2].strip()
        if context not in tax.mapping:
            raise DataError(f"row {row_no}: unknown fine emotion {context!r}")
        if not fields[5].strip():
            raise DataError(f"row {row_no}: empty utterance")
        try:
            utt_idx = int(fields[1])
            spk_idx = int(fields[4])
        except ValueError:
            raise DataError(f"row {row_no}: non-integer index field") from None
        if utt_idx < 1:
            raise DataError(f"row {row_no}: utterance_idx must be >= 1")
        records.append(DialogueRecord(fields[0], utt_idx, context, fields[3],
                                      spk_idx, fields[5], fields[6], fields[7]))
    return records


def serialize_ed_csv(records: list[DialogueRecord]) -> bytes:
    """Inverse of parse_ed_csv for fixture round-trips (re-escapes commas)."""
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(ED_COLUMNS)
    for r in records:
        writer.writerow([
            _escape(r.conv_id), str(r.utterance_idx), _escape(r.context),
            _escape(r.prompt), str(r.speaker_idx), _escape(r.utterance),
            _escape(r.selfeval), _escape(r.tags),
        ])
    return out.getvalue().encode("utf-8")


def make_pairs(records: list[DialogueRecord], vocab: Vocabulary,
               tax: EmotionTaxonomy = DEFAULT_TAXONOMY, max_len: int = 64) -> list[UtterancePair]:
    """Consecutive-turn pairs: turn i is the input, turn i+1 the response.

    Rows sharing (conv_id, utterance_idx) are alternative wordings of the
    same turn; all wordings of the response turn become the reference set
    of a single pair.  Single-turn conversations yield no pairs.
    """
    by_conv: dict[str, dict[int, list[DialogueRecord]]] = {}
    conv_order: list[str] = []
    for r in records:
        if r.conv_id not in by_conv:
            by_conv[r.conv_id] = {}
            conv_order.append(r.conv_id)
        by_conv[r.conv_id].setdefault(r.utterance_idx, []).append(r)

    pairs = []
    for conv_id in conv_order:
        turns = by_conv[conv_id]
        for idx in sorted(turns):
            if idx + 1 not in turns:
                continue
            inp = turns[idx][0]
            responses = turns[idx + 1]
            references = [r.utterance for r in responses]
            pairs.append(UtterancePair(
                input_ids=truncate_left(tokenize(normalize_text(inp.utterance), vocab), max_len),
                response_ids=truncate_left(tokenize(normalize_text(references[0]), vocab), max_len),
                coarse_emotion_id=tax.coarse_id(inp.context),
                fine_emotion=inp.context,
                references=references,
            ))
    return pairs


def load_ed_corpus(csv_path: str | Path, vocab: Vocabulary | None = None,
                   min_freq: int = 2, max_size: int = 20_000,
                   max_len: int = 64) -> Corpus:
    """Parse an ED-format CSV file into a Corpus, building a vocab if needed."""
    records = parse_ed_csv(Path(csv_path).read_bytes())
    if vocab is None:
        vocab = build_vocab((normalize_text(r.utterance) for r in records),
                            min_freq=min_freq, max_size=max_size)
    return Corpus(pairs=make_pairs(records, vocab, max_len=max_len), vocab=vocab)


# ---------------------------------------------------------------------------
# synthetic corpus
# ---------------------------------------------------------------------------

# Five signature input words per coarse emotion plus a shared filler pool.
SIGNATURE_WORDS: dict[str, tuple[str, ...]] = {
    "excited": ("thrilled", "excited", "surprise", "amazing", "party"),
    "afraid": ("terrified", "scared", "nightmare", "afraid", "spooky"),
    "disgusted": ("gross", "disgusting", "ashamed", "embarrassing", "yuck"),
    "annoyed": ("furious", "annoying", "jealous", "traffic", "rude"),
    "grateful": ("thankful", "grateful", "blessed", "kindness", "helped"),
    "disappointed": ("sad", "lonely", "nostalgic", "missed", "crying"),
    "impressed": ("proud", "impressive", "talented", "masterpiece", "skill"),
    "prepared": ("ready", "prepared", "planned", "checklist", "organized"),
}

FILLER_WORDS = ("i", "was", "so", "today", "really", "about", "the", "whole",
                "time", "yesterday", "my", "friend", "it", "felt", "very")

RESPONSE_TEMPLATES: dict[str, str] = {
    "excited": "wow that sounds absolutely wonderful tell me everything",
    "afraid": "that sounds terrifying i hope you feel safe now",
    "disgusted": "ugh that is awful i would feel the same way",
    "annoyed": "that would drive me crazy you have every right to be upset",
    "grateful": "it is lovely to hear such kindness came your way",
    "disappointed": "i am so sorry that must have been really hard",
    "impressed": "that is seriously impressive you should be proud",
    "prepared": "sounds like you have everything under control good luck",
}


def emotion_response(coarse_emotion_id: int) -> str:
    """The response text owned by one coarse emotion (emotion-keyed mode)."""
    return RESPONSE_TEMPLATES[COARSE_LABELS[coarse_emotion_id]]


def synth_corpus(seed: int, n_pairs: int, sig_prob: float = 1.0,
                 response_mode: str = "emotion") -> Corpus:
    """Deterministic emotion-balanced toy corpus.

    Pair i carries coarse emotion i mod 8.  Each input mixes signature
    words of its emotion (present with probability ``sig_prob``; 1 or 2 of
    them) with 2-3 filler words, in shuffled order.

    response_mode:
      * "emotion": the response is the emotion's template, so the emotion
        id fully determines the target.  With sig_prob=0 the input text
        alone cannot predict the response.
      * "text": the response template is keyed by the input's first filler
        word; emotion plays no role in the target (ablation control).
    """
    if n_pairs < 8:
        raise ValueError("synth_corpus needs n_pairs >= 8")
    if response_mode not in ("emotion", "text"):
        raise ValueError(f"unknown response_mode {response_mode!r}")
    rng = Rng(seed)
    raw: list[tuple[str, str, int]] = []
    templates = list(RESPONSE_TEMPLATES.values())
    for i in range(n_pairs):
        e = i % 8
        words: list[str] = []
        if rng.uniform() < sig_prob:
            n_sig = 1 + (1 if rng.uniform() < 0.5 else 0)
            words += rng.sample(list(SIGNATURE_WORDS[COARSE_LABELS[e]]), n_sig)
        words += rng.sample(list(FILLER_WORDS), 2 + rng.below(2))
        rng.shuffle(words)
        input_text = " ".join(words)
        if response_mode == "emotion":
            response_text = emotion_response(e)
        else:
            first_filler = next(w for w in words if w in FILLER_WORDS)
            response_text = templates[FILLER_WORDS.index(first_filler) % 8]
        raw.append((input_text, response_text, e))

    texts = [t for inp, resp, _ in raw for t in (normalize_text(inp), normalize_text(resp))]
    vocab = build_vocab(texts, min_freq=1, max_size=20_000)
    pairs = [
        UtterancePair(
            input_ids=tokenize(normalize_text(inp), vocab),
            response_ids=tokenize(normalize_text(resp), vocab),
            coarse_emotion_id=e,
            fine_emotion=DEFAULT_TAXONOMY.group(COARSE_LABELS[e])[0],
            references=[resp],
        )
        for inp, resp, e in raw
    ]
    return Corpus(pairs=pairs, vocab=vocab)


# ---------------------------------------------------------------------------
# corpus cache (newline-delimited JSON) with a vocabulary sidecar
# ---------------------------------------------------------------------------

def vocab_sidecar_path(cache_path: str | Path) -> Path:
    return Path(str(cache_path) + ".vocab.json")


def write_corpus_cache(corpus: Corpus, path: str | Path) -> None:
    """One JSON object per line: input_ids, response_ids, emotion_id, references."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        for p in corpus.pairs:
            fh.write(json.dumps({
                "input_ids": p.input_ids,
                "response_ids": p.response_ids,
                "emotion_id": p.coarse_emotion_id,
                "references": p.references,
            }) + "\n")
    vocab_sidecar_path(path).write_text(
        json.dumps({"tokens": corpus.vocab.id_to_token}), encoding="utf-8")


def read_corpus_cache(path: str | Path) -> Corpus:
    path = Path(path)
    sidecar = vocab_sidecar_path(path)
    if not sidecar.exists():
        raise DataError(f"missing vocabulary sidecar {sidecar}")
    vocab = Vocabulary(json.loads(sidecar.read_text(encoding="utf-8"))["tokens"])
    pairs = []
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                pairs.append(UtterancePair(
                    input_ids=[int(i) for i in obj["input_ids"]],
                    response_ids=[int(i) for i in obj["response_ids"]],
                    coarse_emotion_id=int(obj["emotion_id"]),
                    fine_emotion="",
                    references=[str(r) for r in obj["references"]],
                ))
            except (KeyError, ValueError, TypeError) as e:
                raise DataError(f"cache line {line_no}: {e}") from None
    return Corpus(pairs=pairs, vocab=vocab)
