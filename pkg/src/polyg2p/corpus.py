"""Pronunciation lexicons: parsing, tokenization, vocabularies, and splits.

Lexicon files are UTF-8, one entry per line::

    lang<TAB>spelling<TAB>phoneme tokens separated by spaces

where ``lang`` is an ISO 639-3 code. Lines starting with ``#`` are ignored.
Spellings are tokenized into Unicode codepoints after NFC normalization;
phoneme fields are taken verbatim, split on whitespace.
"""

from __future__ import annotations

import math
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

# Reserved vocabulary slots, in fixed order. Uppercase so they can never
# collide with language-ID tokens, which are all-lowercase `<xxx>`.
PAD, BOS, EOS, UNK = "<PAD>", "<BOS>", "<EOS>", "<UNK>"
RESERVED = (PAD, BOS, EOS, UNK)
PAD_ID, BOS_ID, EOS_ID, UNK_ID = 0, 1, 2, 3

_LANG_RE = re.compile(r"^[a-z]{3}$")
_LANG_TOKEN_RE = re.compile(r"^<[a-z]{3}>$")


def lang_token(lang: str) -> str:
    """Surface form of the artificial language-ID token, e.g. ``<eng>``."""
    return f"<{lang}>"


def is_lang_token(token: str) -> bool:
    return _LANG_TOKEN_RE.match(token) is not None


@dataclass(frozen=True)
class LexiconEntry:
    """One (language, spelling, pronunciation) sample."""

    lang: str
    graphemes: tuple[str, ...]
    phonemes: tuple[str, ...]

    def source_tokens(self, use_lang_token: bool) -> tuple[str, ...]:
        """Grapheme sequence as fed to the encoder, optionally `<lang>`-prefixed."""
        if use_lang_token:
            return (lang_token(self.lang),) + self.graphemes
        return self.graphemes


class Reject(NamedTuple):
    line_no: int
    line: str
    reason: str


class ParsedLexicon(NamedTuple):
    entries: list[LexiconEntry]
    rejects: list[Reject]


def tokenize_graphemes(word: str, lang: str, use_lang_token: bool) -> tuple[str, ...]:
    """Split a spelling into codepoint tokens, optionally prefixed with `<lang>`.

    The word is NFC-normalized first; case is preserved. Raises ValueError on
    an empty word.
    """
    word = unicodedata.normalize("NFC", word)
    if not word:
        raise ValueError("empty source")
    tokens = tuple(word)
    if use_lang_token:
        tokens = (lang_token(lang),) + tokens
    return tokens


def parse_lexicon(stream: Iterable[str]) -> ParsedLexicon:
    """Parse a lexicon stream, collecting malformed lines instead of raising.

    Returns entries plus a list of rejects (line number, raw line, reason).
    Blank lines and ``#`` comment lines are skipped entirely.
    """
    entries: list[LexiconEntry] = []
    rejects: list[Reject] = []
    for line_no, raw in enumerate(stream, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            rejects.append(Reject(line_no, line, f"expected 3 tab-separated fields, got {len(fields)}"))
            continue
        lang, spelling, phoneme_field = fields
        if not _LANG_RE.match(lang):
            rejects.append(Reject(line_no, line, f"invalid language code {lang!r}"))
            continue
        if not spelling:
            rejects.append(Reject(line_no, line, "empty spelling"))
            continue
        if any(ch.isspace() for ch in spelling):
            rejects.append(Reject(line_no, line, "spelling contains whitespace"))
            continue
        phonemes = tuple(phoneme_field.split())
        if not phonemes:
            rejects.append(Reject(line_no, line, "empty phoneme field"))
            continue
        entries.append(LexiconEntry(lang, tokenize_graphemes(spelling, lang, False), phonemes))
    return ParsedLexicon(entries, rejects)


def write_lexicon(fh, entries: Iterable[LexiconEntry]) -> None:
    for e in entries:
        fh.write(f"{e.lang}\t{''.join(e.graphemes)}\t{' '.join(e.phonemes)}\n")


class Vocabulary:
    """Bijective token<->index map with PAD/BOS/EOS/UNK at indices 0..3."""

    def __init__(self, tokens: Sequence[str]):
        tokens = tuple(tokens)
        if tokens[:4] != RESERVED:
            raise ValueError(f"first four tokens must be {RESERVED}")
        if len(set(tokens)) != len(tokens):
            raise ValueError("duplicate tokens in vocabulary")
        self.tokens = tokens
        self.index = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, tokens: Iterable[str]) -> list[int]:
        """Map tokens to indices, falling back to UNK for unknown tokens."""
        return [self.index.get(t, UNK_ID) for t in tokens]

    def decode(self, ids: Iterable[int]) -> list[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for t in self.tokens:
                fh.write(t + "\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls([line.rstrip("\n") for line in fh if line.rstrip("\n")])


def build_vocab(
    entries: Sequence[LexiconEntry],
    side: str,
    min_count: int = 1,
    lang_tokens: bool = True,
) -> Vocabulary:
    """Build a vocabulary over one side of the corpus.

    Tokens are ordered by descending frequency, ties broken lexicographically,
    after the reserved slots. For the source side, language-ID tokens are
    counted like any other token when `lang_tokens` is set.
    """
    if not entries:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    if side not in ("source", "target"):
        raise ValueError(f"side must be 'source' or 'target', got {side!r}")
    counts: Counter[str] = Counter()
    for e in entries:
        counts.update(e.source_tokens(lang_tokens) if side == "source" else e.phonemes)
    kept = sorted((t for t, c in counts.items() if c >= min_count), key=lambda t: (-counts[t], t))
    return Vocabulary(RESERVED + tuple(kept))


@dataclass
class DatasetSplit:
    train: list[LexiconEntry]
    validation: list[LexiconEntry]


def split_train_val(
    entries: Sequence[LexiconEntry],
    cap: int = 10000,
    val_fraction: float = 0.1,
    seed: int = 0,
) -> DatasetSplit:
    """Per-language capped train/validation split.

    Per language: the first `cap` entries in corpus order are kept, shuffled
    deterministically, and ceil(val_fraction * kept) go to validation -- except
    that train is never left empty for a language that has any entries.
    """
    if cap < 1:
        raise ValueError("cap must be >= 1")
    if not 0 <= val_fraction < 1:
        raise ValueError("val_fraction must be in [0, 1)")
    by_lang: dict[str, list[LexiconEntry]] = defaultdict(list)
    for e in entries:
        by_lang[e.lang].append(e)
    train: list[LexiconEntry] = []
    validation: list[LexiconEntry] = []
    for lang in sorted(by_lang):
        kept = by_lang[lang][:cap]
        rng = np.random.default_rng([seed] + list(lang.encode("utf-8")))
        shuffled = [kept[i] for i in rng.permutation(len(kept))]
        n_val = min(math.ceil(val_fraction * len(kept)), len(kept) - 1)
        validation.extend(shuffled[:n_val])
        train.extend(shuffled[n_val:])
    return DatasetSplit(train, validation)


def encode_pairs(
    entries: Iterable[LexiconEntry],
    src_vocab: Vocabulary,
    tgt_vocab: Vocabulary,
    use_lang_token: bool,
) -> list[tuple[list[int], list[int]]]:
    """Encode entries into (source ids, target ids) pairs for the model."""
    return [
        (src_vocab.encode(e.source_tokens(use_lang_token)), tgt_vocab.encode(e.phonemes))
        for e in entries
    ]


# --- Phoneme inventories and transcription cleaning -------------------------

_FEATURE_VALUES = {"+": 1, "0": 0, "-": -1}


@dataclass
class PhonemeInventory:
    """One language's phoneme set with articulatory feature vectors."""

    lang: str
    phonemes: frozenset[str]
    features: dict[str, tuple[int, ...]]

    def __post_init__(self):
        missing = self.phonemes - self.features.keys()
        if missing:
            raise ValueError(f"phonemes without feature vectors: {sorted(missing)}")
        lengths = {len(v) for v in self.features.values()}
        if len(lengths) > 1:
            raise ValueError(f"inconsistent feature vector lengths: {sorted(lengths)}")


class InventoryTable(NamedTuple):
    by_lang: dict[str, PhonemeInventory]
    features: dict[str, tuple[int, ...]]  # global phoneme -> feature vector


def parse_inventory(stream: Iterable[str]) -> InventoryTable:
    """Parse an inventory file.

    Format: a header line ``lang<TAB>phoneme<TAB>name1,name2,...`` naming the
    features, then one row per (language, phoneme) with values in {+, 0, -}.
    """
    lines = iter(enumerate(stream, start=1))
    header = None
    for _, raw in lines:
        line = raw.rstrip("\r\n")
        if line.strip() and not line.startswith("#"):
            header = line.split("\t")
            break
    if header is None or len(header) != 3:
        raise ValueError("inventory file needs a 3-field header line")
    n_features = len(header[2].split(","))

    per_lang_phones: dict[str, set[str]] = defaultdict(set)
    per_lang_features: dict[str, dict[str, tuple[int, ...]]] = defaultdict(dict)
    global_features: dict[str, tuple[int, ...]] = {}
    for line_no, raw in lines:
        line = raw.rstrip("\r\n")
        if not line.strip() or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ValueError(f"inventory line {line_no}: expected 3 fields")
        lang, phoneme, values = fields
        parts = values.split(",")
        if len(parts) != n_features:
            raise ValueError(f"inventory line {line_no}: expected {n_features} feature values")
        try:
            vector = tuple(_FEATURE_VALUES[p] for p in parts)
        except KeyError as exc:
            raise ValueError(f"inventory line {line_no}: bad feature value {exc}") from None
        per_lang_phones[lang].add(phoneme)
        per_lang_features[lang][phoneme] = vector
        global_features.setdefault(phoneme, vector)

    by_lang = {
        lang: PhonemeInventory(lang, frozenset(phones), per_lang_features[lang])
        for lang, phones in per_lang_phones.items()
    }
    return InventoryTable(by_lang, global_features)


class CleanResult(NamedTuple):
    phonemes: tuple[str, ...]
    warnings: list[str]


def hamming(a: Sequence[int], b: Sequence[int]) -> int:
    if len(a) != len(b):
        raise ValueError(f"feature vectors of different length: {len(a)} vs {len(b)}")
    return sum(x != y for x, y in zip(a, b))


def clean_transcription(
    phonemes: Sequence[str],
    inventory: PhonemeInventory,
    feature_table: dict[str, tuple[int, ...]] | None = None,
) -> CleanResult:
    """Map out-of-inventory phonemes to the nearest in-inventory phoneme.

    Nearest = minimal Hamming distance between articulatory feature vectors,
    ties broken lexicographically. Phonemes without a feature vector in the
    (global) feature table pass through unchanged with a warning. Idempotent.
    """
    features = feature_table if feature_table is not None else inventory.features
    cleaned: list[str] = []
    warnings: list[str] = []
    for p in phonemes:
        if p in inventory.phonemes:
            cleaned.append(p)
            continue
        vector = features.get(p)
        if vector is None:
            warnings.append(f"no feature vector for {p!r}; left unchanged")
            cleaned.append(p)
            continue
        best = min(
            sorted(inventory.phonemes),
            key=lambda q: (hamming(vector, inventory.features[q]), q),
        )
        cleaned.append(best)
    return CleanResult(tuple(cleaned), warnings)
