"""Synthetic lexicons for desk-scale experiments.

Two generators: a single-language memorization corpus (random spellings with
random pronunciations) and a bilingual corpus in which both languages share
the same spellings but map every letter to a different phoneme, so the
pronunciation is ambiguous without knowing the language.
"""

from __future__ import annotations

import numpy as np

from .corpus import LexiconEntry, tokenize_graphemes

LETTERS = tuple("abcdefgh")
PHONES_A = ("ɑ", "β", "ʃ", "ð", "ɛ", "ɸ", "ɣ", "χ")
PHONES_B = ("ɛ", "ɸ", "ɣ", "χ", "ɑ", "β", "ʃ", "ð")  # every letter maps differently


def _random_spellings(n: int, rng: np.random.Generator,
                      min_len: int = 3, max_len: int = 7) -> list[str]:
    seen: set[str] = set()
    words: list[str] = []
    while len(words) < n:
        length = int(rng.integers(min_len, max_len + 1))
        word = "".join(LETTERS[i] for i in rng.integers(0, len(LETTERS), length))
        if word not in seen:
            seen.add(word)
            words.append(word)
    return words


def rule_based_entry(word: str, lang: str, mapping: dict[str, str]) -> LexiconEntry:
    graphemes = tokenize_graphemes(word, lang, use_lang_token=False)
    return LexiconEntry(lang, graphemes, tuple(mapping[g] for g in graphemes))


def conflicting_bilingual_corpus(
    n_words: int = 200,
    seed: int = 7,
    langs: tuple[str, str] = ("aaa", "bbb"),
) -> list[LexiconEntry]:
    """Shared spellings, two languages, systematically conflicting letter rules."""
    rng = np.random.default_rng(seed)
    map_a = dict(zip(LETTERS, PHONES_A))
    map_b = dict(zip(LETTERS, PHONES_B))
    entries: list[LexiconEntry] = []
    for word in _random_spellings(n_words, rng):
        entries.append(rule_based_entry(word, langs[0], map_a))
        entries.append(rule_based_entry(word, langs[1], map_b))
    return entries


def memorization_corpus(n_words: int = 50, seed: int = 11, lang: str = "mem") -> list[LexiconEntry]:
    """Random spellings paired with unrelated random pronunciations."""
    rng = np.random.default_rng(seed)
    entries: list[LexiconEntry] = []
    for word in _random_spellings(n_words, rng):
        n_phones = int(rng.integers(3, 7))
        phones = tuple(PHONES_A[i] for i in rng.integers(0, len(PHONES_A), n_phones))
        entries.append(LexiconEntry(lang, tokenize_graphemes(word, lang, False), phones))
    return entries
