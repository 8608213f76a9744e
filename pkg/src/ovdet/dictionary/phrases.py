"""Rule-based noun phrase chunking for captions.

Captions are lowercased and cut at punctuation. Within each piece, stopwords
(articles, pronouns, prepositions, conjunctions, number words) break the token
stream into runs; each run is trimmed back to its last noun and the head noun is
singularized. Nouns come from a small bundled word list.
"""
from __future__ import annotations

import re
from functools import lru_cache
from pathlib import Path
from typing import Iterator

_RESOURCES = Path(__file__).parent / "resources"
_PIECES = re.compile(r"[^\w\s'-]+")
_WORD = re.compile(r"[a-z][a-z'-]*")


def _read_words(filename: str) -> frozenset[str]:
    lines = (_RESOURCES / filename).read_text(encoding="utf-8").splitlines()
    return frozenset(w.strip() for w in lines if w.strip() and not w.startswith("#"))


@lru_cache(maxsize=None)
def stopwords() -> frozenset[str]:
    return _read_words("stopwords.txt")


@lru_cache(maxsize=None)
def nouns() -> frozenset[str]:
    return _read_words("nouns.txt")


def singularize(word: str) -> str:
    if len(word) <= 3 or word.endswith(("ss", "us", "is")):
        return word
    if word.endswith("ies"):
        return word[:-3] + "y"
    if word.endswith(("ches", "shes", "xes", "ses", "zes")):
        return word[:-2]
    if word.endswith("s"):
        return word[:-1]
    return word


def _is_noun(word: str, vocab: frozenset[str]) -> bool:
    return word in vocab or singularize(word) in vocab


def iter_noun_phrases(caption: str, noun_vocab: frozenset[str] | None = None) -> Iterator[str]:
    """Yield every noun phrase occurrence, duplicates included."""
    vocab = nouns() if noun_vocab is None else noun_vocab
    stop = stopwords()
    for piece in _PIECES.split(caption.lower()):
        run: list[str] = []
        for token in _WORD.findall(piece) + [""]:
            if token and token not in stop:
                run.append(token)
                continue
            while run and not _is_noun(run[-1], vocab):
                run.pop()
            if run:
                run[-1] = singularize(run[-1]) if run[-1] not in vocab else run[-1]
                yield " ".join(run)
            run = []


def extract_noun_phrases(caption: str, noun_vocab: frozenset[str] | None = None) -> list[str]:
    """Distinct lowercase noun phrases of ``caption`` in first-occurrence order."""
    return list(dict.fromkeys(iter_noun_phrases(caption, noun_vocab)))
