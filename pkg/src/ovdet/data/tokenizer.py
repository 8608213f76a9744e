"""Word-level tokenizer for concept texts.

Id 0 is padding and id 1 end-of-sequence. Known words take ids from 2 upward;
unknown words hash into a fixed block of buckets after the vocabulary.
"""
from __future__ import annotations

import re
import zlib
from dataclasses import dataclass
from typing import Iterable, Sequence

PAD_ID = 0
EOS_ID = 1
MAX_TOKENS = 48

_TOKEN = re.compile(r"[a-z0-9]+(?:['-][a-z0-9]+)*|[^\sa-z0-9]")


def split_words(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


@dataclass(frozen=True)
class TokenSeq:
    ids: tuple[int, ...]

    @property
    def eos_position(self) -> int:
        return len(self.ids) - 1

    def __len__(self) -> int:
        return len(self.ids)


class Tokenizer:
    def __init__(self, words: Iterable[str] = (), num_buckets: int = 64, max_len: int = MAX_TOKENS):
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        self.words = sorted(set(words))
        self.num_buckets = num_buckets
        self.max_len = max_len
        self._ids = {w: i + 2 for i, w in enumerate(self.words)}

    @classmethod
    def from_texts(cls, texts: Iterable[str], **kwargs) -> "Tokenizer":
        vocab = set()
        for text in texts:
            vocab.update(split_words(text))
        return cls(vocab, **kwargs)

    @classmethod
    def from_dictionary(cls, dictionary, **kwargs) -> "Tokenizer":
        texts = []
        for entry in dictionary:
            texts.append(entry.name)
            if entry.definition:
                texts.append(entry.definition)
        return cls.from_texts(texts, **kwargs)

    @property
    def vocab_size(self) -> int:
        return 2 + len(self.words) + self.num_buckets

    def token_id(self, word: str) -> int:
        known = self._ids.get(word)
        if known is not None:
            return known
        if self.num_buckets == 0:
            raise KeyError(word)
        return 2 + len(self.words) + zlib.crc32(word.encode("utf-8")) % self.num_buckets

    def tokenize(self, text: str, max_len: int | None = None) -> TokenSeq:
        limit = self.max_len if max_len is None else max_len
        ids = [self.token_id(w) for w in split_words(text)][: limit - 1]
        return TokenSeq(tuple(ids) + (EOS_ID,))

    def tokenize_many(self, texts: Sequence[str]) -> list[TokenSeq]:
        return [self.tokenize(t) for t in texts]

    def state(self) -> dict:
        return {"words": self.words, "num_buckets": self.num_buckets, "max_len": self.max_len}

    @classmethod
    def from_state(cls, state: dict) -> "Tokenizer":
        return cls(state["words"], num_buckets=state["num_buckets"], max_len=state["max_len"])


def tokenize(text: str, max_len: int = MAX_TOKENS, tokenizer: Tokenizer | None = None) -> TokenSeq:
    """Tokenize with ``tokenizer`` (default: empty vocabulary, all words hashed)."""
    return (tokenizer or _DEFAULT).tokenize(text, max_len)


_DEFAULT = Tokenizer()
