"""Concept dictionary: entries, construction and JSON Lines persistence."""
from __future__ import annotations

import hashlib
import json
import re
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Optional

from ..errors import DictionaryError

SOURCES = ("detection", "things", "imagetext")
# lower rank wins when the same name arrives from several sources
_SOURCE_RANK = {"detection": 0, "things": 1, "imagetext": 2}

_WS = re.compile(r"\s+")


def normalize_name(name: str) -> str:
    return _WS.sub(" ", name.strip().lower())


@dataclass(frozen=True)
class ConceptEntry:
    name: str
    definition: Optional[str] = None
    source: str = "detection"
    frequency: int = 0

    def __post_init__(self):
        if not self.name or self.name != normalize_name(self.name):
            raise DictionaryError(f"concept name must be nonempty, trimmed and lowercase: {self.name!r}")
        if self.definition is not None and not self.definition.strip():
            raise DictionaryError(f"empty definition for {self.name!r}")
        if self.source not in SOURCES:
            raise DictionaryError(f"unknown source {self.source!r} for {self.name!r}")
        if self.frequency < 0:
            raise DictionaryError(f"negative frequency for {self.name!r}")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "definition": self.definition,
            "source": self.source,
            "frequency": self.frequency,
        }


class ConceptDictionary:
    """Immutable name -> ConceptEntry mapping, iterated in sorted name order."""

    def __init__(self, entries: Iterable[ConceptEntry] = ()):
        table = {}
        for entry in entries:
            if entry.name in table:
                raise DictionaryError(f"duplicate concept {entry.name!r}")
            table[entry.name] = entry
        self._entries = {name: table[name] for name in sorted(table)}
        self._names = tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[ConceptEntry]:
        return iter(self._entries.values())

    def __contains__(self, name) -> bool:
        return isinstance(name, str) and normalize_name(name) in self._entries

    def __eq__(self, other) -> bool:
        if not isinstance(other, ConceptDictionary):
            return NotImplemented
        return list(self) == list(other)

    def __repr__(self) -> str:
        return f"ConceptDictionary(L={len(self)})"

    @property
    def names(self) -> tuple[str, ...]:
        return self._names

    def get(self, name: str) -> Optional[ConceptEntry]:
        return self._entries.get(normalize_name(name))

    def without(self, names: Iterable[str]) -> "ConceptDictionary":
        drop = {normalize_name(n) for n in names}
        return ConceptDictionary(e for e in self if e.name not in drop)

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e.to_json(), ensure_ascii=False) + "\n" for e in self)

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_jsonl().encode("utf-8")).hexdigest()


def lookup(dictionary: ConceptDictionary, name: str) -> Optional[ConceptEntry]:
    """Exact match after lowercase/trim normalization."""
    if not name or not name.strip():
        return None
    return dictionary.get(name)


def build_dictionary(
    sources: Iterable[tuple[str, Iterable[str]]],
    min_frequency: int,
    lexicon: Mapping[str, str],
) -> ConceptDictionary:
    """Merge concept streams from several sources into one dictionary.

    Detection and things concepts are kept after deduplication whatever their
    count. Image-text phrases survive only with ``frequency >= min_frequency``
    and a lexicon definition. A name seen in several sources keeps the
    highest-priority source (detection > things > imagetext) and the summed
    frequency.
    """
    if min_frequency < 0:
        raise DictionaryError("min_frequency must be >= 0")
    lex = {normalize_name(k): v for k, v in lexicon.items()}
    counts: dict[str, Counter] = {s: Counter() for s in SOURCES}
    for tag, stream in sources:
        if tag not in SOURCES:
            raise DictionaryError(f"unknown source {tag!r}")
        for raw in stream:
            name = normalize_name(raw)
            if name:
                counts[tag][name] += 1

    # admission decides membership; frequency then counts every source
    admitted: dict[str, str] = {}
    for tag in SOURCES:
        for name, freq in counts[tag].items():
            if tag == "imagetext" and (freq < min_frequency or not lex.get(name)):
                continue
            if name not in admitted or _SOURCE_RANK[tag] < _SOURCE_RANK[admitted[name]]:
                admitted[name] = tag
    merged = {name: (tag, sum(counts[s][name] for s in SOURCES)) for name, tag in admitted.items()}

    return ConceptDictionary(
        ConceptEntry(name=name, definition=lex.get(name) or None, source=tag, frequency=freq)
        for name, (tag, freq) in merged.items()
    )


def save_dictionary(dictionary: ConceptDictionary, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dictionary.to_jsonl())


def load_dictionary(path) -> ConceptDictionary:
    entries = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                entry = ConceptEntry(
                    name=obj["name"],
                    definition=obj.get("definition"),
                    source=obj["source"],
                    frequency=int(obj["frequency"]),
                )
            except (ValueError, KeyError, TypeError) as exc:
                raise DictionaryError(f"{path}:{lineno}: malformed concept line ({exc})") from exc
            if entry.name in seen:
                raise DictionaryError(f"{path}:{lineno}: duplicate concept {entry.name!r}")
            seen.add(entry.name)
            entries.append(entry)
    return ConceptDictionary(entries)


def load_lexicon(path) -> dict[str, str]:
    lexicon = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                lexicon[normalize_name(obj["name"])] = obj["definition"]
            except (ValueError, KeyError, TypeError) as exc:
                raise DictionaryError(f"{path}:{lineno}: malformed lexicon line ({exc})") from exc
    return lexicon


def bundled_lexicon() -> dict[str, str]:
    return load_lexicon(Path(__file__).parent / "resources" / "mini_lexicon.jsonl")
