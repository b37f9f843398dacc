"""Tokenization, sentence splitting and pinyin transliteration for mixed
Chinese/English ASR text.

Tokens are the scoring units for error rates: one CJK character, one Latin
word, one digit span, or one punctuation mark.  Whitespace never becomes a
token.
"""
from __future__ import annotations

import enum
import unicodedata
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources
from pathlib import Path
from typing import Iterator, Mapping, Optional, Union


class Category(str, enum.Enum):
    MANDARIN = "mandarin"
    CS_ENGLISH = "cs_english"
    ITN = "itn"
    PUNCTUATION = "punctuation"


@dataclass(frozen=True)
class Token:
    surface: str
    category: Category
    char_offset: int

    @property
    def end(self) -> int:
        return self.char_offset + len(self.surface)


@dataclass(frozen=True)
class Sentence:
    text: str
    terminal: Optional[str] = None


TERMINALS = frozenset("。？！.?!")
DIGIT_INNER = frozenset(".,%:")
APOSTROPHES = frozenset("'’")


def is_cjk(ch: str) -> bool:
    cp = ord(ch)
    return 0x4E00 <= cp <= 0x9FFF or 0x3400 <= cp <= 0x4DBF


def is_latin_letter(ch: str) -> bool:
    # Basic Latin through Latin Extended-B, plus fullwidth A-Z/a-z
    cp = ord(ch)
    if not ch.isalpha():
        return False
    return cp < 0x0250 or 0xFF21 <= cp <= 0xFF3A or 0xFF41 <= cp <= 0xFF5A


def is_digit(ch: str) -> bool:
    return ch.isdecimal()


def is_punct(ch: str) -> bool:
    return unicodedata.category(ch)[0] in "PS"


def classify_char(ch: str) -> Optional[Category]:
    """Category a lone character starts, or None for whitespace."""
    if ch.isspace():
        return None
    if is_cjk(ch):
        return Category.MANDARIN
    if is_latin_letter(ch):
        return Category.CS_ENGLISH
    if is_digit(ch):
        return Category.ITN
    if is_punct(ch):
        return Category.PUNCTUATION
    # other ideograph blocks, kana, other scripts: character-level unit
    return Category.MANDARIN


def _iter_tokens(text: str) -> Iterator[Token]:
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        cat = classify_char(ch)
        if cat is None:
            i += 1
            continue
        start = i
        i += 1
        if cat is Category.CS_ENGLISH:
            while i < n:
                if is_latin_letter(text[i]):
                    i += 1
                elif text[i] in APOSTROPHES and i + 1 < n and is_latin_letter(text[i + 1]):
                    i += 2
                else:
                    break
        elif cat is Category.ITN:
            while i < n:
                if is_digit(text[i]):
                    i += 1
                elif text[i] in DIGIT_INNER and i + 1 < n and is_digit(text[i + 1]):
                    i += 2
                else:
                    break
        yield Token(text[start:i], cat, start)


def tokenize(text: str) -> list[Token]:
    return list(_iter_tokens(text))


def split_sentences(text: str) -> list[Sentence]:
    """Cut ``text`` after terminal punctuation.

    A run of consecutive terminators ("?!", "...") stays with one sentence,
    and a period between two digits is a decimal point, not a terminator.
    Whitespace after a terminator opens the next sentence, so joining the
    pieces always reproduces ``text``.
    """
    sentences: list[Sentence] = []
    start = 0
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch in TERMINALS and not _is_decimal_point(text, i):
            while i + 1 < n and text[i + 1] in TERMINALS:
                i += 1
            sentences.append(Sentence(text[start : i + 1], text[i]))
            start = i + 1
        i += 1
    if start < n:
        sentences.append(Sentence(text[start:], None))
    return sentences


def _is_decimal_point(text: str, i: int) -> bool:
    return (
        text[i] == "."
        and 0 < i < len(text) - 1
        and is_digit(text[i - 1])
        and is_digit(text[i + 1])
    )


class PinyinTable(Mapping[str, str]):
    """Immutable character -> tone-numbered syllable map."""

    def __init__(self, entries: Mapping[str, str]):
        self._entries = dict(entries)

    def __getitem__(self, ch: str) -> str:
        return self._entries[ch]

    def __iter__(self):
        return iter(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    @classmethod
    def parse(cls, lines) -> "PinyinTable":
        entries = {}
        for lineno, raw in enumerate(lines, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            try:
                ch, syllable = line.split("\t")
            except ValueError:
                raise ValueError(f"pinyin table line {lineno}: expected <char><TAB><syllable>") from None
            if len(ch) != 1 or not syllable:
                raise ValueError(f"pinyin table line {lineno}: bad entry {line!r}")
            entries[ch] = syllable.strip()
        return cls(entries)

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PinyinTable":
        with open(path, encoding="utf-8") as f:
            return cls.parse(f)


@lru_cache(maxsize=1)
def default_pinyin_table() -> PinyinTable:
    ref = resources.files("coc_asr") / "data" / "pinyin.tsv"
    with ref.open(encoding="utf-8") as f:
        return PinyinTable.parse(f)


def to_pinyin(text: str, table: Optional[Mapping[str, str]] = None) -> str:
    """Replace CJK characters with their syllables, e.g. "GPT模型" -> "GPT mo2 xing2".

    Everything the table cannot convert is kept verbatim as a span, separated
    from neighbouring syllables by single spaces.
    """
    if table is None:
        table = default_pinyin_table()
    units: list[str] = []
    span: list[str] = []

    def flush() -> None:
        s = "".join(span).strip()
        if s:
            units.append(s)
        span.clear()

    for ch in text:
        syllable = table.get(ch) if is_cjk(ch) else None
        if syllable is None:
            span.append(ch)
        else:
            flush()
            units.append(syllable)
    flush()
    return " ".join(units)
