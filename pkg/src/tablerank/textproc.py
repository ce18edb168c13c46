"""Tokenization utilities.

Two tokenizers live here on purpose: WordPiece feeds the neural scorer and
the corpus statistics, while a much simpler alphanumeric splitter feeds the
word-embedding salience computations (the embedding vocabulary is not
WordPiece-based).
"""

from __future__ import annotations

import re
import unicodedata
from dataclasses import dataclass
from pathlib import Path

CLS_TOKEN = "[CLS]"
SEP_TOKEN = "[SEP]"
UNK_TOKEN = "[UNK]"
PAD_TOKEN = "[PAD]"
SPECIAL_TOKENS = (CLS_TOKEN, SEP_TOKEN, UNK_TOKEN, PAD_TOKEN)

# Guards pathological cells; words longer than this become [UNK] outright.
MAX_CHARS_PER_WORD = 100

_NON_ALNUM = re.compile(r"[^0-9A-Za-z]+")


class VocabError(ValueError):
    """Raised for structurally invalid vocabulary files."""


class WordPieceVocab:
    """Immutable token-to-id map with the four special tokens present.

    Ids are contiguous from 0 in file order, so the inverse mapping is a
    plain list.
    """

    def __init__(self, token_to_id: dict[str, int]):
        for tok in SPECIAL_TOKENS:
            if tok not in token_to_id:
                raise VocabError(f"vocabulary is missing special token {tok}")
        ids = sorted(token_to_id.values())
        if ids != list(range(len(token_to_id))):
            raise VocabError("token ids must be unique and contiguous from 0")
        self._token_to_id = dict(token_to_id)
        self._id_to_token = [""] * len(token_to_id)
        for tok, idx in token_to_id.items():
            self._id_to_token[idx] = tok

    def __len__(self) -> int:
        return len(self._token_to_id)

    def __contains__(self, token: str) -> bool:
        return token in self._token_to_id

    def id_of(self, token: str) -> int:
        return self._token_to_id[token]

    def token_of(self, idx: int) -> str:
        return self._id_to_token[idx]

    @property
    def cls_id(self) -> int:
        return self._token_to_id[CLS_TOKEN]

    @property
    def sep_id(self) -> int:
        return self._token_to_id[SEP_TOKEN]

    @property
    def unk_id(self) -> int:
        return self._token_to_id[UNK_TOKEN]

    @property
    def pad_id(self) -> int:
        return self._token_to_id[PAD_TOKEN]


@dataclass(frozen=True)
class TokenSeq:
    """Parallel token strings and integer ids."""

    tokens: tuple[str, ...]
    ids: tuple[int, ...]

    def __post_init__(self):
        if len(self.tokens) != len(self.ids):
            raise ValueError("tokens and ids must have equal length")

    def __len__(self) -> int:
        return len(self.tokens)

    @staticmethod
    def empty() -> "TokenSeq":
        return TokenSeq((), ())


def load_vocab(path: str | Path) -> WordPieceVocab:
    """Load a one-token-per-line vocabulary; the line number is the id."""
    token_to_id: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for idx, line in enumerate(fh):
            token = line.rstrip("\r\n")
            if not token:
                raise VocabError(f"{path}: empty token at line {idx + 1}")
            if token in token_to_id:
                raise VocabError(f"{path}: duplicate token {token!r} at line {idx + 1}")
            token_to_id[token] = idx
    return WordPieceVocab(token_to_id)


def _is_punctuation(ch: str) -> bool:
    cp = ord(ch)
    if 33 <= cp <= 47 or 58 <= cp <= 64 or 91 <= cp <= 96 or 123 <= cp <= 126:
        return True
    return unicodedata.category(ch).startswith("P")


def pre_split(text: str) -> list[str]:
    """Split on whitespace, then break punctuation into standalone words.

    Case is preserved; the downstream vocabulary is cased.
    """
    words: list[str] = []
    for chunk in text.split():
        current: list[str] = []
        for ch in chunk:
            if _is_punctuation(ch):
                if current:
                    words.append("".join(current))
                    current = []
                words.append(ch)
            else:
                current.append(ch)
        if current:
            words.append("".join(current))
    return words


def wordpiece_tokenize(text: str, vocab: WordPieceVocab) -> TokenSeq:
    """Greedy longest-match-first WordPiece segmentation.

    Each pre-split word is consumed left to right, always taking the longest
    vocabulary entry that matches at the current position (continuations
    carry the ``##`` prefix). A word with no valid segmentation collapses to
    a single [UNK].
    """
    out: list[str] = []
    for word in pre_split(text):
        if len(word) > MAX_CHARS_PER_WORD:
            out.append(UNK_TOKEN)
            continue
        start = 0
        pieces: list[str] | None = []
        while start < len(word):
            end = len(word)
            piece = None
            while start < end:
                candidate = word[start:end]
                if start > 0:
                    candidate = "##" + candidate
                if candidate in vocab:
                    piece = candidate
                    break
                end -= 1
            if piece is None:
                pieces = None
                break
            pieces.append(piece)
            start = end
        if pieces is None:
            out.append(UNK_TOKEN)
        else:
            out.extend(pieces)
    return TokenSeq(tuple(out), tuple(vocab.id_of(t) for t in out))


def simple_tokenize(text: str, lowercase: bool = True) -> list[str]:
    """Replace every non-alphanumeric character with a space and split.

    Lowercasing is on by default because the pretrained word vectors used
    for salience are predominantly lower-cased; pass ``lowercase=False`` to
    keep case.
    """
    cleaned = _NON_ALNUM.sub(" ", text)
    if lowercase:
        cleaned = cleaned.lower()
    return cleaned.split()
