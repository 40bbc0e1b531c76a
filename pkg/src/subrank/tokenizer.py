"""Deterministic subword tokenization with exact character offsets.

Greedy longest-match over a fixed piece inventory, BERT-wordpiece style:
words are whitespace-delimited, non-initial pieces carry a ``##`` marker,
and any character with no matching piece falls back to a single-character
[UNK], so tokenization never fails. Character offsets into the source text
are kept for every token, which is what target-span location, candidate
substitution and original/substituted alignment are built on.
"""

from __future__ import annotations

import dataclasses
import re
from dataclasses import dataclass

from .errors import InputError, MultiwordCandidateError, ValidationError

PAD_ID, UNK_ID, CLS_ID, SEP_ID, MASK_ID = 0, 1, 2, 3, 4
SPECIAL_PIECES = ("[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]")
CONTINUATION = "##"

# Printable ASCII minus space: the character fallback inventory every
# vocabulary must contain so ASCII text always tokenizes to real pieces.
ASCII_CHARS = tuple(chr(c) for c in range(0x21, 0x7F))

_WORD_RE = re.compile(r"\S+")


@dataclass(frozen=True)
class Vocabulary:
    """Ordered subword inventory; list index is the token id."""

    pieces: tuple[str, ...]
    lowercase: bool = False

    def __post_init__(self) -> None:
        if tuple(self.pieces[:5]) != SPECIAL_PIECES:
            raise ValidationError(
                f"first five pieces must be {SPECIAL_PIECES}, got {tuple(self.pieces[:5])}"
            )
        index = {}
        for token_id, piece in enumerate(self.pieces):
            if piece in index:
                raise ValidationError(f"duplicate piece {piece!r} at ids {index[piece]} and {token_id}")
            index[piece] = token_id
        missing = [c for c in ASCII_CHARS if c not in index]
        if missing:
            raise ValidationError(
                f"vocabulary must contain every printable ASCII character as a piece; "
                f"missing {missing[:5]}{'...' if len(missing) > 5 else ''}"
            )
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.pieces)

    def piece(self, token_id: int) -> str:
        return self.pieces[token_id]

    def lookup(self, piece: str) -> int | None:
        return self._index.get(piece)


def build_vocabulary(words=(), lowercase: bool = False) -> Vocabulary:
    """Specials, the ASCII character inventory (initial and continuation
    form), then the given extra word pieces, deduplicated in order."""
    pieces = list(SPECIAL_PIECES)
    pieces.extend(ASCII_CHARS)
    pieces.extend(CONTINUATION + c for c in ASCII_CHARS)
    seen = set(pieces)
    for word in words:
        piece = word.lower() if lowercase else word
        if piece and piece not in seen:
            seen.add(piece)
            pieces.append(piece)
    return Vocabulary(pieces=tuple(pieces), lowercase=lowercase)


def default_vocabulary(lowercase: bool = False) -> Vocabulary:
    """Character-only vocabulary; every ASCII word tokenizes, one char per piece."""
    return build_vocabulary((), lowercase=lowercase)


def load_vocabulary(path, lowercase: bool = False) -> Vocabulary:
    """One piece per line, line number = id, first five lines the specials."""
    with open(path, encoding="utf-8") as fh:
        pieces = tuple(line.rstrip("\n") for line in fh)
    return Vocabulary(pieces=pieces, lowercase=lowercase)


def save_vocabulary(vocab: Vocabulary, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for piece in vocab.pieces:
            fh.write(piece + "\n")


@dataclass(frozen=True)
class TokenizedSentence:
    """Token ids with per-token [start, end) character offsets.

    Sequences are always CLS-prefixed and SEP-suffixed; the specials carry
    empty offset spans at the text edges. ``target_span`` is a [start, end)
    token-index range covering the target word, set by
    :func:`locate_target`.
    """

    text: str
    token_ids: tuple[int, ...]
    offsets: tuple[tuple[int, int], ...]
    target_span: tuple[int, int] | None = None

    def __len__(self) -> int:
        return len(self.token_ids)

    def context_positions(self, include_specials: bool = False) -> tuple[int, ...]:
        """Token indices outside the target span (and, by default, outside
        the CLS/SEP positions)."""
        if self.target_span is None:
            raise InputError("sentence has no target span")
        lo = 0 if include_specials else 1
        hi = len(self.token_ids) if include_specials else len(self.token_ids) - 1
        a, b = self.target_span
        return tuple(i for i in range(lo, hi) if not a <= i < b)


def _word_pieces(vocab: Vocabulary, surface: str, base: int) -> list[tuple[int, tuple[int, int]]]:
    """Greedy longest-match pieces for one whitespace-delimited word."""
    word = surface.lower() if vocab.lowercase else surface
    if len(word) != len(surface):  # pathological case folding; match raw
        word = surface
    out = []
    pos, n = 0, len(word)
    while pos < n:
        matched = None
        for end in range(n, pos, -1):
            piece = word[pos:end]
            if pos > 0:
                piece = CONTINUATION + piece
            token_id = vocab.lookup(piece)
            if token_id is not None:
                matched = (token_id, end)
                break
        if matched is None:
            out.append((UNK_ID, (base + pos, base + pos + 1)))
            pos += 1
        else:
            token_id, end = matched
            out.append((token_id, (base + pos, base + end)))
            pos = end
    return out


def tokenize(vocab: Vocabulary, text: str) -> TokenizedSentence:
    """Tokenize text into CLS + word pieces + SEP with exact offsets."""
    if not text or not text.strip():
        raise InputError("cannot tokenize empty text")
    entries = [(CLS_ID, (0, 0))]
    for match in _WORD_RE.finditer(text):
        entries.extend(_word_pieces(vocab, match.group(), match.start()))
    entries.append((SEP_ID, (len(text), len(text))))
    token_ids, offsets = zip(*entries)
    return TokenizedSentence(text=text, token_ids=token_ids, offsets=offsets)


def word_span_in_text(text: str, char_start: int, char_end: int) -> bool:
    """True iff [char_start, char_end) is exactly a whitespace-delimited word."""
    if not 0 <= char_start < char_end <= len(text):
        return False
    span = text[char_start:char_end]
    if any(ch.isspace() for ch in span):
        return False
    if char_start > 0 and not text[char_start - 1].isspace():
        return False
    if char_end < len(text) and not text[char_end].isspace():
        return False
    return True


def locate_target(sent: TokenizedSentence, char_start: int, char_end: int) -> TokenizedSentence:
    """Attach the minimal contiguous token span covering the target word."""
    if not word_span_in_text(sent.text, char_start, char_end):
        raise InputError(
            f"[{char_start}, {char_end}) does not match a whitespace-delimited word "
            f"in {sent.text!r}"
        )
    selected = [
        i
        for i in range(1, len(sent.token_ids) - 1)
        if sent.offsets[i][0] < char_end and sent.offsets[i][1] > char_start
    ]
    if not selected:
        raise InputError(f"no tokens cover [{char_start}, {char_end})")
    return dataclasses.replace(sent, target_span=(selected[0], selected[-1] + 1))


@dataclass(frozen=True)
class Alignment:
    """Positional pairing of context tokens between the original and the
    substituted sentence; both target spans are carried separately because
    their token counts may differ."""

    pairs: tuple[tuple[int, int], ...]
    original_target_span: tuple[int, int]
    substituted_target_span: tuple[int, int]


def substitute(
    vocab: Vocabulary, sent: TokenizedSentence, candidate: str
) -> tuple[TokenizedSentence, Alignment]:
    """Replace the target word with a candidate and align context tokens.

    The candidate adopts the target's leading-capital pattern, only the
    substituted word is re-tokenized (context token ids are reused), and
    the alignment maps context positions by offset arithmetic.
    """
    if sent.target_span is None:
        raise InputError("sentence has no target span to substitute")
    word = candidate.strip()
    if not word:
        raise InputError("empty candidate")
    if any(ch.isspace() for ch in word):
        raise MultiwordCandidateError(f"multiword candidate {candidate!r}")

    a, b = sent.target_span
    char_start = sent.offsets[a][0]
    char_end = sent.offsets[b - 1][1]
    if sent.text[char_start].isupper():
        cased = word[:1].upper() + word[1:]
    elif not vocab.lowercase:
        cased = word.lower()
    else:
        cased = word

    new_text = sent.text[:char_start] + cased + sent.text[char_end:]
    cand_entries = _word_pieces(vocab, cased, char_start)
    delta = len(cased) - (char_end - char_start)

    entries = [(sent.token_ids[i], sent.offsets[i]) for i in range(a)]
    entries.extend(cand_entries)
    for i in range(b, len(sent.token_ids)):
        s, e = sent.offsets[i]
        entries.append((sent.token_ids[i], (s + delta, e + delta)))

    token_ids, offsets = zip(*entries)
    substituted_span = (a, a + len(cand_entries))
    new_sent = TokenizedSentence(
        text=new_text, token_ids=token_ids, offsets=offsets, target_span=substituted_span
    )

    shift = len(cand_entries) - (b - a)
    pairs = tuple(
        (i, i if i < a else i + shift) for i in sent.context_positions()
    )
    return new_sent, Alignment(
        pairs=pairs,
        original_target_span=(a, b),
        substituted_target_span=substituted_span,
    )
