"""Text normalization, word alignment and WER."""

from __future__ import annotations

import os
import unicodedata
from dataclasses import dataclass
from typing import Sequence

from ..errors import EmptyReference

if os.environ.get("AUDIOEVAL_PURE_PYTHON") == "1":
    from . import _align_py as _kernel
else:
    try:
        from . import _align_ext as _kernel
    except ImportError:  # extension not built
        from . import _align_py as _kernel

BACKEND = "cython" if _kernel.__name__.endswith("_align_ext") else "python"

MATCH, SUBSTITUTE, DELETE, INSERT = "match", "substitute", "delete", "insert"
_KINDS = (MATCH, SUBSTITUTE, DELETE, INSERT)
_APOSTROPHES = {"'", "’"}


@dataclass(frozen=True)
class NormalizedText:
    tokens: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __str__(self) -> str:
        return " ".join(self.tokens)


@dataclass(frozen=True)
class AlignOp:
    kind: str
    ref_index: int | None
    hyp_index: int | None


@dataclass(frozen=True)
class Alignment:
    ops: tuple[AlignOp, ...]

    def count(self, kind: str) -> int:
        return sum(1 for op in self.ops if op.kind == kind)

    @property
    def cost(self) -> int:
        return sum(1 for op in self.ops if op.kind != MATCH)

    def pairs(self) -> list[tuple[int, int]]:
        """(ref_index, hyp_index) of every match or substitution."""
        return [
            (op.ref_index, op.hyp_index)
            for op in self.ops
            if op.kind in (MATCH, SUBSTITUTE)
        ]


def normalize_text(raw: str) -> NormalizedText:
    """Lowercase, drop Unicode punctuation (keeping intra-word apostrophes), split.

    >>> normalize_text("Hello, World!").tokens
    ('hello', 'world')
    >>> normalize_text("don't STOP").tokens
    ("don't", 'stop')
    """
    text = raw.lower()
    out = []
    last = len(text) - 1
    for k, ch in enumerate(text):
        if not unicodedata.category(ch).startswith("P"):
            out.append(ch)
        elif (
            ch in _APOSTROPHES
            and 0 < k < last
            and text[k - 1].isalnum()
            and text[k + 1].isalnum()
        ):
            out.append("'")
        else:
            out.append(" ")
    return NormalizedText(tuple("".join(out).split()))


def _as_tokens(x) -> Sequence[str]:
    if isinstance(x, NormalizedText):
        return x.tokens
    if isinstance(x, str):
        return normalize_text(x).tokens
    return x


def encode_pair(ref: Sequence, hyp: Sequence) -> tuple[list[int], list[int]]:
    """Map two token sequences onto a shared integer vocabulary."""
    vocab: dict = {}
    a = [vocab.setdefault(t, len(vocab)) for t in ref]
    b = [vocab.setdefault(t, len(vocab)) for t in hyp]
    return a, b


def edit_distance(ref, hyp) -> int:
    """Word-level Levenshtein distance between two token sequences."""
    a, b = encode_pair(_as_tokens(ref), _as_tokens(hyp))
    return _kernel.edit_distance(a, b)


def align(ref, hyp) -> Alignment:
    """Levenshtein-optimal alignment of ``ref`` against ``hyp``.

    Equal-cost choices resolve as match > substitute > delete > insert.
    """
    a, b = encode_pair(_as_tokens(ref), _as_tokens(hyp))
    ops = tuple(
        AlignOp(_KINDS[kind], None if i < 0 else i, None if j < 0 else j)
        for kind, i, j in _kernel.alignment_ops(a, b)
    )
    return Alignment(ops)


def wer(ref, hyp) -> float:
    """(S + D + I) / len(ref). Raises EmptyReference for an empty reference."""
    ref_tokens = _as_tokens(ref)
    if len(ref_tokens) == 0:
        raise EmptyReference("reference has no words")
    return edit_distance(ref_tokens, _as_tokens(hyp)) / len(ref_tokens)
