"""Speaker-tagged transcripts and the word-level diarization metrics WDER and cpWER.

Transcripts carry inline speaker tags::

    transcript := segment*
    segment    := [tag] word*
    tag        := "<spk:" LABEL ">"
    LABEL      := one or more characters other than ">" and whitespace

Words before the first tag belong to speaker ``spk0``. Words are passed
through :func:`normalize_text` after the tags are removed.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy.optimize import linear_sum_assignment

from ..errors import EmptyReference, NoAlignedPairs
from .text import align, edit_distance, normalize_text

DEFAULT_SPEAKER = "spk0"
EXHAUSTIVE_MAX_SPEAKERS = 8

_TAG = re.compile(r"<spk:([^>\s]+)>")


@dataclass(frozen=True)
class TaggedWord:
    token: str
    speaker: str


@dataclass(frozen=True)
class SpeakerTaggedTranscript:
    words: tuple[TaggedWord, ...]

    @classmethod
    def from_pairs(cls, pairs) -> "SpeakerTaggedTranscript":
        return cls(tuple(TaggedWord(t, s) for t, s in pairs))

    @property
    def tokens(self) -> list[str]:
        return [w.token for w in self.words]

    @property
    def speakers(self) -> list[str]:
        """Distinct labels in order of first appearance."""
        return list(dict.fromkeys(w.speaker for w in self.words))

    def by_speaker(self) -> dict[str, list[str]]:
        groups: dict[str, list[str]] = {}
        for w in self.words:
            groups.setdefault(w.speaker, []).append(w.token)
        return groups

    def relabel(self, mapping: Mapping[str, str]) -> "SpeakerTaggedTranscript":
        return SpeakerTaggedTranscript(
            tuple(TaggedWord(w.token, mapping.get(w.speaker, w.speaker)) for w in self.words)
        )


def parse_tagged(text: str) -> SpeakerTaggedTranscript:
    words = []
    speaker = DEFAULT_SPEAKER
    pos = 0
    for m in _TAG.finditer(text):
        words.extend(TaggedWord(t, speaker) for t in normalize_text(text[pos:m.start()]).tokens)
        speaker = m.group(1)
        pos = m.end()
    words.extend(TaggedWord(t, speaker) for t in normalize_text(text[pos:]).tokens)
    return SpeakerTaggedTranscript(tuple(words))


def serialize_tagged(transcript: SpeakerTaggedTranscript) -> str:
    parts = []
    current = None
    for w in transcript.words:
        if w.speaker != current:
            parts.append(f"<spk:{w.speaker}>")
            current = w.speaker
        parts.append(w.token)
    return " ".join(parts)


def _as_transcript(x) -> SpeakerTaggedTranscript:
    return parse_tagged(x) if isinstance(x, str) else x


def _best_bijection(gain: np.ndarray, method: str = "auto") -> list[tuple[int, int]]:
    """Row/column pairs of a square ``gain`` matrix maximizing the total gain."""
    k = gain.shape[0]
    if method == "auto":
        method = "exhaustive" if k <= EXHAUSTIVE_MAX_SPEAKERS else "assignment"
    if method == "assignment":
        rows, cols = linear_sum_assignment(gain, maximize=True)
        return list(zip(rows.tolist(), cols.tolist()))
    if method != "exhaustive":
        raise ValueError(f"unknown method {method!r}")
    best, best_perm = None, None
    for perm in itertools.permutations(range(k)):
        total = sum(gain[r, c] for r, c in enumerate(perm))
        if best is None or total > best:
            best, best_perm = total, perm
    return list(enumerate(best_perm or ()))


def best_speaker_map(ref, hyp, method: str = "auto") -> dict[str, str]:
    """Hypothesis-to-reference label bijection maximizing agreeing aligned pairs.

    Hypothesis labels left without a reference partner are omitted, so their
    words always count as speaker errors.
    """
    ref, hyp = _as_transcript(ref), _as_transcript(hyp)
    pairs = align(ref.tokens, hyp.tokens).pairs()
    return _speaker_map_from_pairs(ref, hyp, pairs, method)


def _speaker_map_from_pairs(ref, hyp, pairs, method) -> dict[str, str]:
    ref_labels, hyp_labels = ref.speakers, hyp.speakers
    k = max(len(ref_labels), len(hyp_labels))
    gain = np.zeros((k, k))
    r_idx = {s: i for i, s in enumerate(ref_labels)}
    h_idx = {s: i for i, s in enumerate(hyp_labels)}
    for ri, hi in pairs:
        gain[h_idx[hyp.words[hi].speaker], r_idx[ref.words[ri].speaker]] += 1
    mapping = {}
    for h, r in _best_bijection(gain, method):
        if h < len(hyp_labels) and r < len(ref_labels):
            mapping[hyp_labels[h]] = ref_labels[r]
    return mapping


def wder(ref, hyp, speaker_map: Mapping[str, str] | None = None, method: str = "auto") -> float:
    """Word diarization error rate over speaker-blind aligned word pairs.

    Only matches and substitutions count; insertions and deletions are
    ignored. When ``speaker_map`` is omitted the best bijection is used.
    """
    ref, hyp = _as_transcript(ref), _as_transcript(hyp)
    if not ref.words or not hyp.words:
        raise NoAlignedPairs("empty transcript")
    pairs = align(ref.tokens, hyp.tokens).pairs()
    if not pairs:
        raise NoAlignedPairs("hypothesis shares no aligned words with reference")
    if speaker_map is None:
        speaker_map = _speaker_map_from_pairs(ref, hyp, pairs, method)
    wrong = sum(
        1
        for ri, hi in pairs
        if speaker_map.get(hyp.words[hi].speaker) != ref.words[ri].speaker
    )
    return wrong / len(pairs)


def cpwer_cost_matrix(ref, hyp) -> tuple[np.ndarray, list[str], list[str]]:
    """Square matrix of per-speaker word edit distances, padded with empty speakers.

    Rows are reference speakers and columns hypothesis speakers.
    """
    ref_groups = _as_transcript(ref).by_speaker()
    hyp_groups = _as_transcript(hyp).by_speaker()
    ref_labels, hyp_labels = list(ref_groups), list(hyp_groups)
    k = max(len(ref_labels), len(hyp_labels))
    ref_seqs = [ref_groups[s] for s in ref_labels] + [[]] * (k - len(ref_labels))
    hyp_seqs = [hyp_groups[s] for s in hyp_labels] + [[]] * (k - len(hyp_labels))
    cost = np.array(
        [[edit_distance(r, h) for h in hyp_seqs] for r in ref_seqs], dtype=float
    ).reshape(k, k)
    return cost, ref_labels, hyp_labels


def cpwer(ref, hyp, method: str = "auto") -> float:
    """Concatenated minimum-permutation WER.

    ``method`` is ``"exhaustive"``, ``"assignment"`` or ``"auto"`` (exhaustive
    up to 8 speakers, assignment solver beyond).
    """
    ref = _as_transcript(ref)
    if not ref.words:
        raise EmptyReference("reference has no words")
    cost, _, _ = cpwer_cost_matrix(ref, hyp)
    pairs = _best_bijection(-cost, method)
    errors = sum(cost[r, c] for r, c in pairs)
    return float(errors) / len(ref.words)
