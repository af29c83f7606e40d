"""Scoring: word alignment, WER, diarization metrics, matching, judges, efficiency."""

from .diarization import (
    SpeakerTaggedTranscript,
    TaggedWord,
    best_speaker_map,
    cpwer,
    parse_tagged,
    serialize_tagged,
    wder,
)
from .efficiency import EfficiencyRecord, rtf, samples_per_second, scenario_runtimes
from .matching import structured_match_score
from .registry import METRIC_NAMES, METRICS
from .text import BACKEND, Alignment, NormalizedText, align, edit_distance, normalize_text, wer

__all__ = [
    "BACKEND",
    "Alignment",
    "EfficiencyRecord",
    "METRICS",
    "METRIC_NAMES",
    "NormalizedText",
    "SpeakerTaggedTranscript",
    "TaggedWord",
    "align",
    "best_speaker_map",
    "cpwer",
    "edit_distance",
    "normalize_text",
    "parse_tagged",
    "rtf",
    "samples_per_second",
    "scenario_runtimes",
    "serialize_tagged",
    "structured_match_score",
    "wder",
    "wer",
]
