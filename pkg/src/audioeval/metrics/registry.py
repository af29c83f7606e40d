"""Registered metric identifiers and the per-sample scoring dispatch."""

from __future__ import annotations

from dataclasses import dataclass

from .diarization import cpwer, parse_tagged, wder
from .matching import VERBATIM, WHITESPACE_CASE_FOLD, structured_match_score
from .text import wer

FRACTION, PERCENT = "fraction", "percent"


@dataclass(frozen=True)
class MetricDef:
    name: str
    reference_kinds: frozenset[str]
    scale: str
    judge_mode: str | None = None  # "task" means: use the task's configured mode


_ANY = frozenset({"plain_text", "speaker_tagged", "structured"})

METRICS: dict[str, MetricDef] = {
    m.name: m
    for m in (
        MetricDef("wer", frozenset({"plain_text", "speaker_tagged"}), FRACTION),
        MetricDef("wder", frozenset({"speaker_tagged"}), FRACTION),
        MetricDef("cpwer", frozenset({"speaker_tagged"}), FRACTION),
        MetricDef("structured_match", _ANY, FRACTION),
        MetricDef("structured_match_fold", _ANY, FRACTION),
        MetricDef("llm_judge", _ANY, PERCENT, judge_mode="task"),
        MetricDef("llm_judge_binary", _ANY, PERCENT, judge_mode="binary"),
        MetricDef("llm_judge_detailed", _ANY, PERCENT, judge_mode="detailed"),
    )
}
METRIC_NAMES = frozenset(METRICS)
JUDGE_METRICS = frozenset(n for n, m in METRICS.items() if m.judge_mode)


def reported_name(metric_name: str, task_judge_mode: str | None = None) -> str:
    if metric_name == "llm_judge" and task_judge_mode:
        return f"llm_judge_{task_judge_mode}"
    return metric_name


def _plain(kind: str, text: str) -> str:
    if kind == "speaker_tagged":
        return " ".join(parse_tagged(text).tokens)
    return text


def score_text_metric(metric_name: str, reference_kind: str, reference: str, hypothesis: str) -> float:
    """Score one non-judge metric. Metric errors (EmptyReference, ...) propagate."""
    if metric_name == "wer":
        return wer(_plain(reference_kind, reference), _plain(reference_kind, hypothesis))
    if metric_name == "wder":
        return wder(reference, hypothesis)
    if metric_name == "cpwer":
        return cpwer(reference, hypothesis)
    if metric_name == "structured_match":
        return float(structured_match_score(reference, hypothesis, VERBATIM))
    if metric_name == "structured_match_fold":
        return float(structured_match_score(reference, hypothesis, WHITESPACE_CASE_FOLD))
    raise KeyError(metric_name)
