"""LLM-as-judge scoring through the regular client and permit discipline."""

from __future__ import annotations

import re
from importlib import resources

from ..client import ChatMessage, build_request, send_request
from ..config import EffectiveSettings, JudgeSpec
from ..errors import JudgeParseError
from ..scheduler import PermitPool, RetryPolicy, execute_with_retry

TEMPLATE_VERSION = "v1"

_BINARY = re.compile(r"(?:^|\s)([01])\s*\.?\s*$")
_RATING = re.compile(r"^\s*rating\s*:\s*\**\s*([0-5])\s*\**\s*\.?\s*$", re.IGNORECASE)


def load_template(mode: str, version: str = TEMPLATE_VERSION) -> str:
    return resources.files(__package__).joinpath(f"templates/judge_{mode}_{version}.txt").read_text("utf-8")


def render_judge_prompt(mode: str, question: str, reference: str, hypothesis: str) -> str:
    # str.replace rather than str.format: answers routinely contain braces.
    text = load_template(mode)
    for key, value in (("question", question), ("reference", reference), ("hypothesis", hypothesis)):
        text = text.replace("{" + key + "}", value)
    return text


def parse_verdict(reply: str, mode: str) -> float:
    """Binary: trailing 0/1 -> 0 or 100. Detailed: final ``Rating: k`` -> 20k."""
    if mode == "binary":
        m = _BINARY.search(reply.strip())
        if not m:
            raise JudgeParseError(f"no final 0/1 verdict in {reply[-80:]!r}")
        return 100.0 * int(m.group(1))
    if mode == "detailed":
        lines = [ln for ln in reply.strip().splitlines() if ln.strip()]
        m = _RATING.match(lines[-1]) if lines else None
        if not m:
            raise JudgeParseError(f"no final 'Rating: <0-5>' line in {reply[-80:]!r}")
        return 20.0 * int(m.group(1))
    raise ValueError(f"unknown judge mode {mode!r}")


class Judge:
    """Holds the judge's sub-limit pool so concurrent scoring calls share it."""

    def __init__(self, spec: JudgeSpec, sender=send_request, pool: PermitPool | None = None):
        self.spec = spec
        self.sender = sender
        self.pools = [PermitPool(spec.judge_concurrency, name="judge"),
                      PermitPool(spec.endpoint.capacity, name=f"endpoint:{spec.endpoint.name}")]
        if pool is not None:
            self.pools.append(pool)

    def score(self, question: str, reference: str, hypothesis: str, mode: str | None = None) -> float:
        mode = mode or self.spec.judge_mode
        ep = self.spec.endpoint
        prompt = render_judge_prompt(mode, question, reference, hypothesis)
        settings = EffectiveSettings(
            temperature=ep.temperature if ep.temperature is not None else 0.0,
            max_tokens=ep.max_tokens or 512,
            timeout_s=ep.timeout_s,
            retry_limit=ep.retry_limit,
            audio_chunk_s=None,
        )
        request = build_request(ChatMessage.text_message("user", prompt), [], settings, ep.model_id)
        outcome = execute_with_retry(
            lambda: self.sender(ep, request, settings.timeout_s),
            RetryPolicy(settings.retry_limit, settings.timeout_s),
            self.pools,
        )
        return parse_verdict(outcome.response.text, mode)


def llm_judge_score(question: str, reference: str, hypothesis: str, judge: JudgeSpec,
                    sender=send_request, mode: str | None = None) -> float:
    return Judge(judge, sender).score(question, reference, hypothesis, mode)
