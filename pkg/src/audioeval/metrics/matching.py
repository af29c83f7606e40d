"""Exact-match scoring of structured outputs (SQL, function calls, labels)."""

VERBATIM = "verbatim"
WHITESPACE_CASE_FOLD = "whitespace_case_fold"


def canonicalize(text: str, canonicalizer: str = VERBATIM) -> str:
    if canonicalizer == VERBATIM:
        return text
    if canonicalizer == WHITESPACE_CASE_FOLD:
        return " ".join(text.split()).casefold()
    raise ValueError(f"unknown canonicalizer {canonicalizer!r}")


def structured_match_score(ref: str, hyp: str, canonicalizer: str = VERBATIM) -> int:
    return int(canonicalize(ref, canonicalizer) == canonicalize(hyp, canonicalizer))
