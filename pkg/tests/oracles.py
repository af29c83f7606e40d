"""Independent reference implementations used to check the package.

Nothing here imports ``audioeval``. Running this file regenerates the frozen
expected values in ``tests/data/oracle_values.json``:

    python3 tests/oracles.py
"""

from __future__ import annotations

import itertools
import json
import random
import sys
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

FROZEN_PATH = Path(__file__).parent / "data" / "oracle_values.json"


# -- edit distance -----------------------------------------------------------


def levenshtein(a, b) -> int:
    """Plain recursive definition with memoization on suffix offsets."""
    a, b = tuple(a), tuple(b)

    @lru_cache(maxsize=None)
    def d(i: int, j: int) -> int:
        if i == len(a):
            return len(b) - j
        if j == len(b):
            return len(a) - i
        return min(
            d(i + 1, j + 1) + (a[i] != b[j]),
            d(i + 1, j) + 1,
            d(i, j + 1) + 1,
        )

    return d(0, 0)


class SuffixLevenshtein:
    """Recursive Levenshtein for one fixed reference against many hypotheses.

    Memoized on (reference offset, hypothesis suffix) so hypotheses sharing
    suffixes share work. Used for the exhaustive small-alphabet sweep.
    """

    def __init__(self, ref: str):
        self.ref = ref
        self.memo: dict[tuple[int, str], int] = {}

    def __call__(self, hyp: str, i: int = 0) -> int:
        key = (i, hyp)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        ref = self.ref
        if i == len(ref):
            val = len(hyp)
        elif not hyp:
            val = len(ref) - i
        else:
            val = min(
                self(hyp[1:], i + 1) + (ref[i] != hyp[0]),
                self(hyp, i + 1) + 1,
                self(hyp[1:], i) + 1,
            )
        self.memo[key] = val
        return val


def all_strings(alphabet: str, max_len: int) -> list[str]:
    return ["".join(p) for n in range(max_len + 1) for p in itertools.product(alphabet, repeat=n)]


def reference_alignment(ref, hyp) -> list[tuple[str, int, int]]:
    """Full-table DP with backtrace preferring match > substitute > delete > insert."""
    n, m = len(ref), len(hyp)
    t = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        t[i][0] = i
    for j in range(m + 1):
        t[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            t[i][j] = min(t[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]), t[i - 1][j] + 1, t[i][j - 1] + 1)
    ops = []
    i, j = n, m
    while i or j:
        if i and j and ref[i - 1] == hyp[j - 1] and t[i][j] == t[i - 1][j - 1]:
            ops.append(("match", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and j and t[i][j] == t[i - 1][j - 1] + 1:
            ops.append(("substitute", i - 1, j - 1))
            i, j = i - 1, j - 1
        elif i and t[i][j] == t[i - 1][j] + 1:
            ops.append(("delete", i - 1, -1))
            i -= 1
        else:
            ops.append(("insert", -1, j - 1))
            j -= 1
    return ops[::-1]


# -- diarization -------------------------------------------------------------


def group_by_speaker(words) -> dict[str, list[str]]:
    out: dict[str, list[str]] = {}
    for token, spk in words:
        out.setdefault(spk, []).append(token)
    return out


def cpwer_bruteforce(ref_words, hyp_words) -> Fraction:
    """Minimum over every pairing of (padded) speaker groups, exact arithmetic."""
    r, h = group_by_speaker(ref_words), group_by_speaker(hyp_words)
    k = max(len(r), len(h))
    rs = list(r.values()) + [[]] * (k - len(r))
    hs = list(h.values()) + [[]] * (k - len(h))
    dist = [[levenshtein(r_, h_) for h_ in hs] for r_ in rs]
    best = min(sum(dist[i][p[i]] for i in range(k)) for p in itertools.permutations(range(k)))
    return Fraction(best, len(ref_words))


def wder_bruteforce(ref_words, hyp_words) -> Fraction:
    """Minimum speaker-error fraction over aligned pairs, across every injective relabeling."""
    pairs = [
        (i, j)
        for kind, i, j in reference_alignment([w for w, _ in ref_words], [w for w, _ in hyp_words])
        if kind in ("match", "substitute")
    ]
    ref_spk = sorted({s for _, s in ref_words})
    hyp_spk = sorted({s for _, s in hyp_words})
    # Unmatched hypothesis speakers get a label that agrees with nothing.
    targets = ref_spk + [None] * max(0, len(hyp_spk) - len(ref_spk))
    best = None
    for perm in itertools.permutations(targets, len(hyp_spk)):
        mapping = dict(zip(hyp_spk, perm))
        wrong = sum(1 for i, j in pairs if mapping[hyp_words[j][1]] != ref_words[i][1])
        best = wrong if best is None else min(best, wrong)
    return Fraction(best, len(pairs))


# -- sharding ----------------------------------------------------------------


def hamilton(total: int, weights) -> list[int]:
    """Largest-remainder apportionment in integer arithmetic; ties go to the earlier index."""
    s = sum(weights)
    base = [total * w // s for w in weights]
    rema = [total * w % s for w in weights]
    left = total - sum(base)
    for idx in sorted(range(len(weights)), key=lambda k: (-rema[k], k))[:left]:
        base[idx] += 1
    return base


# -- frozen values -----------------------------------------------------------


def random_tagged(rng: random.Random, max_speakers: int, max_words: int, vocab="abcdef"):
    n_spk = rng.randint(1, max_speakers)
    labels = [f"S{k}" for k in range(n_spk)]
    words = []
    for lab in labels:
        words += [(rng.choice(vocab), lab) for _ in range(rng.randint(1, max_words))]
    rng.shuffle(words)
    return words


def compute_frozen() -> dict:
    rng = random.Random(20240607)
    lev_cases = []
    for _ in range(200):
        a = [rng.choice("abcd") for _ in range(rng.randint(0, 9))]
        b = [rng.choice("abcd") for _ in range(rng.randint(0, 9))]
        lev_cases.append({"ref": a, "hyp": b, "distance": levenshtein(a, b)})
    cp_cases = []
    for _ in range(120):
        ref = random_tagged(rng, 4, 5)
        hyp = random_tagged(rng, 4, 5)
        v = cpwer_bruteforce(ref, hyp)
        cp_cases.append({"ref": ref, "hyp": hyp, "num": v.numerator, "den": v.denominator})
    wd_cases = []
    while len(wd_cases) < 120:
        ref = random_tagged(rng, 3, 4, "abc")
        hyp = random_tagged(rng, 3, 4, "abc")
        pairs = [op for op in reference_alignment([w for w, _ in ref], [w for w, _ in hyp])
                 if op[0] in ("match", "substitute")]
        if not pairs:
            continue
        v = wder_bruteforce(ref, hyp)
        wd_cases.append({"ref": ref, "hyp": hyp, "num": v.numerator, "den": v.denominator})
    ap_cases = []
    for _ in range(200):
        caps = [rng.randint(1, 20) for _ in range(rng.randint(1, 6))]
        n = rng.randint(0, 500)
        ap_cases.append({"total": n, "capacities": caps, "sizes": hamilton(n, caps)})
    return {"levenshtein": lev_cases, "cpwer": cp_cases, "wder": wd_cases, "apportion": ap_cases}


def load_frozen() -> dict:
    return json.loads(FROZEN_PATH.read_text(encoding="utf-8"))


if __name__ == "__main__":
    FROZEN_PATH.parent.mkdir(parents=True, exist_ok=True)
    FROZEN_PATH.write_text(json.dumps(compute_frozen(), indent=1) + "\n", encoding="utf-8")
    print(f"wrote {FROZEN_PATH}", file=sys.stderr)
