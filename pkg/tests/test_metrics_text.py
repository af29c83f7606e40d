import os
import subprocess
import sys
import unicodedata

import pytest
from hypothesis import given
from hypothesis import strategies as st

from audioeval.errors import EmptyReference
from audioeval.metrics import text as text_mod
from audioeval.metrics.text import align, edit_distance, normalize_text, wer

from oracles import levenshtein, load_frozen, reference_alignment

words = st.lists(st.sampled_from(["a", "b", "c", "d"]), max_size=8)
KIND = {0: "match", 1: "substitute", 2: "delete", 3: "insert"}


@pytest.mark.parametrize(
    "raw, tokens",
    [
        ("Hello, World!", ["hello", "world"]),
        ("don't STOP", ["don't", "stop"]),
        ("", []),
        ("  spaced\tout\n", ["spaced", "out"]),
        ("'quoted' words", ["quoted", "words"]),
        ("it’s fine", ["it's", "fine"]),
        ("well-known", ["well", "known"]),
        ("...", []),
        ("Ünïcödé ÇAPS", ["ünïcödé", "çaps"]),
    ],
)
def test_normalize_examples(raw, tokens):
    assert list(normalize_text(raw).tokens) == tokens


@given(st.text(max_size=40))
def test_normalize_is_idempotent_and_clean(raw):
    once = normalize_text(raw)
    assert normalize_text(" ".join(once.tokens)) == once
    for tok in once.tokens:
        assert tok and tok == tok.lower()
        assert not all(unicodedata.category(ch).startswith("P") for ch in tok)


def test_align_examples():
    a = align(["a", "b", "c"], ["a", "b", "c"])
    assert a.count("match") == 3 and a.cost == 0
    a = align(["a", "b", "c", "d"], ["a", "x", "c"])
    assert [op.kind for op in a.ops] == ["match", "substitute", "match", "delete"]
    assert a.cost == 2
    a = align([], ["a"])
    assert [op.kind for op in a.ops] == ["insert"] and a.cost == 1


def test_wer_examples():
    assert wer("the cat sat", "the cat sat") == 0.0
    assert wer("the cat sat", "the cat sat on") == pytest.approx(1 / 3)
    assert wer("a b c d", "a x c") == 0.5
    with pytest.raises(EmptyReference):
        wer("", "anything")


def test_kernel_matches_frozen_oracle(kernel):
    for case in load_frozen()["levenshtein"]:
        ref = [ord(c) for c in case["ref"]]
        hyp = [ord(c) for c in case["hyp"]]
        assert kernel.edit_distance(ref, hyp) == case["distance"]


@given(words, words)
def test_kernels_agree(ref, hyp):
    from conftest import KERNELS

    r = [ord(c) for c in ref]
    h = [ord(c) for c in hyp]
    dists = {k.values[0].edit_distance(r, h) for k in KERNELS}
    ops = {tuple(map(tuple, k.values[0].alignment_ops(r, h))) for k in KERNELS}
    assert len(dists) == 1 and len(ops) == 1


@given(words, words)
def test_alignment_is_optimal_and_monotone(ref, hyp):
    a = align(ref, hyp)
    assert a.cost == edit_distance(ref, hyp) == levenshtein(ref, hyp)
    refs = [op.ref_index for op in a.ops if op.ref_index is not None]
    hyps = [op.hyp_index for op in a.ops if op.hyp_index is not None]
    assert refs == list(range(len(ref)))
    assert hyps == list(range(len(hyp)))
    for op in a.ops:
        if op.kind == "match":
            assert ref[op.ref_index] == hyp[op.hyp_index]
        if op.kind == "substitute":
            assert ref[op.ref_index] != hyp[op.hyp_index]


@given(words, words)
def test_alignment_tie_break_matches_reference_backtrace(ref, hyp):
    got = [(op.kind, -1 if op.ref_index is None else op.ref_index,
            -1 if op.hyp_index is None else op.hyp_index) for op in align(ref, hyp).ops]
    assert got == reference_alignment(ref, hyp)


@given(st.text(max_size=30))
def test_wer_identity(raw):
    if normalize_text(raw).tokens:
        assert wer(raw, raw) == 0.0
        assert wer(raw, " ".join(normalize_text(raw).tokens)) == 0.0


def test_backend_reported():
    assert text_mod.BACKEND in ("cython", "python")


def test_pure_python_fallback_selected_by_env():
    env = dict(os.environ, AUDIOEVAL_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from audioeval.metrics import text; print(text.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
