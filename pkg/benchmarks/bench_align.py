"""Compare the compiled and pure-Python edit-distance kernels.

    python3 benchmarks/bench_align.py [--lengths 10 50 200] [--repeat 5]

Prints the best-of-N time per call for each kernel and the speedup.
"""

from __future__ import annotations

import argparse
import random
import timeit

from audioeval.metrics import _align_py

try:
    from audioeval.metrics import _align_ext
except ImportError:
    _align_ext = None


def make_pair(rng: random.Random, length: int, vocab: int = 50) -> tuple[list[int], list[int]]:
    ref = [rng.randrange(vocab) for _ in range(length)]
    hyp = list(ref)
    # roughly 20% word errors
    for _ in range(length // 5):
        k = rng.randrange(len(hyp)) if hyp else 0
        op = rng.random()
        if op < 0.4 and hyp:
            hyp[k] = rng.randrange(vocab)
        elif op < 0.7 and hyp:
            del hyp[k]
        else:
            hyp.insert(k, rng.randrange(vocab))
    return ref, hyp


def time_call(fn, ref, hyp, repeat: int) -> float:
    timer = timeit.Timer(lambda: fn(ref, hyp))
    number, _ = timer.autorange()
    return min(timer.repeat(repeat, number)) / number


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--lengths", type=int, nargs="+", default=[10, 50, 200, 1000])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    if _align_ext is None:
        print("compiled extension not built; only the pure-Python kernel is timed")
    rng = random.Random(args.seed)
    print(f"{'words':>6} {'function':<14} {'distance':>9} {'python us':>11} {'cython us':>11} {'speedup':>8}")
    for length in args.lengths:
        ref, hyp = make_pair(rng, length)
        for name in ("edit_distance", "alignment_ops"):
            py_fn = getattr(_align_py, name)
            py_t = time_call(py_fn, ref, hyp, args.repeat)
            dist = _align_py.edit_distance(ref, hyp)
            if _align_ext is not None:
                ext_fn = getattr(_align_ext, name)
                assert list(ext_fn(ref, hyp)) == list(py_fn(ref, hyp)) if name == "alignment_ops" \
                    else ext_fn(ref, hyp) == dist
                ext_t = time_call(ext_fn, ref, hyp, args.repeat)
                print(f"{length:>6} {name:<14} {dist:>9} {py_t * 1e6:>11.1f} {ext_t * 1e6:>11.1f} "
                      f"{py_t / ext_t:>7.1f}x")
            else:
                print(f"{length:>6} {name:<14} {dist:>9} {py_t * 1e6:>11.1f} {'-':>11} {'-':>8}")


if __name__ == "__main__":
    main()
