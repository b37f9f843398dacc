"""Compare the compiled and pure-Python alignment kernels.

    python benchmarks/bench_align.py [--sizes 100,500,2000] [--repeat 3]

Sequences are random integer tokens (alphabet 50) with ~10% edits, roughly
the shape of a noisy ASR segment or article.
"""
import argparse
import random
import time
from array import array

from coc_asr.align import _pykernel

try:
    from coc_asr.align import _kernel as _ckernel
except ImportError:
    _ckernel = None


def make_pair(n, rng):
    a = [rng.randrange(50) for _ in range(n)]
    b = [x if rng.random() > 0.1 else rng.randrange(50) for x in a]
    return array("i", a), array("i", b)


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--sizes", default="100,500,2000")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    rng = random.Random(0)
    print(f"{'tokens':>7} {'python s':>10} {'cython s':>10} {'speedup':>8}")
    for n in (int(s) for s in args.sizes.split(",")):
        a, b = make_pair(n, rng)
        py = best_of(lambda: _pykernel.backtrace(a, b), args.repeat)
        if _ckernel is None:
            print(f"{n:>7} {py:>10.4f} {'n/a':>10} {'':>8}")
            continue
        assert _ckernel.backtrace(a, b) == _pykernel.backtrace(a, b)
        cy = best_of(lambda: _ckernel.backtrace(a, b), args.repeat)
        print(f"{n:>7} {py:>10.4f} {cy:>10.4f} {py / cy:>7.0f}x")


if __name__ == "__main__":
    main()
