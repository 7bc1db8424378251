"""Compare the compiled RVL kernel against the pure-Python fallback.

    python3 benchmarks/bench_rvl.py --frames 20 --width 640 --height 360
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from fleetsim.codecs import _rvl_py, rvl

try:
    from fleetsim.codecs import _rvl_ext
except ImportError:
    _rvl_ext = None


def time_kernel(kernel, frames, repeat: int) -> tuple[float, float]:
    best_enc = best_dec = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        blobs = [rvl.rvl_compress(f, kernel=kernel) for f in frames]
        t1 = time.perf_counter()
        for blob, f in zip(blobs, frames):
            if rvl.rvl_decompress(blob, kernel=kernel) != f:
                raise AssertionError("round trip mismatch")
        t2 = time.perf_counter()
        best_enc = min(best_enc, (t1 - t0) / len(frames))
        best_dec = min(best_dec, (t2 - t1) / len(frames))
    return best_enc, best_dec


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--frames", type=int, default=10)
    ap.add_argument("--width", type=int, default=640)
    ap.add_argument("--height", type=int, default=360)
    ap.add_argument("--zero-fraction", type=float, default=0.1)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    frames = [rvl.synthetic_depth(args.width, args.height, rng, args.zero_fraction) for _ in range(args.frames)]
    ratio = np.mean([len(rvl.rvl_compress(f).data) / f.raw_size for f in frames])
    print(f"{args.frames} frames {args.width}x{args.height}, zero fraction {args.zero_fraction}, "
          f"compressed/raw {ratio:.3f}")

    kernels = [("python", _rvl_py)]
    if _rvl_ext is not None:
        kernels.insert(0, ("cython", _rvl_ext))
    else:
        print("compiled kernel not built; showing the fallback only")
    results = {}
    for name, kernel in kernels:
        # the fallback is slow, one pass over a few frames is enough
        subset = frames if kernel is not _rvl_py else frames[: max(1, min(3, len(frames)))]
        enc, dec = time_kernel(kernel, subset, args.repeat if kernel is not _rvl_py else 1)
        results[name] = enc + dec
        print(f"{name:7s} encode {enc * 1e3:9.2f} ms/frame  decode {dec * 1e3:9.2f} ms/frame")
    if len(results) == 2:
        print(f"speedup {results['python'] / results['cython']:.0f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
