"""Time each hot kernel under every available backend.

    python3 benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import timeit

import numpy as np

from headsmith import kernels


def cases():
    rng = np.random.default_rng(0)
    img = rng.integers(0, 256, (224, 224)).astype(np.uint8)
    imgf = img.astype(np.float64)
    k5 = rng.normal(size=(5, 5))
    yt = rng.integers(0, 5, 100_000)
    yp = rng.integers(0, 5, 100_000)
    idx = np.arange(100_000, dtype=np.int64)
    u = rng.random(100_000)
    buf = np.empty(100_000, dtype=np.uint64)
    return {
        "splitmix_fill 1e5": lambda: kernels.splitmix_fill(12345, buf),
        "fisher_yates 1e5": lambda: kernels.fisher_yates(idx.copy(), u),
        "histogram256 224x224": lambda: kernels.histogram256(img),
        "confusion_counts 1e5": lambda: kernels.confusion_counts(yt, yp, 5),
        "convolve2d 224x224 k5": lambda: kernels.convolve2d_valid(imgf, k5),
        "max_pool2d 224x224 2/2": lambda: kernels.max_pool2d(img, 2, 2),
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    args = parser.parse_args()
    backends = kernels.available_backends()
    timings = {}
    for backend in backends:
        kernels.use_backend(backend)
        for name, fn in cases().items():
            number = 3 if backend == "python" else 20
            best = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
            timings[name, backend] = best
    print(f"{'kernel':26s}" + "".join(f"{b:>14s}" for b in backends) + ("    speedup" if len(backends) > 1 else ""))
    for name in cases():
        row = f"{name:26s}" + "".join(f"{timings[name, b] * 1e3:11.3f} ms" for b in backends)
        if len(backends) > 1:
            row += f"  {timings[name, 'python'] / timings[name, 'compiled']:8.1f}x"
        print(row)


if __name__ == "__main__":
    main()
