"""Time the compiled kernels against the numpy fallback.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--batch 2048]
"""

import argparse
import timeit

import numpy as np

from trihybrid import kernels


def cases(batch: int, rng):
    z = rng.uniform(-np.pi, np.pi, (batch, 64))
    d = rng.uniform(0.05, 0.95, (batch, 16))
    alpha = np.linspace(0.1, 2 * np.pi / 0.5 - 0.1, 512)
    return {
        "lorentzian_chain": lambda m: m.lorentzian_chain(z, 0.3, 16),
        "pinch_amplitudes": lambda m: m.pinch_amplitudes(d),
        "phi_sum": lambda m: m.phi_sum(alpha, 2 * np.pi, 0.01, 0.5, 0.01, 1024),
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--batch", type=int, default=2048)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    backends = kernels.available_backends()
    print(f"backends: {', '.join(backends)} (active: {kernels.BACKEND})")
    print(f"{'kernel':<18}" + "".join(f"{b:>12}" for b in backends) + f"{'speedup':>10}")
    for name, fn in cases(args.batch, rng).items():
        t = {}
        for b in backends:
            mod = kernels.get_backend(b)
            fn(mod)
            t[b] = min(timeit.repeat(lambda: fn(mod), number=1, repeat=args.repeat))
        ref = fn(kernels.get_backend("python"))
        for b in backends:
            out = fn(kernels.get_backend(b))
            a, r = (out[0], ref[0]) if isinstance(out, tuple) else (out, ref)
            assert np.allclose(a, r, rtol=1e-10, atol=1e-12), f"{name}: {b} disagrees with python"
        sp = t["python"] / t["cython"] if "cython" in t else float("nan")
        print(f"{name:<18}" + "".join(f"{t[b] * 1e3:>10.2f}ms" for b in backends) + f"{sp:>9.1f}x")


if __name__ == "__main__":
    main()
