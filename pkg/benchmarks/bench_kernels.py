"""Time the compiled kernels against the numpy fallback.

Run ``python benchmarks/bench_kernels.py``; each row gives the best of
``--repeat`` runs per backend and the speed-up.  The two backends are also
checked for agreement on every case.
"""
import argparse
import time

import numpy as np

from roughsplit import kernels


def _cases(rng):
    x = np.cumsum(rng.standard_normal((1500, 2)), axis=0)
    yield "pvar_dp N=1500 d=2 p=2.5", lambda k: k.pvar_dp(x, 2.5)

    n, m = 512, 2
    u = rng.standard_normal(n)
    c = np.full((m, n), 0.25)
    c0 = np.full((m, n), 0.5)
    src = np.zeros((m, n))
    yield ("hjb_substeps N=512 K=2 steps=2000",
           lambda k: k.hjb_substeps(u, c0, c, c, src, 2000, True, True))

    e, d, steps = 3, 2, 20000
    a = 0.1 * rng.standard_normal((e, e))
    b = 0.1 * rng.standard_normal((d, e, e))
    dz = 0.01 * rng.standard_normal((steps, d))
    lvl2 = 0.5 * np.einsum("ni,nj->nij", dz, dz)
    y0 = np.ones(e)
    yield ("davie_affine e=3 d=2 steps=20000",
           lambda k: k.davie_affine(y0, a, np.zeros(e), np.full(steps, 1e-4), b,
                                    np.zeros((d, e)), dz, lvl2, 1e12)[0])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    backends = kernels.backends()
    if "cython" not in backends:
        print("compiled extension not built; only the fallback is available")
    print(f"{'case':40s} " + " ".join(f"{b:>10s}" for b in backends) + "   speed-up  max|diff|")
    for name, fn in _cases(np.random.default_rng(0)):
        times, outs = {}, {}
        for b, mod in backends.items():
            best = np.inf
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                outs[b] = np.asarray(fn(mod))
                best = min(best, time.perf_counter() - t0)
            times[b] = best
        speed = times["python"] / times["cython"] if "cython" in times else float("nan")
        diff = (float(np.max(np.abs(outs["python"] - outs["cython"])))
                if "cython" in outs else float("nan"))
        print(f"{name:40s} " + " ".join(f"{times[b]:10.4f}" for b in backends)
              + f"   {speed:8.1f}x  {diff:.2e}")


if __name__ == "__main__":
    main()
