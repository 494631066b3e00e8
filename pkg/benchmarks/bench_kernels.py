"""Compare the compiled and pure-Python kernels on allocator-shaped workloads.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import random
import time

from wmrecon.kernels import available_backends


def freelist_workload(mod, ops=20000, seed=7):
    rng = random.Random(seed)
    fl = mod.FreeList(16)
    fl.add(0x00600000, 0x3FA00000)
    live = []
    for _ in range(ops):
        if live and rng.random() < 0.45:
            addr, size = live.pop(rng.randrange(len(live)))
            fl.release(addr, size)
        else:
            size = rng.choice((0x58, 0x58, 0x200, 0x1D800, 0x7FFC0))
            addr = fl.alloc(size)
            live.append((addr, size))
    return len(fl)


def scan_workload(mod, n=200000, seed=11):
    rng = random.Random(seed)
    sys_b, cus, pcs, sps = [0], [0], [0x00401000], [0x0012FF80]
    for _ in range(n):
        r = rng.random()
        sys_b.append(max(0, sys_b[-1] + rng.choice((-0x1D800, 0x1D800, 0)) if r < 0.9 else sys_b[-1]))
        cus.append(cus[-1] + (0x58 if r > 0.95 else 0))
        pcs.append(rng.choice((0x00401234, 0x0c0d0c0d)) if r > 0.99 else pcs[-1])
        sps.append(0x046ae04c if r > 0.995 else sps[-1])
    code = [(0x00401000, 0x00500000)]
    stack = [(0x0012F000, 0x00130000)]
    return len(mod.scan_transitions(sys_b, cus, pcs, sps, code, stack, False))


def timed(fn, mod, repeat):
    best = float("inf")
    result = None
    for _ in range(repeat):
        t = time.perf_counter()
        result = fn(mod)
        best = min(best, time.perf_counter() - t)
    return best, result


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()
    backends = available_backends()
    if "cython" not in backends:
        print("compiled extension not built; only the Python backend is available")
    print(f"{'workload':<12} {'backend':<8} {'best s':>9} {'result':>8}")
    for name, fn in (("freelist", freelist_workload), ("scan", scan_workload)):
        times = {}
        results = set()
        for backend, mod in backends.items():
            t, res = timed(fn, mod, args.repeat)
            times[backend] = t
            results.add(res)
            print(f"{name:<12} {backend:<8} {t:>9.4f} {res:>8}")
        if len(results) != 1:
            raise SystemExit(f"backends disagree on {name}: {results}")
        if "cython" in times:
            print(f"{name:<12} speedup  {times['python'] / times['cython']:>8.1f}x")


if __name__ == "__main__":
    main()
