"""Time the compiled kernels against their pure-Python twins.

    python benchmarks/bench_kernels.py [--nodes 125] [--repeat 5]

Also times one full 900 s run per backend in a subprocess, since the
backend is fixed at import.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from prpsim.kernels import backends

RUN_SNIPPET = (
    "import time; from prpsim import ScenarioConfig, simulate; t=time.perf_counter(); "
    "simulate(ScenarioConfig(node_count={n}, protocol='{p}')); print(time.perf_counter()-t)"
)


def kernel_cases(n, rng):
    x = rng.uniform(0, 350, n)
    y = rng.uniform(0, 350, n)
    heard = rng.uniform(-1, 1, n)
    dist = rng.uniform(0, 100, n)
    recv = np.sort(rng.choice(n, size=min(n, 30), replace=False)).astype(np.int32)
    mask = bytearray((rng.random(n) < 0.2).astype(np.uint8).tobytes())

    def cases(k):
        adj = k.adjacency(x, y, 100.0)
        return {
            "adjacency": lambda: k.adjacency(x, y, 100.0),
            "neighbor_lists": lambda: k.neighbor_lists(adj),
            "neighbor_order": lambda: k.neighbor_order(heard, dist, 1.0, 2.0, 0),
            "rreq_fanout": lambda: k.rreq_fanout(recv, n - 1, bytearray(n), bytearray(n),
                                                 mask, False),
        }
    return cases


def full_run(n, protocol, pure):
    env = dict(os.environ)
    env.pop("PRPSIM_PURE_PYTHON", None)
    if pure:
        env["PRPSIM_PURE_PYTHON"] = "1"
    out = subprocess.run([sys.executable, "-c", RUN_SNIPPET.format(n=n, p=protocol)],
                         capture_output=True, text=True, env=env, check=True)
    return float(out.stdout)


def main():
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--nodes", type=int, default=125)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--skip-runs", action="store_true", help="kernels only")
    args = ap.parse_args()

    found = backends()
    if "compiled" not in found:
        print("compiled extension not built; only the python backend is available")
    cases = kernel_cases(args.nodes, np.random.default_rng(0))
    print(f"{'kernel':<16}" + "".join(f"{name:>14}" for name in found) + f"{'speedup':>10}")
    for kernel in cases(found["python"]):
        times = {}
        for name, mod in found.items():
            fn = cases(mod)[kernel]
            number = 200
            times[name] = min(timeit.repeat(fn, number=number, repeat=args.repeat)) / number
        row = f"{kernel:<16}" + "".join(f"{times[n] * 1e6:>11.1f} us" for n in found)
        if "compiled" in times:
            row += f"{times['python'] / times['compiled']:>9.1f}x"
        print(row)

    if args.skip_runs:
        return
    print(f"\nfull 900 s run, {args.nodes} nodes")
    for protocol in ("PRP", "Flood"):
        py = full_run(args.nodes, protocol, pure=True)
        line = f"  {protocol:<6} python {py:6.2f} s"
        if "compiled" in found:
            c = full_run(args.nodes, protocol, pure=False)
            line += f"   compiled {c:6.2f} s   speedup {py / c:.2f}x"
        print(line)


if __name__ == "__main__":
    main()
