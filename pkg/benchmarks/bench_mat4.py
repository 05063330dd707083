"""Compare the compiled and pure-Python 4x4 kernels.

Times the raw operations and the globalize pass that dominates pipeline
runs on large plants.  Usage: python benchmarks/bench_mat4.py [nodes]
"""

import random
import sys
import time

from fspm_bridge import _mat4_py

try:
    from fspm_bridge import _mat4
except ImportError:
    _mat4 = None
    print("note: compiled kernel not built, timing pure Python only\n")

from fspm_bridge.geometry import Rotate, Scale, Translate, compose_transforms
from fspm_bridge.graph import EdgeType, ExchangeGraph, GraphEdge, GraphNode


def random_matrix(rng):
    return compose_transforms([
        Rotate((rng.random(), rng.random(), 1.0), rng.uniform(0, 360)),
        Translate((rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2))),
        Scale((rng.uniform(0.8, 1.2),) * 3),
    ])


def bench(label, fn, repeats=5):
    timings = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        timings.append(time.perf_counter() - t0)
    print(f"{label:48s} {min(timings) * 1e3:9.2f} ms")
    return min(timings)


def chain_graph(n, rng):
    nodes = [GraphNode(1, "root", "N", 0, local_transform=random_matrix(rng))]
    edges = []
    for i in range(2, n + 1):
        parent = rng.randint(max(1, i - 5), i - 1)
        nodes.append(GraphNode(i, f"n{i}", "N", 0, local_transform=random_matrix(rng)))
        edges.append(GraphEdge(parent, i, EdgeType.BRANCH))
    return ExchangeGraph(1, nodes, edges)


def main():
    n = int(sys.argv[1]) if len(sys.argv) > 1 else 20_000
    rng = random.Random(0)
    mats = [random_matrix(rng) for _ in range(2000)]
    impls = [("python", _mat4_py)] + ([("cython", _mat4)] if _mat4 else [])

    print(f"== raw kernels (2000 matrices, {len(mats)} ops per pass) ==")
    results = {}
    for name, impl in impls:
        def mul_pass(impl=impl):
            acc = impl.identity()
            for m in mats:
                acc = impl.multiply(m, acc)
            return acc

        def inv_pass(impl=impl):
            for m in mats:
                impl.invert_affine(m)

        results[name, "multiply"] = bench(f"{name}: chained multiply", mul_pass)
        results[name, "invert"] = bench(f"{name}: invert_affine", inv_pass)

    print(f"\n== globalize over a {n}-node plant ==")
    import fspm_bridge.mat4 as facade
    from fspm_bridge import geometry
    g = chain_graph(n, rng)
    for name, impl in impls:
        for attr in ("multiply", "invert_affine", "compose", "identity",
                     "translation", "scaling", "rotation", "transform_point",
                     "is_affine"):
            setattr(facade, attr, getattr(impl, attr))
        geometry.mat4 = facade
        results[name, "globalize"] = bench(f"{name}: globalize", lambda: geometry.globalize(g))

    if _mat4:
        print("\n== speedups (pure / compiled) ==")
        for op in ("multiply", "invert", "globalize"):
            ratio = results["python", op] / results["cython", op]
            print(f"{op:48s} {ratio:8.1f}x")


if __name__ == "__main__":
    main()
