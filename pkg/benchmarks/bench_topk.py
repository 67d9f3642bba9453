"""Benchmark the compiled cosine-scan kernel against the numpy fallback.

Usage: python benchmarks/bench_topk.py [--rows 20000] [--dim 64]
                                       [--queries 200] [--k 5]
"""
import argparse
import time

import numpy as np

from regqa.kernels import fallback
from regqa.sections import SectionId
from regqa.store import VectorTable, top_k

try:
    from regqa.kernels import _scan as compiled
except ImportError:
    compiled = None


def make_data(rows, dim, queries, seed=42):
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((rows, dim))
    matrix /= np.linalg.norm(matrix, axis=1, keepdims=True)
    matrix = np.ascontiguousarray(matrix)
    query_vectors = rng.standard_normal((queries, dim))
    query_vectors /= np.linalg.norm(query_vectors, axis=1, keepdims=True)
    return matrix, np.ascontiguousarray(query_vectors)


def bench_scan(scan, matrix, norms, queries):
    started = time.perf_counter()
    for query in queries:
        scan(matrix, norms, np.ascontiguousarray(query),
             float(np.linalg.norm(query)))
    return time.perf_counter() - started


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=20_000)
    parser.add_argument("--dim", type=int, default=64)
    parser.add_argument("--queries", type=int, default=200)
    parser.add_argument("--k", type=int, default=5)
    args = parser.parse_args()

    matrix, queries = make_data(args.rows, args.dim, args.queries)
    norms = np.linalg.norm(matrix, axis=1)

    backends = [("numpy-fallback", fallback.cosine_scan)]
    if compiled is not None:
        backends.insert(0, ("compiled", compiled.cosine_scan))
    else:
        print("compiled kernel not built; benchmarking fallback only")

    print(f"rows={args.rows} dim={args.dim} queries={args.queries}")
    results = {}
    for name, scan in backends:
        bench_scan(scan, matrix, norms, queries[:8])  # warm up
        elapsed = bench_scan(scan, matrix, norms, queries)
        rate = args.queries * args.rows / elapsed / 1e6
        results[name] = elapsed
        print(f"  {name:16s} {elapsed:8.3f}s total   "
              f"{elapsed / args.queries * 1e3:7.3f} ms/query   "
              f"{rate:8.1f} M row-scans/s")

    if compiled is not None:
        sample = queries[0]
        got = compiled.cosine_scan(matrix, norms, sample,
                                   float(np.linalg.norm(sample)))
        ref = fallback.cosine_scan(matrix, norms, sample,
                                   float(np.linalg.norm(sample)))
        print(f"  max |compiled - fallback| = {np.max(np.abs(got - ref)):.2e}")
        ratio = results["numpy-fallback"] / results["compiled"]
        print(f"  speedup (fallback / compiled) = {ratio:.2f}x")

    # end-to-end top_k through the table layer, current backend
    table = VectorTable(args.dim)
    for i in range(args.rows):
        table.add_row(i, matrix[i], {SectionId(900, i + 1)})
    top_k(table, queries[0], args.k, 0.5)  # build the cached matrix
    started = time.perf_counter()
    for query in queries:
        top_k(table, query, args.k, 0.5)
    elapsed = time.perf_counter() - started
    from regqa.kernels import backend_name
    print(f"  top_k({backend_name()})   {elapsed / args.queries * 1e3:7.3f} ms/query "
          f"(k={args.k}, min_sim=0.5)")


if __name__ == "__main__":
    main()
