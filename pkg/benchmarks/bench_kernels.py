"""Time the numba kernels against their numpy fallbacks.

Each backend runs in its own interpreter (the switch is read at import), so
this script re-invokes itself with and without SOCIALMEM_DISABLE_NUMBA.

    python3 benchmarks/bench_kernels.py [--n-vectors 2000] [--dim 64]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time


def _time(fn, repeat=3):
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best * 1000.0, out


def worker(n_vectors: int, dim: int, queries: int) -> dict:
    import hashlib

    import numpy as np

    from socialmem import backend
    from socialmem.hnsw import HNSWGraph
    from socialmem.kernels import cosine_scores, edit_distance, top_k

    rng = np.random.default_rng(7)
    words = ["".join(rng.choice(list("abcdefghij"), size=rng.integers(3, 12))) for _ in range(400)]
    pairs = [(words[i], words[(i * 7 + 3) % len(words)]) for i in range(len(words))]
    vecs = rng.standard_normal((n_vectors, dim))
    vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
    qs = rng.standard_normal((queries, dim))
    qs /= np.linalg.norm(qs, axis=1, keepdims=True)
    ids = np.arange(n_vectors, dtype=np.int64)

    edit_distance("warm", "up")
    cosine_scores(vecs[:2], qs[0])
    res = {"backend": backend()}
    res["edit_distance_ms"], d = _time(lambda: [edit_distance(a, b) for a, b in pairs])
    res["edit_checksum"] = int(sum(d))
    res["cosine_topk_ms"], hits = _time(
        lambda: [top_k(cosine_scores(vecs, q), ids, 20)[0].tolist() for q in qs])
    res["cosine_checksum"] = hashlib.sha1(json.dumps(hits).encode()).hexdigest()[:12]

    def build():
        g = HNSWGraph(dim, seed=1)
        for v in vecs:
            g.add(v)
        return g

    # warm the jit on a tiny graph so compile time is not billed to the build
    w = HNSWGraph(dim, seed=1)
    for v in vecs[:40]:
        w.add(v)
    w.search(qs[0], 20)
    res["hnsw_build_ms"], g = _time(build, repeat=1)
    res["hnsw_search_ms"], found = _time(lambda: [g.search(q, 100)[0][:20].tolist() for q in qs])
    exact = [set(h) for h in hits]
    res["hnsw_recall@20"] = float(np.mean([len(exact[i] & set(found[i])) / 20 for i in range(queries)]))
    return res


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n-vectors", type=int, default=2000)
    ap.add_argument("--dim", type=int, default=64)
    ap.add_argument("--queries", type=int, default=50)
    ap.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    ap.add_argument("--json", action="store_true", help="print raw JSON results")
    args = ap.parse_args()
    if args.worker:
        print(json.dumps(worker(args.n_vectors, args.dim, args.queries)))
        return 0

    results = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, SOCIALMEM_DISABLE_NUMBA=flag)
        cmd = [sys.executable, __file__, "--worker", "--n-vectors", str(args.n_vectors),
               "--dim", str(args.dim), "--queries", str(args.queries)]
        out = subprocess.run(cmd, env=env, check=True, capture_output=True, text=True).stdout
        results[label] = json.loads(out.strip().splitlines()[-1])
    if args.json:
        print(json.dumps(results, indent=2))
        return 0
    keys = ["edit_distance_ms", "cosine_topk_ms", "hnsw_build_ms", "hnsw_search_ms"]
    print(f"{'kernel':<18}{'numba':>12}{'numpy':>12}{'speedup':>10}")
    for k in keys:
        a, b = results["numba"][k], results["numpy"][k]
        print(f"{k[:-3]:<18}{a:>12.1f}{b:>12.1f}{b / a:>9.1f}x")
    for k in ("edit_checksum", "cosine_checksum", "hnsw_recall@20"):
        print(f"{k:<18}{results['numba'][k]!s:>14}{results['numpy'][k]!s:>14}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
