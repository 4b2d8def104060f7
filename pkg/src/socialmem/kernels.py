"""Hot numeric kernels: edit distance, cosine scans and the HNSW graph walk.

Every kernel has a numba path and a numpy path (see ``_accel``). The HNSW
routines are written once in the numba-compatible subset and only their
distance helpers differ between backends.
"""

from __future__ import annotations

import heapq

import numpy as np

from ._accel import NUMBA_ENABLED, jit

# Similarities are compared after rounding to this many decimals so that
# mathematically equal scores tie regardless of summation order.
SCORE_DECIMALS = 12


# ---------------------------------------------------------------------------
# edit distance


def _edit_distance_numpy(a, b):
    n, m = a.shape[0], b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    cols = np.arange(m + 1, dtype=np.int64)
    prev = cols.copy()
    for i in range(1, n + 1):
        sub = prev[:-1] + (b != a[i - 1])
        tmp = np.empty(m + 1, dtype=np.int64)
        tmp[0] = i
        tmp[1:] = np.minimum(prev[1:] + 1, sub)
        # insertion chain: row[j] = min_k<=j tmp[k] + (j - k)
        prev = np.minimum.accumulate(tmp - cols) + cols
    return int(prev[m])


@jit(fallback=_edit_distance_numpy)
def edit_distance_codes(a, b):
    """Levenshtein distance between two int32 code-point arrays."""
    n, m = a.shape[0], b.shape[0]
    if n == 0:
        return m
    if m == 0:
        return n
    prev = np.arange(m + 1)
    cur = np.empty(m + 1, dtype=prev.dtype)
    for i in range(1, n + 1):
        cur[0] = i
        ai = a[i - 1]
        for j in range(1, m + 1):
            cost = 0 if ai == b[j - 1] else 1
            best = prev[j - 1] + cost
            if prev[j] + 1 < best:
                best = prev[j] + 1
            if cur[j - 1] + 1 < best:
                best = cur[j - 1] + 1
            cur[j] = best
        prev, cur = cur, prev
    return prev[m]


def _codes(s: str) -> np.ndarray:
    return np.frombuffer(s.encode("utf-32-le"), dtype=np.int32)


def edit_distance(a: str, b: str, *, ignore_case: bool = True) -> int:
    """Levenshtein distance, case-insensitive by default."""
    if ignore_case:
        a, b = a.casefold(), b.casefold()
    return int(edit_distance_codes(_codes(a), _codes(b)))


# ---------------------------------------------------------------------------
# exact cosine scan


def _cosine_scores_numpy(vecs, q):
    return vecs.astype(np.float64) @ q


@jit(fallback=_cosine_scores_numpy)
def cosine_scores(vecs, q):
    """Dot product of every row of ``vecs`` (unit norm) with ``q`` in float64."""
    n, d = vecs.shape
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        acc = 0.0
        for j in range(d):
            acc += np.float64(vecs[i, j]) * q[j]
        out[i] = acc
    return out


def top_k(scores: np.ndarray, ids: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Best ``k`` by descending rounded score, ties by ascending id."""
    rounded = np.round(scores, SCORE_DECIMALS)
    order = np.lexsort((ids, -rounded))[:k]
    return ids[order], rounded[order]


# ---------------------------------------------------------------------------
# HNSW graph kernels
#
# Layout shared with ``hnsw.HNSWGraph``:
#   vecs    (cap, d) float32, unit rows
#   links   (n_layers, cap, width) int32 adjacency, width = 2 * M
#   counts  (n_layers, cap) int32 live entries per adjacency row
#   visited (cap,) int64 generation tags
# Distance is 1 - cosine, accumulated in float32 inside the graph walk.


def _dist_numpy(vecs, i, q):
    return 1.0 - float(np.dot(vecs[i], q))


def _dist_many_numpy(vecs, ids, q):
    return 1.0 - vecs[ids] @ q


def _dist_loop(vecs, i, q):
    acc = np.float32(0.0)
    for j in range(q.shape[0]):
        acc += vecs[i, j] * q[j]
    return 1.0 - acc


def _dist_many_loop(vecs, ids, q):
    out = np.empty(ids.shape[0], dtype=np.float64)
    for t in range(ids.shape[0]):
        out[t] = _dist(vecs, ids[t], q)
    return out


if NUMBA_ENABLED:
    import numba

    _dist = numba.njit(cache=True, nogil=True, fastmath=True)(_dist_loop)
    _dist_many = numba.njit(cache=True, nogil=True)(_dist_many_loop)
else:
    _dist = _dist_numpy
    _dist_many = _dist_many_numpy


@jit()
def search_layer(vecs, links, counts, layer, q, entries, ef, visited, tag):
    """Best-first beam search on one layer.

    Returns (ids, dists) of up to ``ef`` closest nodes, ascending distance.
    Heap entries are (distance, id) so equal distances order by id.
    """
    d0 = _dist(vecs, entries[0], q)
    cand = [(d0, entries[0])]
    best = [(-d0, -entries[0])]
    visited[entries[0]] = tag
    for t in range(1, entries.shape[0]):
        e = entries[t]
        if visited[e] == tag:
            continue
        visited[e] = tag
        de = _dist(vecs, e, q)
        heapq.heappush(cand, (de, e))
        heapq.heappush(best, (-de, -e))
        if len(best) > ef:
            heapq.heappop(best)
    while len(cand) > 0:
        dc, c = heapq.heappop(cand)
        if dc > -best[0][0] and len(best) >= ef:
            break
        row = links[layer, c, : counts[layer, c]]
        fresh = np.empty(row.shape[0], dtype=np.int64)
        nf = 0
        for t in range(row.shape[0]):
            nb = row[t]
            if visited[nb] != tag:
                visited[nb] = tag
                fresh[nf] = nb
                nf += 1
        if nf == 0:
            continue
        fresh = fresh[:nf]
        ds = _dist_many(vecs, fresh, q)
        for t in range(nf):
            dn = ds[t]
            if len(best) < ef or dn < -best[0][0]:
                heapq.heappush(cand, (dn, fresh[t]))
                heapq.heappush(best, (-dn, -fresh[t]))
                if len(best) > ef:
                    heapq.heappop(best)
    n = len(best)
    ids = np.empty(n, dtype=np.int64)
    dists = np.empty(n, dtype=np.float64)
    for t in range(n - 1, -1, -1):
        nd, ni = heapq.heappop(best)
        ids[t] = -ni
        dists[t] = -nd
    return ids, dists


@jit()
def select_neighbors(vecs, ids, dists, m):
    """Diversity heuristic: keep a candidate only if it is closer to the base
    than to every neighbour already kept. ``ids`` must be sorted by ``dists``."""
    keep = np.empty(min(m, ids.shape[0]), dtype=np.int64)
    nk = 0
    for t in range(ids.shape[0]):
        if nk >= m:
            break
        c = ids[t]
        good = True
        for r in range(nk):
            if 1.0 - _dist(vecs, keep[r], vecs[c]) > 1.0 - dists[t]:
                good = False
                break
        if good:
            keep[nk] = c
            nk += 1
    return keep[:nk]


@jit()
def _connect(vecs, links, counts, layer, src, dst, mmax):
    n = counts[layer, src]
    for t in range(n):
        if links[layer, src, t] == dst:
            return
    if n < mmax:
        links[layer, src, n] = dst
        counts[layer, src] = n + 1
        return
    cand = np.empty(n + 1, dtype=np.int64)
    for t in range(n):
        cand[t] = links[layer, src, t]
    cand[n] = dst
    ds = _dist_many(vecs, cand, vecs[src])
    order = np.argsort(ds, kind="mergesort")
    cand = cand[order]
    ds = ds[order].astype(np.float64)
    keep = select_neighbors(vecs, cand, ds, mmax)
    for t in range(keep.shape[0]):
        links[layer, src, t] = keep[t]
    counts[layer, src] = keep.shape[0]


@jit()
def insert_node(vecs, links, counts, node, level, entry, top, m, ef_construction, visited, tag):
    """Link ``node`` into every layer up to ``level``.

    ``entry``/``top`` are the current entry point and its level. Returns the
    next free visited tag.
    """
    q = vecs[node]
    ep = np.array([entry], dtype=np.int64)
    for layer in range(top, level, -1):
        ids, _ = search_layer(vecs, links, counts, layer, q, ep, 1, visited, tag)
        tag += 1
        ep = ids[:1]
    for layer in range(min(level, top), -1, -1):
        ids, ds = search_layer(vecs, links, counts, layer, q, ep, ef_construction, visited, tag)
        tag += 1
        mmax = 2 * m if layer == 0 else m
        sel = select_neighbors(vecs, ids, ds, mmax)
        for t in range(sel.shape[0]):
            links[layer, node, t] = sel[t]
        counts[layer, node] = sel.shape[0]
        for t in range(sel.shape[0]):
            _connect(vecs, links, counts, layer, sel[t], node, mmax)
        ep = ids
    return tag


@jit()
def knn_search(vecs, links, counts, entry, top, q, ef, visited, tag):
    """Greedy descent to layer 0, then a beam of width ``ef`` there."""
    ep = np.array([entry], dtype=np.int64)
    for layer in range(top, 0, -1):
        ids, _ = search_layer(vecs, links, counts, layer, q, ep, 1, visited, tag)
        tag += 1
        ep = ids[:1]
    ids, ds = search_layer(vecs, links, counts, 0, q, ep, ef, visited, tag)
    return ids, ds, tag + 1
