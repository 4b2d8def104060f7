import json
import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from socialmem import _accel, kernels
from socialmem.kernels import (
    SCORE_DECIMALS,
    _codes,
    _cosine_scores_numpy,
    _edit_distance_numpy,
    cosine_scores,
    edit_distance,
    edit_distance_codes,
    top_k,
)


def dp_levenshtein(a: str, b: str) -> int:
    """Textbook Wagner-Fischer table."""
    d = [[0] * (len(b) + 1) for _ in range(len(a) + 1)]
    for i in range(len(a) + 1):
        d[i][0] = i
    for j in range(len(b) + 1):
        d[0][j] = j
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i][j] = min(d[i - 1][j] + 1, d[i][j - 1] + 1,
                          d[i - 1][j - 1] + (a[i - 1] != b[j - 1]))
    return d[len(a)][len(b)]


@pytest.mark.parametrize("a,b,d", [
    ("", "", 0), ("abc", "", 3), ("", "abc", 3), ("kitten", "sitting", 3),
    ("Bob", "Bobb", 1), ("Alice", "Alise", 1), ("flaw", "lawn", 2), ("ä", "a", 1),
])
def test_edit_distance_known(a, b, d):
    assert edit_distance(a, b) == d


def test_edit_distance_ignores_case_by_default():
    assert edit_distance("ALICE", "alice") == 0
    assert edit_distance("ALICE", "alice", ignore_case=False) == 5


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="abcdeé ", max_size=14), st.text(alphabet="abcdeé ", max_size=14))
def test_edit_distance_matches_dp_oracle(a, b):
    expect = dp_levenshtein(a, b)
    assert edit_distance(a, b, ignore_case=False) == expect
    assert _edit_distance_numpy(_codes(a), _codes(b)) == expect
    assert edit_distance_codes(_codes(a), _codes(b)) == expect


@settings(max_examples=100, deadline=None)
@given(st.text(max_size=10), st.text(max_size=10))
def test_edit_distance_symmetric(a, b):
    assert edit_distance(a, b) == edit_distance(b, a)


def brute_cosine(vecs, q):
    return [sum(float(x) * float(y) for x, y in zip(row, q)) for row in vecs]


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 30), st.integers(1, 12), st.integers(0, 10_000))
def test_cosine_scores_match_python_oracle(n, d, seed):
    rng = np.random.default_rng(seed)
    vecs = rng.standard_normal((n, d))
    q = rng.standard_normal(d)
    oracle = brute_cosine(vecs, q)
    np.testing.assert_allclose(cosine_scores(vecs, q), oracle, rtol=1e-12, atol=1e-12)
    np.testing.assert_allclose(_cosine_scores_numpy(vecs, q), oracle, rtol=1e-12, atol=1e-12)


def test_top_k_orders_by_score_then_id():
    scores = np.array([0.5, 0.9, 0.5, 0.9, 0.1])
    ids = np.array([40, 30, 10, 20, 50])
    got_ids, got_scores = top_k(scores, ids, 4)
    assert got_ids.tolist() == [20, 30, 10, 40]
    assert got_scores.tolist() == [0.9, 0.9, 0.5, 0.5]


def test_top_k_treats_rounding_noise_as_tie():
    eps = 10.0 ** -(SCORE_DECIMALS + 3)
    scores = np.array([0.3 + eps, 0.3])
    ids = np.array([9, 2])
    assert top_k(scores, ids, 2)[0].tolist() == [2, 9]


def test_top_k_k_larger_than_n():
    ids, _ = top_k(np.array([0.1, 0.2]), np.array([1, 2]), 10)
    assert ids.tolist() == [2, 1]


def test_backend_reports_flag():
    assert _accel.backend() == ("numba" if _accel.NUMBA_ENABLED else "numpy")


_FALLBACK_SCRIPT = r"""
import json, sys
import numpy as np
from socialmem import backend
from socialmem.hnsw import HNSWGraph
from socialmem.kernels import cosine_scores, edit_distance, top_k
words = ["alice", "alise", "bob", "bobb", "carla", "karla", "", "zoë", "mañana"]
rng = np.random.default_rng(3)
vecs = rng.standard_normal((300, 16)); vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
qs = rng.standard_normal((10, 16)); qs /= np.linalg.norm(qs, axis=1, keepdims=True)
g = HNSWGraph(16, m=8, ef_construction=64, seed=5)
for v in vecs:
    g.add(v)
out = {
    "backend": backend(),
    "edit": [edit_distance(a, b) for a in words for b in words],
    "exact": [top_k(cosine_scores(vecs, q), np.arange(300), 10)[0].tolist() for q in qs],
    "ann": [g.search(q, 50)[0][:10].tolist() for q in qs],
}
print(json.dumps(out))
"""


def _run_backend(flag: str) -> dict:
    env = dict(os.environ, SOCIALMEM_DISABLE_NUMBA=flag)
    res = subprocess.run([sys.executable, "-c", _FALLBACK_SCRIPT], env=env, check=True,
                         capture_output=True, text=True, timeout=300)
    return json.loads(res.stdout.strip().splitlines()[-1])


def test_numpy_fallback_matches_numba():
    fast, slow = _run_backend("0"), _run_backend("1")
    assert slow["backend"] == "numpy"
    assert fast["edit"] == slow["edit"]
    assert fast["exact"] == slow["exact"]
    # float32 accumulation order may differ between backends; the ANN
    # answers must still agree almost everywhere
    overlap = np.mean([len(set(a) & set(b)) / 10 for a, b in zip(fast["ann"], slow["ann"])])
    assert overlap >= 0.95
    exact_recall = np.mean([len(set(a) & set(e)) / 10 for a, e in zip(slow["ann"], slow["exact"])])
    assert exact_recall >= 0.95


def test_hnsw_kernels_expose_python_versions():
    if not _accel.NUMBA_ENABLED:
        pytest.skip("numba disabled")
    assert callable(kernels.search_layer.py_func)
