"""Text embedders.

Only the deterministic hashing embedder ships; a live embedding service is
expected to implement the same one-method interface.
"""

from __future__ import annotations

import hashlib
import re
from functools import lru_cache
from typing import Protocol

import numpy as np

from .errors import ValidationError

DEFAULT_DIM = 1536

_TOKEN = re.compile(r"[^\W_]+", re.UNICODE)


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


@lru_cache(maxsize=65536)
def _token_slot(token: str, dim: int) -> tuple[int, float]:
    h = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    v = int.from_bytes(h, "little")
    coord = v % dim
    sign = 1.0 if (v >> 40) & 1 else -1.0
    # weight in [0.5, 1.5), fixed per token
    weight = 0.5 + ((v >> 41) & 0xFFFF) / 65536.0
    return coord, sign * weight


def tokenize(text: str) -> list[str]:
    return _TOKEN.findall(text.casefold())


class HashingEmbedder:
    """Feature-hashing bag of words, L2-normalised.

    Identical text gives an identical vector; texts sharing tokens get a
    positive cosine.
    """

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValidationError("dim must be positive")
        self.dim = dim

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValidationError("cannot embed empty text")
        tokens = tokenize(text) or [text.strip()]
        vec = np.zeros(self.dim, dtype=np.float64)
        for tok in tokens:
            coord, w = _token_slot(tok, self.dim)
            vec[coord] += w
        norm = np.linalg.norm(vec)
        if norm == 0.0:
            # every token cancelled out on colliding slots
            coord, _ = _token_slot(text.strip(), self.dim)
            vec[coord] = 1.0
            norm = 1.0
        return vec / norm


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        return 0.0
    return float(np.dot(a, b) / (na * nb))
