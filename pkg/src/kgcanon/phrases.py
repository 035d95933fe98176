"""Word-vector ingestion and phrase-level embeddings for mentions.

Phrase vectors average the (optionally unit-normalized) vectors of the
lowercased whitespace tokens; out-of-vocabulary tokens contribute a zero
vector but still count in the denominator.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError
from .kg import Vocabulary

MODE_NORMALIZED = "normalized"
MODE_UNNORMALIZED = "unnormalized"


class WordVectors:
    def __init__(self, dim: int, table: dict[str, np.ndarray]):
        self.dim = dim
        self.table = table

    def __len__(self):
        return len(self.table)

    def __contains__(self, token: str) -> bool:
        return token in self.table


def load_word_vectors(path) -> WordVectors:
    """Read a text file of ``token v1 v2 ... vd`` lines (GloVe-style)."""
    dim = None
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.rstrip("\n").removesuffix("\r")
            if line == "":
                continue
            parts = line.split(" ")
            token, comps = parts[0], parts[1:]
            if dim is None:
                dim = len(comps)
                if dim == 0:
                    raise ParseError("no vector components", path=path, line=lineno)
            elif len(comps) != dim:
                raise ParseError(
                    f"dimension {len(comps)} != {dim} of first line",
                    path=path, line=lineno)
            try:
                vec = np.array([float(c) for c in comps], dtype=np.float64)
            except ValueError:
                raise ParseError("non-numeric vector component",
                                 path=path, line=lineno) from None
            if not np.all(np.isfinite(vec)):
                raise ParseError("non-finite vector component",
                                 path=path, line=lineno)
            table[token] = vec
    if dim is None:
        raise ParseError("empty word-vector file", path=path)
    return WordVectors(dim, table)


def write_word_vectors(wv: WordVectors, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for token, vec in wv.table.items():
            f.write(token + " " + " ".join(repr(float(v)) for v in vec) + "\n")


def embed_phrases(vocab: Vocabulary, wv: WordVectors, mode: str) -> np.ndarray:
    """Return a ``len(vocab) x dim`` matrix of per-mention phrase vectors."""
    if mode not in (MODE_NORMALIZED, MODE_UNNORMALIZED):
        raise ValueError(f"unknown embedding mode {mode!r}")
    out = np.zeros((len(vocab), wv.dim), dtype=np.float64)
    for i, surface in enumerate(vocab):
        tokens = surface.lower().split()
        if not tokens:
            continue
        acc = np.zeros(wv.dim, dtype=np.float64)
        for tok in tokens:
            vec = wv.table.get(tok)
            if vec is None:
                continue  # OOV contributes zero but counts in the mean
            if mode == MODE_NORMALIZED:
                norm = np.linalg.norm(vec)
                if norm > 0.0:
                    vec = vec / norm
            acc += vec
        out[i] = acc / len(tokens)
    return out


def init_lookup(vocab_size: int, d_in: int, seed: int) -> np.ndarray:
    """Trainable mention-embedding table, entries iid uniform on
    [-sqrt(6/d_in), +sqrt(6/d_in)]."""
    if d_in < 1:
        raise ValueError("d_in must be >= 1")
    bound = np.sqrt(6.0 / d_in)
    rng = np.random.default_rng(seed)
    return rng.uniform(-bound, bound, size=(vocab_size, d_in))
