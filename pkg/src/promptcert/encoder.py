"""Text encoders, the zero-shot classifier, and empirical risk.

A text encoder maps a token-id sequence to a d-dimensional unit vector.
``ToyEncoder`` is the desk-scale stand-in (normalized mean of seeded
per-token vectors); ``CachedEncoder`` replays vectors exported offline
from a real model. Classification is the argmax of inner products between
class rows and an image embedding, ties broken toward the lowest class
index.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .core import EmbeddingDataset, PromptSet, normalize_rows, read_matrix


class EmptyPromptError(ValueError):
    """The encoder was given an empty token sequence."""


class MissingEmbeddingError(LookupError):
    """A cached encoder has no vector for the requested token sequence."""


class EmptyDatasetError(ValueError):
    """Risk is undefined on an empty dataset."""


class TextEncoder:
    """Base class: subclasses set ``dim`` and implement ``encode``."""

    dim: int

    def encode(self, token_ids) -> np.ndarray:
        raise NotImplementedError


class ToyEncoder(TextEncoder):
    """Mean-then-normalize pooling over a seeded standard-normal token table.

    Deterministic in (vocab_size, dim, seed). Pooling by the mean makes the
    output invariant (up to rounding) to token order inside a prompt, which
    is a property of this stand-in, not of real text towers.
    """

    def __init__(self, vocab_size: int, dim: int, seed: int):
        if vocab_size < 1 or dim < 1:
            raise ValueError("vocab_size and dim must be positive")
        self.vocab_size = vocab_size
        self.dim = dim
        self.seed = seed
        self.token_table = np.random.default_rng(seed).standard_normal(
            (vocab_size, dim)
        )

    @classmethod
    def from_table(cls, token_table) -> "ToyEncoder":
        enc = cls.__new__(cls)
        table = np.asarray(token_table, dtype=np.float64)
        if table.ndim != 2:
            raise ValueError("token table must be 2-D")
        enc.vocab_size, enc.dim = table.shape
        enc.seed = -1
        enc.token_table = table
        return enc

    def _fold(self, token_ids) -> np.ndarray:
        # Sequential left-fold so that extend_embeddings reproduces encode
        # bit-for-bit on prefix + candidate.
        acc = np.zeros(self.dim)
        for t in token_ids:
            if not 0 <= t < self.vocab_size:
                raise ValueError(f"token id {t} out of range for |V|={self.vocab_size}")
            acc = acc + self.token_table[t]
        return acc

    def encode(self, token_ids) -> np.ndarray:
        toks = list(token_ids)
        if not toks:
            raise EmptyPromptError("ToyEncoder cannot encode an empty prompt")
        vec = self._fold(toks) / len(toks)
        return vec / np.sqrt((vec * vec).sum())

    def extend_embeddings(self, prefix, candidate_ids) -> np.ndarray:
        """Encode prefix + [v] for every candidate v at once (one row each)."""
        cands = np.asarray(candidate_ids, dtype=np.int64)
        if cands.size and (cands.min() < 0 or cands.max() >= self.vocab_size):
            raise ValueError("candidate token id out of range")
        vecs = (self._fold(prefix) + self.token_table[cands]) / (len(tuple(prefix)) + 1)
        return vecs / np.sqrt((vecs * vecs).sum(axis=1))[:, None]


class CachedEncoder(TextEncoder):
    """Replays precomputed text embeddings keyed by exact token-id sequences.

    Keys include the initial prompt, so a prompt/embedding mismatch surfaces
    as a loud miss instead of a silently wrong vector.
    """

    def __init__(self, table: dict[tuple[int, ...], np.ndarray]):
        if not table:
            raise ValueError("cached encoder needs at least one entry")
        dims = {v.shape[0] for v in table.values()}
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.dim = dims.pop()
        self._table = table

    @classmethod
    def load(cls, matrix_path: str | Path, index_path: str | Path) -> "CachedEncoder":
        """Load a PBEM matrix plus a sidecar index file. Index line i holds the
        comma-separated token ids whose embedding is matrix row i."""
        matrix = normalize_rows(read_matrix(matrix_path))
        lines = Path(index_path).read_text(encoding="utf-8").splitlines()
        if len(lines) != matrix.shape[0]:
            raise ValueError(
                f"index has {len(lines)} entries for {matrix.shape[0]} matrix rows"
            )
        table = {}
        for i, line in enumerate(lines):
            key = tuple(int(p) for p in line.split(",") if p.strip() != "")
            table[key] = matrix[i]
        return cls(table)

    def encode(self, token_ids) -> np.ndarray:
        key = tuple(token_ids)
        try:
            return self._table[key]
        except KeyError:
            raise MissingEmbeddingError(
                f"no cached embedding for token sequence {key}"
            ) from None


def encode_text(encoder: TextEncoder, token_ids) -> np.ndarray:
    return encoder.encode(token_ids)


def class_embeddings(
    encoder: TextEncoder, prompts: PromptSet, empty: str = "error"
) -> np.ndarray:
    """K x d matrix with row k = encode(initial_prompt + class_prompts[k]).

    ``empty="zero"`` maps classes whose full prompt is empty to a zero row
    (scoring 0 against every unit embedding). The search uses this for
    classes that have not received a token yet; normal evaluation keeps the
    strict behavior and raises.
    """
    rows = np.zeros((prompts.num_classes, encoder.dim))
    for k in range(prompts.num_classes):
        full = prompts.full_prompt(k)
        if not full:
            if empty == "zero":
                continue
            raise EmptyPromptError(f"class {k} has an empty prompt")
        try:
            rows[k] = encoder.encode(full)
        except (EmptyPromptError, MissingEmbeddingError, ValueError) as exc:
            raise type(exc)(f"class {k}: {exc}") from exc
    return rows


def predict_classes(class_rows: np.ndarray, embeddings: np.ndarray) -> np.ndarray:
    """Argmax of inner products per row; ties go to the lowest class index."""
    if class_rows.shape[1] != embeddings.shape[1]:
        raise ValueError(
            f"dimension mismatch: classes are {class_rows.shape[1]}-d, "
            f"embeddings are {embeddings.shape[1]}-d"
        )
    return np.argmax(embeddings @ class_rows.T, axis=1)


def classify(class_rows: np.ndarray, x: np.ndarray) -> int:
    x = np.asarray(x, dtype=np.float64)
    return int(predict_classes(class_rows, x[None, :])[0])


def empirical_risk(class_rows: np.ndarray, ds: EmbeddingDataset) -> float:
    """Fraction of rows whose predicted class disagrees with the label."""
    if ds.n == 0:
        raise EmptyDatasetError("empirical risk is undefined on an empty dataset")
    if ds.labels is None:
        raise ValueError("dataset has no labels")
    preds = predict_classes(class_rows, ds.embeddings)
    return float(np.count_nonzero(preds != ds.labels)) / ds.n
