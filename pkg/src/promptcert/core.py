"""Domain types, binary file formats, tokenization, and dataset splitting.

File formats (all little-endian):

* PBEM matrix: magic ``PBEM``, u32 version (1), u8 dtype (1 = float32),
  u8 ndim (2), 2 x u64 dims (rows, cols), then rows*cols float32 row-major.
* PBLB labels: magic ``PBLB``, u32 version (1), u64 n, then n x u32 labels.
* Vocabulary: UTF-8 text, LF-separated, one token per line.
* Prompt set: UTF-8 JSON with ``class_prompts`` (array of arrays of ints),
  ``initial_prompt`` (array of ints) and ``vocab_hash`` (hex of a 64-bit
  FNV-1a over the vocabulary file bytes).
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class DataFormatError(ValueError):
    """A file does not conform to its declared format."""


class TruncatedFileError(DataFormatError):
    """Payload length disagrees with the header."""


class DuplicateTokenError(DataFormatError):
    """A vocabulary file contains the same token twice."""


class DegenerateRowError(ValueError):
    """An embedding row has zero norm and cannot be normalized."""


class LabelRangeError(ValueError):
    """A label is outside [0, num_classes)."""


class UnknownTokenError(ValueError):
    """A text piece does not match any vocabulary token."""


_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash of a byte string."""
    h = _FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * _FNV_PRIME) & 0xFFFFFFFFFFFFFFFF
    return h


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Vocabulary:
    """Ordered collection of distinct, non-empty token strings.

    Token id equals position. ``source_hash`` is the FNV-1a hex digest of
    the file the vocabulary was loaded from (or of the canonical
    serialization when built in memory).
    """

    tokens: tuple[str, ...]
    source_hash: str = ""
    _ids: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "tokens", tuple(self.tokens))
        if len(self.tokens) < 2:
            raise DataFormatError("vocabulary must contain at least 2 tokens")
        ids: dict[str, int] = {}
        for i, tok in enumerate(self.tokens):
            if not tok:
                raise DataFormatError(f"empty token at line {i}")
            if tok in ids:
                raise DuplicateTokenError(f"duplicate token {tok!r} at line {i}")
            ids[tok] = i
        object.__setattr__(self, "_ids", ids)
        if not self.source_hash:
            object.__setattr__(
                self, "source_hash", f"{fnv1a64(self.canonical_bytes()):016x}"
            )

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id_of(self, token: str) -> int:
        try:
            return self._ids[token]
        except KeyError:
            raise UnknownTokenError(f"unknown token {token!r}") from None

    def canonical_bytes(self) -> bytes:
        return ("\n".join(self.tokens) + "\n").encode("utf-8")


def load_vocabulary(path: str | Path) -> Vocabulary:
    """Load a LF-separated vocabulary file; token id = zero-based line number."""
    data = Path(path).read_bytes()
    text = data.decode("utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise DataFormatError(f"{path}: empty vocabulary file")
    return Vocabulary(tuple(lines), source_hash=f"{fnv1a64(data):016x}")


def write_vocabulary(vocab: Vocabulary, path: str | Path) -> None:
    Path(path).write_bytes(vocab.canonical_bytes())


def tokenize(text: str, vocab: Vocabulary) -> list[int]:
    """Split ``text`` on whitespace and map each piece to its exact token id."""
    return [vocab.id_of(piece) for piece in text.split()]


def detokenize(token_ids, vocab: Vocabulary) -> str:
    return " ".join(vocab.tokens[t] for t in token_ids)


# ---------------------------------------------------------------------------
# Prompt sets
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PromptSet:
    """One token-id sequence per class, plus an optional shared prefix."""

    class_prompts: tuple[tuple[int, ...], ...]
    initial_prompt: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "class_prompts", tuple(tuple(p) for p in self.class_prompts)
        )
        object.__setattr__(self, "initial_prompt", tuple(self.initial_prompt))
        if not self.class_prompts:
            raise ValueError("prompt set must cover at least one class")

    @property
    def num_classes(self) -> int:
        return len(self.class_prompts)

    @property
    def max_length(self) -> int:
        return max(len(p) for p in self.class_prompts)

    def full_prompt(self, class_index: int) -> tuple[int, ...]:
        return self.initial_prompt + self.class_prompts[class_index]

    def with_token(self, class_index: int, token_id: int) -> "PromptSet":
        prompts = list(self.class_prompts)
        prompts[class_index] = prompts[class_index] + (token_id,)
        return PromptSet(tuple(prompts), self.initial_prompt)

    def validate(self, vocab_size: int, max_length: int | None = None) -> None:
        for seq in (self.initial_prompt, *self.class_prompts):
            for t in seq:
                if not 0 <= t < vocab_size:
                    raise ValueError(f"token id {t} out of range for |V|={vocab_size}")
        if max_length is not None and self.max_length > max_length:
            raise ValueError(
                f"class prompt length {self.max_length} exceeds limit {max_length}"
            )


def save_prompt_set(prompts: PromptSet, path: str | Path, vocab: Vocabulary) -> None:
    doc = {
        "class_prompts": [list(p) for p in prompts.class_prompts],
        "initial_prompt": list(prompts.initial_prompt),
        "vocab_hash": vocab.source_hash,
    }
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_prompt_set(path: str | Path, vocab: Vocabulary | None = None) -> PromptSet:
    """Read a prompt-set JSON file, checking the vocabulary hash when given."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        prompts = PromptSet(
            tuple(tuple(int(t) for t in p) for p in doc["class_prompts"]),
            tuple(int(t) for t in doc.get("initial_prompt", ())),
        )
        stored_hash = doc.get("vocab_hash", "")
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: malformed prompt set: {exc}") from exc
    if vocab is not None:
        if stored_hash and stored_hash != vocab.source_hash:
            raise DataFormatError(
                f"{path}: prompt set was built against a different vocabulary "
                f"(hash {stored_hash} != {vocab.source_hash})"
            )
        prompts.validate(vocab.size)
    return prompts


# ---------------------------------------------------------------------------
# PBEM / PBLB binary formats
# ---------------------------------------------------------------------------

_PBEM_HEADER = struct.Struct("<4sIBBQQ")
_PBLB_HEADER = struct.Struct("<4sIQ")


def write_matrix(matrix: np.ndarray, path: str | Path) -> None:
    """Serialize a 2-D array as a PBEM float32 matrix file."""
    m = np.ascontiguousarray(matrix, dtype=np.float32)
    if m.ndim != 2:
        raise ValueError("PBEM stores 2-D matrices")
    header = _PBEM_HEADER.pack(b"PBEM", 1, 1, 2, m.shape[0], m.shape[1])
    Path(path).write_bytes(header + m.tobytes())


def read_matrix(path: str | Path) -> np.ndarray:
    """Read a PBEM file back into a float32 matrix (exact stored values)."""
    data = Path(path).read_bytes()
    if len(data) < _PBEM_HEADER.size:
        raise TruncatedFileError(f"{path}: file shorter than PBEM header")
    magic, version, dtype, ndim, rows, cols = _PBEM_HEADER.unpack_from(data)
    if magic != b"PBEM":
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise DataFormatError(f"{path}: unsupported PBEM version {version}")
    if dtype != 1:
        raise DataFormatError(f"{path}: unsupported dtype code {dtype}")
    if ndim != 2:
        raise DataFormatError(f"{path}: PBEM ndim must be 2, got {ndim}")
    expected = _PBEM_HEADER.size + rows * cols * 4
    if len(data) != expected:
        raise TruncatedFileError(
            f"{path}: payload holds {len(data) - _PBEM_HEADER.size} bytes, "
            f"header declares {rows}x{cols} float32 ({expected - _PBEM_HEADER.size})"
        )
    flat = np.frombuffer(data, dtype="<f4", offset=_PBEM_HEADER.size)
    return flat.reshape(rows, cols).copy()


def write_labels(labels, path: str | Path) -> None:
    arr = np.ascontiguousarray(labels, dtype="<u4")
    if arr.ndim != 1:
        raise ValueError("PBLB stores 1-D label vectors")
    Path(path).write_bytes(_PBLB_HEADER.pack(b"PBLB", 1, arr.shape[0]) + arr.tobytes())


def load_labels(path: str | Path) -> np.ndarray:
    """Read a PBLB label file into an int64 vector."""
    data = Path(path).read_bytes()
    if len(data) < _PBLB_HEADER.size:
        raise TruncatedFileError(f"{path}: file shorter than PBLB header")
    magic, version, n = _PBLB_HEADER.unpack_from(data)
    if magic != b"PBLB":
        raise DataFormatError(f"{path}: bad magic {magic!r}")
    if version != 1:
        raise DataFormatError(f"{path}: unsupported PBLB version {version}")
    if len(data) != _PBLB_HEADER.size + 4 * n:
        raise TruncatedFileError(f"{path}: label payload does not match n={n}")
    return np.frombuffer(data, dtype="<u4", offset=_PBLB_HEADER.size).astype(np.int64)


# ---------------------------------------------------------------------------
# Embedding datasets
# ---------------------------------------------------------------------------


def normalize_rows(matrix: np.ndarray) -> np.ndarray:
    """Scale every row to unit L2 norm; zero rows are rejected."""
    m = np.asarray(matrix, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    zero = np.flatnonzero(norms == 0.0)
    if zero.size:
        raise DegenerateRowError(f"zero-norm embedding row at index {zero[0]}")
    return m / norms[:, None]


@dataclass(frozen=True)
class EmbeddingDataset:
    """n unit-norm embeddings with optional integer labels in [0, num_classes).

    Immutable after construction; safe to share across workers.
    """

    embeddings: np.ndarray
    labels: np.ndarray | None = None
    num_classes: int | None = None
    class_names: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        emb = np.asarray(self.embeddings, dtype=np.float64)
        if emb.ndim != 2:
            raise ValueError("embeddings must be a 2-D matrix")
        object.__setattr__(self, "embeddings", emb)
        if emb.shape[0]:
            norms = np.linalg.norm(emb, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-4):
                bad = int(np.argmax(np.abs(norms - 1.0)))
                raise ValueError(
                    f"embedding row {bad} has norm {norms[bad]:.6f}, expected 1"
                )
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            object.__setattr__(self, "labels", lab)
            if lab.shape != (emb.shape[0],):
                raise ValueError(
                    f"label count {lab.shape} does not match {emb.shape[0]} rows"
                )
            if self.num_classes is None:
                raise ValueError("labeled datasets must declare num_classes")
            if lab.size and (lab.min() < 0 or lab.max() >= self.num_classes):
                raise LabelRangeError(
                    f"labels must lie in [0, {self.num_classes}); "
                    f"found range [{lab.min()}, {lab.max()}]"
                )
        if self.class_names is not None:
            object.__setattr__(self, "class_names", tuple(self.class_names))
            if self.num_classes is not None and len(self.class_names) != self.num_classes:
                raise ValueError("class_names length must equal num_classes")

    @property
    def n(self) -> int:
        return self.embeddings.shape[0]

    @property
    def dim(self) -> int:
        return self.embeddings.shape[1]

    def with_labels(
        self,
        labels,
        num_classes: int,
        class_names: tuple[str, ...] | None = None,
    ) -> "EmbeddingDataset":
        return EmbeddingDataset(self.embeddings, labels, num_classes, class_names)

    def subset(self, indices) -> "EmbeddingDataset":
        idx = np.asarray(indices, dtype=np.int64)
        return EmbeddingDataset(
            self.embeddings[idx],
            None if self.labels is None else self.labels[idx],
            self.num_classes,
            self.class_names,
        )


def load_embeddings(path: str | Path) -> EmbeddingDataset:
    """Load a PBEM file as a label-free dataset with L2-normalized rows."""
    return EmbeddingDataset(normalize_rows(read_matrix(path)))


def write_embeddings(ds: EmbeddingDataset, path: str | Path) -> None:
    write_matrix(ds.embeddings, path)


@dataclass(frozen=True)
class SplitSpec:
    """Seeded train/test split taking the first ceil(fraction * n) rows."""

    train_fraction: float
    seed: int

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError(f"train_fraction must be in (0, 1], got {self.train_fraction}")


def split_dataset(
    ds: EmbeddingDataset, spec: SplitSpec
) -> tuple[EmbeddingDataset, EmbeddingDataset]:
    """Deterministic seeded partition; train and test are disjoint and
    their union is the original index set. fraction=1 leaves test empty."""
    perm = np.random.default_rng(spec.seed).permutation(ds.n)
    cut = math.ceil(spec.train_fraction * ds.n)
    return ds.subset(perm[:cut]), ds.subset(perm[cut:])
