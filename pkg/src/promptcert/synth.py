"""Synthetic planted-prompt worlds and dataset perturbations.

A world plants one true prompt per class, embeds each image as the noisy
class-prompt embedding, and hands back everything needed to search and
certify at desk scale. Perturbations cover random label flipping and
seeded subsampling of data rows or vocabulary tokens; subsampling draws a
single permutation per seed, so smaller fractions are prefixes of larger
ones.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import EmbeddingDataset, PromptSet, Vocabulary
from .encoder import ToyEncoder


class InfeasibleSpecError(ValueError):
    """The requested world cannot exist (e.g. more classes than prompts)."""


@dataclass(frozen=True)
class SyntheticSpec:
    """Parameters of one planted world. Everything is seeded."""

    num_classes: int = 4
    dim: int = 32
    vocab_size: int = 64
    true_length: int = 2
    train_per_class: int = 200
    test_per_class: int = 200
    noise_scale: float = 0.1
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.true_length < 1:
            raise ValueError("true_length must be >= 1")
        if self.train_per_class < 1 or self.test_per_class < 0:
            raise ValueError("per-class sample counts out of range")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if self.vocab_size < 2:
            raise ValueError("vocab_size must be >= 2")

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticSpec":
        return cls(**json.loads(text))


@dataclass(frozen=True)
class SyntheticWorld:
    spec: SyntheticSpec
    train: EmbeddingDataset
    test: EmbeddingDataset
    planted: PromptSet
    encoder: ToyEncoder
    vocab: Vocabulary


def _derived_seed(seed: int, *key: int) -> int:
    return int(
        np.random.SeedSequence(seed, spawn_key=key).generate_state(1, np.uint64)[0]
    )


def generate_synthetic(spec: SyntheticSpec) -> SyntheticWorld:
    """Build a planted world: distinct true prompts drawn uniformly over
    V^true_length, images = normalize(encode(true prompt) + noise * g).

    Class names are the text of each planted prompt's first token, so
    tokenizing a class name gives a natural conditioning context for
    pruning experiments.
    """
    if spec.num_classes > spec.vocab_size**spec.true_length:
        raise InfeasibleSpecError(
            f"cannot plant {spec.num_classes} distinct prompts in a space of "
            f"{spec.vocab_size}^{spec.true_length}"
        )
    width = max(5, len(str(spec.vocab_size - 1)))
    vocab = Vocabulary(tuple(f"tok{i:0{width}d}" for i in range(spec.vocab_size)))
    encoder = ToyEncoder(spec.vocab_size, spec.dim, _derived_seed(spec.seed, 0))

    rng = np.random.default_rng(_derived_seed(spec.seed, 1))
    planted: list[tuple[int, ...]] = []
    seen: set[tuple[int, ...]] = set()
    while len(planted) < spec.num_classes:
        cand = tuple(int(t) for t in rng.integers(0, spec.vocab_size, spec.true_length))
        if cand not in seen:
            seen.add(cand)
            planted.append(cand)
    prompts = PromptSet(tuple(planted))

    data_rng = np.random.default_rng(_derived_seed(spec.seed, 2))
    blocks, labels = [], []
    per_class = spec.train_per_class + spec.test_per_class
    for c in range(spec.num_classes):
        center = encoder.encode(planted[c])
        noise = data_rng.standard_normal((per_class, spec.dim))
        rows = center[None, :] + spec.noise_scale * noise
        rows = rows / np.linalg.norm(rows, axis=1)[:, None]
        blocks.append(rows)
        labels.append(np.full(per_class, c, dtype=np.int64))

    class_names = tuple(vocab.tokens[p[0]] for p in planted)
    train_rows = np.concatenate([b[: spec.train_per_class] for b in blocks])
    test_rows = np.concatenate([b[spec.train_per_class :] for b in blocks])
    train_labels = np.concatenate([l[: spec.train_per_class] for l in labels])
    test_labels = np.concatenate([l[spec.train_per_class :] for l in labels])
    train = EmbeddingDataset(train_rows, train_labels, spec.num_classes, class_names)
    test = EmbeddingDataset(test_rows, test_labels, spec.num_classes, class_names)
    return SyntheticWorld(spec, train, test, prompts, encoder, vocab)


def flip_labels(
    ds: EmbeddingDataset, p: float, seed: int, exclude_true: bool = True
) -> EmbeddingDataset:
    """Replace each label, independently with probability ``p``, by a uniform
    draw over the other K-1 classes; with that default, p is the exact
    corruption rate and a flipped label never equals the original.

    ``exclude_true=False`` redraws uniformly over all K classes instead.
    That loses the exact-corruption-rate property but makes p=1 carry no
    label signal at all, whereas exclusion at p=1 plants an exploitable
    "never the true class" structure. Embeddings are shared, not copied.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError("flip probability must be in [0, 1]")
    if ds.labels is None or ds.num_classes is None or ds.num_classes < 2:
        raise ValueError("label flipping needs a labeled dataset with K >= 2")
    rng = np.random.default_rng(seed)
    flip = rng.random(ds.n) < p
    if exclude_true:
        offsets = rng.integers(1, ds.num_classes, size=ds.n)
        drawn = (ds.labels + offsets) % ds.num_classes
    else:
        drawn = rng.integers(0, ds.num_classes, size=ds.n)
    new_labels = np.where(flip, drawn, ds.labels)
    return EmbeddingDataset(ds.embeddings, new_labels, ds.num_classes, ds.class_names)


def subsample_data(ds: EmbeddingDataset, fraction: float, seed: int) -> EmbeddingDataset:
    """Seeded uniform subsample without replacement of ceil(fraction * n)
    rows. For a fixed seed, smaller fractions are prefixes of larger ones."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    count = math.ceil(fraction * ds.n)
    if count == 0:
        raise ValueError("subsample would be empty")
    perm = np.random.default_rng(seed).permutation(ds.n)
    return ds.subset(perm[:count])


def subsample_vocab(vocab: Vocabulary, fraction: float, seed: int) -> np.ndarray:
    """Sorted token-id set of ceil(fraction * |V|) seeded random tokens, with
    the same nested-prefix property as subsample_data."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError("fraction must be in (0, 1]")
    count = math.ceil(fraction * vocab.size)
    perm = np.random.default_rng(seed).permutation(vocab.size)
    return np.sort(perm[:count]).astype(np.int64)


def save_spec(spec: SyntheticSpec, path: str | Path) -> None:
    Path(path).write_text(spec.to_json() + "\n", encoding="utf-8")


def load_spec(path: str | Path) -> SyntheticSpec:
    return SyntheticSpec.from_json(Path(path).read_text(encoding="utf-8"))
