"""Linear-probe baseline with a Gaussian-prior PAC-Bayes certificate.

The probe is multinomial logistic regression on the frozen embeddings,
fit by seeded mini-batch gradient descent. Its certificate uses
KL(N(w, s^2 I) || N(w0, s^2 I)) = ||w - w0||^2 / (2 s^2) inside
McAllester's bound, minimized over a grid of s values. By default the
risk term is the deterministic 0-1 risk of the trained weights; a seeded
Monte-Carlo estimate over the posterior is available for sensitivity
checks.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .bounds import mcallester_bound
from .core import EmbeddingDataset, fnv1a64, read_matrix, write_matrix


@dataclass(frozen=True)
class ProbeWeights:
    """Trained weights, bias, and the initialization they started from."""

    weights: np.ndarray  # (d, K)
    bias: np.ndarray  # (K,)
    init_weights: np.ndarray
    init_bias: np.ndarray
    seed: int

    def flat(self) -> np.ndarray:
        return np.concatenate([self.weights.ravel(), self.bias])

    def flat_init(self) -> np.ndarray:
        return np.concatenate([self.init_weights.ravel(), self.init_bias])


@dataclass(frozen=True)
class ProbeBoundConfig:
    """Certificate settings: delta and the sigma grid (evenly spaced,
    inclusive on both ends)."""

    delta: float = 0.01
    sigma_min: float = 0.1
    sigma_max: float = 1.0
    sigma_count: int = 20000

    def sigma_grid(self) -> np.ndarray:
        grid = np.linspace(self.sigma_min, self.sigma_max, self.sigma_count)
        if grid[0] <= 0:
            raise ValueError("sigma grid must be strictly positive")
        return grid


def _softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def train_probe(
    train: EmbeddingDataset,
    epochs: int = 10,
    lr: float = 0.01,
    batch_size: int = 64,
    seed: int = 0,
) -> ProbeWeights:
    """Fit the probe with seeded mini-batch SGD on softmax cross-entropy.

    Initialization is seeded normal at scale 0.01 and is kept as the
    PAC-Bayes prior mean. lr=0 returns the initialization unchanged.
    """
    if train.n == 0 or train.labels is None or train.num_classes is None:
        raise ValueError("probe training needs a non-empty labeled dataset")
    rng = np.random.default_rng(seed)
    d, k = train.dim, train.num_classes
    w0 = 0.01 * rng.standard_normal((d, k))
    b0 = 0.01 * rng.standard_normal(k)
    w, b = w0.copy(), b0.copy()
    onehot = np.eye(k)[train.labels]
    for _ in range(epochs):
        order = rng.permutation(train.n)
        for start in range(0, train.n, batch_size):
            idx = order[start : start + batch_size]
            xb, yb = train.embeddings[idx], onehot[idx]
            grad_logits = (_softmax(xb @ w + b) - yb) / len(idx)
            w = w - lr * (xb.T @ grad_logits)
            b = b - lr * grad_logits.sum(axis=0)
    return ProbeWeights(w, b, w0, b0, seed)


def probe_risk(pw: ProbeWeights, ds: EmbeddingDataset) -> float:
    """Deterministic 0-1 risk of the trained probe."""
    preds = np.argmax(ds.embeddings @ pw.weights + pw.bias, axis=1)
    return float(np.count_nonzero(preds != ds.labels)) / ds.n


def gaussian_kl(w: np.ndarray, w0: np.ndarray, sigma: float) -> float:
    """KL between equal-covariance Gaussians: ||w - w0||^2 / (2 sigma^2)."""
    if sigma <= 0:
        raise ValueError("sigma must be > 0")
    diff = np.asarray(w, dtype=np.float64).ravel() - np.asarray(w0, dtype=np.float64).ravel()
    return float(diff @ diff) / (2.0 * sigma * sigma)


def _monte_carlo_risk(
    pw: ProbeWeights, ds: EmbeddingDataset, sigma: float, samples: int, seed: int
) -> float:
    rng = np.random.default_rng(seed)
    d, k = pw.weights.shape
    risks = []
    for _ in range(samples):
        w = pw.weights + sigma * rng.standard_normal((d, k))
        b = pw.bias + sigma * rng.standard_normal(k)
        preds = np.argmax(ds.embeddings @ w + b, axis=1)
        risks.append(np.count_nonzero(preds != ds.labels) / ds.n)
    return float(np.mean(risks))


def probe_pac_bayes_bound(
    pw: ProbeWeights,
    train: EmbeddingDataset,
    cfg: ProbeBoundConfig = ProbeBoundConfig(),
    mc_samples: int = 0,
    mc_seed: int = 0,
) -> tuple[float, float]:
    """Minimize McAllester's bound over the sigma grid.

    Returns (best sigma, bound), taking the lowest sigma on ties. With
    ``mc_samples`` > 0 the risk term is a seeded Monte-Carlo average over
    the posterior at each sigma instead of the deterministic risk.
    """
    if train.n == 0:
        raise ValueError("probe bound needs a non-empty training set")
    grid = cfg.sigma_grid()
    sq = float(np.sum((pw.flat() - pw.flat_init()) ** 2))
    r_det = probe_risk(pw, train)
    best_sigma, best_bound = None, None
    for sigma in grid:
        if mc_samples > 0:
            r = _monte_carlo_risk(pw, train, float(sigma), mc_samples, mc_seed)
        else:
            r = r_det
        kl = sq / (2.0 * sigma * sigma)
        bound = mcallester_bound(r, kl, train.n, cfg.delta)
        if best_bound is None or bound < best_bound:
            best_sigma, best_bound = float(sigma), float(bound)
    return best_sigma, best_bound


def save_probe(pw: ProbeWeights, matrix_path: str | Path, meta_path: str | Path) -> None:
    """Stack (w, w0) flat vectors as a 2-row PBEM plus JSON metadata."""
    stacked = np.stack([pw.flat(), pw.flat_init()])
    write_matrix(stacked, matrix_path)
    init_bytes = np.ascontiguousarray(pw.flat_init(), dtype=np.float32).tobytes()
    meta = {
        "dim": int(pw.weights.shape[0]),
        "num_classes": int(pw.weights.shape[1]),
        "seed": pw.seed,
        "init_hash": f"{fnv1a64(init_bytes):016x}",
    }
    Path(meta_path).write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def load_probe(matrix_path: str | Path, meta_path: str | Path) -> ProbeWeights:
    stacked = read_matrix(matrix_path).astype(np.float64)
    meta = json.loads(Path(meta_path).read_text(encoding="utf-8"))
    d, k = meta["dim"], meta["num_classes"]
    if stacked.shape != (2, d * k + k):
        raise ValueError(
            f"probe matrix shape {stacked.shape} does not match metadata ({d}x{k})"
        )
    w, b = stacked[0, : d * k].reshape(d, k), stacked[0, d * k :]
    w0, b0 = stacked[1, : d * k].reshape(d, k), stacked[1, d * k :]
    return ProbeWeights(w, b, w0, b0, meta.get("seed", 0))
