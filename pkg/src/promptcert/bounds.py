"""Generalization certificates: uniform convergence and PAC-Bayes bounds.

All formulas use the natural logarithm and are never clipped at 1; a
``vacuous`` flag records whether the certificate carries information for
0-1 loss. The PAC-Bayes bound is McAllester's; with a point-mass posterior
over discrete prompts the KL equals the prompt set's negative
log-likelihood under the prior and the bound is deterministic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import EmbeddingDataset, PromptSet
from .encoder import TextEncoder, class_embeddings, empirical_risk
from .prior import KlPolicy, PriorModel, point_mass_kl


def _check_inputs(r: float, n: int, delta: float, complexity: float, name: str) -> None:
    if not 0.0 <= r <= 1.0:
        raise ValueError(f"empirical risk must be in [0, 1], got {r}")
    if n < 1:
        raise ValueError(f"sample count must be >= 1, got {n}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must be in (0, 1), got {delta}")
    if complexity < 0.0:
        raise ValueError(f"{name} must be >= 0, got {complexity}")


@dataclass(frozen=True)
class BoundReport:
    """One computed certificate. ``bound_value`` may exceed 1; ``vacuous``
    is exactly ``bound_value >= 1``."""

    method: str
    risk: float
    n: int
    delta: float
    complexity_kind: str
    complexity: float
    bound_value: float

    @property
    def vacuous(self) -> bool:
        return self.bound_value >= 1.0


def uc_bound(r: float, log_size: float, n: int, delta: float) -> float:
    """r + sqrt((log|Theta| + ln(1/delta)) / (2n)) for a finite class."""
    _check_inputs(r, n, delta, log_size, "log_size")
    return r + math.sqrt((log_size - math.log(delta)) / (2.0 * n))


def prompt_uc_bound(
    r: float, length: int, num_classes: int, vocab_size: int, n: int, delta: float
) -> float:
    """Uniform convergence over all |V|^(L*K) prompt sets."""
    if length < 1 or num_classes < 1:
        raise ValueError("length and num_classes must be >= 1")
    if vocab_size < 2:
        raise ValueError("vocab_size must be >= 2")
    return uc_bound(r, length * num_classes * math.log(vocab_size), n, delta)


def mcallester_bound(r_q: float, kl: float, n: int, delta: float) -> float:
    """r_Q + sqrt((KL(Q||P) + ln(n/delta) + 2) / (2n - 1))."""
    _check_inputs(r_q, n, delta, kl, "kl")
    return r_q + math.sqrt((kl + math.log(n / delta) + 2.0) / (2.0 * n - 1.0))


def prompt_pac_bayes_bound(r: float, kl: float, n: int, delta: float) -> float:
    """McAllester's bound with the point-mass KL; derandomized, so it
    applies to the single prompt set itself."""
    return mcallester_bound(r, kl, n, delta)


@dataclass(frozen=True)
class PromptEvaluation:
    """Risks and both certificates for one prompt set on one train split."""

    train_risk: float
    test_risk: float | None
    kl: float
    uc: BoundReport
    pac_bayes: BoundReport


def evaluate_prompts(
    prompts: PromptSet,
    train: EmbeddingDataset,
    encoder: TextEncoder,
    prior: PriorModel,
    vocab_size: int,
    test: EmbeddingDataset | None = None,
    policy: KlPolicy = KlPolicy(),
    delta: float = 0.01,
    uc_vocab_size: int | None = None,
) -> PromptEvaluation:
    """Evaluate a prompt set end to end: train risk, UC and PAC-Bayes
    certificates at ``delta``, and test risk when a non-empty test split is
    given.

    ``uc_vocab_size`` restricts the UC hypothesis count to a pruned or
    subsampled candidate set; that is only a valid certificate when the
    restriction was chosen independently of the training sample.
    """
    if train.n == 0:
        raise ValueError("train split must be non-empty")
    ce = class_embeddings(encoder, prompts)
    train_risk = empirical_risk(ce, train)
    kl = point_mass_kl(prior, prompts, policy)
    n = train.n
    length = prompts.max_length
    v_uc = vocab_size if uc_vocab_size is None else uc_vocab_size
    uc_value = prompt_uc_bound(train_risk, length, prompts.num_classes, v_uc, n, delta)
    pb_value = prompt_pac_bayes_bound(train_risk, kl, n, delta)
    uc = BoundReport(
        "uc",
        train_risk,
        n,
        delta,
        "log_hypothesis_count",
        length * prompts.num_classes * math.log(v_uc),
        uc_value,
    )
    pb = BoundReport("pac_bayes", train_risk, n, delta, "kl", kl, pb_value)
    test_risk = None
    if test is not None and test.n > 0:
        test_risk = empirical_risk(ce, test)
    return PromptEvaluation(train_risk, test_risk, kl, uc, pb)
