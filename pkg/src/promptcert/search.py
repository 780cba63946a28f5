"""Sequential coordinate search for class prompts.

One token is appended per class per outer round, visiting classes in a
fresh seeded random order each round. The step criterion is either the
negated training risk (greedy) or that plus beta times the prior
log-probability of the candidate (regularized). Candidates come from the
full vocabulary, from a probability-gap set under the prior, or from a
fixed pre-pruned set. Ties break toward the lowest token id.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import EmbeddingDataset, PromptSet, Vocabulary, detokenize
from .encoder import TextEncoder, class_embeddings, empirical_risk
from .prior import PriorModel, candidate_set_lm


class EmptyCandidatesError(ValueError):
    """A search step was handed no candidate tokens."""


@dataclass(frozen=True)
class SearchConfig:
    """Hyperparameters for one search run.

    ``criterion`` is ``"greedy"`` or ``"regularized"`` (the latter adds
    ``beta`` times the candidate's prior log-probability). The candidate
    policy is ``"full"``, ``"lm_delta"`` (probability gap at most
    ``lm_delta``), or ``"fixed_set"`` over ``fixed_candidates``.
    """

    length: int
    criterion: str = "greedy"
    beta: float = 1.0
    candidate_policy: str = "full"
    lm_delta: float = 0.0
    fixed_candidates: tuple[int, ...] | None = None
    initial_prompt: tuple[int, ...] = ()
    seed: int = 0
    delta: float = 0.01

    def __post_init__(self) -> None:
        if self.length < 1:
            raise ValueError("length must be >= 1")
        if self.criterion not in ("greedy", "regularized"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.beta < 0:
            raise ValueError("beta must be >= 0")
        if self.candidate_policy not in ("full", "lm_delta", "fixed_set"):
            raise ValueError(f"unknown candidate policy {self.candidate_policy!r}")
        if self.lm_delta < 0:
            raise ValueError("lm_delta must be >= 0")
        if self.candidate_policy == "fixed_set":
            if not self.fixed_candidates:
                raise ValueError("fixed_set policy needs a non-empty candidate set")
            object.__setattr__(
                self,
                "fixed_candidates",
                tuple(sorted(int(t) for t in self.fixed_candidates)),
            )
        object.__setattr__(self, "initial_prompt", tuple(self.initial_prompt))

    @property
    def needs_prior(self) -> bool:
        return self.criterion == "regularized" or self.candidate_policy == "lm_delta"


@dataclass(frozen=True)
class SearchStep:
    round_index: int
    class_index: int
    token_id: int
    criterion: float
    train_risk: float
    candidate_count: int
    cum_kl: float | None


@dataclass
class SearchTrace:
    """Per-step audit record of a search run."""

    steps: list[SearchStep] = field(default_factory=list)

    def tokens(self) -> list[tuple[int, int, int]]:
        return [(s.round_index, s.class_index, s.token_id) for s in self.steps]


def write_trace_csv(trace: SearchTrace, vocab: Vocabulary, path) -> None:
    lines = ["l,k,token_id,token_text,criterion,train_risk,candidates,cum_kl"]
    for s in trace.steps:
        kl = "" if s.cum_kl is None else f"{s.cum_kl:.6g}"
        lines.append(
            f"{s.round_index},{s.class_index},{s.token_id},"
            f"{detokenize([s.token_id], vocab)},{s.criterion:.6g},"
            f"{s.train_risk:.6g},{s.candidate_count},{kl}"
        )
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# Criteria
# ---------------------------------------------------------------------------


def greedy_criterion(
    token_id: int,
    prompts: PromptSet,
    class_index: int,
    encoder: TextEncoder,
    train: EmbeddingDataset,
) -> float:
    """Negated training risk of the prompt set with ``token_id`` appended to
    class ``class_index``, all other classes held fixed."""
    extended = prompts.with_token(class_index, token_id)
    ce = class_embeddings(encoder, extended, empty="zero")
    return -empirical_risk(ce, train)


def regularized_criterion(
    token_id: int,
    prompts: PromptSet,
    class_index: int,
    encoder: TextEncoder,
    prior: PriorModel,
    beta: float,
    train: EmbeddingDataset,
) -> float:
    """Greedy criterion plus beta * log p(token | initial + class prefix)."""
    base = greedy_criterion(token_id, prompts, class_index, encoder, train)
    if beta == 0.0:
        return base
    context = prompts.full_prompt(class_index)
    return base + beta * float(prior.next_token_logprobs(context)[token_id])


# ---------------------------------------------------------------------------
# Vectorized candidate scoring
# ---------------------------------------------------------------------------


def _candidate_rows(
    encoder: TextEncoder, prefix: tuple[int, ...], candidates: np.ndarray
) -> np.ndarray:
    extend = getattr(encoder, "extend_embeddings", None)
    if extend is not None:
        return extend(prefix, candidates)
    return np.stack([encoder.encode(prefix + (int(v),)) for v in candidates])


def candidate_risks(
    prompts: PromptSet,
    class_index: int,
    candidates: np.ndarray,
    encoder: TextEncoder,
    train: EmbeddingDataset,
) -> np.ndarray:
    """Training risk for every candidate extension of one class.

    Only the changed class row is recomputed per candidate; the other rows
    are evaluated once. Chunking keeps the (chunk, n, K) prediction tensor
    small. The scalar ``greedy_criterion`` is the reference this must match.
    """
    ce = class_embeddings(encoder, prompts, empty="zero")
    base_scores = train.embeddings @ ce.T
    prefix = prompts.full_prompt(class_index)
    rows = _candidate_rows(encoder, prefix, candidates)
    cand_scores = train.embeddings @ rows.T
    labels = train.labels
    n, num_classes = base_scores.shape
    risks = np.empty(len(candidates))
    chunk = max(1, int(4_000_000 // max(1, n * num_classes)))
    for start in range(0, len(candidates), chunk):
        stop = min(start + chunk, len(candidates))
        block = np.repeat(base_scores[None, :, :], stop - start, axis=0)
        block[:, :, class_index] = cand_scores[:, start:stop].T
        preds = np.argmax(block, axis=2)
        risks[start:stop] = np.count_nonzero(preds != labels[None, :], axis=1) / n
    return risks


def search_step(
    prompts: PromptSet,
    class_index: int,
    candidates,
    score_fn,
) -> tuple[int, float, PromptSet]:
    """Pick the criterion argmax over ``candidates`` (lowest token id on
    ties) and append it to class ``class_index``.

    ``score_fn`` maps a sorted candidate-id array to criterion values.
    """
    cands = np.unique(np.asarray(list(candidates), dtype=np.int64))
    if cands.size == 0:
        raise EmptyCandidatesError("empty candidate set")
    scores = np.asarray(score_fn(cands), dtype=np.float64)
    best = int(np.argmax(scores))
    token = int(cands[best])
    return token, float(scores[best]), prompts.with_token(class_index, token)


# ---------------------------------------------------------------------------
# Algorithm driver
# ---------------------------------------------------------------------------


def sequential_search(
    config: SearchConfig,
    train: EmbeddingDataset,
    encoder: TextEncoder,
    prior: PriorModel | None = None,
) -> tuple[PromptSet, SearchTrace]:
    """Run the sequential prompt search and return the prompts plus trace.

    Deterministic in (config, data, encoder, prior): class visit order is
    re-drawn from the seeded stream at every round, and every step appends
    exactly one token, so the result has ``config.length`` tokens per class.
    """
    if train.labels is None or train.num_classes is None:
        raise ValueError("search needs a labeled training set")
    if config.needs_prior and prior is None:
        raise ValueError(
            f"criterion={config.criterion!r} with policy={config.candidate_policy!r} "
            "requires a prior"
        )
    num_classes = train.num_classes
    prompts = PromptSet(tuple(() for _ in range(num_classes)), config.initial_prompt)
    rng = np.random.default_rng(config.seed)
    trace = SearchTrace()
    regularized = config.criterion == "regularized"
    cum_kl = 0.0 if regularized else None

    for round_index in range(config.length):
        order = rng.permutation(num_classes)
        for class_index in (int(k) for k in order):
            context = prompts.full_prompt(class_index)
            if config.candidate_policy == "full":
                cands = np.arange(_vocab_size_of(encoder, prior), dtype=np.int64)
            elif config.candidate_policy == "fixed_set":
                cands = np.asarray(config.fixed_candidates, dtype=np.int64)
            else:
                cands = candidate_set_lm(prior, context, config.lm_delta)
            if cands.size == 0:
                raise EmptyCandidatesError(
                    f"no candidates at round {round_index}, class {class_index}"
                )
            risks = candidate_risks(prompts, class_index, cands, encoder, train)
            scores = -risks
            logprobs = None
            if regularized and config.beta != 0.0:
                logprobs = prior.next_token_logprobs(context)[cands]
                scores = scores + config.beta * logprobs
            elif regularized:
                logprobs = prior.next_token_logprobs(context)[cands]
            best = int(np.argmax(scores))
            token = int(cands[best])
            prompts = prompts.with_token(class_index, token)
            if regularized:
                cum_kl = cum_kl - float(logprobs[best])
            trace.steps.append(
                SearchStep(
                    round_index,
                    class_index,
                    token,
                    float(scores[best]),
                    float(risks[best]),
                    int(cands.size),
                    cum_kl,
                )
            )
    return prompts, trace


def _vocab_size_of(encoder: TextEncoder, prior: PriorModel | None) -> int:
    size = getattr(encoder, "vocab_size", None)
    if size is None and prior is not None:
        size = prior.vocab_size
    if size is None:
        raise ValueError(
            "full candidate policy needs an encoder or prior that knows |V|"
        )
    return int(size)
