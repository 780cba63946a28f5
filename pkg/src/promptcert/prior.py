"""Language-model priors over token sequences.

Provides next-token log-probabilities, sequence scoring, the point-mass KL
(negative log-likelihood of a prompt set under the prior), probability-gap
candidate sets, and k-sigma logit pruning. Built-in priors are an add-one
smoothed n-gram and the uniform prior; ``OracleBridgePrior`` talks to an
external process over a newline-delimited JSON protocol for real LMs.
"""

from __future__ import annotations

import json
import math
import queue
import subprocess
import threading
from collections import Counter
from dataclasses import dataclass

import numpy as np


class BridgeError(RuntimeError):
    """The external oracle timed out, closed, or violated the protocol."""


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    m = logits.max()
    return logits - (m + np.log(np.exp(logits - m).sum()))


class PriorModel:
    """Base class: subclasses set ``vocab_size`` and implement ``_logits``.

    ``next_token_logprobs`` applies the temperature to the logits and
    renormalizes, so every returned vector satisfies logsumexp == 0 up to
    float rounding.
    """

    vocab_size: int
    temperature: float = 1.0

    def _logits(self, context: tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError

    def _check_context(self, context) -> tuple[int, ...]:
        ctx = tuple(int(t) for t in context)
        for t in ctx:
            if not 0 <= t < self.vocab_size:
                raise ValueError(f"context token {t} out of range for |V|={self.vocab_size}")
        return ctx

    def next_token_logits(self, context=()) -> np.ndarray:
        return self._logits(self._check_context(context))

    def next_token_logprobs(self, context=()) -> np.ndarray:
        logits = self.next_token_logits(context)
        if self.temperature != 1.0:
            logits = logits / self.temperature
        return _log_softmax(logits)


class UniformPrior(PriorModel):
    """Every token equally likely in every context."""

    def __init__(self, vocab_size: int, temperature: float = 1.0):
        if vocab_size < 2:
            raise ValueError("vocab_size must be at least 2")
        self.vocab_size = vocab_size
        self.temperature = temperature

    def _logits(self, context):
        return np.zeros(self.vocab_size)


class NGramPrior(PriorModel):
    """Add-one smoothed n-gram model over token ids.

    The conditioning key is the last (order - 1) context tokens; contexts
    never seen in training fall back to the uniform add-one distribution.
    Probabilities are strictly positive, so sequence scores are finite.
    """

    def __init__(
        self,
        order: int,
        vocab_size: int,
        counts: dict[tuple[int, ...], Counter],
        totals: dict[tuple[int, ...], int],
        temperature: float = 1.0,
    ):
        if order < 1:
            raise ValueError("order must be >= 1")
        self.order = order
        self.vocab_size = vocab_size
        self.counts = counts
        self.totals = totals
        self.temperature = temperature

    def _context_key(self, context: tuple[int, ...]) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        return tuple(context[-(self.order - 1):])

    def _logits(self, context):
        key = self._context_key(context)
        total = self.totals.get(key, 0)
        denom = total + self.vocab_size
        logits = np.full(self.vocab_size, -math.log(denom))
        for token, c in self.counts.get(key, {}).items():
            logits[token] = math.log((c + 1) / denom)
        return logits


def train_ngram(corpus, order: int, vocab_size: int) -> NGramPrior:
    """Accumulate sliding-window counts over token-id sequences.

    Windows never cross sequence boundaries and no boundary markers are
    added, so an order-n model sees len(seq) - n + 1 windows per sequence.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    sequences = [tuple(int(t) for t in seq) for seq in corpus]
    if not sequences:
        raise ValueError("corpus must contain at least one sequence")
    counts: dict[tuple[int, ...], Counter] = {}
    totals: dict[tuple[int, ...], int] = {}
    for seq in sequences:
        for t in seq:
            if not 0 <= t < vocab_size:
                raise ValueError(f"corpus token {t} out of range for |V|={vocab_size}")
        for i in range(len(seq) - order + 1):
            ctx = seq[i : i + order - 1]
            nxt = seq[i + order - 1]
            counts.setdefault(ctx, Counter())[nxt] += 1
            totals[ctx] = totals.get(ctx, 0) + 1
    return NGramPrior(order, vocab_size, counts, totals)


# ---------------------------------------------------------------------------
# Scoring and the point-mass KL
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class KlPolicy:
    """Whether the shared initial prompt is charged in the point-mass KL.

    Charging it (the default) keeps the certificate valid even if the
    initial prompt was tuned on data; the free-conditioning mode matches
    evaluations whose prefix was chosen independently of the sample.
    """

    initial_prompt_in_kl: bool = True


def _token_logprobs(prior: PriorModel, tokens, context) -> list[float]:
    ctx = list(context)
    out = []
    for t in tokens:
        out.append(float(prior.next_token_logprobs(ctx)[t]))
        ctx.append(t)
    return out


def sequence_logprob(prior: PriorModel, tokens, context=()) -> float:
    """Chain-rule log-probability of ``tokens`` given ``context``."""
    toks = tuple(tokens)
    if not toks:
        raise ValueError("cannot score an empty token sequence")
    score = getattr(prior, "score_sequence", None)
    if score is not None:
        return score(toks, tuple(context))
    return math.fsum(_token_logprobs(prior, toks, context))


def point_mass_kl(prior: PriorModel, prompts, policy: KlPolicy = KlPolicy()) -> float:
    """KL(point mass at ``prompts`` || prior) = negative log-likelihood.

    With ``initial_prompt_in_kl`` the initial prompt is scored once per
    class from empty conditioning; otherwise it only conditions the class
    tokens and costs nothing.
    """
    initial = prompts.initial_prompt
    score = getattr(prior, "score_sequence", None)
    pieces: list[float] = []
    for k in range(prompts.num_classes):
        class_toks = prompts.class_prompts[k]
        if policy.initial_prompt_in_kl and initial:
            toks, ctx = initial + class_toks, ()
        else:
            toks, ctx = class_toks, initial
        if not toks:
            raise ValueError(f"class {k} has an empty prompt")
        if score is not None:
            pieces.append(score(tuple(toks), tuple(ctx)))
        else:
            pieces.extend(_token_logprobs(prior, toks, ctx))
    return -math.fsum(pieces)


def candidate_set_lm(prior: PriorModel, context, delta: float) -> np.ndarray:
    """Token ids whose probability gap to the best token is at most ``delta``.

    The gap is taken in probability space: max_v' p(v') - p(v) <= delta.
    Always contains the argmax token; delta=1 keeps the full vocabulary.
    """
    if delta < 0:
        raise ValueError("delta must be >= 0")
    probs = np.exp(prior.next_token_logprobs(context))
    return np.flatnonzero(probs.max() - probs <= delta).astype(np.int64)


def prune_vocab_ksigma(prior: PriorModel, class_name_contexts, k: float) -> np.ndarray:
    """Union over class contexts of tokens whose next-token logit is within
    k population standard deviations of the maximum logit."""
    if k <= 0:
        raise ValueError("k must be > 0")
    keep: set[int] = set()
    for ctx in class_name_contexts:
        logits = prior.next_token_logits(ctx)
        sigma = float(logits.std())
        keep.update(np.flatnonzero(logits >= logits.max() - k * sigma).tolist())
    return np.array(sorted(keep), dtype=np.int64)


# ---------------------------------------------------------------------------
# External oracle bridge
# ---------------------------------------------------------------------------


class OracleBridgePrior(PriorModel):
    """Prior served by an external process over stdin/stdout JSON lines.

    Requests carry a monotonically increasing id; responses may arrive in
    any order and are matched by id. A missing, late, or malformed response
    raises ``BridgeError``, never a default value. Callers are serialized
    over the single connection.
    """

    def __init__(
        self,
        command,
        vocab_size: int,
        temperature: float = 1.0,
        timeout: float = 30.0,
    ):
        self.vocab_size = vocab_size
        self.temperature = temperature
        self.timeout = timeout
        self._proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            text=True,
            bufsize=1,
        )
        self._lock = threading.Lock()
        self._next_id = 0
        self._pending: dict[int, dict] = {}
        self._lines: queue.Queue = queue.Queue()
        self._reader = threading.Thread(target=self._read_loop, daemon=True)
        self._reader.start()

    def _read_loop(self) -> None:
        assert self._proc.stdout is not None
        for line in self._proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _roundtrip(self, payload: dict) -> dict:
        with self._lock:
            req_id = self._next_id
            self._next_id += 1
            payload = {"id": req_id, **payload}
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.write(json.dumps(payload) + "\n")
                self._proc.stdin.flush()
            except (OSError, ValueError) as exc:
                raise BridgeError(f"oracle process is not writable: {exc}") from exc
            while True:
                if req_id in self._pending:
                    response = self._pending.pop(req_id)
                    break
                try:
                    line = self._lines.get(timeout=self.timeout)
                except queue.Empty:
                    raise BridgeError(
                        f"oracle did not answer request {req_id} within {self.timeout}s"
                    ) from None
                if line is None:
                    raise BridgeError("oracle closed its output stream")
                if not line.strip():
                    continue
                try:
                    doc = json.loads(line)
                    rid = int(doc["id"])
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise BridgeError(f"malformed oracle response: {line!r}") from exc
                if rid == req_id:
                    response = doc
                    break
                self._pending[rid] = doc
        if "error" in response:
            raise BridgeError(f"oracle error: {response['error']}")
        return response

    def _vector_request(self, method: str, context: tuple[int, ...]) -> np.ndarray:
        doc = self._roundtrip({"method": method, "context_tokens": list(context)})
        try:
            tokens = doc["tokens"]
            values = doc["logprobs"]
        except KeyError as exc:
            raise BridgeError(f"oracle response missing field {exc}") from exc
        if len(tokens) != len(values):
            raise BridgeError("oracle returned mismatched tokens/logprobs lengths")
        vec = np.full(self.vocab_size, np.nan)
        vec[np.asarray(tokens, dtype=np.int64)] = values
        if np.isnan(vec).any():
            raise BridgeError(
                f"oracle {method} response does not cover the full vocabulary"
            )
        return vec

    def _logits(self, context):
        return self._vector_request("logits", context)

    def next_token_logprobs(self, context=()) -> np.ndarray:
        ctx = self._check_context(context)
        vec = self._vector_request("next", ctx)
        if self.temperature != 1.0:
            vec = vec / self.temperature
        return _log_softmax(vec)

    def score_sequence(self, tokens: tuple[int, ...], context: tuple[int, ...]) -> float:
        """String-level sequence score reported by the oracle (its own
        tokenizer decides the attribution; the total is what the KL uses)."""
        doc = self._roundtrip(
            {
                "method": "score",
                "context_tokens": list(context),
                "tokens": list(tokens),
            }
        )
        try:
            return float(doc["logprob"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BridgeError(f"oracle score response missing logprob: {doc}") from exc

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                assert self._proc.stdin is not None
                self._proc.stdin.close()
            except OSError:
                pass
            try:
                self._proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                self._proc.kill()
                self._proc.wait()

    def __enter__(self) -> "OracleBridgePrior":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
