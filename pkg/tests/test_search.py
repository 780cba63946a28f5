"""Sequential search: criteria, steps, traces, and planted recovery."""

import itertools

import numpy as np
import pytest

from promptcert.core import EmbeddingDataset, PromptSet
from promptcert.encoder import ToyEncoder, class_embeddings, empirical_risk
from promptcert.prior import UniformPrior, train_ngram
from promptcert.search import (
    EmptyCandidatesError,
    SearchConfig,
    candidate_risks,
    greedy_criterion,
    regularized_criterion,
    search_step,
    sequential_search,
)


def planted_two_class(noise=0.02, per_class=50, seed=123):
    """One-hot token table over 4 tokens, class means at e0 and e1."""
    encoder = ToyEncoder.from_table(np.eye(4))
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    for c in (0, 1):
        center = np.eye(4)[c]
        pts = center[None, :] + noise * rng.standard_normal((per_class, 4))
        rows.append(pts / np.linalg.norm(pts, axis=1)[:, None])
        labels.append(np.full(per_class, c))
    train = EmbeddingDataset(np.concatenate(rows), np.concatenate(labels), 2)
    return encoder, train


def random_instance(seed, n_per_class=40, k=3, v=12, d=8):
    encoder = ToyEncoder(v, d, seed=seed)
    rng = np.random.default_rng(seed + 1)
    true_tokens = rng.choice(v, size=k, replace=False)
    rows, labels = [], []
    for c in range(k):
        center = encoder.encode([int(true_tokens[c])])
        pts = center[None, :] + 0.15 * rng.standard_normal((n_per_class, d))
        rows.append(pts / np.linalg.norm(pts, axis=1)[:, None])
        labels.append(np.full(n_per_class, c))
    train = EmbeddingDataset(np.concatenate(rows), np.concatenate(labels), k)
    return encoder, train


class TestCriteria:
    def test_value_range(self):
        encoder, train = planted_two_class()
        prompts = PromptSet(((2,), (3,)))
        for v in range(4):
            value = greedy_criterion(v, prompts, 0, encoder, train)
            assert -1.0 <= value <= 0.0

    def test_one_row_gain_is_one_over_n(self):
        # Two points, identity classes: appending token 1 to class 1 fixes
        # exactly the second row, so the criterion rises by exactly 1/2.
        encoder = ToyEncoder.from_table(np.eye(2))
        train = EmbeddingDataset(np.eye(2), [0, 1], 2)
        prompts = PromptSet(((0,), ()))
        worse = greedy_criterion(0, prompts, 1, encoder, train)
        better = greedy_criterion(1, prompts, 1, encoder, train)
        assert better - worse == pytest.approx(1.0 / 2.0, abs=1e-15)

    def test_matches_full_reencode_oracle(self):
        encoder, train = random_instance(7)
        prompts = PromptSet(((1,), (4,), (9,)))
        for v in range(encoder.vocab_size):
            fast = -candidate_risks(prompts, 1, np.array([v]), encoder, train)[0]
            extended = prompts.with_token(1, v)
            ce = class_embeddings(encoder, extended)
            assert fast == -empirical_risk(ce, train)
            assert fast == greedy_criterion(v, prompts, 1, encoder, train)

    def test_beta_zero_matches_greedy(self):
        encoder, train = random_instance(3)
        prior = UniformPrior(encoder.vocab_size)
        prompts = PromptSet(((0,), (1,), (2,)))
        for v in (0, 3, 7):
            assert regularized_criterion(
                v, prompts, 0, encoder, prior, 0.0, train
            ) == greedy_criterion(v, prompts, 0, encoder, train)

    def test_equal_risk_prior_breaks_tie(self):
        encoder, train = random_instance(5)
        prior = train_ngram(
            [np.random.default_rng(0).integers(0, 12, 300).tolist()],
            order=1,
            vocab_size=12,
        )
        prompts = PromptSet(((1,), (4,), (9,)))
        risks = candidate_risks(
            prompts, 2, np.arange(encoder.vocab_size), encoder, train
        )
        ties = np.flatnonzero(risks == risks.min())
        if len(ties) >= 2:
            lp = prior.next_token_logprobs(prompts.full_prompt(2))
            values = [
                regularized_criterion(int(v), prompts, 2, encoder, prior, 1.0, train)
                for v in ties
            ]
            assert int(ties[np.argmax(values)]) == int(ties[np.argmax(lp[ties])])


class TestSearchStep:
    def test_singleton(self):
        encoder, train = planted_two_class()
        prompts = PromptSet(((), ()))
        score = lambda cands: -candidate_risks(prompts, 0, cands, encoder, train)
        token, _, updated = search_step(prompts, 0, [2], score)
        assert token == 2
        assert updated.class_prompts[0] == (2,)

    def test_matches_exhaustive_enumeration(self):
        encoder, train = random_instance(11)
        prompts = PromptSet(((2,), (5,), (8,)))
        cands = np.arange(encoder.vocab_size)
        score = lambda c: -candidate_risks(prompts, 1, c, encoder, train)
        token, value, _ = search_step(prompts, 1, cands, score)
        oracle = [
            (greedy_criterion(int(v), prompts, 1, encoder, train), -int(v))
            for v in cands
        ]
        best = max(range(len(cands)), key=lambda i: oracle[i])
        assert token == int(cands[best])
        assert value == oracle[best][0]

    def test_tie_breaks_to_lowest_id(self):
        prompts = PromptSet(((), ()))
        token, _, _ = search_step(prompts, 0, [5, 3, 9], lambda c: np.zeros(len(c)))
        assert token == 3

    def test_empty_candidates(self):
        with pytest.raises(EmptyCandidatesError):
            search_step(PromptSet(((),)), 0, [], lambda c: np.zeros(len(c)))


class TestSequentialSearch:
    def test_planted_recovery_matches_joint_brute_force(self):
        encoder, train = planted_two_class()
        cfg = SearchConfig(length=1, seed=0)
        prompts, trace = sequential_search(cfg, train, encoder)
        # Joint brute force over all 16 single-token prompt pairs.
        best_risk, best_pair = None, None
        for v0, v1 in itertools.product(range(4), repeat=2):
            ce = class_embeddings(encoder, PromptSet(((v0,), (v1,))))
            risk = empirical_risk(ce, train)
            if best_risk is None or risk < best_risk:
                best_risk, best_pair = risk, (v0, v1)
        assert best_risk == 0.0
        assert best_pair == (0, 1)
        assert prompts.class_prompts == ((0,), (1,))
        assert trace.steps[-1].train_risk == 0.0

    def test_deterministic(self):
        encoder, train = random_instance(21)
        cfg = SearchConfig(length=3, seed=42)
        p1, t1 = sequential_search(cfg, train, encoder)
        p2, t2 = sequential_search(cfg, train, encoder)
        assert p1 == p2
        assert t1.steps == t2.steps

    def test_trace_risk_matches_recompute(self):
        encoder, train = random_instance(9)
        cfg = SearchConfig(length=2, seed=5)
        prompts, trace = sequential_search(cfg, train, encoder)
        state = PromptSet(tuple(() for _ in range(train.num_classes)))
        for step in trace.steps:
            state = state.with_token(step.class_index, step.token_id)
            ce = class_embeddings(encoder, state, empty="zero")
            assert step.train_risk == empirical_risk(ce, train)
        assert state == prompts

    def test_every_step_is_coordinatewise_optimal(self):
        # Replay the trace against the scalar criterion oracle.
        encoder, train = random_instance(31)
        cfg = SearchConfig(length=2, seed=17)
        _, trace = sequential_search(cfg, train, encoder)
        state = PromptSet(tuple(() for _ in range(train.num_classes)))
        for step in trace.steps:
            values = np.array(
                [
                    greedy_criterion(v, state, step.class_index, encoder, train)
                    for v in range(encoder.vocab_size)
                ]
            )
            expected = int(np.argmax(values))  # argmax takes the lowest id on ties
            assert step.token_id == expected
            assert step.criterion == values[expected]
            state = state.with_token(step.class_index, step.token_id)

    def test_regularized_beta_zero_equals_greedy_trace(self):
        encoder, train = random_instance(13)
        prior = UniformPrior(encoder.vocab_size)
        greedy, tg = sequential_search(
            SearchConfig(length=3, seed=7), train, encoder
        )
        reg, tr = sequential_search(
            SearchConfig(length=3, criterion="regularized", beta=0.0, seed=7),
            train,
            encoder,
            prior,
        )
        assert greedy == reg
        assert tg.tokens() == tr.tokens()

    def test_regularized_requires_prior(self):
        encoder, train = random_instance(2)
        with pytest.raises(ValueError, match="prior"):
            sequential_search(
                SearchConfig(length=1, criterion="regularized"), train, encoder
            )

    def test_lm_delta_policy(self):
        encoder, train = random_instance(19)
        prior = train_ngram(
            [np.random.default_rng(4).integers(0, 12, 500).tolist()],
            order=1,
            vocab_size=12,
        )
        cfg = SearchConfig(length=2, candidate_policy="lm_delta", lm_delta=0.05, seed=3)
        prompts, trace = sequential_search(cfg, train, encoder, prior)
        assert all(s.candidate_count <= encoder.vocab_size for s in trace.steps)
        full, _ = sequential_search(
            SearchConfig(length=2, candidate_policy="lm_delta", lm_delta=1.0, seed=3),
            train,
            encoder,
            prior,
        )
        unrestricted, _ = sequential_search(SearchConfig(length=2, seed=3), train, encoder)
        assert full == unrestricted  # delta=1 keeps the whole vocabulary

    def test_fixed_set_policy_restricts_tokens(self):
        encoder, train = random_instance(23)
        allowed = (0, 2, 4, 6, 8, 10)
        cfg = SearchConfig(length=2, candidate_policy="fixed_set", fixed_candidates=allowed, seed=1)
        prompts, _ = sequential_search(cfg, train, encoder)
        for class_prompt in prompts.class_prompts:
            assert set(class_prompt) <= set(allowed)

    def test_initial_prompt_prefixes_all_classes(self):
        encoder, train = random_instance(29)
        cfg = SearchConfig(length=1, initial_prompt=(3, 5), seed=2)
        prompts, _ = sequential_search(cfg, train, encoder)
        assert prompts.initial_prompt == (3, 5)
        assert all(len(p) == 1 for p in prompts.class_prompts)

    def test_regularized_cum_kl_tracks_choices(self):
        encoder, train = random_instance(37)
        prior = train_ngram(
            [np.random.default_rng(6).integers(0, 12, 400).tolist()],
            order=2,
            vocab_size=12,
        )
        cfg = SearchConfig(length=2, criterion="regularized", beta=0.5, seed=9)
        prompts, trace = sequential_search(cfg, train, encoder, prior)
        state = PromptSet(tuple(() for _ in range(train.num_classes)))
        total = 0.0
        for step in trace.steps:
            lp = prior.next_token_logprobs(state.full_prompt(step.class_index))
            total += -float(lp[step.token_id])
            assert step.cum_kl == pytest.approx(total, abs=1e-12)
            state = state.with_token(step.class_index, step.token_id)
