"""Priors: n-gram scoring, KL, candidate sets, pruning, and the bridge."""

import math
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptcert.core import PromptSet
from promptcert.prior import (
    BridgeError,
    KlPolicy,
    OracleBridgePrior,
    PriorModel,
    UniformPrior,
    candidate_set_lm,
    point_mass_kl,
    prune_vocab_ksigma,
    sequence_logprob,
    train_ngram,
)

STUB = Path(__file__).parent / "oracle_stub.py"


class FixedLogitsPrior(PriorModel):
    """Context-independent logits, for worked examples."""

    def __init__(self, logits):
        self._fixed = np.asarray(logits, dtype=np.float64)
        self.vocab_size = len(self._fixed)
        self.temperature = 1.0

    def _logits(self, context):
        return self._fixed.copy()


class TestNGram:
    def test_unigram_add_one_worked(self):
        # corpus "a b a b": counts a:2, b:2 -> add-one probs (3/6, 3/6)
        prior = train_ngram([[0, 1, 0, 1]], order=1, vocab_size=2)
        lp = prior.next_token_logprobs(())
        assert np.allclose(lp, [math.log(0.5), math.log(0.5)])

    def test_bigram_add_one_worked(self):
        # p(b | a) = (2 + 1) / (2 + 2) = 0.75
        prior = train_ngram([[0, 1, 0, 1]], order=2, vocab_size=2)
        lp = prior.next_token_logprobs((0,))
        assert lp[1] == pytest.approx(math.log(0.75), abs=1e-12)
        assert lp[1] == pytest.approx(-0.2877, abs=1e-4)

    def test_train_counts_worked(self):
        prior = train_ngram([[0, 1]], order=1, vocab_size=2)
        assert prior.counts[()] == {0: 1, 1: 1}
        bigram = train_ngram([[0, 1, 0, 1]], order=2, vocab_size=2)
        assert bigram.counts[(0,)] == {1: 2}
        assert bigram.counts[(1,)] == {0: 1}

    def test_retraining_idempotent(self):
        a = train_ngram([[0, 1, 1]], order=2, vocab_size=3)
        b = train_ngram([[0, 1, 1]], order=2, vocab_size=3)
        assert a.counts == b.counts and a.totals == b.totals

    def test_empty_corpus_rejected(self):
        with pytest.raises(ValueError, match="corpus"):
            train_ngram([], order=1, vocab_size=2)

    def test_unseen_context_uniform(self):
        prior = train_ngram([[0, 1]], order=3, vocab_size=4)
        lp = prior.next_token_logprobs((3, 3))
        assert np.allclose(lp, math.log(1 / 4))

    @given(
        st.integers(min_value=1, max_value=3),
        st.lists(
            st.lists(st.integers(min_value=0, max_value=5), min_size=1, max_size=10),
            min_size=1,
            max_size=5,
        ),
        st.lists(st.integers(min_value=0, max_value=5), max_size=4),
    )
    @settings(max_examples=80, deadline=None)
    def test_normalization_property(self, order, corpus, context):
        prior = train_ngram(corpus, order=order, vocab_size=6)
        lp = prior.next_token_logprobs(context)
        lse = np.log(np.exp(lp - lp.max()).sum()) + lp.max()
        assert abs(lse) <= 1e-6
        assert np.all(lp < 0)  # strictly positive smoothed probabilities


class TestSequenceLogprob:
    def test_uniform_product(self):
        prior = UniformPrior(4)
        assert sequence_logprob(prior, [0, 3]) == pytest.approx(
            2 * math.log(1 / 4), abs=1e-12
        )
        assert sequence_logprob(prior, [2, 2]) == pytest.approx(-2.7726, abs=1e-4)

    def test_single_token_matches_next(self):
        prior = train_ngram([[0, 1, 2, 0, 1]], order=2, vocab_size=3)
        lp = prior.next_token_logprobs((2,))
        assert sequence_logprob(prior, [1], context=(2,)) == pytest.approx(
            float(lp[1]), abs=1e-15
        )

    def test_chain_rule(self):
        prior = train_ngram([[0, 1, 2, 0, 1, 1]], order=2, vocab_size=3)
        lhs = sequence_logprob(prior, [0, 1])
        rhs = sequence_logprob(prior, [0]) + sequence_logprob(prior, [1], context=(0,))
        assert lhs == pytest.approx(rhs, abs=1e-12)

    def test_chain_rule_three_tokens_explicit(self):
        prior = train_ngram([[2, 0, 1, 2, 2, 0]], order=3, vocab_size=3)
        toks = (2, 0, 1)
        explicit = (
            float(prior.next_token_logprobs(())[2])
            + float(prior.next_token_logprobs((2,))[0])
            + float(prior.next_token_logprobs((2, 0))[1])
        )
        assert sequence_logprob(prior, toks) == pytest.approx(explicit, abs=1e-12)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ValueError):
            sequence_logprob(UniformPrior(3), [])


class TestPointMassKl:
    def test_uniform_worked(self):
        prior = UniformPrior(4)
        kl = point_mass_kl(prior, PromptSet(((0,), (1,))))
        assert kl == pytest.approx(2 * math.log(4), abs=1e-12)
        assert kl == pytest.approx(2.7726, abs=1e-4)

    def test_nonnegative(self):
        prior = train_ngram([[0, 1, 2]], order=1, vocab_size=3)
        kl = point_mass_kl(prior, PromptSet(((0, 1), (2,), (1, 1))))
        assert kl >= 0.0

    def test_uniform_equals_uc_complexity_bitwise(self):
        for k, length, v in [(2, 3, 7), (4, 1, 50), (3, 4, 128), (5, 2, 17)]:
            prior = UniformPrior(v)
            prompts = PromptSet(tuple(tuple([i % v] * length) for i in range(k)))
            assert point_mass_kl(prior, prompts) == k * length * math.log(v)

    def test_initial_prompt_policy(self):
        prior = train_ngram([[0, 1, 2, 0, 1]], order=2, vocab_size=3)
        prompts = PromptSet(((1,), (2,)), initial_prompt=(0,))
        charged = point_mass_kl(prior, prompts, KlPolicy(initial_prompt_in_kl=True))
        free = point_mass_kl(prior, prompts, KlPolicy(initial_prompt_in_kl=False))
        # Charged mode pays for the initial token once per class.
        init_cost = -2 * sequence_logprob(prior, [0])
        assert charged == pytest.approx(free + init_cost, abs=1e-12)
        assert charged > free


class TestCandidateSet:
    def test_worked_example(self):
        prior = FixedLogitsPrior(np.log([0.6, 0.35, 0.05]))
        assert candidate_set_lm(prior, (), 0.3).tolist() == [0, 1]

    def test_delta_zero_argmax_only(self):
        prior = FixedLogitsPrior(np.log([0.6, 0.35, 0.05]))
        assert candidate_set_lm(prior, (), 0.0).tolist() == [0]

    def test_delta_one_full_vocab(self):
        prior = FixedLogitsPrior(np.log([0.98, 0.01, 0.01]))
        assert candidate_set_lm(prior, (), 1.0).tolist() == [0, 1, 2]

    def test_contains_argmax_and_monotone(self):
        prior = train_ngram([[0, 1, 2, 3, 0, 0, 2]], order=1, vocab_size=4)
        lp = prior.next_token_logprobs(())
        best = int(np.argmax(lp))
        sizes = []
        for delta in (0.0, 0.05, 0.1, 0.3, 1.0):
            cands = candidate_set_lm(prior, (), delta)
            assert best in cands
            sizes.append(len(cands))
        assert sizes == sorted(sizes)


class TestKSigmaPruning:
    def test_worked_logit_example(self):
        # logits (5, 4, 1, 0): sigma ~ 2.0616, k=1 threshold ~ 2.9384 -> {0, 1}
        prior = FixedLogitsPrior([5.0, 4.0, 1.0, 0.0])
        kept = prune_vocab_ksigma(prior, [()], 1.0)
        assert kept.tolist() == [0, 1]

    def test_nested_in_k(self):
        prior = train_ngram(
            [np.random.default_rng(5).integers(0, 20, 200).tolist()],
            order=1,
            vocab_size=20,
        )
        sets = [set(prune_vocab_ksigma(prior, [()], k).tolist()) for k in (1, 2, 3)]
        assert sets[0] <= sets[1] <= sets[2]

    def test_union_across_classes(self):
        prior = train_ngram([[0, 1, 0, 1, 2, 3]], order=2, vocab_size=4)
        joint = set(prune_vocab_ksigma(prior, [(0,), (2,)], 1.0).tolist())
        a = set(prune_vocab_ksigma(prior, [(0,)], 1.0).tolist())
        b = set(prune_vocab_ksigma(prior, [(2,)], 1.0).tolist())
        assert joint == a | b


class TestTemperature:
    def test_default_identity(self):
        prior = train_ngram([[0, 1, 1]], order=1, vocab_size=2)
        hot = train_ngram([[0, 1, 1]], order=1, vocab_size=2)
        hot.temperature = 1.0
        assert np.array_equal(
            prior.next_token_logprobs(()), hot.next_token_logprobs(())
        )

    def test_high_temperature_flattens(self):
        prior = train_ngram([[0, 0, 0, 1]], order=1, vocab_size=2)
        cold = prior.next_token_logprobs(())
        prior.temperature = 10.0
        hot = prior.next_token_logprobs(())
        assert (cold.max() - cold.min()) > (hot.max() - hot.min())
        lse = np.log(np.exp(hot).sum())
        assert abs(lse) <= 1e-6


def _bridge(*extra, vocab_size=8, timeout=10.0):
    cmd = [sys.executable, str(STUB), "--vocab-size", str(vocab_size), *extra]
    return OracleBridgePrior(cmd, vocab_size=vocab_size, timeout=timeout)


def _stub_logprobs(vocab_size, context):
    shift = 0.7 * sum(context)
    raw = np.array([math.sin(v + shift) for v in range(vocab_size)])
    return raw - (np.log(np.exp(raw - raw.max()).sum()) + raw.max())


class TestOracleBridge:
    def test_next_matches_stub_model(self):
        with _bridge() as prior:
            lp = prior.next_token_logprobs((1, 2))
            assert np.allclose(lp, _stub_logprobs(8, (1, 2)), atol=1e-9)

    def test_logits_and_pruning_through_bridge(self):
        with _bridge() as prior:
            kept = prune_vocab_ksigma(prior, [(0,)], 2.0)
            assert len(kept) > 0
            nested = prune_vocab_ksigma(prior, [(0,)], 3.0)
            assert set(kept.tolist()) <= set(nested.tolist())

    def test_score_used_for_sequences(self):
        with _bridge() as prior:
            total = sequence_logprob(prior, (1, 3), context=(2,))
            expected = float(
                _stub_logprobs(8, (2,))[1] + _stub_logprobs(8, (2, 1))[3]
            )
            assert total == pytest.approx(expected, abs=1e-9)

    def test_point_mass_kl_via_score(self):
        with _bridge() as prior:
            prompts = PromptSet(((1,), (2, 3)))
            kl = point_mass_kl(prior, prompts)
            expected = -(
                float(_stub_logprobs(8, ())[1])
                + float(_stub_logprobs(8, ())[2])
                + float(_stub_logprobs(8, (2,))[3])
            )
            assert kl == pytest.approx(expected, abs=1e-9)

    def test_out_of_order_responses_matched_by_id(self):
        with _bridge("--prepend-foreign") as prior:
            lp = prior.next_token_logprobs(())
            assert np.allclose(lp, _stub_logprobs(8, ()), atol=1e-9)
            assert prior.score_sequence((1,), ()) == pytest.approx(
                float(_stub_logprobs(8, ())[1]), abs=1e-9
            )

    def test_error_response_raises(self):
        with _bridge("--error-method", "logits") as prior:
            with pytest.raises(BridgeError, match="simulated failure"):
                prior.next_token_logits(())

    def test_timeout_raises(self):
        with _bridge("--silent-method", "next", timeout=0.5) as prior:
            with pytest.raises(BridgeError, match="did not answer"):
                prior.next_token_logprobs(())

    def test_closed_stream_raises(self):
        prior = _bridge()
        prior.close()
        with pytest.raises(BridgeError):
            prior.next_token_logprobs(())
