"""Mask-based word importance ranking against a closed-form stub victim."""

from __future__ import annotations

import math

import pytest

from advswap.core import AttackConfig, Sample
from advswap.gateways import LexiconVictim
from advswap.importance import (
    candidate_limit,
    effective_mask_token,
    importance_scores,
    mask_word,
    rank_words,
)


def sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


class TestMaskWord:
    def test_middle_word(self, annotator):
        tokens = annotator.annotate("a fine film")
        assert mask_word(tokens, 1, "[UNK]") == "a [UNK] film"

    def test_single_word_boundary(self, annotator):
        tokens = annotator.annotate("fine")
        assert mask_word(tokens, 0, "[UNK]") == "[UNK]"

    def test_punctuation_survives(self, annotator):
        tokens = annotator.annotate("truly fine, the film!")
        assert mask_word(tokens, 1, "[UNK]") == "truly [UNK], the film!"

    def test_out_of_range(self, annotator):
        tokens = annotator.annotate("a fine film")
        with pytest.raises(ValueError):
            mask_word(tokens, 3, "[UNK]")

    def test_masking_changes_exactly_one_word(self, annotator):
        # property oracle over a handful of fixed texts
        texts = [
            "the plot drags but the acting shines",
            "never watch this mess of a movie",
            "a solid cast elevates thin material",
        ]
        for text in texts:
            tokens = annotator.annotate(text)
            for position in range(tokens.n):
                masked = mask_word(tokens, position, "[UNK]")
                masked_words = masked.split(" ")
                diffs = [
                    i for i, (a, b) in enumerate(zip(tokens.words, masked_words)) if a != b
                ]
                assert diffs == [position]


def test_effective_mask_token_prefers_victim_metadata(config):
    victim = LexiconVictim({}, unk_token="<unk>")
    assert effective_mask_token(config, victim) == "<unk>"
    victim_plain = LexiconVictim({}, unk_token=None)
    assert effective_mask_token(config, victim_plain) == "[UNK]"


def test_candidate_limit():
    assert candidate_limit(0.4, 10) == 4
    assert candidate_limit(0.4, 1) == 1  # at least one when anything is eligible
    assert candidate_limit(0.4, 0) == 0


class TestRankWords:
    def test_strongest_word_ranks_first(self, annotator, config):
        victim = LexiconVictim({"fine": 2.0})
        tokens = annotator.annotate("truly a fine film overall")
        sample = Sample(id="s", text="truly a fine film overall", gold_label=1)
        ranked = rank_words(sample, tokens, config, victim)
        assert ranked.entries[0].word == "fine"
        # masking the only weighted word drops p from sigmoid(2) to 0.5
        assert ranked.entries[0].score == pytest.approx(sigmoid(2.0) - 0.5, abs=1e-12)

    def test_ignored_word_scores_exactly_zero(self, annotator, config):
        victim = LexiconVictim({"fine": 2.0})
        text = "truly a fine film overall"
        sample = Sample(id="s", text=text, gold_label=1)
        tokens = annotator.annotate(text)
        scores = importance_scores(sample, tokens, config, victim)
        by_word = {s.word: s.score for s in scores}
        assert by_word["film"] == 0.0
        assert by_word["overall"] == 0.0

    def test_all_stopword_text_gives_empty_list(self, annotator, config):
        victim = LexiconVictim({})
        text = "it was what it was"
        sample = Sample(id="s", text=text, gold_label=0)
        tokens = annotator.annotate(text)
        assert all(tokens.stopword_mask)
        ranked = rank_words(sample, tokens, config, victim)
        assert ranked.entries == ()

    def test_query_accounting_is_eligible_plus_one(self, annotator, config):
        victim = LexiconVictim({"fine": 1.0})
        text = "the fine film kept the audience happy"
        sample = Sample(id="s", text=text, gold_label=1)
        tokens = annotator.annotate(text)
        n_eligible = len(tokens.eligible_positions())
        rank_words(sample, tokens, config, victim)
        assert victim.queries_observed == n_eligible + 1

    def test_entries_exclude_masked_positions(self, annotator, config):
        victim = LexiconVictim({"stunning": 1.5})
        text = "Rita Hayworth is stunning in this film"
        sample = Sample(id="s", text=text, gold_label=1)
        tokens = annotator.annotate(text)
        ranked = rank_words(sample, tokens, config, victim)
        for entry in ranked.entries:
            assert not tokens.ner_mask[entry.position]
            assert not tokens.stopword_mask[entry.position]

    def test_candidate_list_is_prefix_of_full_sort(self, annotator, config):
        victim = LexiconVictim({"fine": 1.0, "dull": -0.5, "story": 0.25})
        text = "the fine story turned dull near the ending"
        sample = Sample(id="s", text=text, gold_label=1)
        tokens = annotator.annotate(text)
        full = importance_scores(sample, tokens, config, victim)
        ranked = rank_words(sample, tokens, config, victim)
        assert list(ranked.entries) == full[: len(ranked.entries)]
        limit = candidate_limit(config.theta_max_mod_rate, len(full))
        assert len(ranked.entries) == min(limit, len(full))

    def test_scores_match_brute_force_oracle(self, annotator, config):
        # independent oracle: build masked texts by joining word lists and
        # recompute the stub's closed-form probabilities directly
        weights = {"fine": 1.3, "dull": -0.7, "story": 0.4, "acting": 0.9}
        victim = LexiconVictim(weights)
        text = "the fine story had dull acting throughout"
        sample = Sample(id="s", text=text, gold_label=1)
        tokens = annotator.annotate(text)

        def oracle_p(words: list[str]) -> float:
            return sigmoid(sum(weights.get(w.lower(), 0.0) for w in words))

        words = list(tokens.words)
        p_orig = oracle_p(words)
        expected = []
        for i in tokens.eligible_positions():
            masked = words[:i] + ["[UNK]"] + words[i + 1 :]
            expected.append((i, p_orig - oracle_p(masked)))
        expected.sort(key=lambda t: (-t[1], t[0]))

        got = importance_scores(sample, tokens, config, victim)
        assert len(got) == len(expected)
        for score, (pos, value) in zip(got, expected):
            assert score.position == pos
            assert score.score == pytest.approx(value, abs=1e-9)

    def test_negative_scores_kept_in_order(self, annotator):
        config = AttackConfig(theta_max_mod_rate=1.0)
        victim = LexiconVictim({"dull": -1.0, "fine": 1.0})
        text = "fine acting meets dull writing"
        sample = Sample(id="s", text=text, gold_label=1)
        tokens = annotator.annotate(text)
        ranked = rank_words(sample, tokens, config, victim)
        scores = [e.score for e in ranked.entries]
        assert scores == sorted(scores, reverse=True)
        assert scores[-1] < 0  # masking "dull" raises p, so its score is negative
