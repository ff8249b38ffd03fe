"""Synonym providers, reply parsing, caching, and the constraint stack."""

from __future__ import annotations

import random

import numpy as np
import pytest

from advswap.core import AttackConfig, Edit, Perturbation
from advswap.gateways import (
    DictionaryLLM,
    EmbeddingStore,
    FailingEncoder,
    FlakyLLM,
    EncoderUnavailable,
    StaticLLM,
    StubFillMask,
)
from advswap.substitution import (
    CandidateReplacement,
    ConstraintVerdict,
    EmbeddingSynonymProvider,
    LLMSynonymProvider,
    MlmSynonymProvider,
    ProviderConfigError,
    SynonymCache,
    SynonymRequest,
    build_provider,
    check_candidate,
    constraint_checks,
    match_case,
    parse_synonym_reply,
    render_prompt,
    load_prompt_template,
)

from conftest import make_gateways


class TestParseReply:
    def test_numbered_list_drops_self_replacement(self):
        reply = "1. advantaged\n2. favored\n3. rewarded"
        assert parse_synonym_reply(reply, "rewarded", 10) == ["advantaged", "favored"]

    def test_prose_prefix_stripped(self):
        reply = "Sure! Here are synonyms: happy, glad"
        assert parse_synonym_reply(reply, "joyful", 10) == ["happy", "glad"]

    def test_multi_word_items_dropped(self):
        reply = "very happy, quite glad, over the moon"
        assert parse_synonym_reply(reply, "joyful", 10) == []

    def test_quotes_and_numbering_stripped(self):
        reply = '1) "bright"\n2) ‘shiny’\n- polished.'
        assert parse_synonym_reply(reply, "clean", 10) == ["bright", "shiny", "polished"]

    def test_truncates_to_k(self):
        reply = "a1, a2, a3, a4, a5"
        assert parse_synonym_reply(reply, "x", 3) == ["a1", "a2", "a3"]

    def test_case_insensitive_self_and_dedupe(self):
        reply = "Fine, fine, FINE, great, Great"
        assert parse_synonym_reply(reply, "fine", 10) == ["great"]

    def test_empty_reply(self):
        assert parse_synonym_reply("", "x", 5) == []

    def test_hyphenated_and_apostrophe_words_kept(self):
        reply = "first-rate, top-notch"
        assert parse_synonym_reply(reply, "great", 5) == ["first-rate", "top-notch"]


def test_render_prompt_handles_braces():
    template = load_prompt_template()
    prompt = render_prompt(template, "weird {text} here", "weird", 3)
    assert "weird {text} here" in prompt
    assert "'weird'" in prompt
    assert "3" in prompt


def test_prompt_template_override(tmp_path):
    path = tmp_path / "prompt.txt"
    path.write_text("find {k} words like {word} in: {sentence}\n")
    template = load_prompt_template(path)
    assert render_prompt(template, "s", "w", 2) == "find 2 words like w in: s"


class TestLLMProvider:
    def test_dictionary_roundtrip(self):
        provider = LLMSynonymProvider(DictionaryLLM({"rewarded": ["advantaged", "favored", "rewarded"]}))
        req = SynonymRequest(sentence="you will be rewarded", position=3, word="rewarded", k=15)
        out = provider.candidates(req)
        assert [c.word for c in out] == ["advantaged", "favored"]
        assert [c.provider_rank for c in out] == [0, 1]

    def test_unavailable_gives_empty_list(self):
        provider = LLMSynonymProvider(FlakyLLM(StaticLLM("x"), failures=99))
        req = SynonymRequest(sentence="a fine film", position=1, word="fine", k=5)
        assert provider.candidates(req) == []

    def test_malformed_reply_counted(self):
        provider = LLMSynonymProvider(StaticLLM("I would rather not say anything useful"))
        req = SynonymRequest(sentence="a fine film", position=1, word="fine", k=5)
        assert provider.candidates(req) == []
        assert provider.malformed_replies == 1

    def test_cache_is_semantically_transparent(self, tmp_path):
        gateway = DictionaryLLM({"fine": ["great", "solid"]})
        cache = SynonymCache(tmp_path / "cache.jsonl")
        provider = LLMSynonymProvider(gateway, cache=cache)
        req = SynonymRequest(sentence="a fine film", position=1, word="fine", k=5)
        first = provider.candidates(req)
        second = provider.candidates(req)
        assert first == second
        assert gateway.calls == 1  # second call served from cache

        # a fresh provider over the persisted file needs no gateway at all
        reloaded = LLMSynonymProvider(StaticLLM("unused"), cache=SynonymCache(tmp_path / "cache.jsonl"))
        assert reloaded.candidates(req) == first

    def test_cache_key_normalizes_whitespace(self):
        key_a = SynonymCache.key_for("a  fine\nfilm", 1, 5)
        key_b = SynonymCache.key_for("a fine film", 1, 5)
        assert key_a == key_b
        assert SynonymCache.key_for("a fine film", 2, 5) != key_b

    def test_requires_gateway(self):
        with pytest.raises(ProviderConfigError):
            LLMSynonymProvider(None)


class TestEmbeddingProvider:
    def make_store(self):
        return EmbeddingStore(
            {
                "good": np.array([1.0, 0.0]),
                "fine": np.array([0.95, 0.05]),
                "nice": np.array([0.8, 0.2]),
                "odd": np.array([0.0, 1.0]),
            }
        )

    def test_nearest_first(self):
        provider = EmbeddingSynonymProvider(self.make_store())
        req = SynonymRequest(sentence="good stuff", position=0, word="good", k=2)
        out = provider.candidates(req)
        assert [c.word for c in out] == ["fine", "nice"]

    def test_k_larger_than_vocab(self):
        provider = EmbeddingSynonymProvider(self.make_store())
        req = SynonymRequest(sentence="good stuff", position=0, word="good", k=50)
        assert len(provider.candidates(req)) == 3

    def test_oov_empty(self):
        provider = EmbeddingSynonymProvider(self.make_store())
        req = SynonymRequest(sentence="zzz stuff", position=0, word="zzz", k=5)
        assert provider.candidates(req) == []

    def test_requires_store(self):
        with pytest.raises(ProviderConfigError):
            EmbeddingSynonymProvider(None)


class TestMlmProvider:
    def test_fixed_ranking_passthrough(self):
        stub = StubFillMask(default=["great", "strong", "fine"])
        provider = MlmSynonymProvider(stub)
        req = SynonymRequest(sentence="a fine film", position=1, word="fine", k=5)
        assert [c.word for c in provider.candidates(req)] == ["great", "strong"]

    def test_count_never_exceeds_k(self):
        rng = random.Random(7)
        vocab = [f"w{i}" for i in range(30)]
        for _ in range(25):
            ranking = rng.sample(vocab, rng.randint(0, 20))
            provider = MlmSynonymProvider(StubFillMask(default=ranking))
            k = rng.randint(1, 8)
            req = SynonymRequest(sentence="w0 w1 w2", position=0, word="w0", k=k)
            assert len(provider.candidates(req)) <= k

    def test_absent_service_is_config_error(self):
        with pytest.raises(ProviderConfigError):
            MlmSynonymProvider(None)
        with pytest.raises(ProviderConfigError):
            build_provider("mlm")


def test_build_provider_unknown_name():
    with pytest.raises(ProviderConfigError):
        build_provider("wordnet")


def test_match_case():
    assert match_case("fine", "bad") == "bad"
    assert match_case("Fine", "bad") == "Bad"
    assert match_case("FINE", "bad") == "BAD"
    assert match_case("f", "bad") == "bad"


class TestCheckCandidate:
    def setup_method(self):
        self.config = AttackConfig(use_threshold=0.9)
        self.gateways = make_gateways({"fine": 1.5, "bad": -2.0})
        # 12 words: one substitution keeps hashing similarity near 11/12
        self.text = "the movie stays fine because the cast works hard on every scene"

    def tokens(self, annotator):
        return annotator.annotate(self.text)

    def test_accepted_candidate_carries_similarity(self, annotator):
        tokens = self.tokens(annotator)
        pos = tokens.words.index("fine")
        verdict = check_candidate(
            tokens, Perturbation(), pos, CandidateReplacement("bad", 0),
            self.config, self.gateways, annotator,
        )
        assert verdict.accepted
        assert verdict.candidate.similarity_to_original_sentence >= 0.9

    def test_repeat_modification(self, annotator):
        tokens = self.tokens(annotator)
        pos = tokens.words.index("fine")
        edits = Perturbation((Edit(pos, "fine", "good"),))
        verdict = check_candidate(
            tokens, edits, pos, CandidateReplacement("bad", 0),
            self.config, self.gateways, annotator,
        )
        assert not verdict.accepted
        assert verdict.rejected_by == "repeat_modification"

    def test_stopword_preservation(self, annotator):
        tokens = self.tokens(annotator)
        pos = tokens.words.index("because")
        verdict = check_candidate(
            tokens, Perturbation(), pos, CandidateReplacement("since", 0),
            self.config, self.gateways, annotator,
        )
        assert verdict.rejected_by == "stopword_preservation"

    def test_named_entity_preservation(self, annotator):
        tokens = annotator.annotate(
            "Rita Hayworth stays fine because the cast works hard on every scene"
        )
        verdict = check_candidate(
            tokens, Perturbation(), 0, CandidateReplacement("Anna", 0),
            self.config, self.gateways, annotator,
        )
        assert verdict.rejected_by == "named_entity_preservation"

    def test_max_modification_rate(self, annotator):
        tokens = annotator.annotate("a truly fine film")  # budget floor(0.4*4) = 1
        pos = tokens.words.index("fine")
        other = tokens.words.index("truly")
        edits = Perturbation((Edit(other, "truly", "fairly"),))
        config = AttackConfig(use_threshold=0.0)
        verdict = check_candidate(
            tokens, edits, pos, CandidateReplacement("bad", 0),
            config, self.gateways, annotator,
        )
        assert verdict.rejected_by == "max_modification_rate"

    def test_pos_consistency(self, annotator):
        text = "If you can push on through the slow spots, you'll be rewarded with some fine acting."
        tokens = annotator.annotate(text)
        pos = tokens.words.index("rewarded")
        verdict = check_candidate(
            tokens, Perturbation(), pos, CandidateReplacement("recompense", 0),
            self.config, self.gateways, annotator,
        )
        assert verdict.rejected_by == "pos_consistency"

    def test_embedding_distance(self, annotator):
        store = EmbeddingStore(
            {"fine": np.array([1.0, 0.0]), "bad": np.array([0.1, 0.995])}
        )
        gateways = make_gateways({"fine": 1.5}, embeddings=store)
        tokens = self.tokens(annotator)
        pos = tokens.words.index("fine")
        verdict = check_candidate(
            tokens, Perturbation(), pos, CandidateReplacement("bad", 0),
            self.config, gateways, annotator,
        )
        assert verdict.rejected_by == "embedding_distance"

    def test_oov_word_passes_embedding_constraint(self, annotator):
        store = EmbeddingStore({"fine": np.array([1.0, 0.0])})
        gateways = make_gateways({"fine": 1.5}, embeddings=store)
        tokens = self.tokens(annotator)
        pos = tokens.words.index("fine")
        verdict = check_candidate(
            tokens, Perturbation(), pos, CandidateReplacement("bad", 0),
            self.config, gateways, annotator,
        )
        assert verdict.accepted

    def test_use_similarity_rejects_on_short_text(self, annotator):
        tokens = annotator.annotate("a fine film")  # 1 edit in 3 tokens ~ 0.67
        verdict = check_candidate(
            tokens, Perturbation(), 1, CandidateReplacement("bad", 0),
            self.config, self.gateways, annotator,
        )
        assert verdict.rejected_by == "use_similarity"

    def test_use_threshold_monotonicity(self, annotator):
        tokens = self.tokens(annotator)
        pos = tokens.words.index("fine")
        accepted_at = []
        for threshold in (0.95, 0.9, 0.5, 0.0):
            config = AttackConfig(use_threshold=threshold)
            verdict = check_candidate(
                tokens, Perturbation(), pos, CandidateReplacement("bad", 0),
                config, self.gateways, annotator,
            )
            accepted_at.append((threshold, verdict.accepted))
        # once accepted at t, accepted at every t' <= t
        for i, (t, ok) in enumerate(accepted_at):
            if ok:
                assert all(ok2 for _, ok2 in accepted_at[i:])

    def test_encoder_failure_aborts(self, annotator):
        gateways = make_gateways({"fine": 1.5})
        gateways.encoder = FailingEncoder()
        tokens = self.tokens(annotator)
        pos = tokens.words.index("fine")
        with pytest.raises(EncoderUnavailable):
            check_candidate(
                tokens, Perturbation(), pos, CandidateReplacement("bad", 0),
                self.config, gateways, annotator,
            )

    def test_order_independent_outcome(self, annotator):
        # accept iff every individual constraint passes, whatever the order
        rng = random.Random(3)
        tokens = self.tokens(annotator)
        for _ in range(40):
            pos = rng.randrange(tokens.n)
            cand_word = rng.choice(["bad", "good", "badly", "since", "fine"])
            if cand_word == tokens.words[pos]:
                continue
            edits = Perturbation()
            if rng.random() < 0.3:
                other = rng.randrange(tokens.n)
                edits = Perturbation((Edit(other, tokens.words[other], "zork"),))
            candidate = CandidateReplacement(cand_word, 0)
            verdict = check_candidate(
                tokens, edits, pos, candidate, self.config, self.gateways, annotator
            )
            checks = constraint_checks(
                tokens, edits, pos, match_case(tokens.words[pos], cand_word),
                self.config, self.gateways, annotator,
            )
            individually = {name: passes() for name, passes in checks}
            assert verdict.accepted == all(individually.values())
            if not verdict.accepted:
                assert not individually[verdict.rejected_by]


def test_constraint_verdict_xor():
    cand = CandidateReplacement("x", 0)
    with pytest.raises(ValueError):
        ConstraintVerdict(cand, True, rejected_by="use_similarity")
    with pytest.raises(ValueError):
        ConstraintVerdict(cand, False)
