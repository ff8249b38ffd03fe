"""Shared stubs and fixtures for the test suite."""

from __future__ import annotations

import math

import pytest

from advswap.core import AttackConfig
from advswap.gateways import (
    GatewaySet,
    HashingSentenceEncoder,
    LexiconVictim,
)
from advswap.linguistics import AnnotatorBundle


@pytest.fixture(scope="session")
def annotator() -> AnnotatorBundle:
    return AnnotatorBundle.default()


@pytest.fixture
def encoder() -> HashingSentenceEncoder:
    return HashingSentenceEncoder()


@pytest.fixture
def config() -> AttackConfig:
    return AttackConfig()


def make_victim(lexicon: dict[str, float]) -> LexiconVictim:
    return LexiconVictim(lexicon)


def make_gateways(
    lexicon: dict[str, float],
    llm=None,
    embeddings=None,
    fill_mask=None,
) -> GatewaySet:
    return GatewaySet(
        victim=LexiconVictim(lexicon),
        encoder=HashingSentenceEncoder(),
        llm=llm,
        embeddings=embeddings,
        fill_mask=fill_mask,
    )


class FailingVictim:
    """Raises a transport-style gateway error for texts containing a marker."""

    def __init__(self, inner: LexiconVictim, marker: str = "@@fail@@"):
        self.inner = inner
        self.marker = marker
        self.num_classes = inner.num_classes
        self.unk_token = inner.unk_token

    def classify_batch(self, texts):
        from advswap.gateways import GatewayError

        if any(self.marker in t for t in texts):
            raise GatewayError("injected victim failure")
        return self.inner.classify_batch(texts)


class ScriptedLLM:
    """Replies from a fixed sequence, then repeats the last one."""

    def __init__(self, replies: list[str]):
        self.replies = list(replies)
        self.calls = 0

    def complete(self, prompt: str) -> str:
        reply = self.replies[min(self.calls, len(self.replies) - 1)]
        self.calls += 1
        return reply


WEIGHT_POS = math.log(9)  # sigmoid(log 9) = 0.9 exactly in real arithmetic
