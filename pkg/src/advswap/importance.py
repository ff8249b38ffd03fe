"""Word importance ranking: mask each eligible word with the unknown token,
measure the drop in true-class probability, and keep the top slice as the
candidate word list for substitution."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

from .core import AttackConfig, Sample, TokenizedText
from .gateways import VictimGateway


@dataclass(frozen=True)
class ImportanceScore:
    """Probability drop caused by masking one word; may be negative."""

    position: int
    word: str
    score: float


@dataclass(frozen=True)
class CandidateList:
    """Importance scores in descending order, truncated to the theta budget;
    never contains entity or stop-word positions."""

    entries: tuple[ImportanceScore, ...]
    source_sample: str

    def positions(self) -> list[int]:
        return [e.position for e in self.entries]


def mask_word(tokens: TokenizedText, position: int, mask_token: str) -> str:
    """Detokenized sentence with exactly the word at ``position`` replaced by the
    mask token; punctuation and spacing stay intact."""
    if not 0 <= position < tokens.n:
        raise ValueError(f"position {position} out of range [0,{tokens.n})")
    start, end = tokens.char_spans[position]
    return tokens.text[:start] + mask_token + tokens.text[end:]


def effective_mask_token(config: AttackConfig, victim: VictimGateway) -> str:
    """The victim's advertised unknown token wins over the configured default."""
    return getattr(victim, "unk_token", None) or config.mask_token


def candidate_limit(theta: float, n_eligible: int) -> int:
    """Size cap for the candidate list: floor(theta * eligible words), at least
    one whenever anything is eligible at all."""
    if n_eligible < 1:
        return 0
    return max(1, math.floor(theta * n_eligible))


def importance_scores(
    sample: Sample,
    tokens: TokenizedText,
    config: AttackConfig,
    victim: VictimGateway,
    p_true: Optional[float] = None,
) -> list[ImportanceScore]:
    """Mask-and-score every eligible word, sorted by descending score with ties
    broken by ascending position.

    Queries the victim once for the original (unless ``p_true`` is supplied)
    plus once per eligible word, batched.
    """
    eligible = tokens.eligible_positions()
    if p_true is None:
        p_true = victim.classify_batch([sample.text])[0].prob(sample.gold_label)
    if not eligible:
        return []
    mask = effective_mask_token(config, victim)
    masked_texts = [mask_word(tokens, i, mask) for i in eligible]
    dists = victim.classify_batch(masked_texts)
    scores = [
        ImportanceScore(pos, tokens.words[pos], p_true - d.prob(sample.gold_label))
        for pos, d in zip(eligible, dists)
    ]
    scores.sort(key=lambda s: (-s.score, s.position))
    return scores


def rank_words(
    sample: Sample,
    tokens: TokenizedText,
    config: AttackConfig,
    victim: VictimGateway,
) -> CandidateList:
    """Rank eligible words by importance and truncate to the theta budget."""
    ranked = importance_scores(sample, tokens, config, victim)
    limit = candidate_limit(config.theta_max_mod_rate, len(ranked))
    return CandidateList(entries=tuple(ranked[:limit]), source_sample=sample.id)
