"""Synonym providers (LLM-prompted primary, embedding-neighborhood and
masked-LM ablations) and the constraint stack that filters candidate
replacements."""

from __future__ import annotations

import hashlib
import json
import logging
import re
import threading
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Optional, Protocol, Sequence

from .core import AttackConfig, Edit, Perturbation, TokenizedText, apply_edits, modification_budget
from .gateways import (
    EmbeddingStore,
    FillMaskGateway,
    GatewaySet,
    LLMGateway,
    SynonymProviderUnavailable,
)
from .importance import mask_word
from .linguistics import WORD_RE, AnnotatorBundle

logger = logging.getLogger(__name__)

# Constraint names, in evaluation order (cheap to expensive).
REPEAT_MODIFICATION = "repeat_modification"
STOPWORD_PRESERVATION = "stopword_preservation"
NAMED_ENTITY_PRESERVATION = "named_entity_preservation"
MAX_MODIFICATION_RATE = "max_modification_rate"
POS_CONSISTENCY = "pos_consistency"
EMBEDDING_DISTANCE = "embedding_distance"
USE_SIMILARITY = "use_similarity"
MALFORMED_OUTPUT = "malformed_output"

CONSTRAINT_ORDER = (
    REPEAT_MODIFICATION,
    STOPWORD_PRESERVATION,
    NAMED_ENTITY_PRESERVATION,
    MAX_MODIFICATION_RATE,
    POS_CONSISTENCY,
    EMBEDDING_DISTANCE,
    USE_SIMILARITY,
)


class ProviderConfigError(Exception):
    """A synonym provider was selected without its required backing service."""


@dataclass(frozen=True)
class SynonymRequest:
    sentence: str
    position: int
    word: str
    k: int

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        if not self.word:
            raise ValueError("word must be non-empty")


@dataclass
class CandidateReplacement:
    word: str
    provider_rank: int
    similarity_to_original_sentence: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.word or any(c.isspace() for c in self.word):
            raise ValueError(f"candidate must be a single non-empty word: {self.word!r}")


@dataclass
class ConstraintVerdict:
    candidate: CandidateReplacement
    accepted: bool
    rejected_by: Optional[str] = None

    def __post_init__(self) -> None:
        if self.accepted == (self.rejected_by is not None):
            raise ValueError("verdict must be accepted xor carry a rejecting constraint")


def match_case(original: str, candidate: str) -> str:
    """Candidates inherit the capitalization pattern of the word they replace."""
    if original.isupper() and len(original) > 1:
        return candidate.upper()
    if original[:1].isupper():
        return candidate[:1].upper() + candidate[1:]
    return candidate


# ---------------------------------------------------------------------------
# Reply parsing and the prompt template
# ---------------------------------------------------------------------------

_ITEM_NUMBERING_RE = re.compile(r"^\s*(?:\d+[).\]:]?|[-*•])\s*")
_STRIP_CHARS = " \t\"'“”‘’`.,;:!?()[]{}"


def load_prompt_template(path: Optional[str | Path] = None) -> str:
    """Synonym prompt template with {sentence}, {word}, {k} placeholders."""
    if path is not None:
        return Path(path).read_text(encoding="utf-8").strip()
    return (
        resources.files("advswap")
        .joinpath("data", "synonym_prompt.txt")
        .read_text(encoding="utf-8")
        .strip()
    )


def render_prompt(template: str, sentence: str, word: str, k: int) -> str:
    # plain replacement: the sentence itself may contain brace characters
    return (
        template.replace("{sentence}", sentence)
        .replace("{word}", word)
        .replace("{k}", str(k))
    )


def parse_synonym_reply(reply: str, original_word: str, k: int) -> list[str]:
    """Extract at most k single-word candidates from a free-form LLM reply.

    Splits on newlines and commas, strips numbering/quotes/punctuation and any
    prose prefix ending in a colon, then drops multi-word items and
    self-replacements; order of first appearance is preserved.
    """
    out: list[str] = []
    seen: set[str] = set()
    original_lower = original_word.lower()
    for chunk in re.split(r"[\n,;]+", reply):
        if ":" in chunk:
            chunk = chunk.rsplit(":", 1)[1]
        chunk = _ITEM_NUMBERING_RE.sub("", chunk).strip(_STRIP_CHARS)
        if not chunk or not WORD_RE.fullmatch(chunk):
            continue
        lowered = chunk.lower()
        if lowered == original_lower or lowered in seen:
            continue
        seen.add(lowered)
        out.append(chunk)
        if len(out) == k:
            break
    return out


# ---------------------------------------------------------------------------
# Provider cache
# ---------------------------------------------------------------------------


class SynonymCache:
    """Candidate-list cache keyed by (normalized sentence, position, k), with an
    optional append-only JSONL file behind it so runs can resume."""

    def __init__(self, path: Optional[str | Path] = None):
        self._memory: dict[str, list[str]] = {}
        self._path = Path(path) if path else None
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            for line in self._path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                entry = json.loads(line)
                self._memory[entry["key"]] = entry["words"]

    @staticmethod
    def key_for(sentence: str, position: int, k: int) -> str:
        normalized = " ".join(sentence.split())
        raw = f"{normalized}\x1f{position}\x1f{k}"
        return hashlib.sha256(raw.encode("utf-8")).hexdigest()

    def get(self, key: str) -> Optional[list[str]]:
        with self._lock:
            hit = self._memory.get(key)
            return list(hit) if hit is not None else None

    def put(self, key: str, words: Sequence[str]) -> None:
        with self._lock:
            if key in self._memory:
                return
            self._memory[key] = list(words)
            if self._path:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps({"key": key, "words": list(words)}) + "\n")

    def __len__(self) -> int:
        return len(self._memory)


# ---------------------------------------------------------------------------
# Providers
# ---------------------------------------------------------------------------


@dataclass
class QueryMeter:
    """Per-attack query accounting; one attack is sequential, so no locking."""

    victim: int = 0
    llm: int = 0


class SynonymProvider(Protocol):
    name: str

    def candidates(
        self, req: SynonymRequest, meter: Optional[QueryMeter] = None
    ) -> list[CandidateReplacement]: ...


class LLMSynonymProvider:
    """Primary provider: prompts a chat LLM for in-context synonyms."""

    name = "llm"

    def __init__(
        self,
        gateway: Optional[LLMGateway],
        template: Optional[str] = None,
        cache: Optional[SynonymCache] = None,
    ):
        if gateway is None:
            raise ProviderConfigError("llm provider requires a chat endpoint")
        self.gateway = gateway
        self.template = template if template is not None else load_prompt_template()
        self.cache = cache
        self.llm_queries = 0
        self.malformed_replies = 0
        self._lock = threading.Lock()

    def candidates(
        self, req: SynonymRequest, meter: Optional[QueryMeter] = None
    ) -> list[CandidateReplacement]:
        key = SynonymCache.key_for(req.sentence, req.position, req.k)
        if self.cache is not None:
            hit = self.cache.get(key)
            if hit is not None:
                return [CandidateReplacement(w, i) for i, w in enumerate(hit)]
        prompt = render_prompt(self.template, req.sentence, req.word, req.k)
        with self._lock:
            self.llm_queries += 1
        if meter is not None:
            meter.llm += 1
        try:
            reply = self.gateway.complete(prompt)
        except SynonymProviderUnavailable as exc:
            logger.warning("synonym source unavailable for %r: %s", req.word, exc)
            return []
        words = parse_synonym_reply(reply, req.word, req.k)
        if not words and reply.strip():
            with self._lock:
                self.malformed_replies += 1
            logger.warning(
                "%s: no candidates parsed from reply %r", MALFORMED_OUTPUT, reply[:200]
            )
        if self.cache is not None:
            self.cache.put(key, words)
        return [CandidateReplacement(w, i) for i, w in enumerate(words)]


class EmbeddingSynonymProvider:
    """Ablation provider: nearest neighbors in a static word-embedding table."""

    name = "embedding"

    def __init__(self, store: Optional[EmbeddingStore]):
        if store is None:
            raise ProviderConfigError("embedding provider requires a vector table")
        self.store = store

    def candidates(
        self, req: SynonymRequest, meter: Optional[QueryMeter] = None
    ) -> list[CandidateReplacement]:
        neighbors = self.store.nearest(req.word.lower(), req.k)
        return [CandidateReplacement(w, i) for i, (w, _sim) in enumerate(neighbors)]


class MlmSynonymProvider:
    """Ablation provider: fill-mask predictions at the masked position."""

    name = "mlm"

    def __init__(self, gateway: Optional[FillMaskGateway]):
        if gateway is None:
            raise ProviderConfigError("mlm provider requires a fill-mask service")
        self.gateway = gateway

    def candidates(
        self, req: SynonymRequest, meter: Optional[QueryMeter] = None
    ) -> list[CandidateReplacement]:
        tokens = _retokenize(req.sentence)
        masked = mask_word(tokens, req.position, self.gateway.mask_token)
        predictions = self.gateway.predict(masked, req.k)
        out: list[CandidateReplacement] = []
        seen: set[str] = set()
        for word in predictions:
            if not WORD_RE.fullmatch(word):
                continue
            lowered = word.lower()
            if lowered == req.word.lower() or lowered in seen:
                continue
            seen.add(lowered)
            out.append(CandidateReplacement(word, len(out)))
            if len(out) == req.k:
                break
        return out


def _retokenize(sentence: str) -> TokenizedText:
    # minimal span view for masking; tags and masks are irrelevant here
    triples = [(m.group(), m.start(), m.end()) for m in WORD_RE.finditer(sentence)]
    if not triples:
        raise ValueError(f"no words in {sentence!r}")
    n = len(triples)
    return TokenizedText(
        text=sentence,
        words=tuple(w for w, _, _ in triples),
        char_spans=tuple((s, e) for _, s, e in triples),
        pos_tags=("X",) * n,
        ner_mask=(False,) * n,
        stopword_mask=(False,) * n,
    )


def build_provider(
    name: str,
    *,
    llm: Optional[LLMGateway] = None,
    embeddings: Optional[EmbeddingStore] = None,
    fill_mask: Optional[FillMaskGateway] = None,
    template: Optional[str] = None,
    cache: Optional[SynonymCache] = None,
) -> SynonymProvider:
    if name == "llm":
        return LLMSynonymProvider(llm, template=template, cache=cache)
    if name == "embedding":
        return EmbeddingSynonymProvider(embeddings)
    if name == "mlm":
        return MlmSynonymProvider(fill_mask)
    raise ProviderConfigError(f"unknown provider {name!r}")


# ---------------------------------------------------------------------------
# Constraint stack
# ---------------------------------------------------------------------------


@dataclass
class _UseScore:
    value: Optional[float] = None


def constraint_checks(
    tokens: TokenizedText,
    edits_so_far: Perturbation,
    position: int,
    replacement: str,
    config: AttackConfig,
    gateways: GatewaySet,
    annotator: AnnotatorBundle,
    use_score: Optional[_UseScore] = None,
) -> list[tuple[str, Callable[[], bool]]]:
    """The ordered constraint predicates for one candidate; each returns True
    when the constraint passes. Exposed so tests can evaluate them in any
    order; ``check_candidate`` is the short-circuiting consumer."""

    def repeat_ok() -> bool:
        return position not in edits_so_far.positions()

    def stopword_ok() -> bool:
        return not tokens.stopword_mask[position]

    def entity_ok() -> bool:
        return not tokens.ner_mask[position]

    def budget_ok() -> bool:
        already = len(edits_so_far) + (0 if position in edits_so_far.positions() else 1)
        return already <= modification_budget(config.theta_max_mod_rate, tokens.n)

    def pos_ok() -> bool:
        new_tag = annotator.pos_of_replacement(tokens, position, replacement)
        return new_tag == tokens.pos_tags[position]

    def embedding_ok() -> bool:
        store = gateways.embeddings
        if store is None:
            return True
        sim = store.word_similarity(
            tokens.words[position].lower(), replacement.lower()
        )
        return sim is None or sim >= config.min_embedding_similarity

    def use_ok() -> bool:
        # replace any existing edit at this position so the predicate stays
        # evaluable standalone, outside the short-circuit order
        kept = tuple(e for e in edits_so_far.edits if e.position != position)
        perturbed = Perturbation(
            kept + (Edit(position, tokens.words[position], replacement),)
        )
        sim = gateways.encoder.similarity(tokens.text, apply_edits(tokens, perturbed))
        if use_score is not None:
            use_score.value = sim
        return sim >= config.use_threshold

    return [
        (REPEAT_MODIFICATION, repeat_ok),
        (STOPWORD_PRESERVATION, stopword_ok),
        (NAMED_ENTITY_PRESERVATION, entity_ok),
        (MAX_MODIFICATION_RATE, budget_ok),
        (POS_CONSISTENCY, pos_ok),
        (EMBEDDING_DISTANCE, embedding_ok),
        (USE_SIMILARITY, use_ok),
    ]


def check_candidate(
    tokens: TokenizedText,
    edits_so_far: Perturbation,
    position: int,
    candidate: CandidateReplacement,
    config: AttackConfig,
    gateways: GatewaySet,
    annotator: AnnotatorBundle,
) -> ConstraintVerdict:
    """Run the constraint stack cheap-to-expensive and stop at the first
    failure; an accepted candidate comes back with its sentence similarity
    filled in."""
    if not 0 <= position < tokens.n:
        raise ValueError(f"position {position} out of range [0,{tokens.n})")
    replacement = match_case(tokens.words[position], candidate.word)
    if replacement == tokens.words[position]:
        return ConstraintVerdict(candidate, False, rejected_by=MALFORMED_OUTPUT)
    use_score = _UseScore()
    for name, passes in constraint_checks(
        tokens, edits_so_far, position, replacement, config, gateways, annotator, use_score
    ):
        if not passes():
            return ConstraintVerdict(candidate, False, rejected_by=name)
    candidate.similarity_to_original_sentence = use_score.value
    return ConstraintVerdict(candidate, True)
