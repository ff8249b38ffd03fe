"""Domain types shared across the attack pipeline, plus perturbation-norm math
and run configuration."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Iterable, Literal, Optional

Outcome = Literal[
    "success",
    "failed_budget",
    "failed_exhausted",
    "skipped_already_misclassified",
]

OUTCOMES: frozenset[str] = frozenset(
    ("success", "failed_budget", "failed_exhausted", "skipped_already_misclassified")
)

RECORD_SCHEMA = "attack_record/1"


@dataclass(frozen=True)
class Sample:
    """One classification instance flowing through ingestion, attack, and evaluation."""

    id: str
    text: str
    gold_label: int
    split: str = "test"

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError(f"sample {self.id!r}: text is empty")
        if self.gold_label < 0:
            raise ValueError(f"sample {self.id!r}: negative label {self.gold_label}")
        if self.split not in ("train", "test"):
            raise ValueError(f"sample {self.id!r}: unknown split {self.split!r}")


@dataclass(frozen=True)
class LabelDistribution:
    """Class-probability vector returned by a victim classifier."""

    probs: tuple[float, ...]

    def __post_init__(self) -> None:
        if not self.probs:
            raise ValueError("empty probability vector")
        if any(p < -1e-9 or p > 1 + 1e-9 for p in self.probs):
            raise ValueError(f"probabilities outside [0,1]: {self.probs}")
        total = sum(self.probs)
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total}, expected 1")

    @property
    def num_classes(self) -> int:
        return len(self.probs)

    def argmax(self) -> int:
        """Winning class index; ties break toward the lowest index."""
        best, best_p = 0, self.probs[0]
        for i, p in enumerate(self.probs):
            if p > best_p:
                best, best_p = i, p
        return best

    def prob(self, label: int) -> float:
        return self.probs[label]


@dataclass(frozen=True)
class TokenizedText:
    """Aligned word-level view of a text: words, character spans, POS tags, and
    the named-entity / stop-word masks that constraints inspect."""

    text: str
    words: tuple[str, ...]
    char_spans: tuple[tuple[int, int], ...]
    pos_tags: tuple[str, ...]
    ner_mask: tuple[bool, ...]
    stopword_mask: tuple[bool, ...]

    def __post_init__(self) -> None:
        n = len(self.words)
        if n < 1:
            raise ValueError("tokenized text must contain at least one word")
        for name in ("char_spans", "pos_tags", "ner_mask", "stopword_mask"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"{name} length {len(getattr(self, name))} != {n}")
        prev_end = -1
        for (start, end), word in zip(self.char_spans, self.words):
            if start <= prev_end:
                raise ValueError("char_spans overlap or are not increasing")
            if self.text[start:end] != word:
                raise ValueError(
                    f"span ({start},{end}) reads {self.text[start:end]!r}, not {word!r}"
                )
            prev_end = end - 1

    @property
    def n(self) -> int:
        return len(self.words)

    def eligible_positions(self) -> list[int]:
        """Positions that are neither inside a named entity nor stop words."""
        return [
            i
            for i in range(self.n)
            if not self.ner_mask[i] and not self.stopword_mask[i]
        ]


@dataclass(frozen=True)
class Edit:
    position: int
    original: str
    replacement: str

    def __post_init__(self) -> None:
        if self.position < 0:
            raise ValueError(f"negative edit position {self.position}")
        if self.original == self.replacement:
            raise ValueError(f"no-op edit at {self.position}: {self.original!r}")


@dataclass(frozen=True)
class Perturbation:
    """A set of word substitutions, one per position, canonically ordered."""

    edits: tuple[Edit, ...] = ()

    def __post_init__(self) -> None:
        positions = [e.position for e in self.edits]
        if len(set(positions)) != len(positions):
            raise ValueError(f"duplicate edit positions: {sorted(positions)}")
        if positions != sorted(positions):
            object.__setattr__(
                self, "edits", tuple(sorted(self.edits, key=lambda e: e.position))
            )

    def __len__(self) -> int:
        return len(self.edits)

    def __bool__(self) -> bool:
        return bool(self.edits)

    def positions(self) -> frozenset[int]:
        return frozenset(e.position for e in self.edits)

    def extended(self, edit: Edit) -> "Perturbation":
        return Perturbation(self.edits + (edit,))


def validate_edits(tokens: TokenizedText, perturbation: Perturbation) -> None:
    """Reject edits whose positions or original words do not match ``tokens``."""
    for edit in perturbation.edits:
        if edit.position >= tokens.n:
            raise ValueError(f"edit position {edit.position} out of range [0,{tokens.n})")
        if tokens.words[edit.position] != edit.original:
            raise ValueError(
                f"edit at {edit.position} expects {edit.original!r}, "
                f"text has {tokens.words[edit.position]!r}"
            )


def apply_edits(tokens: TokenizedText, perturbation: Perturbation) -> str:
    """Splice replacements into the source text via character spans, leaving all
    other characters (punctuation, spacing) intact."""
    validate_edits(tokens, perturbation)
    out: list[str] = []
    cursor = 0
    by_position = {e.position: e for e in perturbation.edits}
    for i, (start, end) in enumerate(tokens.char_spans):
        out.append(tokens.text[cursor:start])
        edit = by_position.get(i)
        out.append(edit.replacement if edit else tokens.words[i])
        cursor = end
    out.append(tokens.text[cursor:])
    return "".join(out)


def word_diff(original_words: Iterable[str], edited_words: Iterable[str]) -> Perturbation:
    """Diff two aligned word sequences into a canonical Perturbation."""
    orig = list(original_words)
    edited = list(edited_words)
    if len(orig) != len(edited):
        raise ValueError(f"word counts differ: {len(orig)} vs {len(edited)}")
    edits = tuple(
        Edit(i, a, b) for i, (a, b) in enumerate(zip(orig, edited)) if a != b
    )
    return Perturbation(edits)


def perturbation_norm(p: float, original: TokenizedText, perturbation: Perturbation) -> float:
    """p-norm of a perturbation under the word-level indicator encoding: an
    edited position contributes 1, an unedited one 0.

    Supported orders: 0 (edit count), 2 (sqrt of edit count), inf (1 if any edit).
    """
    validate_edits(original, perturbation)
    count = len(perturbation)
    if p == 0:
        return float(count)
    if p == 2:
        return math.sqrt(count)
    if p == math.inf:
        return 1.0 if count else 0.0
    raise ValueError(f"unsupported norm order {p!r}; expected 0, 2, or inf")


def modification_rate(perturbation: Perturbation, n: int) -> float:
    """Fraction of the text's words that have been substituted."""
    if n < 1:
        raise ValueError(f"word count must be >= 1, got {n}")
    return len(perturbation) / n


def modification_budget(theta: float, n: int) -> int:
    """Maximum number of edits allowed on an n-word text.

    floor(theta * n): keeps every record's modification rate <= theta, so texts
    shorter than 1/theta words admit no edits at all.
    """
    if n < 1:
        raise ValueError(f"word count must be >= 1, got {n}")
    return math.floor(theta * n)


PROVIDER_NAMES = ("llm", "embedding", "mlm")


@dataclass(frozen=True)
class AttackConfig:
    """Attack hyperparameters; defaults follow the reference setup."""

    theta_max_mod_rate: float = 0.4
    k_synonyms: int = 15
    use_threshold: float = 0.9
    min_embedding_similarity: float = 0.5
    mask_token: str = "[UNK]"
    max_victim_queries: Optional[int] = None
    random_seed: int = 0
    provider_name: str = "llm"

    def __post_init__(self) -> None:
        if not 0 < self.theta_max_mod_rate <= 1:
            raise ValueError(f"theta_max_mod_rate must be in (0,1], got {self.theta_max_mod_rate}")
        if self.k_synonyms < 1:
            raise ValueError(f"k_synonyms must be positive, got {self.k_synonyms}")
        if not 0 <= self.use_threshold <= 1:
            raise ValueError(f"use_threshold must be in [0,1], got {self.use_threshold}")
        if not -1 <= self.min_embedding_similarity <= 1:
            raise ValueError(
                f"min_embedding_similarity must be in [-1,1], got {self.min_embedding_similarity}"
            )
        if not self.mask_token:
            raise ValueError("mask_token must be non-empty")
        if self.max_victim_queries is not None and self.max_victim_queries < 1:
            raise ValueError(f"max_victim_queries must be positive, got {self.max_victim_queries}")
        if self.provider_name not in PROVIDER_NAMES:
            raise ValueError(
                f"provider_name must be one of {PROVIDER_NAMES}, got {self.provider_name!r}"
            )

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def with_overrides(self, **overrides) -> "AttackConfig":
        """Return a copy with every non-None override applied."""
        changes = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **changes) if changes else self

    @classmethod
    def from_dict(cls, data: dict) -> "AttackConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "AttackConfig":
        """Load from a JSON document or key=value lines; fields mirror this class 1:1."""
        raw = Path(path).read_text(encoding="utf-8")
        stripped = raw.lstrip()
        if stripped.startswith("{"):
            return cls.from_dict(json.loads(raw))
        data: dict = {}
        for lineno, line in enumerate(raw.splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            data[key.strip()] = _coerce_scalar(value.strip())
        return cls.from_dict(data)


def _coerce_scalar(value: str):
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("none", "null", ""):
        return None
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        pass
    return value


@dataclass
class VerdictTrace:
    """Serializable per-candidate constraint outcome kept inside a step trace."""

    word: str
    accepted: bool
    rejected_by: Optional[str] = None
    similarity: Optional[float] = None

    def to_dict(self) -> dict:
        return {
            "word": self.word,
            "accepted": self.accepted,
            "rejected_by": self.rejected_by,
            "similarity": self.similarity,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "VerdictTrace":
        return cls(
            word=d["word"],
            accepted=d["accepted"],
            rejected_by=d.get("rejected_by"),
            similarity=d.get("similarity"),
        )


@dataclass
class StepTrace:
    """Full trace of one attack step: the position visited, every candidate with
    its constraint verdict, survivor scores, and the committed choice."""

    position: int
    word: str
    candidates: list[str]
    verdicts: list[VerdictTrace]
    survivor_p_true: dict[str, float]
    chosen: Optional[str]
    chosen_similarity: Optional[float]
    p_true_before: float
    p_true_after: float

    def to_dict(self) -> dict:
        return {
            "position": self.position,
            "word": self.word,
            "candidates": list(self.candidates),
            "verdicts": [v.to_dict() for v in self.verdicts],
            "survivor_p_true": dict(self.survivor_p_true),
            "chosen": self.chosen,
            "chosen_similarity": self.chosen_similarity,
            "p_true_before": self.p_true_before,
            "p_true_after": self.p_true_after,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StepTrace":
        return cls(
            position=d["position"],
            word=d["word"],
            candidates=list(d["candidates"]),
            verdicts=[VerdictTrace.from_dict(v) for v in d["verdicts"]],
            survivor_p_true=dict(d["survivor_p_true"]),
            chosen=d.get("chosen"),
            chosen_similarity=d.get("chosen_similarity"),
            p_true_before=d["p_true_before"],
            p_true_after=d["p_true_after"],
        )


@dataclass
class AttackRecord:
    """Complete trace of one attack: outcome, perturbation, query accounting,
    and per-step candidate verdicts for replay."""

    sample_id: str
    original_text: str
    adversarial_text: str
    outcome: str
    perturbation: Perturbation
    victim_queries: int
    llm_queries: int
    steps: list[StepTrace] = field(default_factory=list)
    gold_label: int = 0
    diagnostic: Optional[str] = None

    def __post_init__(self) -> None:
        if self.outcome not in OUTCOMES:
            raise ValueError(f"unknown outcome {self.outcome!r}")

    def to_dict(self) -> dict:
        return {
            "schema": RECORD_SCHEMA,
            "sample_id": self.sample_id,
            "original_text": self.original_text,
            "adversarial_text": self.adversarial_text,
            "outcome": self.outcome,
            "edits": [
                {"position": e.position, "original": e.original, "replacement": e.replacement}
                for e in self.perturbation.edits
            ],
            "victim_queries": self.victim_queries,
            "llm_queries": self.llm_queries,
            "steps": [s.to_dict() for s in self.steps],
            "gold_label": self.gold_label,
            "diagnostic": self.diagnostic,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_dict(cls, d: dict) -> "AttackRecord":
        if d.get("schema") != RECORD_SCHEMA:
            raise ValueError(f"unsupported record schema {d.get('schema')!r}")
        return cls(
            sample_id=d["sample_id"],
            original_text=d["original_text"],
            adversarial_text=d["adversarial_text"],
            outcome=d["outcome"],
            perturbation=Perturbation(
                tuple(Edit(e["position"], e["original"], e["replacement"]) for e in d["edits"])
            ),
            victim_queries=d["victim_queries"],
            llm_queries=d["llm_queries"],
            steps=[StepTrace.from_dict(s) for s in d["steps"]],
            gold_label=d["gold_label"],
            diagnostic=d.get("diagnostic"),
        )

    @classmethod
    def from_json(cls, line: str) -> "AttackRecord":
        return cls.from_dict(json.loads(line))
