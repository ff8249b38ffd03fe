"""Dataset ingestion, experiment orchestration, automatic metrics, and the
LLM-judge protocol for comparing attack systems."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import random
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

from .core import AttackConfig, AttackRecord, Sample
from .engine import attack_batch
from .gateways import GatewaySet, LLMGateway, SynonymProviderUnavailable
from .linguistics import WORD_RE, AnnotatorBundle
from .substitution import SynonymProvider

logger = logging.getLogger(__name__)

DIMENSIONS = ("validity", "suspiciousness", "detectability", "grammaticality", "meaning")
DGM_DIMENSIONS = ("detectability", "grammaticality", "meaning")
RATERS = ("human", "llm_judge")


class DatasetError(Exception):
    """The dataset file does not match its descriptor."""


@dataclass(frozen=True)
class DatasetDescriptor:
    """How to read one dataset file and map its labels to class indices."""

    name: str
    format: str
    text_field: str
    label_field: str
    label_mapping: dict[str, int] = field(default_factory=dict)
    num_classes: int = 2
    avg_len: Optional[float] = None

    def __post_init__(self) -> None:
        if self.format not in ("csv", "jsonl"):
            raise ValueError(f"format must be csv or jsonl, got {self.format!r}")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        for raw, mapped in self.label_mapping.items():
            if not 0 <= mapped < self.num_classes:
                raise ValueError(f"label {raw!r} maps to {mapped}, outside [0,{self.num_classes})")

    @classmethod
    def from_file(cls, path: str | Path) -> "DatasetDescriptor":
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            name=data["name"],
            format=data["format"],
            text_field=data["text_field"],
            label_field=data["label_field"],
            label_mapping={str(k): int(v) for k, v in data.get("label_mapping", {}).items()},
            num_classes=int(data.get("num_classes", 2)),
            avg_len=data.get("avg_len"),
        )

    def map_label(self, raw: object) -> int:
        key = str(raw)
        if self.label_mapping:
            if key not in self.label_mapping:
                raise DatasetError(f"unmapped label {key!r}")
            return self.label_mapping[key]
        try:
            value = int(key)
        except ValueError as exc:
            raise DatasetError(f"non-integer label {key!r} with no mapping") from exc
        if not 0 <= value < self.num_classes:
            raise DatasetError(f"label {value} outside [0,{self.num_classes})")
        return value


def load_dataset(desc: DatasetDescriptor, path: str | Path) -> list[Sample]:
    """Read samples in file order; malformed rows are skipped and counted, and
    more than 10% of them is treated as a wrong descriptor."""
    path = Path(path)
    rows: list[dict]
    if desc.format == "csv":
        with open(path, encoding="utf-8", newline="") as fh:
            rows = list(csv.DictReader(fh))
    else:
        rows = []
        for line in path.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except json.JSONDecodeError:
                rows.append({})  # counted as malformed below
    samples: list[Sample] = []
    malformed = 0
    for i, row in enumerate(rows):
        try:
            text = row[desc.text_field]
            label = desc.map_label(row[desc.label_field])
            if not isinstance(text, str) or not text.strip():
                raise DatasetError("empty text")
            samples.append(
                Sample(id=str(row.get("id", f"{desc.name}-{i}")), text=text, gold_label=label)
            )
        except (KeyError, DatasetError, ValueError) as exc:
            malformed += 1
            logger.warning("%s row %d skipped: %s", path, i, exc)
    if rows and malformed > 0.1 * len(rows):
        raise DatasetError(
            f"{malformed}/{len(rows)} malformed rows; descriptor probably wrong"
        )
    return samples


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def success_rate_from_accuracies(clean_pct: float, after_pct: float) -> float:
    """Attack success rate in percent from clean and under-attack accuracy:
    the share of originally-correct predictions that the attack flipped."""
    if clean_pct <= 0:
        return 0.0
    return (clean_pct - after_pct) / clean_pct * 100.0


@dataclass
class EvaluationReport:
    dataset: str
    sample_count: int
    clean_accuracy: float
    after_attack_accuracy: float
    attack_success_rate: float
    avg_modification_rate: float
    avg_victim_queries: float
    outcome_counts: dict[str, int]
    config: dict

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "sample_count": self.sample_count,
            "clean_accuracy": self.clean_accuracy,
            "after_attack_accuracy": self.after_attack_accuracy,
            "attack_success_rate": self.attack_success_rate,
            "avg_modification_rate": self.avg_modification_rate,
            "avg_victim_queries": self.avg_victim_queries,
            "outcome_counts": dict(self.outcome_counts),
            "config": dict(self.config),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2, ensure_ascii=False)

    def as_table(self) -> str:
        lines = [
            f"dataset               {self.dataset}",
            f"samples               {self.sample_count}",
            f"clean accuracy        {self.clean_accuracy:.3f}",
            f"after-attack accuracy {self.after_attack_accuracy:.3f}",
            f"attack success rate   {self.attack_success_rate:.3f}",
            f"avg modification rate {self.avg_modification_rate:.3f}",
            f"avg victim queries    {self.avg_victim_queries:.1f}",
        ]
        for outcome, count in sorted(self.outcome_counts.items()):
            lines.append(f"  {outcome:<28} {count}")
        return "\n".join(lines)


def _word_count(text: str) -> int:
    return max(1, len(WORD_RE.findall(text)))


def compute_report(
    records: Sequence[AttackRecord], dataset_name: str, config: AttackConfig
) -> EvaluationReport:
    """Automatic metrics over a batch of attack records.

    Originally-misclassified samples count against clean accuracy; failed
    attacks (including gateway failures) leave the victim correct, so they
    lower the success rate rather than being excluded.
    """
    if not records:
        raise ValueError("no records to evaluate")
    outcome_counts: dict[str, int] = {}
    for rec in records:
        outcome_counts[rec.outcome] = outcome_counts.get(rec.outcome, 0) + 1
    total = len(records)
    clean_correct = total - outcome_counts.get("skipped_already_misclassified", 0)
    successes = outcome_counts.get("success", 0)
    after_correct = clean_correct - successes

    success_records = [r for r in records if r.outcome == "success"]
    if success_records:
        avg_mod = sum(
            len(r.perturbation) / _word_count(r.original_text) for r in success_records
        ) / len(success_records)
    else:
        avg_mod = 0.0
    attacked = [r for r in records if r.outcome != "skipped_already_misclassified"]
    avg_queries = (
        sum(r.victim_queries for r in attacked) / len(attacked) if attacked else 0.0
    )
    return EvaluationReport(
        dataset=dataset_name,
        sample_count=total,
        clean_accuracy=clean_correct / total,
        after_attack_accuracy=after_correct / total,
        attack_success_rate=successes / clean_correct if clean_correct else 0.0,
        avg_modification_rate=avg_mod,
        avg_victim_queries=avg_queries,
        outcome_counts=outcome_counts,
        config=config.to_dict(),
    )


def run_key(dataset_name: str, config: AttackConfig, seed: int, sample_count: int) -> str:
    """Content address for a run: reports and records never overwrite a
    different configuration by accident."""
    raw = json.dumps(
        {
            "dataset": dataset_name,
            "config": config.to_dict(),
            "seed": seed,
            "sample_count": sample_count,
        },
        sort_keys=True,
    )
    return hashlib.sha256(raw.encode("utf-8")).hexdigest()[:12]


def select_samples(samples: Sequence[Sample], sample_count: int, seed: int) -> list[Sample]:
    """Seeded uniform sample without replacement, deterministic per seed."""
    if sample_count > len(samples):
        raise ValueError(
            f"sample_count {sample_count} exceeds dataset size {len(samples)}"
        )
    rng = random.Random(seed)
    return rng.sample(list(samples), sample_count)


def run_experiment(
    samples: Sequence[Sample],
    config: AttackConfig,
    gateways: GatewaySet,
    annotator: AnnotatorBundle,
    dataset_name: str = "dataset",
    sample_count: int = 500,
    seed: Optional[int] = None,
    provider: Optional[SynonymProvider] = None,
    out_dir: Optional[str | Path] = None,
    workers: int = 1,
) -> EvaluationReport:
    """Attack a seeded subsample and compute the report; when ``out_dir`` is
    given, records and the report are persisted under a content-addressed key."""
    seed = config.random_seed if seed is None else seed
    chosen = select_samples(samples, sample_count, seed)
    records_path = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        key = run_key(dataset_name, config, seed, sample_count)
        records_path = out / f"records-{key}.jsonl"
    records = attack_batch(
        chosen,
        config,
        gateways,
        annotator,
        provider=provider,
        out_path=records_path,
        workers=workers,
    )
    report = compute_report(records, dataset_name, config)
    if out_dir is not None:
        report_path = Path(out_dir) / f"report-{key}.json"
        report_path.write_text(report.to_json() + "\n", encoding="utf-8")
    return report


def grid_search_k(
    samples: Sequence[Sample],
    config: AttackConfig,
    gateways: GatewaySet,
    annotator: AnnotatorBundle,
    k_values: Sequence[int],
    subsample: int = 50,
    seed: Optional[int] = None,
    provider: Optional[SynonymProvider] = None,
    out_csv: Optional[str | Path] = None,
    workers: int = 1,
    dataset_name: str = "dataset",
) -> list[tuple[int, float, float]]:
    """One seeded run per k over the same subsample; rows are
    (k, after-attack accuracy, attack success rate)."""
    if not k_values:
        raise ValueError("k_values must be non-empty")
    seed = config.random_seed if seed is None else seed
    rows: list[tuple[int, float, float]] = []
    for k in k_values:
        report = run_experiment(
            samples,
            replace(config, k_synonyms=k),
            gateways,
            annotator,
            dataset_name=dataset_name,
            sample_count=subsample,
            seed=seed,
            provider=provider,
            workers=workers,
        )
        rows.append((k, report.after_attack_accuracy, report.attack_success_rate))
    if out_csv is not None:
        with open(out_csv, "w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "accuracy", "success_rate"])
            writer.writerows(rows)
    return rows


# ---------------------------------------------------------------------------
# LLM judge
# ---------------------------------------------------------------------------


@dataclass
class JudgeResult:
    item_id: str
    rater: str
    dimension: str
    value: dict

    def __post_init__(self) -> None:
        if self.rater not in RATERS:
            raise ValueError(f"unknown rater {self.rater!r}")
        if self.dimension not in DIMENSIONS:
            raise ValueError(f"unknown dimension {self.dimension!r}")

    def to_dict(self) -> dict:
        return {
            "item_id": self.item_id,
            "rater": self.rater,
            "dimension": self.dimension,
            "value": self.value,
        }


_JUDGE_CRITERIA = {
    "detectability": "is least likely to have been altered by a computer",
    "grammaticality": "is the most grammatically correct and fluent",
    "meaning": "best preserves the meaning of the original text",
}

SLOT_LABELS = "ABCDEFGHIJ"


def assign_slots(
    adversarials: Sequence[tuple[str, str]], seed: int
) -> list[tuple[str, str, list[str]]]:
    """Anonymize system outputs into shuffled slots; identical texts collapse
    into one slot crediting every system that produced them."""
    by_text: dict[str, list[str]] = {}
    order: list[str] = []
    for system_id, text in adversarials:
        if text not in by_text:
            by_text[text] = []
            order.append(text)
        by_text[text].append(system_id)
    rng = random.Random(seed)
    rng.shuffle(order)
    if len(order) > len(SLOT_LABELS):
        raise ValueError(f"too many distinct candidates ({len(order)})")
    return [
        (SLOT_LABELS[i], text, sorted(by_text[text])) for i, text in enumerate(order)
    ]


def _judge_prompt(original: str, slots: Sequence[tuple[str, str, list[str]]], dimension: str) -> str:
    criterion = _JUDGE_CRITERIA[dimension]
    lines = [
        "You are comparing rewritten versions of a text.",
        f"Original: {original}",
        "Candidates:",
    ]
    lines += [f"{label}) {text}" for label, text, _ in slots]
    lines.append(
        f"Which candidate {criterion}? Answer with the single letter of your "
        "choice, then a one-line justification."
    )
    return "\n".join(lines)


def _parse_choice(reply: str, valid_labels: Sequence[str]) -> Optional[str]:
    for match in re.finditer(r"\b([A-J])\b", reply):
        if match.group(1) in valid_labels:
            return match.group(1)
    return None


def llm_judge(
    original: str,
    adversarials: Sequence[tuple[str, str]],
    endpoint: LLMGateway,
    dimension: str,
    item_id: str = "",
    seed: int = 0,
) -> JudgeResult:
    """Ask the judge to select exactly one candidate for one dimension.

    Candidates are anonymized and presented in seeded-shuffled order; an
    unparseable reply gets one reprompt, then counts as an abstention.
    """
    if dimension not in DGM_DIMENSIONS:
        raise ValueError(f"judge dimension must be one of {DGM_DIMENSIONS}")
    if len(adversarials) < 2:
        raise ValueError("need at least two adversarial candidates to compare")
    slots = assign_slots(adversarials, seed)
    labels = [label for label, _, _ in slots]
    prompt = _judge_prompt(original, slots, dimension)

    choice: Optional[str] = None
    try:
        choice = _parse_choice(endpoint.complete(prompt), labels)
        if choice is None:
            retry = prompt + "\nReply with just the letter."
            choice = _parse_choice(endpoint.complete(retry), labels)
    except SynonymProviderUnavailable as exc:
        logger.warning("judge unavailable for item %s: %s", item_id, exc)

    if choice is None:
        value = {"abstain": True}
    else:
        systems = next(syss for label, _, syss in slots if label == choice)
        value = {"slot": choice, "systems": systems}
    return JudgeResult(item_id=item_id, rater="llm_judge", dimension=dimension, value=value)


def aggregate_dgm(
    results: Sequence[JudgeResult], systems: Sequence[str]
) -> dict[str, dict[str, float]]:
    """Per-dimension share of judgments crediting each system.

    Identical outputs credit several systems at once, so the shares for one
    dimension may legitimately sum above 1; nothing is renormalized.
    """
    tallies: dict[str, dict[str, float]] = {}
    for dim in DGM_DIMENSIONS:
        dim_results = [r for r in results if r.dimension == dim]
        counts = {s: 0 for s in systems}
        for r in dim_results:
            for s in r.value.get("systems", []):
                if s in counts:
                    counts[s] += 1
        denom = len(dim_results)
        tallies[dim] = {
            s: (counts[s] / denom if denom else 0.0) for s in systems
        }
    return tallies
