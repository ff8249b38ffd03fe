"""Blind human-evaluation service: serves anonymized items, collects
judgments with per-(evaluator, item, dimension) uniqueness, and aggregates
validity / suspiciousness / D-G-M tallies."""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .core import AttackRecord
from .evalsuite import DGM_DIMENSIONS, SLOT_LABELS

ORIGINAL_SOURCE = "original"


class ReviewError(Exception):
    pass


class UnknownItem(ReviewError):
    pass


class InvalidJudgment(ReviewError):
    pass


class DuplicateJudgment(ReviewError):
    pass


@dataclass
class ReviewItem:
    """One unit of annotation work; the source/system fields stay server-side
    and never appear in session payloads."""

    item_id: str
    mode: str  # validity | suspiciousness | dgm
    text: str = ""
    source: str = ""
    gold_label: Optional[int] = None
    original: str = ""
    slots: list[tuple[str, str, list[str]]] = field(default_factory=list)

    def dimensions(self) -> tuple[str, ...]:
        if self.mode == "validity":
            return ("validity",)
        if self.mode == "suspiciousness":
            return ("suspiciousness",)
        return DGM_DIMENSIONS

    def payload(self) -> dict:
        """The anonymized view served to evaluators."""
        if self.mode == "dgm":
            return {
                "item_id": self.item_id,
                "mode": self.mode,
                "original": self.original,
                "candidates": [
                    {"slot": label, "text": text} for label, text, _ in self.slots
                ],
            }
        return {"item_id": self.item_id, "mode": self.mode, "text": self.text}


@dataclass
class Judgment:
    evaluator: str
    item_id: str
    dimension: str
    value: dict

    def to_dict(self) -> dict:
        return {
            "evaluator": self.evaluator,
            "item_id": self.item_id,
            "dimension": self.dimension,
            "value": self.value,
            "rater": "human",
        }


def build_review_items(
    results: dict[str, Sequence[AttackRecord]],
    label_names: Sequence[str],
    seed: int = 0,
    include_originals: bool = True,
) -> list[ReviewItem]:
    """Assemble annotation items from per-system attack records.

    Successful adversarial texts become validity and suspiciousness items;
    samples where at least two systems succeeded become one D/G/M comparison
    item with seeded, stable slot assignment. Identical outputs share a slot
    and credit every producing system. Item ids are opaque indices over a
    seeded shuffle, so neither ids nor serving order reveal sources.
    """
    items: list[ReviewItem] = []
    by_sample: dict[str, list[tuple[str, AttackRecord]]] = {}
    originals: dict[str, AttackRecord] = {}
    for system_id in sorted(results):
        for rec in results[system_id]:
            if rec.outcome != "success":
                continue
            by_sample.setdefault(rec.sample_id, []).append((system_id, rec))
            originals.setdefault(rec.sample_id, rec)

    if include_originals:
        for sample_id in sorted(originals):
            rec = originals[sample_id]
            items.append(
                ReviewItem(
                    item_id="",
                    mode="validity",
                    text=rec.original_text,
                    source=ORIGINAL_SOURCE,
                    gold_label=rec.gold_label,
                )
            )

    for sample_id in sorted(by_sample):
        for system_id, rec in by_sample[sample_id]:
            items.append(
                ReviewItem(
                    item_id="",
                    mode="validity",
                    text=rec.adversarial_text,
                    source=system_id,
                    gold_label=rec.gold_label,
                )
            )
            items.append(
                ReviewItem(
                    item_id="",
                    mode="suspiciousness",
                    text=rec.adversarial_text,
                    source=system_id,
                )
            )

    for sample_id in sorted(by_sample):
        entries = by_sample[sample_id]
        if len(entries) < 2:
            continue
        by_text: dict[str, list[str]] = {}
        order: list[str] = []
        for system_id, rec in entries:
            text = rec.adversarial_text
            if text not in by_text:
                by_text[text] = []
                order.append(text)
            by_text[text].append(system_id)
        rng = random.Random((seed, sample_id).__repr__())
        rng.shuffle(order)
        slots = [
            (SLOT_LABELS[i], text, sorted(by_text[text])) for i, text in enumerate(order)
        ]
        items.append(
            ReviewItem(
                item_id="",
                mode="dgm",
                original=entries[0][1].original_text,
                slots=slots,
            )
        )
    if not items:
        raise ReviewError("no successful attacks to review")
    random.Random(seed).shuffle(items)
    for i, item in enumerate(items):
        item.item_id = f"item-{i:04d}"
    return items


class ReviewStore:
    """Items plus persisted judgments; submissions are atomic on the
    (evaluator, item, dimension) key."""

    def __init__(
        self,
        items: Sequence[ReviewItem],
        label_names: Sequence[str],
        judgments_path: Optional[str | Path] = None,
    ):
        self.items = list(items)
        self.label_names = list(label_names)
        self._by_id = {item.item_id: item for item in self.items}
        if len(self._by_id) != len(self.items):
            raise ReviewError("duplicate item ids")
        self._judgments: dict[tuple[str, str, str], Judgment] = {}
        self._path = Path(judgments_path) if judgments_path else None
        self._lock = threading.Lock()
        if self._path and self._path.exists():
            for line in self._path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                d = json.loads(line)
                j = Judgment(d["evaluator"], d["item_id"], d["dimension"], d["value"])
                self._judgments[(j.evaluator, j.item_id, j.dimension)] = j

    def total_dimensions(self) -> int:
        return sum(len(item.dimensions()) for item in self.items)

    def progress(self, evaluator: str) -> dict:
        judged = sum(1 for key in self._judgments if key[0] == evaluator)
        return {"judged": judged, "total": self.total_dimensions()}

    def next_item(self, evaluator: str) -> Optional[dict]:
        """First item (stable order) with any dimension unjudged by this
        evaluator, with the remaining dimensions listed."""
        for item in self.items:
            remaining = [
                dim
                for dim in item.dimensions()
                if (evaluator, item.item_id, dim) not in self._judgments
            ]
            if remaining:
                payload = item.payload()
                payload["dimensions"] = remaining
                payload["progress"] = self.progress(evaluator)
                if item.mode == "validity":
                    payload["labels"] = self.label_names
                return payload
        return None

    def _validate(self, item: ReviewItem, dimension: str, value: dict) -> dict:
        if dimension not in item.dimensions():
            raise InvalidJudgment(
                f"dimension {dimension!r} does not apply to item {item.item_id}"
            )
        if item.mode == "validity":
            label = value.get("label")
            if not isinstance(label, int) or not 0 <= label < len(self.label_names):
                raise InvalidJudgment(f"label must be in [0,{len(self.label_names)})")
            return {"label": label}
        if item.mode == "suspiciousness":
            altered = value.get("computer_altered")
            if not isinstance(altered, bool):
                raise InvalidJudgment("computer_altered must be a boolean")
            return {"computer_altered": altered}
        slot = value.get("slot")
        if slot not in [label for label, _, _ in item.slots]:
            raise InvalidJudgment(f"slot {slot!r} not among the presented candidates")
        return {"slot": slot}

    def submit(self, evaluator: str, item_id: str, dimension: str, value: dict) -> Judgment:
        if not evaluator:
            raise InvalidJudgment("evaluator id must be non-empty")
        item = self._by_id.get(item_id)
        if item is None:
            raise UnknownItem(f"unknown item {item_id!r}")
        clean = self._validate(item, dimension, value)
        judgment = Judgment(evaluator, item_id, dimension, clean)
        key = (evaluator, item_id, dimension)
        with self._lock:
            if key in self._judgments:
                raise DuplicateJudgment(f"{key} already judged")
            self._judgments[key] = judgment
            if self._path:
                with open(self._path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(judgment.to_dict(), sort_keys=True) + "\n")
        return judgment

    def judgments(self) -> list[Judgment]:
        return list(self._judgments.values())

    def tallies(self) -> dict:
        """Aggregates for the researcher: validity consistency and perceived
        alteration per source, and D/G/M selection shares per system (which may
        sum above 1 when systems produced identical texts)."""
        validity: dict[str, list[bool]] = {}
        suspicion: dict[str, list[bool]] = {}
        dgm_counts: dict[str, dict[str, int]] = {d: {} for d in DGM_DIMENSIONS}
        dgm_denoms: dict[str, int] = {d: 0 for d in DGM_DIMENSIONS}
        for judgment in self._judgments.values():
            item = self._by_id[judgment.item_id]
            if item.mode == "validity":
                validity.setdefault(item.source, []).append(
                    judgment.value["label"] == item.gold_label
                )
            elif item.mode == "suspiciousness":
                suspicion.setdefault(item.source, []).append(
                    judgment.value["computer_altered"]
                )
            else:
                dim = judgment.dimension
                dgm_denoms[dim] += 1
                slot = judgment.value["slot"]
                systems = next(s for label, _, s in item.slots if label == slot)
                for system in systems:
                    dgm_counts[dim][system] = dgm_counts[dim].get(system, 0) + 1
        return {
            "validity": {
                source: sum(v) / len(v) for source, v in sorted(validity.items())
            },
            "suspiciousness": {
                source: sum(v) / len(v) for source, v in sorted(suspicion.items())
            },
            "dgm": {
                dim: {
                    system: count / dgm_denoms[dim]
                    for system, count in sorted(dgm_counts[dim].items())
                }
                for dim in DGM_DIMENSIONS
            },
            "judgment_count": len(self._judgments),
        }


def make_review_app(store: ReviewStore):
    """FastAPI app over a review store: GET /session/next, POST /judgment,
    GET /tallies."""
    from fastapi import Body, FastAPI, HTTPException, Query

    app = FastAPI(title="adversarial example review")

    @app.get("/session/next")
    def session_next(evaluator: str = Query(min_length=1)):
        payload = store.next_item(evaluator)
        if payload is None:
            return {"done": True, "progress": store.progress(evaluator)}
        return payload

    @app.post("/judgment")
    def judgment(payload: dict = Body(...)):
        evaluator = payload.get("evaluator")
        item_id = payload.get("item_id")
        dimension = payload.get("dimension")
        value = payload.get("value")
        if (
            not isinstance(evaluator, str)
            or not isinstance(item_id, str)
            or not isinstance(dimension, str)
            or not isinstance(value, dict)
        ):
            raise HTTPException(
                status_code=400,
                detail="body must carry evaluator, item_id, dimension, value{}",
            )
        try:
            store.submit(evaluator, item_id, dimension, value)
        except UnknownItem as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        except DuplicateJudgment as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except InvalidJudgment as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        return {"ok": True, "progress": store.progress(evaluator)}

    @app.get("/tallies")
    def tallies():
        return store.tallies()

    return app
