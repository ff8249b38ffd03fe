"""The greedy attack loop: walk the ranked candidate words, query synonyms,
filter through the constraint stack, score survivors against the victim, and
commit the best replacement until the label flips or options run out."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .core import (
    AttackConfig,
    AttackRecord,
    Edit,
    Perturbation,
    Sample,
    StepTrace,
    TokenizedText,
    VerdictTrace,
    apply_edits,
)
from .gateways import (
    EncoderUnavailable,
    GatewayError,
    GatewaySet,
    VictimGateway,
)
from .importance import rank_words
from .linguistics import AnnotationError, AnnotatorBundle
from .substitution import (
    QueryMeter,
    SynonymProvider,
    SynonymRequest,
    build_provider,
    check_candidate,
    match_case,
)

logger = logging.getLogger(__name__)


@dataclass
class AttackState:
    """Mutable working state of one attack in progress."""

    current_text: str
    edits: Perturbation
    p_true: float


class _BudgetExceeded(Exception):
    """Raised before a classify batch would cross max_victim_queries."""


class _MeteredVictim:
    """Victim wrapper that meters per-text queries and enforces the cap at the
    single point every classification passes through."""

    def __init__(self, inner: VictimGateway, meter: QueryMeter, cap: Optional[int]):
        self.inner = inner
        self.meter = meter
        self.cap = cap
        self.num_classes = inner.num_classes
        self.unk_token = getattr(inner, "unk_token", None)

    def classify_batch(self, texts):
        if self.cap is not None and self.meter.victim + len(texts) > self.cap:
            raise _BudgetExceeded(
                f"{self.meter.victim} used, batch of {len(texts)} exceeds cap {self.cap}"
            )
        result = self.inner.classify_batch(texts)
        self.meter.victim += len(texts)
        return result


def attack(
    sample: Sample,
    config: AttackConfig,
    gateways: GatewaySet,
    annotator: AnnotatorBundle,
    provider: Optional[SynonymProvider] = None,
) -> AttackRecord:
    """Attack one sample and return its full record; infrastructure failures
    come back as failed_budget records with a diagnostic, never exceptions."""
    if provider is None:
        provider = build_provider(
            config.provider_name,
            llm=gateways.llm,
            embeddings=gateways.embeddings,
            fill_mask=gateways.fill_mask,
        )
    meter = QueryMeter()
    victim = _MeteredVictim(gateways.victim, meter, config.max_victim_queries)
    state = AttackState(current_text=sample.text, edits=Perturbation(), p_true=1.0)
    steps: list[StepTrace] = []

    def finish(outcome: str, diagnostic: Optional[str] = None) -> AttackRecord:
        return AttackRecord(
            sample_id=sample.id,
            original_text=sample.text,
            adversarial_text=state.current_text,
            outcome=outcome,
            perturbation=state.edits,
            victim_queries=meter.victim,
            llm_queries=meter.llm,
            steps=steps,
            gold_label=sample.gold_label,
            diagnostic=diagnostic,
        )

    try:
        dist = victim.classify_batch([sample.text])[0]
        if dist.argmax() != sample.gold_label:
            return finish("skipped_already_misclassified")
        state.p_true = dist.prob(sample.gold_label)

        tokens = annotator.annotate(sample.text)
        ranked = rank_words(sample, tokens, config, victim)

        for entry in ranked.entries:
            step, flipped = _attack_position(
                sample, tokens, entry.position, state, config, gateways, victim,
                annotator, provider, meter,
            )
            steps.append(step)
            if flipped:
                return finish("success")
        return finish("failed_exhausted")
    except _BudgetExceeded as exc:
        return finish("failed_budget", diagnostic=f"query_budget: {exc}")
    except EncoderUnavailable as exc:
        return finish("failed_budget", diagnostic=f"encoder_error: {exc}")
    except AnnotationError as exc:
        logger.warning("skipping sample %s: %s", sample.id, exc)
        return finish("failed_budget", diagnostic=f"annotator_error: {exc}")
    except GatewayError as exc:
        return finish("failed_budget", diagnostic=f"gateway_error: {exc}")


def _attack_position(
    sample: Sample,
    tokens: TokenizedText,
    position: int,
    state: AttackState,
    config: AttackConfig,
    gateways: GatewaySet,
    victim: _MeteredVictim,
    annotator: AnnotatorBundle,
    provider: SynonymProvider,
    meter: QueryMeter,
) -> tuple[StepTrace, bool]:
    word = tokens.words[position]
    req = SynonymRequest(
        sentence=tokens.text, position=position, word=word, k=config.k_synonyms
    )
    candidates = provider.candidates(req, meter)
    p_before = state.p_true

    verdicts: list[VerdictTrace] = []
    survivors = []
    for cand in candidates:
        verdict = check_candidate(
            tokens, state.edits, position, cand, config, gateways, annotator
        )
        verdicts.append(
            VerdictTrace(
                word=cand.word,
                accepted=verdict.accepted,
                rejected_by=verdict.rejected_by,
                similarity=cand.similarity_to_original_sentence,
            )
        )
        if verdict.accepted:
            survivors.append(cand)

    step = StepTrace(
        position=position,
        word=word,
        candidates=[c.word for c in candidates],
        verdicts=verdicts,
        survivor_p_true={},
        chosen=None,
        chosen_similarity=None,
        p_true_before=p_before,
        p_true_after=p_before,
    )
    if not survivors:
        return step, False

    edited = []
    for cand in survivors:
        replacement = match_case(word, cand.word)
        perturbed = state.edits.extended(Edit(position, word, replacement))
        edited.append((cand, perturbed, apply_edits(tokens, perturbed)))

    dists = victim.classify_batch([text for _, _, text in edited])
    p_news = [d.prob(sample.gold_label) for d in dists]
    step.survivor_p_true = {cand.word: p for (cand, _, _), p in zip(edited, p_news)}

    flips = [i for i, d in enumerate(dists) if d.argmax() != sample.gold_label]
    if flips:
        # flip with the highest sentence similarity; ties to the better rank
        best = max(
            flips,
            key=lambda i: (
                edited[i][0].similarity_to_original_sentence,
                -edited[i][0].provider_rank,
            ),
        )
        _commit(state, step, edited[best], p_news[best])
        return step, True

    best = min(range(len(edited)), key=lambda i: (p_news[i], edited[i][0].provider_rank))
    if p_news[best] < state.p_true:
        _commit(state, step, edited[best], p_news[best])
    return step, False


def _commit(state: AttackState, step: StepTrace, chosen, p_new: float) -> None:
    cand, perturbed, text = chosen
    state.edits = perturbed
    state.current_text = text
    state.p_true = p_new
    step.chosen = cand.word
    step.chosen_similarity = cand.similarity_to_original_sentence
    step.p_true_after = p_new


def attack_batch(
    samples: Sequence[Sample],
    config: AttackConfig,
    gateways: GatewaySet,
    annotator: AnnotatorBundle,
    provider: Optional[SynonymProvider] = None,
    out_path: Optional[str | Path] = None,
    workers: int = 1,
) -> list[AttackRecord]:
    """Attack a batch of samples, order-aligned with the input.

    Completed records found in ``out_path`` are reused verbatim, so an
    interrupted run resumes where it left off and reruns are byte-identical.
    Per-sample failures become failure records; they never abort the batch.
    """
    if not samples:
        raise ValueError("attack_batch requires a non-empty sample list")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if provider is None:
        provider = build_provider(
            config.provider_name,
            llm=gateways.llm,
            embeddings=gateways.embeddings,
            fill_mask=gateways.fill_mask,
        )

    existing: dict[str, AttackRecord] = {}
    if out_path is not None:
        path = Path(out_path)
        if path.exists():
            for line in path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    rec = AttackRecord.from_json(line)
                    existing[rec.sample_id] = rec

    def run_one(sample: Sample) -> AttackRecord:
        if sample.id in existing:
            return existing[sample.id]
        try:
            return attack(sample, config, gateways, annotator.clone(), provider)
        except Exception as exc:  # defensive: a worker bug must not kill the batch
            logger.exception("attack on sample %s failed unexpectedly", sample.id)
            return AttackRecord(
                sample_id=sample.id,
                original_text=sample.text,
                adversarial_text=sample.text,
                outcome="failed_budget",
                perturbation=Perturbation(),
                victim_queries=0,
                llm_queries=0,
                steps=[],
                gold_label=sample.gold_label,
                diagnostic=f"internal_error: {type(exc).__name__}: {exc}",
            )

    if workers == 1:
        results_iter = map(run_one, samples)
    else:
        pool = ThreadPoolExecutor(max_workers=workers)
        submitted = [pool.submit(run_one, s) for s in samples]
        results_iter = (f.result() for f in submitted)

    records: list[AttackRecord] = []
    writer = None
    if out_path is not None:
        writer = open(out_path, "a", encoding="utf-8")
    try:
        # records flush in input order so the file is deterministic under any
        # worker interleaving
        for sample, record in zip(samples, results_iter):
            records.append(record)
            if writer is not None and sample.id not in existing:
                writer.write(record.to_json() + "\n")
                writer.flush()
    finally:
        if writer is not None:
            writer.close()
        if workers > 1:
            pool.shutdown(wait=True)
    return records
