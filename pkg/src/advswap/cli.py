"""Command-line entry points: run attacks and experiments, search over k,
serve the stub victim, judge systems, and host the review API."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

from .core import AttackConfig, AttackRecord
from .evalsuite import (
    DatasetDescriptor,
    DGM_DIMENSIONS,
    aggregate_dgm,
    grid_search_k,
    llm_judge,
    load_dataset,
    run_experiment,
)
from .engine import attack_batch
from .gateways import (
    DictionaryLLM,
    EmbeddingStore,
    GatewaySet,
    HashingSentenceEncoder,
    HttpChatLLM,
    HttpFillMask,
    HttpVictim,
    LexiconVictim,
    StubFillMask,
    TransformerEncoder,
    make_victim_app,
)
from .linguistics import AnnotatorBundle
from .review_api import ReviewStore, build_review_items, make_review_app
from .substitution import SynonymCache, build_provider, load_prompt_template

logger = logging.getLogger(__name__)


def _build_victim(spec: str):
    if spec.startswith("stub:"):
        data = json.loads(Path(spec[len("stub:"):]).read_text(encoding="utf-8"))
        return LexiconVictim(data["lexicon"], unk_token=data.get("unk_token", "[UNK]"))
    return HttpVictim(spec)


def _build_llm(args) -> Optional[object]:
    if not args.llm_url:
        return None
    if args.llm_url.startswith("stub:"):
        data = json.loads(Path(args.llm_url[len("stub:"):]).read_text(encoding="utf-8"))
        return DictionaryLLM(data)
    return HttpChatLLM(
        args.llm_url,
        model_name=args.llm_model,
        temperature=args.llm_temperature,
        rate_limit=args.llm_rate_limit,
    )


def _build_encoder(spec: str):
    if spec == "hashing":
        return HashingSentenceEncoder()
    if spec.startswith("st:"):
        return TransformerEncoder(spec[len("st:"):])
    raise SystemExit(f"unknown encoder {spec!r}; use 'hashing' or 'st:<model>'")


def _build_fill_mask(spec: Optional[str]):
    if not spec:
        return None
    if spec.startswith("stub:"):
        data = json.loads(Path(spec[len("stub:"):]).read_text(encoding="utf-8"))
        return StubFillMask(
            default=data.get("default", []),
            by_sentence=data.get("by_sentence"),
            mask_token=data.get("mask_token", "[MASK]"),
        )
    return HttpFillMask(spec)


def _build_gateways(args) -> GatewaySet:
    return GatewaySet(
        victim=_build_victim(args.victim),
        encoder=_build_encoder(args.encoder),
        llm=_build_llm(args),
        embeddings=EmbeddingStore.load(args.embeddings) if args.embeddings else None,
        fill_mask=_build_fill_mask(args.fill_mask),
    )


def _load_config(args) -> AttackConfig:
    config = AttackConfig.from_file(args.config) if args.config else AttackConfig()
    return config.with_overrides(
        theta_max_mod_rate=args.theta_max_mod_rate,
        k_synonyms=args.k_synonyms,
        use_threshold=args.use_threshold,
        min_embedding_similarity=args.min_embedding_similarity,
        mask_token=args.mask_token,
        max_victim_queries=args.max_victim_queries,
        random_seed=args.random_seed,
        provider_name=args.provider_name,
    )


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    # every AttackConfig field has a flag of the same name; common short
    # aliases follow the attack CLI convention
    parser.add_argument("--config", help="config file (JSON or key=value lines)")
    parser.add_argument("--theta-max-mod-rate", "--theta", dest="theta_max_mod_rate", type=float)
    parser.add_argument("--k-synonyms", "--k", dest="k_synonyms", type=int)
    parser.add_argument("--use-threshold", dest="use_threshold", type=float)
    parser.add_argument("--min-embedding-similarity", dest="min_embedding_similarity", type=float)
    parser.add_argument("--mask-token", dest="mask_token")
    parser.add_argument("--max-victim-queries", "--max-queries", dest="max_victim_queries", type=int)
    parser.add_argument("--random-seed", "--seed", dest="random_seed", type=int)
    parser.add_argument(
        "--provider-name", "--provider", dest="provider_name",
        choices=["llm", "embedding", "mlm"],
    )


def _add_gateway_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--victim", required=True, help="victim URL or stub:<lexicon.json>")
    parser.add_argument("--encoder", default="hashing", help="hashing or st:<model>")
    parser.add_argument("--llm-url", help="chat endpoint URL or stub:<synonyms.json>")
    parser.add_argument("--llm-model", default="chat-model")
    parser.add_argument("--llm-temperature", type=float, default=0.0)
    parser.add_argument("--llm-rate-limit", type=float, help="requests per second")
    parser.add_argument("--embeddings", help="word-embedding table (word v1..vd lines)")
    parser.add_argument("--fill-mask", help="fill-mask URL or stub:<rankings.json>")
    parser.add_argument("--prompt-template", help="synonym prompt template file")
    parser.add_argument("--cache", help="synonym cache JSONL path")
    parser.add_argument("--stopwords", help="stop-word lexicon file (one word per line)")
    parser.add_argument("--pronouns", help="pronoun lexicon file (one word per line)")


def _add_dataset_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", required=True, help="dataset file (csv/jsonl)")
    parser.add_argument("--descriptor", required=True, help="dataset descriptor JSON")


def _make_provider(args, config: AttackConfig, gateways: GatewaySet):
    template = load_prompt_template(args.prompt_template) if args.prompt_template else None
    cache = SynonymCache(args.cache) if args.cache else None
    return build_provider(
        config.provider_name,
        llm=gateways.llm,
        embeddings=gateways.embeddings,
        fill_mask=gateways.fill_mask,
        template=template,
        cache=cache,
    )


def _build_annotator(args) -> AnnotatorBundle:
    return AnnotatorBundle.default(
        stopword_path=args.stopwords, pronoun_path=args.pronouns
    )


def cmd_attack(args) -> int:
    config = _load_config(args)
    gateways = _build_gateways(args)
    samples = load_dataset(DatasetDescriptor.from_file(args.descriptor), args.dataset)
    if args.limit:
        samples = samples[: args.limit]
    annotator = _build_annotator(args)
    provider = _make_provider(args, config, gateways)
    records = attack_batch(
        samples, config, gateways, annotator,
        provider=provider, out_path=args.out, workers=args.workers,
    )
    outcomes: dict[str, int] = {}
    for rec in records:
        outcomes[rec.outcome] = outcomes.get(rec.outcome, 0) + 1
    for outcome, count in sorted(outcomes.items()):
        print(f"{outcome:<32} {count}")
    print(f"records written to {args.out}")
    return 0


def cmd_experiment(args) -> int:
    config = _load_config(args)
    gateways = _build_gateways(args)
    samples = load_dataset(DatasetDescriptor.from_file(args.descriptor), args.dataset)
    annotator = _build_annotator(args)
    provider = _make_provider(args, config, gateways)
    report = run_experiment(
        samples, config, gateways, annotator,
        dataset_name=DatasetDescriptor.from_file(args.descriptor).name,
        sample_count=args.sample_count,
        provider=provider,
        out_dir=args.out_dir,
        workers=args.workers,
    )
    print(report.as_table())
    return 0


def cmd_grid_k(args) -> int:
    config = _load_config(args)
    gateways = _build_gateways(args)
    samples = load_dataset(DatasetDescriptor.from_file(args.descriptor), args.dataset)
    annotator = _build_annotator(args)
    provider = _make_provider(args, config, gateways)
    k_values = [int(k) for k in args.k_values.split(",")]
    rows = grid_search_k(
        samples, config, gateways, annotator, k_values,
        subsample=args.subsample, provider=provider,
        out_csv=args.out, workers=args.workers,
        dataset_name=DatasetDescriptor.from_file(args.descriptor).name,
    )
    print("k,accuracy,success_rate")
    for k, acc, rate in rows:
        print(f"{k},{acc:.4f},{rate:.4f}")
    return 0


def _load_record_sets(specs: list[str]) -> dict[str, list[AttackRecord]]:
    results: dict[str, list[AttackRecord]] = {}
    for spec in specs:
        system, _, path = spec.partition("=")
        if not path:
            raise SystemExit(f"--records expects system=path, got {spec!r}")
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        results[system] = [AttackRecord.from_json(l) for l in lines if l.strip()]
    return results


def cmd_judge(args) -> int:
    results = _load_record_sets(args.records)
    endpoint = HttpChatLLM(args.llm_url, model_name=args.llm_model) if not args.llm_url.startswith(
        "stub:"
    ) else DictionaryLLM(json.loads(Path(args.llm_url[5:]).read_text(encoding="utf-8")))
    by_sample: dict[str, list[tuple[str, AttackRecord]]] = {}
    for system, records in results.items():
        for rec in records:
            if rec.outcome == "success":
                by_sample.setdefault(rec.sample_id, []).append((system, rec))
    judgments = []
    for sample_id in sorted(by_sample):
        entries = by_sample[sample_id]
        if len(entries) < 2:
            continue
        adversarials = [(system, rec.adversarial_text) for system, rec in entries]
        for dim in DGM_DIMENSIONS:
            judgments.append(
                llm_judge(
                    entries[0][1].original_text, adversarials, endpoint, dim,
                    item_id=f"dgm-{sample_id}", seed=args.random_seed or 0,
                )
            )
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            for j in judgments:
                fh.write(json.dumps(j.to_dict(), sort_keys=True) + "\n")
    tallies = aggregate_dgm(judgments, sorted(results))
    print(json.dumps(tallies, indent=2, sort_keys=True))
    return 0


def cmd_review_serve(args) -> int:
    import uvicorn

    results = _load_record_sets(args.records)
    items = build_review_items(results, args.labels.split(","), seed=args.shuffle_seed)
    store = ReviewStore(items, args.labels.split(","), judgments_path=args.judgments)
    app = make_review_app(store)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def cmd_victim_serve(args) -> int:
    import uvicorn

    data = json.loads(Path(args.lexicon).read_text(encoding="utf-8"))
    victim = LexiconVictim(data["lexicon"], unk_token=data.get("unk_token", "[UNK]"))
    uvicorn.run(make_victim_app(victim), host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="advswap")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("attack", help="attack a dataset and write records JSONL")
    _add_dataset_flags(p)
    _add_gateway_flags(p)
    _add_config_flags(p)
    p.add_argument("--out", required=True, help="records JSONL output path")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--limit", type=int, help="attack only the first N samples")
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("experiment", help="seeded subsample run with a report")
    _add_dataset_flags(p)
    _add_gateway_flags(p)
    _add_config_flags(p)
    p.add_argument("--sample-count", type=int, default=500)
    p.add_argument("--out-dir", help="directory for records + report")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("grid-k", help="success rate across synonym-count values")
    _add_dataset_flags(p)
    _add_gateway_flags(p)
    _add_config_flags(p)
    p.add_argument("--k-values", default="1,5,15")
    p.add_argument("--subsample", type=int, default=50)
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_grid_k)

    p = sub.add_parser("judge", help="LLM-judge D/G/M comparison across systems")
    p.add_argument("--records", nargs="+", required=True, help="system=records.jsonl")
    p.add_argument("--llm-url", required=True)
    p.add_argument("--llm-model", default="judge-model")
    p.add_argument("--random-seed", "--seed", dest="random_seed", type=int, default=0)
    p.add_argument("--out", help="judgments JSONL output")
    p.set_defaults(func=cmd_judge)

    p = sub.add_parser("review-serve", help="host the blind review API")
    p.add_argument("--records", nargs="+", required=True, help="system=records.jsonl")
    p.add_argument("--labels", default="negative,positive")
    p.add_argument("--judgments", default="judgments.jsonl")
    p.add_argument("--shuffle-seed", type=int, default=0)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8100)
    p.set_defaults(func=cmd_review_serve)

    p = sub.add_parser("victim-serve", help="host the stub lexicon victim over HTTP")
    p.add_argument("--lexicon", required=True, help="JSON {lexicon: {word: weight}}")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8200)
    p.set_defaults(func=cmd_victim_serve)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    if not args.verbose:
        logging.getLogger("httpx").setLevel(logging.WARNING)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
