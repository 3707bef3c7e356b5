"""Command implementations behind the CLI: prepare, predict, evaluate, gsea-context."""

from __future__ import annotations

import json
import logging
import os
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from . import context_filter, ingest
from .config import PipelineConfig, require_path
from .errors import ConfigError, DataError
from .evaluate import EvalReport, build_report
from .gateway import ChatGateway, ChatRequest, HttpChatProvider, ReplayProvider
from .gsea import enrich_to_context, write_enrichment_report
from .ingest import BioContext, CtdAssociation, LabelRecord, TermKind
from .model import Compound
from .prompts import (
    FewShotExample,
    PromptStrategy,
    StructureFormat,
    build_prompt_bundle,
    select_fewshot_examples,
)
from .report import (
    RunManifest,
    atomic_write_text,
    render_case_study,
    render_comparison,
    render_eval_section,
    run_paths,
)
from .resolver import PubChemResolver
from .response_parser import (
    ParseFailure,
    exchange_line,
    normalize,
    parse_response,
    read_exchange_file,
)

logger = logging.getLogger(__name__)

_CTD_SOURCES = (
    ("paths.ctd_pathways", "ctd_pathways", TermKind.PATHWAY),
    ("paths.ctd_go_bp", "ctd_go_bp", TermKind.GO_BP),
    ("paths.ctd_go_mf", "ctd_go_mf", TermKind.GO_MF),
    ("paths.ctd_go_cc", "ctd_go_cc", TermKind.GO_CC),
)


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat()


def _load_associations(config: PipelineConfig) -> list[CtdAssociation]:
    configured = [
        (field_name, value, kind)
        for field_name, attr, kind in _CTD_SOURCES
        if (value := getattr(config.paths, attr))
    ]
    if not configured:
        raise ConfigError("paths.ctd_pathways: no association file configured")
    associations: list[CtdAssociation] = []
    for field_name, value, kind in configured:
        path = require_path(config, field_name, value)
        associations.extend(ingest.load_ctd_associations(path, kind))
    return associations


def _accession_index(associations: Sequence[CtdAssociation]) -> dict[str, str]:
    """Map accessions and lowercase chemical names onto accessions."""
    index: dict[str, str] = {}
    for a in associations:
        index.setdefault(a.chemical_id, a.chemical_id)
        index.setdefault(a.chemical_name.strip().lower(), a.chemical_id)
    return index


def _raw_context(
    associations: Sequence[CtdAssociation],
    index: Mapping[str, str],
    compound_id: str,
    compound_name: str,
) -> BioContext:
    # dataset ids and CTD accessions are different vocabularies; try the id
    # directly, then fall back to a case-insensitive name match
    accession = index.get(compound_id) or index.get(compound_name.strip().lower())
    if accession is None:
        return BioContext(compound_id=compound_id)
    ctx = ingest.build_bio_context(associations, accession)
    return BioContext(
        compound_id=compound_id,
        pathways=ctx.pathways,
        go_terms=ctx.go_terms,
        filtered=False,
    )


def build_gateway(config: PipelineConfig) -> ChatGateway:
    cache_dir = config.resolve_path(config.paths.cache_dir) / "llm"
    if config.provider.kind == "replay":
        fixtures = require_path(config, "paths.fixtures_dir", config.paths.fixtures_dir)
        provider: ReplayProvider | HttpChatProvider = ReplayProvider(fixtures)
    else:
        api_key = os.environ.get(config.provider.api_key_env)
        if not api_key:
            raise ConfigError(
                f"provider.api_key_env: environment variable"
                f" {config.provider.api_key_env} is not set"
            )
        provider = HttpChatProvider(
            base_url=config.provider.base_url,
            api_key=api_key,
            timeout=config.provider.timeout_seconds,
        )
    return ChatGateway(
        provider,
        cache_dir=cache_dir,
        retries=config.provider.retries,
        max_in_flight=config.provider.max_in_flight,
        requests_per_minute=config.provider.requests_per_minute,
    )


def _build_resolver(config: PipelineConfig) -> PubChemResolver:
    kwargs: dict = {
        "cache_path": config.resolve_path(config.paths.cache_dir) / "resolver_cache.json",
        "not_found_ttl_days": config.resolver.not_found_ttl_days,
    }
    if config.resolver.base_url:
        kwargs["base_url"] = config.resolver.base_url
    if config.paths.resolver_fixtures_dir:
        kwargs["fixtures_dir"] = require_path(
            config, "paths.resolver_fixtures_dir", config.paths.resolver_fixtures_dir
        )
    return PubChemResolver(**kwargs)


def _template_dir(config: PipelineConfig) -> Path | None:
    if not config.paths.template_dir:
        return None
    return require_path(config, "paths.template_dir", config.paths.template_dir)


def _filter_context(
    config: PipelineConfig, ctx: BioContext, gateway: ChatGateway | None
) -> tuple[BioContext, list[context_filter.FilterDecision]]:
    if config.filter.mode == "keyword":
        lexicon_path = (
            config.resolve_path(config.filter.lexicon) if config.filter.lexicon else None
        )
        lexicon = context_filter.load_lexicon(lexicon_path)
        return context_filter.filter_keyword(ctx, lexicon)
    assert gateway is not None
    filter_config = context_filter.LlmFilterConfig(
        model_id=config.filter.model_id or config.provider.model_id,
        template_dir=_template_dir(config),
    )
    return context_filter.filter_llm(ctx, gateway, filter_config)


def cmd_prepare(config: PipelineConfig) -> Path:
    """Assemble the context store: labels, CTD context, structures, split, filter."""
    labels_path = require_path(config, "paths.labels", config.paths.labels)
    labels, names = ingest.load_label_table(labels_path)
    associations = _load_associations(config)
    index = _accession_index(associations)
    contexts = {
        r.compound_id: _raw_context(
            associations, index, r.compound_id, names[r.compound_id]
        )
        for r in labels
    }
    resolver = _build_resolver(config)
    records = resolver.resolve_batch(
        [names[r.compound_id] for r in labels],
        max_in_flight=config.resolver.max_in_flight,
    )
    split = ingest.split_dataset(labels, contexts, seed=config.run.seed)
    gateway = build_gateway(config) if config.filter.mode == "llm" else None
    compounds: dict[str, dict] = {}
    decisions_out: dict[str, list[dict]] = {}
    for record, resolution in zip(labels, records):
        cid = record.compound_id
        ctx = contexts[cid]
        entry: dict = {
            "name": names[cid],
            "iupac_name": resolution.iupac_name,
            "smiles": resolution.canonical_smiles,
            "resolution_status": resolution.status.value,
            "context": ingest.context_to_dict(ctx),
            "filtered_context": None,
        }
        if cid in split.test_ids:
            filtered, decisions = _filter_context(config, ctx, gateway)
            entry["filtered_context"] = ingest.context_to_dict(filtered)
            decisions_out[cid] = [
                {
                    "term_id": d.term_id,
                    "kept": d.kept,
                    "method": d.method.value,
                    "rationale": d.rationale,
                }
                for d in decisions
            ]
        compounds[cid] = entry
    store = {
        "compounds": compounds,
        "train_ids": sorted(split.train_ids),
        "test_ids": sorted(split.test_ids),
        "filter_decisions": decisions_out,
    }
    store_path = config.resolve_path(config.paths.context_store)
    atomic_write_text(
        store_path, json.dumps(store, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    )
    logger.info(
        "prepared %d compounds (%d test, %d train) -> %s",
        len(labels),
        len(split.test_ids),
        len(split.train_ids),
        store_path,
    )
    return store_path


def _load_store(config: PipelineConfig) -> dict:
    path = require_path(config, "paths.context_store", config.paths.context_store)
    try:
        store = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: corrupt context store: {exc}") from None
    for key in ("compounds", "train_ids", "test_ids"):
        if key not in store:
            raise DataError(f"{path}: context store missing {key!r}")
    return store


def _store_compound(store: dict, cid: str) -> Compound:
    entry = store["compounds"][cid]
    return Compound(
        id=cid,
        name=entry["name"],
        smiles=entry.get("smiles"),
        iupac_name=entry.get("iupac_name"),
    )


def _model_slug(model_id: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", model_id)


def run_id_for(strategy: PromptStrategy, fmt: StructureFormat, model_id: str) -> str:
    return f"{strategy.value}-{fmt.value}-{_model_slug(model_id)}"


def _fewshot_pool(
    store: dict, labels: Sequence[LabelRecord], fmt: StructureFormat
) -> list[FewShotExample]:
    by_id = {r.compound_id: r for r in labels}
    pool: list[FewShotExample] = []
    for cid in store["train_ids"]:
        if cid not in by_id or cid not in store["compounds"]:
            continue
        compound = _store_compound(store, cid)
        if fmt is StructureFormat.SMILES and not compound.smiles:
            continue
        if fmt is StructureFormat.IUPAC and not compound.iupac_name:
            continue
        pool.append(FewShotExample(compound, by_id[cid].labels))
    return pool


def cmd_predict(config: PipelineConfig) -> Path:
    """Query the model for every test compound and write the run directory."""
    strategy = config.strategy()
    fmt = config.structure_format()
    if (strategy is PromptStrategy.BIOPROCESS_COT) != (fmt is StructureFormat.NONE):
        raise ConfigError(
            f"strategy {strategy.value!r} is incompatible with format {fmt.value!r}"
        )
    if not config.provider.model_id:
        raise ConfigError("provider.model_id is not set")
    store = _load_store(config)
    labels_path = require_path(config, "paths.labels", config.paths.labels)
    labels = ingest.load_labels(labels_path)
    gateway = build_gateway(config)
    template_dir = _template_dir(config)
    examples = None
    if strategy is PromptStrategy.FEWSHOT:
        examples = select_fewshot_examples(
            _fewshot_pool(store, labels, fmt), seed=config.run.seed
        )
    started = _now_iso()
    paths = run_paths(
        config.resolve_path(config.paths.output_dir),
        run_id_for(strategy, fmt, config.provider.model_id),
    )
    prediction_lines: list[str] = []
    failure_lines: list[str] = []
    transcripts: dict[str, str] = {}
    prompt_hashes: dict[str, str] = {}
    for cid in sorted(store["test_ids"]):
        if cid not in store["compounds"]:
            raise DataError(f"context store has no compound entry for test id {cid}")
        compound = _store_compound(store, cid)
        context = None
        if strategy.wants_context:
            raw = store["compounds"][cid].get("filtered_context")
            if raw is None:
                raise DataError(
                    f"{cid}: no filtered context in store; rerun prepare"
                )
            context = ingest.context_from_dict(raw)
        try:
            bundle = build_prompt_bundle(
                compound, strategy, fmt, context, examples, template_dir
            )
        except DataError as exc:
            logger.warning("skipping %s: %s", cid, exc)
            failure_lines.append(
                json.dumps(
                    {"compound_id": cid, "stage": "Request", "detail": str(exc)},
                    ensure_ascii=False,
                )
            )
            continue
        prompt_hashes[cid] = f"{bundle.content_hash:016x}"
        request = ChatRequest(
            model_id=config.provider.model_id,
            system_text=bundle.system_text,
            user_text=bundle.user_text,
            temperature=config.run.temperature,
            max_output_tokens=config.provider.max_output_tokens,
        )
        response = gateway.complete(request)
        outcome = parse_response(
            response.text, cid, expect_reasoning=strategy.wants_reasoning
        )
        if isinstance(outcome, ParseFailure):
            logger.warning(
                "parse failure for %s at stage %s: %s",
                cid,
                outcome.stage.value,
                outcome.detail,
            )
            failure_lines.append(
                json.dumps(
                    {
                        "compound_id": cid,
                        "stage": outcome.stage.value,
                        "detail": outcome.detail,
                    },
                    ensure_ascii=False,
                )
            )
            continue
        prediction_lines.append(exchange_line(normalize(outcome)))
        transcripts[cid] = render_case_study(outcome)
    atomic_write_text(
        paths.predictions, "".join(line + "\n" for line in prediction_lines)
    )
    atomic_write_text(paths.failures, "".join(line + "\n" for line in failure_lines))
    for cid, text in transcripts.items():
        atomic_write_text(paths.transcripts / f"{cid}.md", text)
    manifest = RunManifest(
        run_id=paths.root.name,
        strategy=strategy.value,
        structure_format=fmt.value,
        model_id=config.provider.model_id,
        temperature=config.run.temperature,
        seed=config.run.seed,
        n_compounds=len(store["test_ids"]),
        n_predictions=len(prediction_lines),
        n_parse_failures=len(failure_lines),
        request_count=gateway.request_count,
        cache_hit_count=gateway.cache_hit_count,
        started_at=started,
        finished_at=_now_iso(),
        prompt_hashes=prompt_hashes,
    )
    atomic_write_text(paths.manifest, manifest.to_json())
    logger.info(
        "run %s: %d predictions, %d failures",
        paths.root.name,
        len(prediction_lines),
        len(failure_lines),
    )
    return paths.root


def _count_failures(predictions_path: Path) -> int:
    side = predictions_path.parent / "failures.jsonl"
    if not side.is_file():
        return 0
    return sum(1 for line in side.read_text(encoding="utf-8").splitlines() if line.strip())


def _method_name(path: Path, taken: set[str]) -> str:
    base = path.parent.name if path.name == "predictions.jsonl" else path.stem
    name = base
    suffix = 2
    while name in taken:
        name = f"{base}-{suffix}"
        suffix += 1
    taken.add(name)
    return name


def cmd_evaluate(
    config: PipelineConfig, prediction_files: Sequence[str], out_dir: str | None = None
) -> Path:
    """Score prediction files against the labels and write report.md."""
    if not prediction_files:
        raise ConfigError("evaluate needs at least one predictions file")
    labels_path = require_path(config, "paths.labels", config.paths.labels)
    labels = ingest.load_labels(labels_path)
    reports: dict[str, EvalReport] = {}
    taken: set[str] = set()
    for raw_path in prediction_files:
        path = Path(raw_path)
        if not path.is_file():
            raise DataError(f"predictions file not found: {path}")
        predictions = read_exchange_file(path)
        if not predictions:
            raise DataError(f"{path}: no predictions")
        kfold = None
        if len({p.compound_id for p in predictions}) >= config.eval.k:
            kfold = (config.eval.k, config.eval.seed)
        else:
            logger.warning(
                "%s: fewer than %d compounds, skipping k-fold scoring",
                path,
                config.eval.k,
            )
        reports[_method_name(path, taken)] = build_report(
            predictions,
            labels,
            n_parse_failures=_count_failures(path),
            kfold=kfold,
        )
    if out_dir is not None:
        target = Path(out_dir)
    elif len(prediction_files) == 1:
        target = Path(prediction_files[0]).parent
    else:
        target = config.resolve_path(config.paths.output_dir) / "eval"
    sections: list[str] = []
    if len(reports) > 1:
        sections.append("# Method comparison\n\n" + render_comparison(reports) + "\n")
    for name, rep in reports.items():
        sections.append(render_eval_section(name, rep))
    report_path = target / "report.md"
    atomic_write_text(report_path, "\n".join(sections))
    payload = {
        name: {
            "per_type_f1": {t.short_name: rep.per_type_f1[t] for t in rep.per_type_f1},
            "macro_f1": rep.macro_f1,
            "n_compounds": rep.n_compounds,
            "n_parse_failures": rep.n_parse_failures,
            "kfold_mean_f1": (
                {t.short_name: rep.kfold_mean_f1[t] for t in rep.kfold_mean_f1}
                if rep.kfold_mean_f1 is not None
                else None
            ),
        }
        for name, rep in reports.items()
    }
    atomic_write_text(
        target / "report.json",
        json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
    )
    logger.info("evaluation written to %s", report_path)
    return report_path


def cmd_gsea_context(config: PipelineConfig, out_dir: str | None = None) -> Path:
    """Derive per-compound context from expression rankings via enrichment."""
    gmt_path = require_path(config, "paths.gmt", config.paths.gmt)
    sets = ingest.parse_gmt(gmt_path)
    if not config.paths.rank_files:
        raise ConfigError("paths.rank_files is not set")
    params = config.gsea.params()
    kind_map = config.gsea.term_kind_map()
    gateway = build_gateway(config) if config.filter.mode == "llm" else None
    target = (
        Path(out_dir)
        if out_dir is not None
        else config.resolve_path(config.paths.output_dir)
    ) / "gsea"
    store: dict[str, dict] = {}
    for cid in sorted(config.paths.rank_files):
        rank_path = require_path(
            config, f"paths.rank_files.{cid}", config.paths.rank_files[cid]
        )
        ranked = ingest.parse_rank_file(rank_path)
        ctx, results = enrich_to_context(
            ranked,
            sets,
            params,
            compound_id=cid,
            p_max=config.gsea.p_max,
            q_max=config.gsea.q_max,
            kind_map=kind_map,
        )
        kept_names = {t.term_id for t in ctx.all_terms()}
        target.mkdir(parents=True, exist_ok=True)
        write_enrichment_report(results, kept_names, target / f"{cid}.tsv")
        if ctx.is_empty:
            logger.warning("%s: enrichment kept no gene sets", cid)
        filtered, _ = _filter_context(config, ctx, gateway)
        store[cid] = {
            "context": ingest.context_to_dict(ctx),
            "filtered_context": ingest.context_to_dict(filtered),
        }
    out_path = target / "gsea_context.json"
    atomic_write_text(
        out_path, json.dumps(store, ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    )
    logger.info("gsea context for %d compounds -> %s", len(store), out_path)
    return out_path
