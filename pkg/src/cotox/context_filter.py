"""Toxicity-relevance filtering of biological context, by LLM or by keyword.

Both methods are contractive (they only ever drop terms), preserve term
order, and emit one FilterDecision per input term. The keyword method is
idempotent and fully offline; the LLM method sends a single batched chat
request per context and treats the reply as a JSON array of term ids.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from enum import Enum
from importlib import resources
from pathlib import Path

from .errors import DataError
from .gateway import ChatGateway, ChatRequest
from .ingest import BioContext, Term
from .prompts import load_template, render_template
from .response_parser import ExtractionError, extract_json

logger = logging.getLogger(__name__)


class EmptyLexiconError(DataError):
    pass


class UnparseableFilterResponseError(DataError):
    pass


class FilterMethod(Enum):
    LLM = "llm"
    KEYWORD = "keyword"


@dataclass(frozen=True)
class FilterDecision:
    term_id: str
    kept: bool
    method: FilterMethod
    rationale: str | None = None


@dataclass(frozen=True)
class LlmFilterConfig:
    model_id: str
    temperature: float = 0.0
    max_output_tokens: int = 2048
    template_dir: str | Path | None = None


def load_lexicon(path: str | Path | None = None) -> list[str]:
    """Load the substring lexicon; defaults to the bundled asset."""
    if path is None:
        text = resources.files("cotox").joinpath("assets", "lexicon.txt").read_text(
            encoding="utf-8"
        )
    else:
        text = Path(path).read_text(encoding="utf-8")
    entries = [
        line.strip().lower()
        for line in text.splitlines()
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not entries:
        raise EmptyLexiconError("lexicon has no entries")
    return entries


def _subset(ctx: BioContext, kept_ids: set[str]) -> BioContext:
    return BioContext(
        compound_id=ctx.compound_id,
        pathways=tuple(t for t in ctx.pathways if t.term_id in kept_ids),
        go_terms=tuple(t for t in ctx.go_terms if t.term_id in kept_ids),
        filtered=True,
    )


def filter_keyword(
    ctx: BioContext, lexicon: list[str] | None = None
) -> tuple[BioContext, list[FilterDecision]]:
    """Keep terms whose name contains a lexicon entry (case-insensitive)."""
    if lexicon is None:
        lexicon = load_lexicon()
    if not lexicon:
        raise EmptyLexiconError("lexicon has no entries")
    decisions: list[FilterDecision] = []
    kept_ids: set[str] = set()
    for term in ctx.all_terms():
        name = term.term_name.lower()
        match = next((entry for entry in lexicon if entry in name), None)
        if match is not None:
            kept_ids.add(term.term_id)
            decisions.append(
                FilterDecision(term.term_id, True, FilterMethod.KEYWORD, match)
            )
        else:
            decisions.append(FilterDecision(term.term_id, False, FilterMethod.KEYWORD))
    return _subset(ctx, kept_ids), decisions


def _filter_user_prompt(terms: tuple[Term, ...], template_dir) -> str:
    lines = "\n".join(f"- {t.term_id}: {t.term_name}" for t in terms)
    template = load_template("filter.user.txt", template_dir)
    return render_template(template, {"term_lines": lines})


def filter_llm(
    ctx: BioContext, gateway: ChatGateway, config: LlmFilterConfig
) -> tuple[BioContext, list[FilterDecision]]:
    """Ask a model, in one batched request, which term ids to keep.

    Kept ids are forced to be a subset of the input; invented ids are
    logged and recorded as extra kept=False decisions.
    """
    if ctx.filtered:
        raise ValueError(f"{ctx.compound_id}: context is already filtered")
    if ctx.is_empty:
        return replace(ctx, filtered=True), []
    request = ChatRequest(
        model_id=config.model_id,
        system_text=load_template("filter.system.txt", config.template_dir),
        user_text=_filter_user_prompt(ctx.all_terms(), config.template_dir),
        temperature=config.temperature,
        max_output_tokens=config.max_output_tokens,
    )
    response = gateway.complete(request)
    try:
        value, _ = extract_json(response.text)
    except ExtractionError as exc:
        raise UnparseableFilterResponseError(
            f"{ctx.compound_id}: filter reply is not JSON: {exc}"
        ) from None
    if not isinstance(value, list) or any(not isinstance(x, str) for x in value):
        raise UnparseableFilterResponseError(
            f"{ctx.compound_id}: filter reply must be a JSON array of term ids"
        )
    input_ids = {t.term_id for t in ctx.all_terms()}
    kept_ids = {x for x in value if x in input_ids}
    invented = [x for x in value if x not in input_ids]
    decisions: list[FilterDecision] = [
        FilterDecision(t.term_id, t.term_id in kept_ids, FilterMethod.LLM)
        for t in ctx.all_terms()
    ]
    for term_id in invented:
        logger.warning(
            "%s: filter reply named unknown term id %r, dropped",
            ctx.compound_id,
            term_id,
        )
        decisions.append(
            FilterDecision(term_id, False, FilterMethod.LLM, "not an input term id")
        )
    return _subset(ctx, kept_ids), decisions
