"""Deterministic prompt assembly for the five querying strategies.

Templates live under assets/templates as versioned text files with
{{placeholder}} slots; everything substituted into them is a pure
function of the compound, its context, and the strategy, so a prompt
built twice from the same inputs is byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

from .errors import ConfigError, DataError
from .ingest import BioContext, Term
from .model import BinaryVerdict, Compound, ToxicityType
from .response_parser import (
    ANSWER_KEY,
    PREDICTION_KEY,
    REASONING_FIELDS,
    REASONING_KEY,
)


class IllegalCombinationError(ConfigError):
    pass


class WrongExampleCountError(ConfigError):
    pass


class UnfilteredContextError(DataError):
    pass


class MissingStructureError(DataError):
    pass


class PoolTooSmallError(DataError):
    pass


class MissingTemplateAssetError(ConfigError):
    pass


class TemplateError(ConfigError):
    pass


class PromptStrategy(Enum):
    ZEROSHOT = "zeroshot"
    FEWSHOT = "fewshot"
    COT = "cot"
    BIOPROCESS_COT = "bioprocess-cot"
    COTOX = "cotox"

    @property
    def wants_reasoning(self) -> bool:
        return self in (
            PromptStrategy.COT,
            PromptStrategy.BIOPROCESS_COT,
            PromptStrategy.COTOX,
        )

    @property
    def wants_context(self) -> bool:
        return self in (PromptStrategy.BIOPROCESS_COT, PromptStrategy.COTOX)


class StructureFormat(Enum):
    SMILES = "smiles"
    IUPAC = "iupac"
    NONE = "none"


FEWSHOT_EXAMPLE_COUNT = 4

_PLACEHOLDER_RE = re.compile(r"\{\{([a-z_]+)\}\}")


def load_template(name: str, template_dir: str | Path | None = None) -> str:
    """Read a template asset, from template_dir when given."""
    if template_dir is not None:
        path = Path(template_dir) / name
        if not path.is_file():
            raise MissingTemplateAssetError(f"template not found: {path}")
        return path.read_text(encoding="utf-8")
    asset = resources.files("cotox").joinpath("assets", "templates", name)
    if not asset.is_file():
        raise MissingTemplateAssetError(f"template asset not found: {name}")
    return asset.read_text(encoding="utf-8")


def render_template(template: str, mapping: Mapping[str, str]) -> str:
    """Substitute {{name}} slots; an unmapped slot is an error."""

    def sub(match: re.Match) -> str:
        key = match.group(1)
        if key not in mapping:
            raise TemplateError(f"template references unknown placeholder {{{{{key}}}}}")
        return mapping[key]

    return _PLACEHOLDER_RE.sub(sub, template)


@dataclass(frozen=True)
class FewShotExample:
    compound: Compound
    labels: Mapping[ToxicityType, BinaryVerdict] = field(hash=False)

    def __post_init__(self) -> None:
        missing = [t for t in ToxicityType if t not in self.labels]
        if missing:
            raise ValueError(f"example {self.compound.id}: labels must be total")

    def bears(self, verdict: BinaryVerdict) -> bool:
        return any(v is verdict for v in self.labels.values())


def select_fewshot_examples(
    pool: Sequence[FewShotExample],
    k: int = FEWSHOT_EXAMPLE_COUNT,
    seed: int = 0,
) -> list[FewShotExample]:
    """Pick k examples deterministically, balancing verdict coverage.

    When the pool permits, the selection contains at least one example
    bearing a Toxic label and one bearing a Non-toxic label. Output order
    follows compound id.
    """
    if len(pool) < k:
        raise PoolTooSmallError(f"need {k} examples, pool has {len(pool)}")
    ordered = sorted(pool, key=lambda e: e.compound.id)
    ids = [e.compound.id for e in ordered]
    if len(set(ids)) != len(ids):
        raise ValueError("example pool contains duplicate compound ids")
    rng = random.Random(seed)
    selected = set(rng.sample(range(len(ordered)), k))

    def bears(i: int, verdict: BinaryVerdict) -> bool:
        return ordered[i].bears(verdict)

    for want, keep in (
        (BinaryVerdict.TOXIC, BinaryVerdict.NON_TOXIC),
        (BinaryVerdict.NON_TOXIC, BinaryVerdict.TOXIC),
    ):
        if any(bears(i, want) for i in selected):
            continue
        candidate = next(
            (i for i in range(len(ordered)) if i not in selected and bears(i, want)),
            None,
        )
        if candidate is None:
            continue  # pool cannot supply this class
        # evict the highest index whose removal keeps the other class covered
        keep_unmet = not any(bears(i, keep) for i in selected)
        drop = next(
            (
                j
                for j in sorted(selected, reverse=True)
                if keep_unmet or any(bears(m, keep) for m in selected if m != j)
            ),
            max(selected),
        )
        selected.remove(drop)
        selected.add(candidate)
    return [ordered[i] for i in sorted(selected)]


def _structure_section(compound: Compound, fmt: StructureFormat) -> str:
    if fmt is StructureFormat.SMILES:
        if not compound.smiles:
            raise MissingStructureError(f"{compound.id}: no SMILES available")
        return f"SMILES: {compound.smiles}"
    if fmt is StructureFormat.IUPAC:
        if not compound.iupac_name:
            raise MissingStructureError(f"{compound.id}: no IUPAC name available")
        return f"IUPAC Name: {compound.iupac_name}"
    return ""


def _term_lines(terms: Sequence[Term]) -> str:
    if not terms:
        return "- (none)"
    return "\n".join(f"- {t.term_name} ({t.term_id})" for t in terms)


def _context_section(ctx: BioContext) -> str:
    return (
        "Pathways:\n"
        + _term_lines(ctx.pathways)
        + "\nGO terms:\n"
        + _term_lines(ctx.go_terms)
    )


def _toxicity_list() -> str:
    return "\n".join(f"- {t.display_name}" for t in ToxicityType)


def _verdict_slot() -> str:
    return f"<{BinaryVerdict.TOXIC.serialize()} or {BinaryVerdict.NON_TOXIC.serialize()}>"


def _output_schema(with_reasoning: bool) -> str:
    per_organ: dict[str, object]
    if with_reasoning:
        per_organ = {
            REASONING_KEY: {name: f"<{name.lower()} reasoning>" for name in REASONING_FIELDS},
            PREDICTION_KEY: _verdict_slot(),
            ANSWER_KEY: _verdict_slot(),
        }
    else:
        per_organ = {PREDICTION_KEY: _verdict_slot(), ANSWER_KEY: _verdict_slot()}
    schema = {t.display_name: per_organ for t in ToxicityType}
    return json.dumps(schema, indent=2, ensure_ascii=False)


def _examples_section(examples: Sequence[FewShotExample], fmt: StructureFormat) -> str:
    blocks: list[str] = []
    for i, ex in enumerate(examples, start=1):
        answers = {
            t.display_name: {
                PREDICTION_KEY: ex.labels[t].serialize(),
                ANSWER_KEY: ex.labels[t].serialize(),
            }
            for t in ToxicityType
        }
        blocks.append(
            f"Example {i}:\n"
            f"Compound: {ex.compound.name}\n"
            f"{_structure_section(ex.compound, fmt)}\n"
            "Answers:\n" + json.dumps(answers, indent=2, ensure_ascii=False)
        )
    return "\n\n".join(blocks)


def _check_combination(
    strategy: PromptStrategy,
    fmt: StructureFormat,
    context: BioContext | None,
    examples: Sequence[FewShotExample] | None,
) -> None:
    if strategy is PromptStrategy.BIOPROCESS_COT:
        if fmt is not StructureFormat.NONE:
            raise IllegalCombinationError(
                "bioprocess-cot carries no structure; use format 'none'"
            )
    elif fmt is StructureFormat.NONE:
        raise IllegalCombinationError(
            f"strategy {strategy.value} requires a structure format"
        )
    if strategy.wants_context:
        if context is None:
            raise IllegalCombinationError(
                f"strategy {strategy.value} requires biological context"
            )
        if not context.filtered:
            raise UnfilteredContextError(
                f"{context.compound_id}: context must pass the relevance filter first"
            )
    elif context is not None:
        raise IllegalCombinationError(
            f"strategy {strategy.value} does not take biological context"
        )
    if strategy is PromptStrategy.FEWSHOT:
        n = len(examples) if examples else 0
        if n != FEWSHOT_EXAMPLE_COUNT:
            raise WrongExampleCountError(
                f"fewshot needs exactly {FEWSHOT_EXAMPLE_COUNT} examples, got {n}"
            )
    elif examples:
        raise IllegalCombinationError(
            f"strategy {strategy.value} does not take examples"
        )


def build_system_prompt(
    strategy: PromptStrategy, template_dir: str | Path | None = None
) -> str:
    return load_template(f"{strategy.value}.system.txt", template_dir)


def build_user_prompt(
    compound: Compound,
    strategy: PromptStrategy,
    fmt: StructureFormat,
    context: BioContext | None = None,
    examples: Sequence[FewShotExample] | None = None,
    template_dir: str | Path | None = None,
) -> str:
    """Assemble the user message for one compound under one strategy."""
    _check_combination(strategy, fmt, context, examples)
    mapping = {
        "compound_name": compound.name,
        "structure_section": _structure_section(compound, fmt),
        "toxicity_types": _toxicity_list(),
        "output_schema": _output_schema(strategy.wants_reasoning),
    }
    if context is not None:
        mapping["context_section"] = _context_section(context)
    if strategy is PromptStrategy.FEWSHOT:
        mapping["examples_section"] = _examples_section(examples or (), fmt)
    template = load_template(f"{strategy.value}.user.txt", template_dir)
    return render_template(template, mapping)


def content_hash(system_text: str, user_text: str) -> int:
    """Stable 64-bit digest of the exact prompt pair."""
    digest = hashlib.sha256(
        system_text.encode("utf-8") + b"\x00" + user_text.encode("utf-8")
    ).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class PromptBundle:
    compound_id: str
    strategy: PromptStrategy
    structure_format: StructureFormat
    system_text: str
    user_text: str
    content_hash: int


def build_prompt_bundle(
    compound: Compound,
    strategy: PromptStrategy,
    fmt: StructureFormat,
    context: BioContext | None = None,
    examples: Sequence[FewShotExample] | None = None,
    template_dir: str | Path | None = None,
) -> PromptBundle:
    system_text = build_system_prompt(strategy, template_dir)
    user_text = build_user_prompt(compound, strategy, fmt, context, examples, template_dir)
    return PromptBundle(
        compound_id=compound.id,
        strategy=strategy,
        structure_format=fmt,
        system_text=system_text,
        user_text=user_text,
        content_hash=content_hash(system_text, user_text),
    )
