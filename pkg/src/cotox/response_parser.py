"""Parse model completions into per-organ verdicts, repairing common damage.

Extraction tries, in order: the raw text as JSON, the contents of Markdown
code fences, the longest balanced {...} substrings, and finally each of
those candidates with trailing commas removed. Every repair that fires is
recorded as a warning on the result. Downstream, the "Answer" field is
authoritative whenever it disagrees with "Prediction".
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterator, Mapping, Union

from .errors import DataError
from .model import (
    BinaryVerdict,
    ToxicityType,
    UnknownToxicityTypeError,
    UnknownVerdictError,
    parse_binary_verdict,
    parse_toxicity_type,
)

logger = logging.getLogger(__name__)

REASONING_FIELDS = ("Pathway", "GO Term", "IUPAC Support", "Overall Mechanism")
PREDICTION_KEY = "Prediction"
ANSWER_KEY = "Answer"
REASONING_KEY = "Reasoning"

_FENCE_RE = re.compile(r"```[^\S\n]*\w*[^\S\n]*\n?(.*?)```", re.DOTALL)
_TRAILING_COMMA_RE = re.compile(r",\s*([}\]])")


class ExtractionError(DataError):
    pass


class ExchangeFormatError(DataError):
    pass


class ParseStage(Enum):
    EXTRACTION = "Extraction"
    SCHEMA = "Schema"
    VOCABULARY = "Vocabulary"


@dataclass(frozen=True)
class ReasoningBlock:
    pathway: str = ""
    go_term: str = ""
    iupac_support: str = ""
    overall_mechanism: str = ""


@dataclass(frozen=True)
class OrganAssessment:
    reasoning: ReasoningBlock
    prediction: BinaryVerdict
    answer: BinaryVerdict


@dataclass(frozen=True)
class ToxicityPrediction:
    """A successfully parsed completion: one assessment per toxicity type."""

    compound_id: str
    verdicts: Mapping[ToxicityType, OrganAssessment] = field(hash=False)
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        missing = [t.display_name for t in ToxicityType if t not in self.verdicts]
        if missing:
            raise ValueError(f"{self.compound_id}: verdict map missing {missing}")

    def answers(self) -> dict[ToxicityType, BinaryVerdict]:
        return {t: self.verdicts[t].answer for t in ToxicityType}


@dataclass(frozen=True)
class ParseFailure:
    compound_id: str
    stage: ParseStage
    detail: str


ParseOutcome = Union[ToxicityPrediction, ParseFailure]


def _balanced_spans(text: str) -> list[str]:
    """Top-level {...} substrings, string/escape aware, longest first."""
    spans: list[str] = []
    depth = 0
    start = -1
    in_string = False
    escaped = False
    for i, ch in enumerate(text):
        if in_string:
            if escaped:
                escaped = False
            elif ch == "\\":
                escaped = True
            elif ch == '"':
                in_string = False
            continue
        if ch == '"':
            if depth > 0:
                in_string = True
        elif ch == "{":
            if depth == 0:
                start = i
            depth += 1
        elif ch == "}":
            if depth > 0:
                depth -= 1
                if depth == 0:
                    spans.append(text[start : i + 1])
    return sorted(spans, key=len, reverse=True)


def _candidates(text: str) -> Iterator[tuple[str, tuple[str, ...]]]:
    first_wave: list[tuple[str, tuple[str, ...]]] = [(text, ())]
    for fenced in _FENCE_RE.findall(text):
        first_wave.append((fenced, ("stripped code fence",)))
    for span in _balanced_spans(text):
        first_wave.append((span, ("extracted balanced JSON object",)))
    yield from first_wave
    for candidate, warnings in first_wave:
        repaired = _TRAILING_COMMA_RE.sub(r"\1", candidate)
        if repaired != candidate:
            yield repaired, warnings + ("removed trailing commas",)


def extract_json(text: str) -> tuple[Any, list[str]]:
    """Pull a JSON value out of free-form completion text.

    Returns (value, warnings) where warnings name the repairs applied.
    Raises ExtractionError when no repair rung yields valid JSON.
    """
    for candidate, warnings in _candidates(text):
        try:
            return json.loads(candidate), list(warnings)
        except (json.JSONDecodeError, RecursionError):
            continue
    raise ExtractionError("no JSON value found after all repair attempts")


def _normalize_key(key: str) -> str:
    return re.sub(r"[^a-z0-9]+", " ", key.lower()).strip()


def _get_field(obj: Mapping, name: str) -> Any:
    """Case- and punctuation-insensitive field lookup; missing -> None."""
    want = _normalize_key(name)
    for k, v in obj.items():
        if isinstance(k, str) and _normalize_key(k) == want:
            return v
    return None


def _parse_verdict_field(
    raw: Any, organ: str, field_name: str, compound_id: str
) -> BinaryVerdict | ParseFailure:
    if not isinstance(raw, str):
        return ParseFailure(
            compound_id,
            ParseStage.VOCABULARY,
            f"{organ}: {field_name} is {type(raw).__name__}, not a verdict string",
        )
    try:
        return parse_binary_verdict(raw)
    except UnknownVerdictError:
        return ParseFailure(
            compound_id,
            ParseStage.VOCABULARY,
            f"{organ}: unrecognized {field_name} verdict {raw!r}",
        )


def _parse_reasoning(
    raw: Any, organ: str, expect_reasoning: bool, warnings: list[str]
) -> ReasoningBlock:
    if raw is None:
        if expect_reasoning:
            warnings.append(f"{organ}: missing Reasoning block")
        return ReasoningBlock()
    if isinstance(raw, str):
        warnings.append(f"{organ}: Reasoning is plain text, stored as Overall Mechanism")
        return ReasoningBlock(overall_mechanism=raw)
    if not isinstance(raw, dict):
        warnings.append(f"{organ}: Reasoning is not an object, ignored")
        return ReasoningBlock()
    values: list[str] = []
    for name in REASONING_FIELDS:
        v = _get_field(raw, name)
        if v is None:
            if expect_reasoning:
                warnings.append(f"{organ}: Reasoning is missing {name}")
            values.append("")
        else:
            values.append(v if isinstance(v, str) else json.dumps(v))
    return ReasoningBlock(*values)


def _parse_value(
    value: Any, compound_id: str, expect_reasoning: bool
) -> ParseOutcome:
    if not isinstance(value, dict):
        return ParseFailure(
            compound_id,
            ParseStage.SCHEMA,
            f"top-level JSON value is {type(value).__name__}, not an object",
        )
    warnings: list[str] = []
    by_type: dict[ToxicityType, Any] = {}
    for key, sub in value.items():
        try:
            t = parse_toxicity_type(str(key))
        except UnknownToxicityTypeError:
            warnings.append(f"ignored unknown key {key!r}")
            continue
        if t in by_type:
            warnings.append(f"duplicate key for {t.display_name}, first kept")
            continue
        by_type[t] = sub
    verdicts: dict[ToxicityType, OrganAssessment] = {}
    for t in ToxicityType:
        organ = t.display_name
        if t not in by_type:
            return ParseFailure(
                compound_id, ParseStage.SCHEMA, f"missing toxicity key: {organ}"
            )
        sub = by_type[t]
        if isinstance(sub, str) and not expect_reasoning:
            # zero-shot leniency: a bare string is taken as the Answer
            answer = _parse_verdict_field(sub, organ, ANSWER_KEY, compound_id)
            if isinstance(answer, ParseFailure):
                return answer
            warnings.append(f"{organ}: bare string verdict, no structured fields")
            verdicts[t] = OrganAssessment(ReasoningBlock(), answer, answer)
            continue
        if not isinstance(sub, dict):
            if expect_reasoning:
                return ParseFailure(
                    compound_id,
                    ParseStage.SCHEMA,
                    f"{organ}: expected an object, got {type(sub).__name__}",
                )
            return ParseFailure(
                compound_id,
                ParseStage.VOCABULARY,
                f"{organ}: {type(sub).__name__} value is not a verdict",
            )
        raw_answer = _get_field(sub, ANSWER_KEY)
        if raw_answer is None:
            return ParseFailure(
                compound_id, ParseStage.SCHEMA, f"{organ}: missing {ANSWER_KEY}"
            )
        answer = _parse_verdict_field(raw_answer, organ, ANSWER_KEY, compound_id)
        if isinstance(answer, ParseFailure):
            return answer
        raw_prediction = _get_field(sub, PREDICTION_KEY)
        if raw_prediction is None:
            warnings.append(f"{organ}: missing {PREDICTION_KEY}, using {ANSWER_KEY}")
            prediction = answer
        else:
            prediction = _parse_verdict_field(
                raw_prediction, organ, PREDICTION_KEY, compound_id
            )
            if isinstance(prediction, ParseFailure):
                return prediction
        if prediction is not answer:
            warnings.append(
                f"{organ}: Prediction ({prediction.serialize()}) disagrees with "
                f"Answer ({answer.serialize()}); Answer kept"
            )
        reasoning = _parse_reasoning(
            _get_field(sub, REASONING_KEY), organ, expect_reasoning, warnings
        )
        verdicts[t] = OrganAssessment(reasoning, prediction, answer)
    return ToxicityPrediction(compound_id, verdicts, tuple(warnings))


def parse_prediction(value: Any, compound_id: str) -> ParseOutcome:
    """Parse an extracted JSON value from a reasoning-style completion."""
    return _parse_value(value, compound_id, expect_reasoning=True)


def parse_zeroshot_prediction(value: Any, compound_id: str) -> ParseOutcome:
    """Parse a completion that was not asked for reasoning blocks."""
    return _parse_value(value, compound_id, expect_reasoning=False)


def parse_response(
    text: str, compound_id: str, expect_reasoning: bool = True
) -> ParseOutcome:
    """Extract and parse a completion; total over arbitrary input text."""
    try:
        value, extract_warnings = extract_json(text)
    except ExtractionError as exc:
        return ParseFailure(compound_id, ParseStage.EXTRACTION, str(exc))
    try:
        outcome = _parse_value(value, compound_id, expect_reasoning)
    except Exception as exc:  # totality guard for adversarial shapes
        logger.exception("parser raised on %s", compound_id)
        return ParseFailure(compound_id, ParseStage.SCHEMA, f"internal: {exc!r}")
    if isinstance(outcome, ToxicityPrediction) and extract_warnings:
        outcome = ToxicityPrediction(
            outcome.compound_id,
            dict(outcome.verdicts),
            tuple(extract_warnings) + outcome.warnings,
        )
    return outcome


def prediction_to_json(pred: ToxicityPrediction) -> dict:
    """Serialize back to the canonical response schema (round-trip stable)."""
    out: dict[str, dict] = {}
    for t in ToxicityType:
        a = pred.verdicts[t]
        out[t.display_name] = {
            REASONING_KEY: {
                "Pathway": a.reasoning.pathway,
                "GO Term": a.reasoning.go_term,
                "IUPAC Support": a.reasoning.iupac_support,
                "Overall Mechanism": a.reasoning.overall_mechanism,
            },
            PREDICTION_KEY: a.prediction.serialize(),
            ANSWER_KEY: a.answer.serialize(),
        }
    return out


@dataclass(frozen=True)
class NormalizedPrediction:
    """The exchange-format view of a prediction: answers only."""

    compound_id: str
    answers: Mapping[ToxicityType, BinaryVerdict] = field(hash=False)
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        missing = [t.display_name for t in ToxicityType if t not in self.answers]
        if missing:
            raise ValueError(f"{self.compound_id}: answers missing {missing}")


def normalize(pred: ToxicityPrediction) -> NormalizedPrediction:
    return NormalizedPrediction(pred.compound_id, pred.answers(), pred.warnings)


def exchange_line(pred: NormalizedPrediction) -> str:
    """One JSONL line in the cross-component exchange format."""
    payload = {
        "compound_id": pred.compound_id,
        "answers": {t.short_name: pred.answers[t].serialize() for t in ToxicityType},
        "warnings": list(pred.warnings),
    }
    return json.dumps(payload, ensure_ascii=False, separators=(", ", ": "))


def parse_exchange_line(line: str) -> NormalizedPrediction:
    """Parse and validate one exchange JSONL line."""
    try:
        raw = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ExchangeFormatError(f"bad JSON: {exc}") from None
    if not isinstance(raw, dict):
        raise ExchangeFormatError("exchange line is not an object")
    cid = raw.get("compound_id")
    if not isinstance(cid, str) or not cid:
        raise ExchangeFormatError("missing or empty compound_id")
    answers_raw = raw.get("answers")
    if not isinstance(answers_raw, dict):
        raise ExchangeFormatError(f"{cid}: missing answers object")
    answers: dict[ToxicityType, BinaryVerdict] = {}
    for t in ToxicityType:
        cell = answers_raw.get(t.short_name)
        if cell not in (BinaryVerdict.TOXIC.value, BinaryVerdict.NON_TOXIC.value):
            raise ExchangeFormatError(
                f"{cid}: answers[{t.short_name!r}] must be 'Toxic' or 'Non-toxic',"
                f" got {cell!r}"
            )
        answers[t] = parse_binary_verdict(cell)
    unknown = set(answers_raw) - {t.short_name for t in ToxicityType}
    if unknown:
        raise ExchangeFormatError(f"{cid}: unknown answer keys {sorted(unknown)}")
    warnings_raw = raw.get("warnings", [])
    if not isinstance(warnings_raw, list) or any(
        not isinstance(w, str) for w in warnings_raw
    ):
        raise ExchangeFormatError(f"{cid}: warnings must be a list of strings")
    return NormalizedPrediction(cid, answers, tuple(warnings_raw))


def read_exchange_file(path) -> list[NormalizedPrediction]:
    preds: list[NormalizedPrediction] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                preds.append(parse_exchange_line(line))
            except ExchangeFormatError as exc:
                raise ExchangeFormatError(f"{path}:{lineno}: {exc}") from None
    return preds
