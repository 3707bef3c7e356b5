"""Core vocabulary: toxicity endpoints, binary verdicts, compounds, labels."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping

from .errors import DataError


class UnknownToxicityTypeError(DataError):
    pass


class UnknownVerdictError(DataError):
    pass


class ToxicityType(Enum):
    """The six organ toxicity endpoints, in canonical display order."""

    CARDIO = "Cardiotoxicity"
    HEMATO = "Hematological Toxicity"
    INFERTILITY = "Infertility"
    LIVER = "Liver Toxicity"
    PULMONARY = "Pulmonary Toxicity"
    RENAL = "Renal Toxicity"

    @property
    def display_name(self) -> str:
        return self.value

    @property
    def short_name(self) -> str:
        """Lowercase key used in table headers and the exchange JSONL."""
        return _SHORT_NAMES[self]


_SHORT_NAMES = {
    ToxicityType.CARDIO: "cardio",
    ToxicityType.HEMATO: "hemato",
    ToxicityType.INFERTILITY: "infertility",
    ToxicityType.LIVER: "liver",
    ToxicityType.PULMONARY: "pulmonary",
    ToxicityType.RENAL: "renal",
}


def _squash(text: str) -> str:
    """Lowercase and collapse every non-alphanumeric run to one space."""
    return re.sub(r"[^a-z0-9]+", " ", text.lower()).strip()


def _toxicity_lookup() -> dict[str, ToxicityType]:
    table: dict[str, ToxicityType] = {}
    for t in ToxicityType:
        table[_squash(t.display_name)] = t
        table[t.short_name] = t
    # frequent shorthand seen in model output and column headers
    table["cardiotoxic"] = ToxicityType.CARDIO
    table["hematological"] = ToxicityType.HEMATO
    table["hematotoxicity"] = ToxicityType.HEMATO
    table["hepatotoxicity"] = ToxicityType.LIVER
    table["nephrotoxicity"] = ToxicityType.RENAL
    table["pulmonary toxicity"] = ToxicityType.PULMONARY
    return table


_TOXICITY_LOOKUP = _toxicity_lookup()


def parse_toxicity_type(text: str) -> ToxicityType:
    """Map a label such as "Liver Toxicity" or "liver" to its enum member.

    Matching is case-insensitive and ignores punctuation and extra
    whitespace. Unknown names raise UnknownToxicityTypeError.
    """
    key = _squash(text)
    try:
        return _TOXICITY_LOOKUP[key]
    except KeyError:
        raise UnknownToxicityTypeError(f"unknown toxicity type: {text!r}") from None


class BinaryVerdict(Enum):
    """A toxic / non-toxic call. Serialized form is exactly the value."""

    TOXIC = "Toxic"
    NON_TOXIC = "Non-toxic"

    def serialize(self) -> str:
        return self.value


_VERDICT_LOOKUP = {
    "toxic": BinaryVerdict.TOXIC,
    "yes": BinaryVerdict.TOXIC,
    "non toxic": BinaryVerdict.NON_TOXIC,
    "nontoxic": BinaryVerdict.NON_TOXIC,
    "no": BinaryVerdict.NON_TOXIC,
    "not toxic": BinaryVerdict.NON_TOXIC,
}


def parse_binary_verdict(text: str) -> BinaryVerdict:
    """Parse "Toxic"/"Non-toxic" and common variants ("Yes", "NON-TOXIC", ...).

    Case, surrounding whitespace, and hyphen/space variation are
    tolerated. Anything else raises UnknownVerdictError.
    """
    key = _squash(text)
    try:
        return _VERDICT_LOOKUP[key]
    except KeyError:
        raise UnknownVerdictError(f"unknown verdict: {text!r}") from None


@dataclass(frozen=True)
class Compound:
    """A chemical under assessment. Structure fields are optional until resolved."""

    id: str
    name: str
    smiles: str | None = None
    iupac_name: str | None = None

    def __post_init__(self) -> None:
        if not self.id.strip():
            raise ValueError("compound id must be non-empty")
        if not self.name.strip():
            raise ValueError(f"compound {self.id}: name must be non-empty")


@dataclass(frozen=True)
class LabelRecord:
    """Ground-truth verdicts for one compound, total over all six types."""

    compound_id: str
    labels: Mapping[ToxicityType, BinaryVerdict] = field(hash=False)

    def __post_init__(self) -> None:
        missing = [t.display_name for t in ToxicityType if t not in self.labels]
        if missing:
            raise ValueError(
                f"label record {self.compound_id}: missing types {missing}"
            )
        if len(self.labels) != len(ToxicityType):
            extra = [k for k in self.labels if not isinstance(k, ToxicityType)]
            raise ValueError(
                f"label record {self.compound_id}: unexpected keys {extra}"
            )
