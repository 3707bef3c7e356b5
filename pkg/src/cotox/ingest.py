"""Input data structures and loaders: labels, CTD associations, GMT, rank files."""

from __future__ import annotations

import csv
import random
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import DataError
from .model import (
    BinaryVerdict,
    LabelRecord,
    ToxicityType,
    UnknownVerdictError,
    parse_binary_verdict,
)


class MissingColumnError(DataError):
    pass


class BadVerdictError(DataError):
    pass


class DuplicateCompoundIdError(DataError):
    pass


class MalformedRowError(DataError):
    pass


class EmptyFileError(DataError):
    pass


class DuplicateGeneError(DataError):
    pass


class NonNumericScoreError(DataError):
    pass


class TooFewEntriesError(DataError):
    pass


class EmptyTestSetError(DataError):
    pass


class TermKind(Enum):
    PATHWAY = "pathway"
    GO_BP = "go_bp"
    GO_MF = "go_mf"
    GO_CC = "go_cc"

    @property
    def is_go(self) -> bool:
        return self is not TermKind.PATHWAY


@dataclass(frozen=True)
class Term:
    """One biological annotation (a pathway or a GO term)."""

    term_id: str
    term_name: str
    kind: TermKind
    source: str = ""

    def __post_init__(self) -> None:
        if not self.term_name.strip():
            raise ValueError(f"term {self.term_id!r}: name must be non-empty")


@dataclass(frozen=True)
class BioContext:
    """Pathway and GO-term annotations attached to one compound.

    `filtered` records whether a toxicity-relevance filter has run; the
    term tuples never contain duplicate term_ids.
    """

    compound_id: str
    pathways: tuple[Term, ...] = ()
    go_terms: tuple[Term, ...] = ()
    filtered: bool = False

    def __post_init__(self) -> None:
        for group, name in ((self.pathways, "pathways"), (self.go_terms, "go_terms")):
            ids = [t.term_id for t in group]
            if len(ids) != len(set(ids)):
                raise ValueError(f"context {self.compound_id}: duplicate {name} ids")
        bad = [t.term_id for t in self.pathways if t.kind is not TermKind.PATHWAY]
        bad += [t.term_id for t in self.go_terms if not t.kind.is_go]
        if bad:
            raise ValueError(f"context {self.compound_id}: terms in wrong group: {bad}")

    @property
    def is_empty(self) -> bool:
        return not self.pathways and not self.go_terms

    def all_terms(self) -> tuple[Term, ...]:
        return self.pathways + self.go_terms


def context_to_dict(ctx: BioContext) -> dict:
    def term_dict(t: Term) -> dict:
        return {
            "term_id": t.term_id,
            "term_name": t.term_name,
            "kind": t.kind.value,
            "source": t.source,
        }

    return {
        "compound_id": ctx.compound_id,
        "pathways": [term_dict(t) for t in ctx.pathways],
        "go_terms": [term_dict(t) for t in ctx.go_terms],
        "filtered": ctx.filtered,
    }


def context_from_dict(raw: Mapping) -> BioContext:
    def term(d: Mapping) -> Term:
        return Term(d["term_id"], d["term_name"], TermKind(d["kind"]), d.get("source", ""))

    return BioContext(
        compound_id=raw["compound_id"],
        pathways=tuple(term(d) for d in raw["pathways"]),
        go_terms=tuple(term(d) for d in raw["go_terms"]),
        filtered=bool(raw["filtered"]),
    )


@dataclass(frozen=True)
class GeneSet:
    """A named set of uppercase gene symbols."""

    name: str
    description: str
    genes: frozenset[str] = field(hash=False)

    def __post_init__(self) -> None:
        if not self.name.strip():
            raise ValueError("gene set name must be non-empty")
        if not self.genes:
            raise ValueError(f"gene set {self.name}: empty")


@dataclass(frozen=True)
class RankedList:
    """Genes with scores, sorted by score descending, ties broken by gene ascending."""

    entries: tuple[tuple[str, float], ...]

    def __post_init__(self) -> None:
        if len(self.entries) < 2:
            raise ValueError("ranked list needs at least 2 entries")
        genes = [g for g, _ in self.entries]
        if len(genes) != len(set(genes)):
            raise ValueError("ranked list contains duplicate genes")
        for (g1, s1), (g2, s2) in zip(self.entries, self.entries[1:]):
            if s1 < s2 or (s1 == s2 and g1 >= g2):
                raise ValueError("ranked list is not in canonical order")

    @property
    def genes(self) -> tuple[str, ...]:
        return tuple(g for g, _ in self.entries)

    @property
    def scores(self) -> tuple[float, ...]:
        return tuple(s for _, s in self.entries)

    def __len__(self) -> int:
        return len(self.entries)


def make_ranked_list(pairs: Iterable[tuple[str, float]]) -> RankedList:
    """Sort (gene, score) pairs into canonical order and wrap them."""
    ordered = sorted(pairs, key=lambda p: (-p[1], p[0]))
    return RankedList(tuple((g, float(s)) for g, s in ordered))


@dataclass(frozen=True)
class DatasetSplit:
    train_ids: frozenset[str] = field(hash=False)
    test_ids: frozenset[str] = field(hash=False)

    def __post_init__(self) -> None:
        overlap = self.train_ids & self.test_ids
        if overlap:
            raise ValueError(f"split leaks ids across partitions: {sorted(overlap)}")


LABEL_COLUMNS = ("compound_id", "name") + tuple(t.short_name for t in ToxicityType)


def load_label_table(path: str | Path) -> tuple[list[LabelRecord], dict[str, str]]:
    """Read the labelled-compound CSV; returns (records, id-to-name map).

    Expected header: compound_id,name,cardio,hemato,infertility,liver,
    pulmonary,renal. Verdict cells accept Yes/No/Toxic/Non-toxic.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in LABEL_COLUMNS if c not in header]
        if missing:
            raise MissingColumnError(f"{path}: missing columns {missing}")
        records: list[LabelRecord] = []
        names: dict[str, str] = {}
        for lineno, row in enumerate(reader, start=2):
            cid = (row["compound_id"] or "").strip()
            if not cid:
                raise MalformedRowError(f"{path}:{lineno}: empty compound_id")
            if cid in names:
                raise DuplicateCompoundIdError(f"{path}: duplicate compound_id {cid}")
            name = (row["name"] or "").strip()
            if not name:
                raise MalformedRowError(f"{path}:{lineno}: empty name")
            names[cid] = name
            labels: dict[ToxicityType, BinaryVerdict] = {}
            for t in ToxicityType:
                cell = row[t.short_name]
                if cell is None:
                    raise MalformedRowError(f"{path}:{lineno}: short row")
                try:
                    labels[t] = parse_binary_verdict(cell)
                except UnknownVerdictError:
                    raise BadVerdictError(
                        f"{path}:{lineno}: bad verdict {cell!r} for {t.short_name}"
                    ) from None
            records.append(LabelRecord(cid, labels))
    return records, names


def load_labels(path: str | Path) -> list[LabelRecord]:
    """Label records only; see load_label_table for the name map."""
    return load_label_table(path)[0]


@dataclass(frozen=True)
class CtdAssociation:
    chemical_id: str
    chemical_name: str
    term_name: str
    term_id: str
    kind: TermKind


def load_ctd_associations(path: str | Path, kind: TermKind) -> list[CtdAssociation]:
    """Read a chemical-to-term association TSV (CTD export layout).

    Columns: chemical_id, chemical_name, term_name, term_id. Lines
    starting with '#' are comments. A file with no data rows is an error.
    """
    path = Path(path)
    rows: list[CtdAssociation] = []
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 4 or any(not p.strip() for p in parts):
                raise MalformedRowError(f"{path}:{lineno}: expected 4 tab-separated fields")
            chem_id, chem_name, term_name, term_id = (p.strip() for p in parts)
            rows.append(CtdAssociation(chem_id, chem_name, term_name, term_id, kind))
    if not rows:
        raise EmptyFileError(f"{path}: no data rows")
    return rows


def build_bio_context(
    associations: Sequence[CtdAssociation], compound_key: str
) -> BioContext:
    """Collect the terms associated with one chemical accession.

    First occurrence of a term_id wins; file order is preserved. An
    unknown key yields an empty (valid) context.
    """
    pathways: list[Term] = []
    go_terms: list[Term] = []
    seen_pathway: set[str] = set()
    seen_go: set[str] = set()
    for assoc in associations:
        if assoc.chemical_id != compound_key:
            continue
        term = Term(assoc.term_id, assoc.term_name, assoc.kind, source="CTD")
        if assoc.kind is TermKind.PATHWAY:
            if term.term_id not in seen_pathway:
                seen_pathway.add(term.term_id)
                pathways.append(term)
        else:
            if term.term_id not in seen_go:
                seen_go.add(term.term_id)
                go_terms.append(term)
    return BioContext(
        compound_id=compound_key,
        pathways=tuple(pathways),
        go_terms=tuple(go_terms),
        filtered=False,
    )


def parse_gmt(path: str | Path) -> list[GeneSet]:
    """Read gene sets from a GMT file (name, description, then gene symbols)."""
    path = Path(path)
    sets: list[GeneSet] = []
    seen_names: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) < 3:
                raise MalformedRowError(
                    f"{path}:{lineno}: need name, description and at least one gene"
                )
            name, description = parts[0].strip(), parts[1].strip()
            if not name:
                raise MalformedRowError(f"{path}:{lineno}: empty set name")
            if name in seen_names:
                raise MalformedRowError(f"{path}: duplicate set name {name!r}")
            seen_names.add(name)
            genes = frozenset(g.strip().upper() for g in parts[2:] if g.strip())
            if not genes:
                raise MalformedRowError(f"{path}:{lineno}: set {name!r} has no genes")
            sets.append(GeneSet(name, description, genes))
    if not sets:
        raise EmptyFileError(f"{path}: no gene sets")
    return sets


def _looks_numeric(text: str) -> bool:
    try:
        float(text)
        return True
    except ValueError:
        return False


def parse_rank_file(path: str | Path) -> RankedList:
    """Read a two-column gene/score TSV into a canonical RankedList.

    A first line whose second field is non-numeric is treated as a header
    and skipped. Gene symbols are uppercased so they match GMT sets.
    """
    path = Path(path)
    pairs: list[tuple[str, float]] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2 or any(not p.strip() for p in parts):
                raise MalformedRowError(f"{path}:{lineno}: expected gene<TAB>score")
            gene, score_text = parts[0].strip(), parts[1].strip()
            if not pairs and not seen and not _looks_numeric(score_text):
                continue  # header row
            if not _looks_numeric(score_text):
                raise NonNumericScoreError(f"{path}:{lineno}: bad score {score_text!r}")
            gene = gene.upper()
            if gene in seen:
                raise DuplicateGeneError(f"{path}: duplicate gene {gene}")
            seen.add(gene)
            pairs.append((gene, float(score_text)))
    if len(pairs) < 2:
        raise TooFewEntriesError(f"{path}: need at least 2 entries, got {len(pairs)}")
    return make_ranked_list(pairs)


def split_dataset(
    labels: Sequence[LabelRecord],
    contexts: Mapping[str, BioContext],
    seed: int = 0,
    max_test_size: int | None = None,
) -> DatasetSplit:
    """Partition compounds: the test set is those with non-empty context.

    `seed` only matters when max_test_size forces subsampling of the
    eligible compounds; otherwise the split is fully determined by the
    context availability.
    """
    eligible = [
        r.compound_id
        for r in labels
        if r.compound_id in contexts and not contexts[r.compound_id].is_empty
    ]
    if not eligible:
        raise EmptyTestSetError("no compound has biological context")
    if max_test_size is not None and len(eligible) > max_test_size:
        rng = random.Random(seed)
        eligible = sorted(rng.sample(sorted(eligible), max_test_size))
    test = frozenset(eligible)
    train = frozenset(r.compound_id for r in labels) - test
    return DatasetSplit(train_ids=train, test_ids=test)


def replace_filtered(ctx: BioContext, filtered: bool) -> BioContext:
    return replace(ctx, filtered=filtered)
