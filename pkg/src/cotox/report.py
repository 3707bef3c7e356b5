"""Markdown rendering of case studies and method comparisons, plus run output."""

from __future__ import annotations

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from .evaluate import EvalReport, round_half_up
from .model import ToxicityType
from .response_parser import ToxicityPrediction

NOT_PROVIDED = "(not provided)"


def _fmt3(value: float) -> str:
    return f"{round_half_up(value, 3):.3f}"


def render_case_study(pred: ToxicityPrediction) -> str:
    """One compound's full reasoning transcript as Markdown.

    Six organ sections in canonical order, each with the four reasoning
    fields plus Prediction and Answer; empty fields render as
    "(not provided)". Parse warnings, if any, appear in a banner up top.
    """
    lines: list[str] = [f"# Toxicity assessment: {pred.compound_id}", ""]
    if pred.warnings:
        lines.append("> **Warnings:**")
        for w in pred.warnings:
            lines.append(f"> - {w}")
        lines.append("")
    for t in ToxicityType:
        a = pred.verdicts[t]
        fields = (
            ("Pathway", a.reasoning.pathway),
            ("GO Term", a.reasoning.go_term),
            ("IUPAC Support", a.reasoning.iupac_support),
            ("Overall Mechanism", a.reasoning.overall_mechanism),
        )
        lines.append(f"## {t.display_name}")
        lines.append("")
        for name, value in fields:
            lines.append(f"- **{name}:** {value if value else NOT_PROVIDED}")
        lines.append(f"- **Prediction:** {a.prediction.serialize()}")
        lines.append(f"- **Answer:** {a.answer.serialize()}")
        lines.append("")
    return "\n".join(lines)


def render_comparison(reports: Mapping[str, EvalReport]) -> str:
    """Markdown table of per-type F1 and the macro average, one row per method.

    Cells show three decimals (half-up); each column's maximum is bolded,
    with ties all bolded.
    """
    if not reports:
        raise ValueError("no reports to render")
    methods = list(reports)
    columns: list[tuple[str, list[str]]] = []
    for t in ToxicityType:
        cells = [_fmt3(reports[m].per_type_f1[t]) for m in methods]
        columns.append((t.short_name, cells))
    columns.append(("Average", [_fmt3(reports[m].macro_f1) for m in methods]))
    for _, cells in columns:
        best = max(float(c) for c in cells)
        for i, c in enumerate(cells):
            if float(c) == best:
                cells[i] = f"**{c}**"
    header = "| Method | " + " | ".join(name for name, _ in columns) + " |"
    rule = "|" + "---|" * (len(columns) + 1)
    lines = [header, rule]
    for i, m in enumerate(methods):
        row = [m] + [cells[i] for _, cells in columns]
        lines.append("| " + " | ".join(row) + " |")
    return "\n".join(lines)


def render_eval_section(name: str, report: EvalReport) -> str:
    """The per-run evaluation block written into report.md."""
    lines = [
        f"# Evaluation: {name}",
        "",
        f"- Compounds scored: {report.n_compounds}",
        f"- Parse failures (excluded): {report.n_parse_failures}",
        "",
        render_comparison({name: report}),
    ]
    if report.kfold_mean_f1 is not None and report.per_fold_f1 is not None:
        lines.append("")
        lines.append(f"## {len(report.per_fold_f1)}-fold mean F1")
        lines.append("")
        header = "| Fold | " + " | ".join(t.short_name for t in ToxicityType) + " |"
        lines.append(header)
        lines.append("|" + "---|" * (len(ToxicityType) + 1))
        for i, fold in enumerate(report.per_fold_f1):
            cells = " | ".join(_fmt3(fold[t]) for t in ToxicityType)
            lines.append(f"| {i} | {cells} |")
        mean_cells = " | ".join(_fmt3(report.kfold_mean_f1[t]) for t in ToxicityType)
        lines.append(f"| mean | {mean_cells} |")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunManifest:
    run_id: str
    strategy: str
    structure_format: str
    model_id: str
    temperature: float
    seed: int
    n_compounds: int
    n_predictions: int
    n_parse_failures: int
    request_count: int
    cache_hit_count: int
    started_at: str
    finished_at: str
    prompt_hashes: Mapping[str, str] = field(default_factory=dict, hash=False)

    def to_json(self) -> str:
        payload = dict(self.__dict__)
        payload["prompt_hashes"] = dict(self.prompt_hashes)
        return json.dumps(payload, ensure_ascii=False, indent=2, sort_keys=True) + "\n"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file and rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass(frozen=True)
class RunPaths:
    root: Path
    manifest: Path
    predictions: Path
    failures: Path
    report: Path
    transcripts: Path


def run_paths(output_dir: str | Path, run_id: str) -> RunPaths:
    root = Path(output_dir) / run_id
    return RunPaths(
        root=root,
        manifest=root / "manifest.json",
        predictions=root / "predictions.jsonl",
        failures=root / "failures.jsonl",
        report=root / "report.md",
        transcripts=root / "transcripts",
    )


def write_predictions(path: str | Path, lines: Sequence[str]) -> None:
    atomic_write_text(path, "".join(line + "\n" for line in lines))
