import json

import pytest

from cotox.evaluate import build_report
from cotox.model import ToxicityType
from cotox.report import (
    RunManifest,
    atomic_write_text,
    render_case_study,
    render_comparison,
    render_eval_section,
    run_paths,
    write_predictions,
)
from cotox.response_parser import ToxicityPrediction, parse_response

from conftest import make_label, make_prediction, response_text, verdict_map


def _report(per_type_values, n=10):
    """Build an EvalReport whose per-type F1 equal the given values."""
    labels, preds = [], []
    for i, want in enumerate(per_type_values.values()):
        assert want in (0.0, 1.0)  # enough for rendering tests
    pattern_true = "".join(
        "T" if v == 1.0 else "N" for v in per_type_values.values()
    )
    for i in range(n):
        labels.append(make_label(f"C{i}", "TTTTTT"))
        preds.append(make_prediction(f"C{i}", pattern_true))
    return build_report(preds, labels)


def test_case_study_layout():
    pred = parse_response(response_text("TNTNTN"), "C42")
    assert isinstance(pred, ToxicityPrediction)
    text = render_case_study(pred)
    lines = text.splitlines()
    assert lines[0] == "# Toxicity assessment: C42"
    organ_headers = [l for l in lines if l.startswith("## ")]
    assert organ_headers == [f"## {t.display_name}" for t in ToxicityType]
    assert "- **Pathway:** cardio pathway reasoning" in lines
    assert "- **Prediction:** Toxic" in lines
    assert "- **Answer:** Non-toxic" in lines
    assert "Warnings" not in text


def test_case_study_warning_banner_and_placeholders():
    raw = json.loads(response_text("TTTTTT"))
    for organ in raw:
        del raw[organ]["Reasoning"]
    pred = parse_response(json.dumps(raw), "C1")
    text = render_case_study(pred)
    lines = text.splitlines()
    assert lines[2] == "> **Warnings:**"
    assert lines[3].startswith("> - ")
    assert text.count("- **Pathway:** (not provided)") == 6


def test_comparison_table_shape_and_bolding():
    reports = {
        "method-a": _report(dict.fromkeys(ToxicityType, 1.0)),
        "method-b": _report(dict.fromkeys(ToxicityType, 0.0)),
    }
    table = render_comparison(reports)
    lines = table.splitlines()
    assert lines[0] == (
        "| Method | cardio | hemato | infertility | liver | pulmonary "
        "| renal | Average |"
    )
    assert lines[1] == "|---|---|---|---|---|---|---|---|"
    assert lines[2] == (
        "| method-a | **1.000** | **1.000** | **1.000** | **1.000** "
        "| **1.000** | **1.000** | **1.000** |"
    )
    assert lines[3] == (
        "| method-b | 0.000 | 0.000 | 0.000 | 0.000 | 0.000 | 0.000 | 0.000 |"
    )


def test_comparison_bolds_ties_everywhere():
    reports = {
        "a": _report(dict.fromkeys(ToxicityType, 1.0)),
        "b": _report(dict.fromkeys(ToxicityType, 1.0)),
    }
    table = render_comparison(reports)
    assert table.count("**1.000**") == 14  # both rows, all seven columns


def test_comparison_rejects_empty_input():
    with pytest.raises(ValueError):
        render_comparison({})


def test_comparison_three_decimal_cells():
    labels = [make_label(f"C{i}", "TTTTTT") for i in range(3)]
    preds = [
        make_prediction("C0", "TTTTTT"),
        make_prediction("C1", "TTTTTT"),
        make_prediction("C2", "NNNNNN"),
    ]
    table = render_comparison({"m": build_report(preds, labels)})
    assert "**0.800**" in table  # f1 of tp=2, fn=1 is 0.8 exactly


def test_eval_section_includes_counts_and_fold_table():
    labels = [make_label(f"C{i}", "TTTTTT") for i in range(10)]
    preds = [make_prediction(f"C{i}", "TTTTTT") for i in range(10)]
    report = build_report(preds, labels, n_parse_failures=3, kfold=(5, 0))
    text = render_eval_section("my-run", report)
    assert text.startswith("# Evaluation: my-run\n")
    assert "- Compounds scored: 10" in text
    assert "- Parse failures (excluded): 3" in text
    assert "## 5-fold mean F1" in text
    assert "| mean | 1.000 | 1.000 | 1.000 | 1.000 | 1.000 | 1.000 |" in text
    assert text.count("| Fold |") == 1
    # five fold rows numbered 0..4
    for i in range(5):
        assert f"\n| {i} | " in text


def test_eval_section_without_kfold_has_no_fold_table():
    labels = [make_label("C0", "TNTNTN")]
    preds = [make_prediction("C0", "TNTNTN")]
    text = render_eval_section("tiny", build_report(preds, labels))
    assert "fold" not in text.lower()


def test_manifest_json_is_sorted_and_complete():
    manifest = RunManifest(
        run_id="cotox-iupac-gpt-4o",
        strategy="cotox",
        structure_format="iupac",
        model_id="gpt-4o",
        temperature=0.0,
        seed=0,
        n_compounds=10,
        n_predictions=9,
        n_parse_failures=1,
        request_count=9,
        cache_hit_count=0,
        started_at="2024-05-01T00:00:00+00:00",
        finished_at="2024-05-01T00:05:00+00:00",
        prompt_hashes={"C1": "00ff"},
    )
    payload = json.loads(manifest.to_json())
    assert list(payload) == sorted(payload)
    assert payload["prompt_hashes"] == {"C1": "00ff"}
    assert payload["n_predictions"] == 9
    assert manifest.to_json().endswith("\n")


def test_run_paths_layout(tmp_path):
    paths = run_paths(tmp_path, "cotox-smiles-gpt-4o")
    assert paths.root == tmp_path / "cotox-smiles-gpt-4o"
    assert paths.manifest.name == "manifest.json"
    assert paths.predictions.name == "predictions.jsonl"
    assert paths.failures.name == "failures.jsonl"
    assert paths.transcripts.name == "transcripts"


def test_atomic_write_and_predictions_file(tmp_path):
    target = tmp_path / "deep" / "file.txt"
    atomic_write_text(target, "payload")
    assert target.read_text() == "payload"
    assert list(target.parent.iterdir()) == [target]  # no temp litter
    preds = tmp_path / "preds.jsonl"
    write_predictions(preds, ['{"a": 1}', '{"b": 2}'])
    assert preds.read_text() == '{"a": 1}\n{"b": 2}\n'
