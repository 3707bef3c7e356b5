import json

import pytest

from cotox.cli import main
from cotox.config import load_config, require_path, with_overrides
from cotox.errors import ConfigError
from cotox.ingest import TermKind

from conftest import make_prediction, write_labels_csv
from cotox.response_parser import exchange_line


def write_config(tmp_path, text):
    path = tmp_path / "cotox.toml"
    path.write_text(text, encoding="utf-8")
    return path


MINIMAL = """
[paths]
fixtures_dir = "fixtures"
"""


def test_minimal_config_and_defaults(tmp_path):
    (tmp_path / "fixtures").mkdir()
    config = load_config(write_config(tmp_path, MINIMAL))
    assert config.run.strategy == "cotox"
    assert config.run.format == "iupac"
    assert config.provider.kind == "replay"
    assert config.eval.k == 5
    assert config.filter.mode == "keyword"
    assert config.config_dir == str(tmp_path)
    assert config.resolve_path("fixtures") == tmp_path / "fixtures"
    assert config.resolve_path("/abs/path") == __import__("pathlib").Path("/abs/path")


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError, match="not found"):
        load_config(tmp_path / "nope.toml")


def test_bad_toml_syntax(tmp_path):
    with pytest.raises(ConfigError):
        load_config(write_config(tmp_path, "not = [valid"))


def test_unknown_section_rejected(tmp_path):
    with pytest.raises(ConfigError, match=r"unknown section \[pathz\]"):
        load_config(write_config(tmp_path, "[pathz]\nx = 1\n"))


def test_unknown_key_rejected(tmp_path):
    text = MINIMAL + "\n[run]\nsede = 1\n"
    with pytest.raises(ConfigError, match="unknown key run.sede"):
        load_config(write_config(tmp_path, text))


def test_wrong_value_types_rejected(tmp_path):
    with pytest.raises(ConfigError, match="run.seed"):
        load_config(write_config(tmp_path, MINIMAL + '\n[run]\nseed = "zero"\n'))
    with pytest.raises(ConfigError, match="run.seed"):
        load_config(write_config(tmp_path, MINIMAL + "\n[run]\nseed = true\n"))


def test_int_accepted_for_float_fields(tmp_path):
    text = MINIMAL + "\n[provider]\ntimeout_seconds = 60\n[run]\ntemperature = 0\n"
    config = load_config(write_config(tmp_path, text))
    assert config.provider.timeout_seconds == 60.0
    assert config.run.temperature == 0.0


def test_rank_files_table(tmp_path):
    text = MINIMAL + '\n[paths.rank_files]\nC1 = "ranks/c1.rnk"\n'
    config = load_config(write_config(tmp_path, text))
    assert config.paths.rank_files == {"C1": "ranks/c1.rnk"}
    bad = MINIMAL + "\n[paths.rank_files]\nC1 = 7\n"
    with pytest.raises(ConfigError, match="table of strings"):
        load_config(write_config(tmp_path, bad))


def test_gsea_kind_map_parsing(tmp_path):
    text = MINIMAL + '\n[gsea.kind_map]\nREACTOME = "pathway"\nGOBP = "go_bp"\n'
    config = load_config(write_config(tmp_path, text))
    assert config.gsea.term_kind_map() == {
        "REACTOME": TermKind.PATHWAY,
        "GOBP": TermKind.GO_BP,
    }
    bad = MINIMAL + '\n[gsea.kind_map]\nREACTOME = "NotAKind"\n'
    with pytest.raises(ConfigError, match="gsea.kind_map"):
        load_config(write_config(tmp_path, bad))


@pytest.mark.parametrize(
    "extra, needle",
    [
        ('[run]\nstrategy = "fiveshot"', "unknown strategy"),
        ('[run]\nformat = "inchi"', "unknown format"),
        ('[run]\ntemperature = 1.5', "temperature"),
        ('[provider]\nkind = "dream"', "provider.kind"),
        ('[filter]\nmode = "magic"', "filter.mode"),
        ("[eval]\nk = 1", "eval.k"),
        ("[gsea]\npermutations = 0", "gsea"),
    ],
)
def test_validation_failures(tmp_path, extra, needle):
    with pytest.raises(ConfigError, match=needle):
        load_config(write_config(tmp_path, MINIMAL + "\n" + extra + "\n"))


def test_live_provider_requires_base_url(tmp_path):
    text = '[provider]\nkind = "live"\n'
    with pytest.raises(ConfigError, match="base_url"):
        load_config(write_config(tmp_path, text))


def test_replay_provider_requires_fixtures_dir(tmp_path):
    with pytest.raises(ConfigError, match="fixtures_dir"):
        load_config(write_config(tmp_path, "[run]\nseed = 1\n"))


def test_with_overrides_revalidates(tmp_path):
    config = load_config(write_config(tmp_path, MINIMAL))
    updated = with_overrides(config, strategy="zeroshot", structure_format="smiles")
    assert updated.run.strategy == "zeroshot"
    assert updated.run.format == "smiles"
    assert updated.paths == config.paths
    with pytest.raises(ConfigError, match="unknown strategy"):
        with_overrides(config, strategy="nonsense")
    moved = with_overrides(config, output_dir=str(tmp_path / "elsewhere"))
    assert moved.paths.output_dir == str(tmp_path / "elsewhere")


def test_require_path(tmp_path):
    config = load_config(write_config(tmp_path, MINIMAL))
    with pytest.raises(ConfigError, match="paths.labels is not set"):
        require_path(config, "paths.labels", "")
    with pytest.raises(ConfigError, match="no such path"):
        require_path(config, "paths.labels", "missing.csv")
    (tmp_path / "labels.csv").write_text("x")
    assert require_path(config, "paths.labels", "labels.csv") == tmp_path / "labels.csv"


def test_cli_usage_error_is_exit_1(capsys):
    assert main([]) == 1
    assert main(["prepare"]) == 1
    err = capsys.readouterr().err
    assert "error:" in err


def test_cli_missing_config_is_exit_1(tmp_path, capsys):
    assert main(["prepare", "--config", str(tmp_path / "nope.toml")]) == 1
    assert "not found" in capsys.readouterr().err


def test_cli_unknown_strategy_choice_is_exit_1(tmp_path):
    (tmp_path / "fixtures").mkdir()
    config = write_config(tmp_path, MINIMAL)
    assert main(["predict", "--config", str(config), "--strategy", "sevenshot"]) == 1


def test_cli_evaluate_missing_predictions_is_exit_2(tmp_path, capsys):
    (tmp_path / "fixtures").mkdir()
    write_labels_csv(tmp_path / "labels.csv", [("C1", "alpha", "TNTNTN")])
    config = write_config(tmp_path, MINIMAL + '\n[paths]\nlabels = "labels.csv"\n')
    # TOML forbids repeating a table; merge sections instead
    config.write_text(
        '[paths]\nfixtures_dir = "fixtures"\nlabels = "labels.csv"\n',
        encoding="utf-8",
    )
    code = main(["evaluate", "--config", str(config), str(tmp_path / "missing.jsonl")])
    assert code == 2
    assert "not found" in capsys.readouterr().err


def test_cli_evaluate_success_is_exit_0(tmp_path):
    (tmp_path / "fixtures").mkdir()
    write_labels_csv(
        tmp_path / "labels.csv",
        [(f"C{i}", f"name{i}", "TNTNTN") for i in range(6)],
    )
    preds = tmp_path / "preds.jsonl"
    preds.write_text(
        "".join(
            exchange_line(make_prediction(f"C{i}", "TNTNTN")) + "\n" for i in range(6)
        ),
        encoding="utf-8",
    )
    config = write_config(
        tmp_path,
        '[paths]\nfixtures_dir = "fixtures"\nlabels = "labels.csv"\n',
    )
    out = tmp_path / "eval-out"
    assert main(["evaluate", "--config", str(config), str(preds), "--out", str(out)]) == 0
    assert (out / "report.md").is_file()
    payload = json.loads((out / "report.json").read_text())
    assert payload["preds"]["macro_f1"] == pytest.approx(0.5)
    assert payload["preds"]["n_compounds"] == 6


def test_cli_replay_miss_is_exit_3(tmp_path, capsys):
    fixtures = tmp_path / "fixtures"
    fixtures.mkdir()
    write_labels_csv(tmp_path / "labels.csv", [("C1", "alpha", "TNTNTN")])
    store = {
        "compounds": {
            "C1": {
                "name": "alpha",
                "iupac_name": "alpha acid",
                "smiles": "CC",
                "resolution_status": "Resolved",
                "context": {
                    "compound_id": "C1",
                    "pathways": [],
                    "go_terms": [],
                    "filtered": False,
                },
                "filtered_context": {
                    "compound_id": "C1",
                    "pathways": [],
                    "go_terms": [],
                    "filtered": True,
                },
            }
        },
        "train_ids": [],
        "test_ids": ["C1"],
        "filter_decisions": {},
    }
    (tmp_path / "store.json").write_text(json.dumps(store), encoding="utf-8")
    config = write_config(
        tmp_path,
        "[paths]\n"
        'fixtures_dir = "fixtures"\n'
        'labels = "labels.csv"\n'
        'context_store = "store.json"\n'
        "[provider]\n"
        'model_id = "test-model"\n',
    )
    code = main(["predict", "--config", str(config), "--strategy", "cotox"])
    assert code == 3
    assert "no fixture" in capsys.readouterr().err
