import json
import random

import jsonschema
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cotox.model import BinaryVerdict, ToxicityType
from cotox.response_parser import (
    ExchangeFormatError,
    ExtractionError,
    NormalizedPrediction,
    ParseFailure,
    ToxicityPrediction,
    _balanced_spans,
    exchange_line,
    extract_json,
    normalize,
    parse_exchange_line,
    parse_prediction,
    parse_response,
    prediction_to_json,
    read_exchange_file,
)

import parser_corpus
from conftest import make_prediction, response_text, verdict_map


@pytest.mark.parametrize(
    "case", parser_corpus.CASES, ids=[c["name"] for c in parser_corpus.CASES]
)
def test_corpus_case(case):
    parser_corpus.check_case(case)


def test_corpus_has_fifty_cases():
    assert len(parser_corpus.CASES) == 50


def test_balanced_spans_longest_first():
    text = 'x {"a": {"b": 1}} y {"c": 2} z'
    spans = _balanced_spans(text)
    assert spans == ['{"a": {"b": 1}}', '{"c": 2}']


def test_balanced_spans_ignore_braces_in_strings():
    text = 'pre {"a": "open { and close }"} post'
    assert _balanced_spans(text) == ['{"a": "open { and close }"}']


def test_balanced_spans_escaped_quote():
    text = '{"a": "say \\"hi\\" {x}"}'
    assert _balanced_spans(text) == [text]


def test_extract_json_prefers_raw_text():
    value, warnings = extract_json('{"a": 1}')
    assert value == {"a": 1}
    assert warnings == []


def test_extract_json_reports_failure():
    with pytest.raises(ExtractionError):
        extract_json("nothing here")


def test_extraction_warnings_prepend_to_parse_warnings():
    text = "Result:\n" + response_text("TNTNTN")
    outcome = parse_response(text, "C1")
    assert isinstance(outcome, ToxicityPrediction)
    assert outcome.warnings[0] == "extracted balanced JSON object"


def test_reasoning_text_survives_parse():
    outcome = parse_response(response_text("TTTTTT"), "C1")
    assert isinstance(outcome, ToxicityPrediction)
    block = outcome.verdicts[ToxicityType.CARDIO].reasoning
    assert block.pathway
    assert block.overall_mechanism


def test_prediction_to_json_round_trips():
    outcome = parse_response(response_text("TNTNTN"), "C1")
    assert isinstance(outcome, ToxicityPrediction)
    again = parse_prediction(prediction_to_json(outcome), "C1")
    assert isinstance(again, ToxicityPrediction)
    assert again.answers() == outcome.answers()
    assert prediction_to_json(again) == prediction_to_json(outcome)


def test_parse_failure_keeps_compound_id():
    outcome = parse_response("not json", "CID0042")
    assert isinstance(outcome, ParseFailure)
    assert outcome.compound_id == "CID0042"


def test_exchange_line_exact_format():
    pred = make_prediction("C1", "TNTNTN", warnings=("a",))
    assert exchange_line(pred) == (
        '{"compound_id": "C1", "answers": {"cardio": "Toxic", '
        '"hemato": "Non-toxic", "infertility": "Toxic", "liver": "Non-toxic", '
        '"pulmonary": "Toxic", "renal": "Non-toxic"}, "warnings": ["a"]}'
    )


def test_exchange_line_round_trip():
    pred = make_prediction("C2", "NNTTNN", warnings=("w1", "w2"))
    again = parse_exchange_line(exchange_line(pred))
    assert again.compound_id == "C2"
    assert dict(again.answers) == dict(pred.answers)
    assert again.warnings == ("w1", "w2")


def test_exchange_line_validates_against_schema_asset():
    from importlib.resources import files

    schema = json.loads(
        files("cotox").joinpath("assets/exchange.schema.json").read_text()
    )
    pred = make_prediction("C1", "TTTTTT")
    jsonschema.validate(json.loads(exchange_line(pred)), schema)


@pytest.mark.parametrize(
    "line, detail",
    [
        ("not json", "bad JSON"),
        ("[]", "not an object"),
        ('{"answers": {}}', "compound_id"),
        ('{"compound_id": "C1"}', "missing answers"),
        (
            '{"compound_id": "C1", "answers": {"cardio": "Toxic"}}',
            "answers['hemato']",
        ),
        (
            '{"compound_id": "C1", "answers": {"cardio": "toxic", '
            '"hemato": "Toxic", "infertility": "Toxic", "liver": "Toxic", '
            '"pulmonary": "Toxic", "renal": "Toxic"}}',
            "'Toxic' or 'Non-toxic'",
        ),
        (
            exchange_line(make_prediction("C1", "TTTTTT")).replace(
                '"renal": "Toxic"', '"renal": "Toxic", "brain": "Toxic"'
            ),
            "unknown answer keys",
        ),
        (
            exchange_line(make_prediction("C1", "TTTTTT")).replace(
                '"warnings": []', '"warnings": [1]'
            ),
            "list of strings",
        ),
    ],
)
def test_parse_exchange_line_rejections(line, detail):
    with pytest.raises(ExchangeFormatError, match=None) as exc:
        parse_exchange_line(line)
    assert detail in str(exc.value)


def test_read_exchange_file_reports_line_numbers(tmp_path):
    path = tmp_path / "preds.jsonl"
    good = exchange_line(make_prediction("C1", "TTTTTT"))
    path.write_text(good + "\n\n" + "broken\n", encoding="utf-8")
    with pytest.raises(ExchangeFormatError, match="3"):
        read_exchange_file(path)
    path.write_text(good + "\n" + exchange_line(make_prediction("C2", "NNNNNN")) + "\n")
    assert [p.compound_id for p in read_exchange_file(path)] == ["C1", "C2"]


def test_normalize_carries_warnings():
    outcome = parse_response("hello " + response_text("TNTNTN"), "C1")
    norm = normalize(outcome)
    assert isinstance(norm, NormalizedPrediction)
    assert norm.warnings == outcome.warnings
    assert norm.answers == outcome.answers()


def test_normalized_prediction_requires_all_types():
    answers = verdict_map("TNTNTN")
    del answers[ToxicityType.RENAL]
    with pytest.raises(ValueError):
        NormalizedPrediction("C1", answers)


def test_random_byte_strings_never_crash():
    rng = random.Random(20240817)
    for _ in range(2000):
        blob = bytes(rng.randrange(256) for _ in range(rng.randrange(0, 120)))
        outcome = parse_response(blob.decode("latin-1"), "F")
        assert isinstance(outcome, (ToxicityPrediction, ParseFailure))


@settings(max_examples=200, deadline=None)
@given(st.text(max_size=200))
def test_arbitrary_text_never_crashes(text):
    outcome = parse_response(text, "F")
    assert isinstance(outcome, (ToxicityPrediction, ParseFailure))


_json_values = st.recursive(
    st.none()
    | st.booleans()
    | st.integers(-10, 10)
    | st.floats(allow_nan=False, allow_infinity=False)
    | st.text(max_size=8),
    lambda children: st.lists(children, max_size=4)
    | st.dictionaries(st.text(max_size=12), children, max_size=6),
    max_leaves=20,
)


@settings(max_examples=200, deadline=None)
@given(_json_values)
def test_arbitrary_json_values_never_crash(value):
    outcome = parse_prediction(value, "F")
    assert isinstance(outcome, (ToxicityPrediction, ParseFailure))
