import json

import pytest

from cotox.context_filter import (
    EmptyLexiconError,
    FilterDecision,
    FilterMethod,
    LlmFilterConfig,
    UnparseableFilterResponseError,
    filter_keyword,
    filter_llm,
    load_lexicon,
)
from cotox.gateway import ChatGateway
from cotox.ingest import BioContext, Term, TermKind

from conftest import FakeProvider

CTX = BioContext(
    compound_id="C1",
    pathways=(
        Term("P1", "Apoptosis signaling", TermKind.PATHWAY),
        Term("P2", "Glucose metabolism", TermKind.PATHWAY),
        Term("P3", "Oxidative stress response", TermKind.PATHWAY),
    ),
    go_terms=(
        Term("G1", "cardiac muscle contraction", TermKind.GO_BP),
        Term("G2", "ribosome assembly", TermKind.GO_CC),
    ),
)

LEXICON = ["apoptosis", "oxidative stress", "cardiac"]


def test_bundled_lexicon_loads():
    entries = load_lexicon()
    assert len(entries) >= 20
    assert all(e == e.lower() for e in entries)
    assert "apoptosis" in entries


def test_load_lexicon_skips_comments(tmp_path):
    path = tmp_path / "lex.txt"
    path.write_text("# header\nApoptosis\n\n  necrosis  \n", encoding="utf-8")
    assert load_lexicon(path) == ["apoptosis", "necrosis"]
    path.write_text("# only comments\n", encoding="utf-8")
    with pytest.raises(EmptyLexiconError):
        load_lexicon(path)


def test_keyword_filter_keeps_matching_terms():
    filtered, decisions = filter_keyword(CTX, LEXICON)
    assert filtered.filtered
    assert [t.term_id for t in filtered.pathways] == ["P1", "P3"]
    assert [t.term_id for t in filtered.go_terms] == ["G1"]
    assert [(d.term_id, d.kept) for d in decisions] == [
        ("P1", True),
        ("P2", False),
        ("P3", True),
        ("G1", True),
        ("G2", False),
    ]
    # a kept decision records which lexicon entry fired
    assert decisions[0].rationale == "apoptosis"
    assert decisions[1].rationale is None
    assert all(d.method is FilterMethod.KEYWORD for d in decisions)


def test_keyword_filter_is_contractive_and_idempotent():
    filtered, _ = filter_keyword(CTX, LEXICON)
    input_ids = {t.term_id for t in CTX.all_terms()}
    assert {t.term_id for t in filtered.all_terms()} <= input_ids
    again, decisions = filter_keyword(filtered, LEXICON)
    assert again.pathways == filtered.pathways
    assert again.go_terms == filtered.go_terms
    assert all(d.kept for d in decisions)


def test_keyword_filter_empty_context():
    empty = BioContext("C1", (), ())
    filtered, decisions = filter_keyword(empty, LEXICON)
    assert filtered.is_empty
    assert filtered.filtered
    assert decisions == []


def test_keyword_filter_rejects_empty_lexicon():
    with pytest.raises(EmptyLexiconError):
        filter_keyword(CTX, [])


def _llm_pieces(reply_text):
    provider = FakeProvider(default=reply_text)
    gateway = ChatGateway(provider)
    config = LlmFilterConfig(model_id="filter-model")
    return provider, gateway, config


def test_llm_filter_keeps_listed_ids():
    provider, gateway, config = _llm_pieces(json.dumps(["P3", "G1"]))
    filtered, decisions = filter_llm(CTX, gateway, config)
    assert [t.term_id for t in filtered.pathways] == ["P3"]
    assert [t.term_id for t in filtered.go_terms] == ["G1"]
    assert filtered.filtered
    kept = {d.term_id for d in decisions if d.kept}
    assert kept == {"P3", "G1"}
    assert len(decisions) == 5
    assert all(d.method is FilterMethod.LLM for d in decisions)
    # one batched request per context, terms listed as "- id: name"
    assert len(provider.requests) == 1
    user_text = provider.requests[0].user_text
    assert "- P1: Apoptosis signaling" in user_text
    assert "- G2: ribosome assembly" in user_text
    assert provider.requests[0].model_id == "filter-model"


def test_llm_filter_reply_inside_prose_and_fences():
    _, gateway, config = _llm_pieces('Keeping these:\n```json\n["P1"]\n```')
    filtered, _ = filter_llm(CTX, gateway, config)
    assert [t.term_id for t in filtered.all_terms()] == ["P1"]


def test_llm_filter_invented_ids_are_dropped_and_recorded():
    _, gateway, config = _llm_pieces(json.dumps(["P1", "MADE-UP"]))
    filtered, decisions = filter_llm(CTX, gateway, config)
    assert {t.term_id for t in filtered.all_terms()} == {"P1"}
    extras = [d for d in decisions if d.term_id == "MADE-UP"]
    assert extras == [
        FilterDecision("MADE-UP", False, FilterMethod.LLM, "not an input term id")
    ]


def test_llm_filter_empty_keep_list_allowed():
    _, gateway, config = _llm_pieces("[]")
    filtered, decisions = filter_llm(CTX, gateway, config)
    assert filtered.is_empty
    assert filtered.filtered
    assert not any(d.kept for d in decisions)


def test_llm_filter_empty_context_sends_nothing():
    provider, gateway, config = _llm_pieces("[]")
    filtered, decisions = filter_llm(BioContext("C1", (), ()), gateway, config)
    assert filtered.filtered
    assert decisions == []
    assert provider.requests == []


def test_llm_filter_rejects_already_filtered_context():
    _, gateway, config = _llm_pieces("[]")
    already = BioContext("C1", (), (), filtered=True)
    with pytest.raises(ValueError, match="already filtered"):
        filter_llm(already, gateway, config)


@pytest.mark.parametrize("reply", ["no json here", '{"keep": ["P1"]}', "[1, 2]"])
def test_llm_filter_unparseable_replies(reply):
    _, gateway, config = _llm_pieces(reply)
    with pytest.raises(UnparseableFilterResponseError):
        filter_llm(CTX, gateway, config)
