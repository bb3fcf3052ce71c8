import pytest

from hlmcite.corpus import (
    Corpus,
    CorpusError,
    PaperRecord,
    SCIENTIFIC_FIELDS,
    keyword_overlap,
    load_corpus,
    save_corpus,
)


def test_field_catalogue_has_19_entries():
    assert len(SCIENTIFIC_FIELDS) == 19


def test_record_validation():
    with pytest.raises(CorpusError):
        PaperRecord(id="", title="t", abstract="a")
    with pytest.raises(CorpusError):
        PaperRecord(id="x", title="", abstract="a")
    with pytest.raises(CorpusError):
        PaperRecord(id="x", title="t", abstract="a", field="astrology")


def test_duplicate_ids_rejected():
    rec = PaperRecord(id="a", title="t", abstract="x")
    with pytest.raises(CorpusError, match="duplicate"):
        Corpus([rec, rec])


def test_roundtrip_and_empty_abstract_flagging(tmp_path):
    corpus = Corpus([
        PaperRecord(id="a", title="Alpha", abstract="Body.", keywords=("k1",), field="biology", year=2001),
        PaperRecord(id="b", title="Beta", abstract="", field="art", year=1999),
    ])
    path = tmp_path / "corpus.jsonl"
    save_corpus(corpus, path)
    loaded, report = load_corpus(path)
    assert loaded.ids == ("a", "b")
    assert loaded["a"].keywords == ("k1",)
    assert report.records == 2
    assert report.empty_abstracts == 1
    assert report.empty_abstract_ids == ("b",)


def test_load_error_reports_line_number(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "title": "A", "field": "physics"}\nnot json\n')
    with pytest.raises(CorpusError, match=r"bad\.jsonl:2"):
        load_corpus(path)


def _kw(*keywords):
    return PaperRecord(id="x", title="t", abstract="a", keywords=tuple(keywords))


def test_keyword_overlap_identity():
    a = _kw("w", "x", "y", "z")
    assert keyword_overlap(a, _kw("w", "x", "y", "z")) == 4


def test_keyword_overlap_disjoint_and_empty():
    assert keyword_overlap(_kw("a", "b"), _kw("c")) == 0
    assert keyword_overlap(_kw(), _kw("c")) == 0


def test_keyword_overlap_case_folds():
    # set intersection by hand: {dna, robot, origami} & {dna, origami} = 2
    assert keyword_overlap(_kw("DNA", "robot", "origami"), _kw("dna", "Origami")) == 2
