import json

import pytest

from hlmcite.corpus import PaperRecord
from hlmcite.prompts import (
    ASSET_DIR,
    ExemplarPaper,
    OneShotError,
    RenderError,
    approve_oneshot,
    default_oneshot_root,
    list_oneshot_assets,
    load_oneshot,
    render_analyzer_prompt,
    render_decider_prompt,
    render_template,
    save_oneshot_draft,
    select_oneshot,
    split_numbered_blocks,
)

QUERY = PaperRecord(id="q", title="Query Title", abstract="Query abstract.")
CAND1 = PaperRecord(id="c1", title="Cand One", abstract="Abstract one.")
CAND2 = PaperRecord(id="c2", title="Cand Two", abstract="Abstract two.")

ANALYZER_GOLDEN_ONE = (
    "Here is the title and abstract of the query paper. Title: Query Title "
    "Abstract: Query abstract.. Now you are doing a research following up this "
    "paper above. Here are some other research papers which have been already "
    "cited by the query paper. Paper 1 Title: Cand One Abstract: Abstract one. "
    "Try to think abductively and convince yourself as a researcher. Figure out "
    "why the query paper cite these one by one. Try to think step by step "
    "before giving the answer."
)

DECIDER_GOLDEN_TWO = (
    "Here is the title and abstract of the query paper. Title: Query Title "
    "Abstract: Query abstract.. There are some other candidate papers and the "
    "analysis of why this query paper cites these. Paper 1 Title: Cand One "
    "Analysis: uses the method, Paper 2 Title: Cand Two Analysis: background "
    "only Now you are doing a research following up this query paper. Use the "
    "analysis to identify patterns or themes that suggest potential citation "
    "relationships. Rank these candidate papers in the order you are most "
    "likely to cite from the perspective of a research follower and provide "
    "explanations or justifications for your reasoning."
)


def test_render_template_unknown_placeholder():
    with pytest.raises(RenderError, match=r"\{Nope\}"):
        render_template("Hello {Nope}", {})


def test_shipped_templates_use_only_known_placeholders():
    # placeholder scanner over the template assets
    import re
    known = {
        "QueryPaperTitle", "QueryPaperAbstract", "CandidateBlocks",
        "AnalysisBlocks", "Index", "Title", "Abstract", "Analysis",
    }
    for asset in ASSET_DIR.glob("*.txt"):
        found = set(re.findall(r"\{([A-Za-z0-9_]+)\}", asset.read_text()))
        assert found <= known, asset.name


def test_analyzer_single_candidate_golden():
    messages = render_analyzer_prompt(None, QUERY, [CAND1])
    assert messages[0]["role"] == "system"
    assert messages[0]["content"].startswith("Now you are a sophisticated researcher")
    assert messages[1]["content"] == ANALYZER_GOLDEN_ONE


def test_analyzer_numbers_blocks_in_pool_order():
    pool = [
        PaperRecord(id=f"c{i}", title=f"Cand {i}", abstract=f"Abs {i}.")
        for i in range(1, 7)
    ]
    content = render_analyzer_prompt(None, QUERY, pool)[1]["content"]
    for i in range(1, 7):
        assert f"Paper {i} Title: Cand {i} Abstract: Abs {i}." in content
    assert content.index("Paper 1 Title") < content.index("Paper 2 Title") < content.index("Paper 6 Title")


def test_analyzer_empty_pool_rejected():
    with pytest.raises(RenderError):
        render_analyzer_prompt(None, QUERY, [])


def test_decider_golden_and_ordering():
    messages = render_decider_prompt(
        None, QUERY, [("Cand One", "uses the method"), ("Cand Two", "background only")]
    )
    assert messages[0]["content"].startswith("Your role is to assist")
    assert messages[1]["content"] == DECIDER_GOLDEN_TWO


def test_decider_empty_analysis_warns():
    with pytest.warns(UserWarning, match="empty analysis"):
        render_decider_prompt(None, QUERY, [("Cand One", "")])


def test_oneshot_prefix_prepended():
    oneshot = load_oneshot(default_oneshot_root() / "default")
    content = render_analyzer_prompt(oneshot, QUERY, [CAND1])[1]["content"]
    assert content.startswith("Here is the title and abstract of the query paper. Title: Transformer-XL")
    assert content.endswith(ANALYZER_GOLDEN_ONE)
    assert "Reason for Citation" in content
    decider_content = render_decider_prompt(oneshot, QUERY, [("Cand One", "x")])[1]["content"]
    assert "Ranked order: paper 1, paper 2, paper 3, paper 4, paper 5, paper 6" in decider_content


def test_ablation_mode_has_no_exemplar():
    content = render_analyzer_prompt(None, QUERY, [CAND1])[1]["content"]
    assert "Transformer-XL" not in content
    assert content.count("query paper. Title:") == 1


def test_split_numbered_blocks():
    text = "1. first block\nmore\n2) second block\n3: third"
    assert split_numbered_blocks(text, 3) == ["first block\nmore", "second block", "third"]
    assert split_numbered_blocks("no numbering at all", 2) is None
    assert split_numbered_blocks("1. only one", 2) is None


def test_shipped_default_asset():
    oneshot = load_oneshot(default_oneshot_root() / "default")
    assert oneshot.approved
    assert oneshot.name == "default"
    assert oneshot.query.title.startswith("Transformer-XL")
    assert len(oneshot.candidates) == 6
    assert oneshot.ground_truth_order == (1, 2, 3, 4, 5, 6)
    titles = [c.title for c in oneshot.candidates]
    meta = json.loads((default_oneshot_root() / "default" / "example.json").read_text())
    trio = meta["condensed_ground_truth"]
    assert trio["ranking"] == [2, 3, 1]
    assert set(trio["candidates"]) <= set(titles)
    # analysis splits cleanly into one block per candidate
    assert split_numbered_blocks(oneshot.analysis_text, 6) is not None


def test_draft_approve_state_machine(tmp_path):
    draft_dir = save_oneshot_draft(
        tmp_path, "econ-example",
        ExemplarPaper("T", "A"), [ExemplarPaper("C", "B")],
        "1. analysis", "Ranked order: paper 1", field="economics",
    )
    asset = load_oneshot(draft_dir)
    assert not asset.approved
    with pytest.raises(OneShotError):
        select_oneshot(tmp_path)  # no approved default exists
    approve_oneshot(tmp_path, "econ-example")
    assert load_oneshot(draft_dir).approved
    with pytest.raises(OneShotError, match="no draft"):
        approve_oneshot(tmp_path, "missing")


def test_rebuilt_draft_requires_fresh_review(tmp_path):
    save_oneshot_draft(tmp_path, "x", ExemplarPaper("T", "A"), [], "a", "r")
    approve_oneshot(tmp_path, "x")
    save_oneshot_draft(tmp_path, "x", ExemplarPaper("T", "A"), [], "a2", "r2")
    assert not load_oneshot(tmp_path / "x").approved


def test_select_oneshot_per_field(tmp_path):
    save_oneshot_draft(tmp_path, "default", ExemplarPaper("D", "A"), [], "a", "r")
    approve_oneshot(tmp_path, "default")
    save_oneshot_draft(tmp_path, "physics", ExemplarPaper("P", "A"), [], "a", "r", field="physics")
    # unapproved per-field draft falls back to default
    assert select_oneshot(tmp_path, field="physics", few_shot=True).name == "default"
    approve_oneshot(tmp_path, "physics")
    assert select_oneshot(tmp_path, field="physics", few_shot=True).name == "physics"
    # few-shot disabled ignores field assets
    assert select_oneshot(tmp_path, field="physics", few_shot=False).name == "default"
    assert len(list_oneshot_assets(tmp_path)) == 2
