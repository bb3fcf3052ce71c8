from hypothesis import given, strategies as st

from hlmcite.rerank import parse_ranked_order


def test_exact_ranked_order_line():
    parsed = parse_ranked_order("Ranked order: paper 3, paper 1, paper 2", m=3)
    assert parsed.permutation == (3, 1, 2)
    assert parsed.status == "exact"


def test_case_insensitive_line_with_surrounding_prose():
    text = "Here is my answer.\nRANKED ORDER: paper 2, paper 1.\nBecause reasons."
    parsed = parse_ranked_order(text, m=2)
    assert parsed.permutation == (2, 1)
    assert parsed.status == "exact"


def test_dedup_out_of_range_and_fill():
    parsed = parse_ranked_order("paper 2 then paper 2 then paper 9", m=3)
    assert parsed.permutation == (2, 1, 3)
    assert parsed.status == "repaired"


def test_free_prose_falls_back_to_identity():
    parsed = parse_ranked_order("No indices to be found here, sorry.", m=4)
    assert parsed.permutation == (1, 2, 3, 4)
    assert parsed.status == "fallback"


def test_ranked_line_without_indices_scans_body():
    text = "Ranked order: none given\nI would cite paper 2 first, then paper 1."
    parsed = parse_ranked_order(text, m=2)
    assert parsed.permutation == (2, 1)
    assert parsed.status == "repaired"


def test_partial_line_is_repaired():
    parsed = parse_ranked_order("Ranked order: paper 3", m=3)
    assert parsed.permutation == (3, 1, 2)
    assert parsed.status == "repaired"


def test_appendix_format_parses_exact():
    text = (
        "Ranked order: paper 1, paper 2, paper 3, paper 4, paper 5, paper 6\n"
        "1. Explanation: foundational.\n2. Explanation: methodological.\n"
    )
    parsed = parse_ranked_order(text, m=6)
    assert parsed.permutation == (1, 2, 3, 4, 5, 6)
    assert parsed.status == "exact"


@given(st.text(max_size=400), st.integers(min_value=1, max_value=12))
def test_always_returns_valid_permutation(text, m):
    parsed = parse_ranked_order(text, m)
    assert sorted(parsed.permutation) == list(range(1, m + 1))
    assert parsed.status in ("exact", "repaired", "fallback")


@given(
    st.lists(st.integers(min_value=-3, max_value=20), min_size=0, max_size=30),
    st.integers(min_value=1, max_value=10),
    st.booleans(),
)
def test_token_streams_always_repair_to_permutation(indices, m, with_line):
    body = " ".join(f"paper {i}" for i in indices)
    text = f"Ranked order: {body}" if with_line else f"I think {body} overall."
    parsed = parse_ranked_order(text, m)
    assert sorted(parsed.permutation) == list(range(1, m + 1))
    valid = [i for i in indices if 1 <= i <= m]
    deduped = list(dict.fromkeys(valid))
    assert list(parsed.permutation[:len(deduped)]) == deduped
