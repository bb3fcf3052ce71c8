"""Prompt templates, strict placeholder rendering, and one-shot assets.

Templates ship as UTF-8 text files with {PlaceholderName} slots. The guided
exemplar (query, candidates, approved analysis and ranking texts) is
concatenated at the beginning of the live user prompt, demonstrating the
expected reasoning and output format.
"""

from __future__ import annotations

import json
import re
import shutil
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .chat import ChatMessage
from .corpus import PaperRecord

ASSET_DIR = Path(__file__).parent / "assets"
APPROVAL_MARKER = "APPROVED"

_PLACEHOLDER_RE = re.compile(r"\{([A-Za-z0-9_]+)\}")
_HEADING_RE = re.compile(r"^\s*(\d+)[.):]", re.MULTILINE)


class RenderError(Exception):
    """Raised when a template references an unknown placeholder."""


class OneShotError(Exception):
    """Raised on missing, unapproved, or malformed one-shot assets."""


def render_template(template: str, values: dict[str, str]) -> str:
    def sub(match: re.Match[str]) -> str:
        name = match.group(1)
        if name not in values:
            raise RenderError(f"unknown placeholder {{{name}}} in template")
        return values[name]

    return _PLACEHOLDER_RE.sub(sub, template)


def load_asset(name: str) -> str:
    return (ASSET_DIR / name).read_text(encoding="utf-8").strip("\n")


@dataclass(frozen=True)
class ExemplarPaper:
    title: str
    abstract: str


@dataclass(frozen=True)
class OneShotExample:
    """A guided exemplar. Only approved examples may enter live prompts."""

    name: str
    field: str | None
    query: ExemplarPaper
    candidates: tuple[ExemplarPaper, ...]
    analysis_text: str
    ranking_text: str
    approved: bool
    ground_truth_order: tuple[int, ...] = ()


def _candidate_blocks(papers: Sequence[tuple[str, str]]) -> str:
    template = load_asset("candidate_block.txt")
    blocks = [
        render_template(template, {"Index": str(i), "Title": t, "Abstract": a})
        for i, (t, a) in enumerate(papers, start=1)
    ]
    return ", ".join(blocks)


def _analysis_blocks(entries: Sequence[tuple[str, str]]) -> str:
    template = load_asset("analysis_block.txt")
    blocks = []
    for i, (title, analysis) in enumerate(entries, start=1):
        if not analysis.strip():
            warnings.warn(f"empty analysis text for paper {i}", stacklevel=3)
        blocks.append(
            render_template(template, {"Index": str(i), "Title": title, "Analysis": analysis})
        )
    return ", ".join(blocks)


def _fill_analyzer_user(query_title: str, query_abstract: str, pool: Sequence[tuple[str, str]]) -> str:
    return render_template(load_asset("analyzer_user.txt"), {
        "QueryPaperTitle": query_title,
        "QueryPaperAbstract": query_abstract,
        "CandidateBlocks": _candidate_blocks(pool),
    })


def _fill_decider_user(query_title: str, query_abstract: str, analyses: Sequence[tuple[str, str]]) -> str:
    return render_template(load_asset("decider_user.txt"), {
        "QueryPaperTitle": query_title,
        "QueryPaperAbstract": query_abstract,
        "AnalysisBlocks": _analysis_blocks(analyses),
    })


def render_analyzer_prompt(
    oneshot: OneShotExample | None,
    query: PaperRecord,
    pool: Sequence[PaperRecord],
) -> list[ChatMessage]:
    """System message plus a user message with numbered candidate slots.

    The approved exemplar (rendered request followed by its analysis) is
    prepended to the user content; passing ``oneshot=None`` is only legal in
    the no-guider ablation and the caller enforces that.
    """
    if not pool:
        raise RenderError("candidate pool must be nonempty")
    live = _fill_analyzer_user(query.title, query.abstract, [(p.title, p.abstract) for p in pool])
    parts = []
    if oneshot is not None:
        exemplar = _fill_analyzer_user(
            oneshot.query.title,
            oneshot.query.abstract,
            [(c.title, c.abstract) for c in oneshot.candidates],
        )
        parts.append(exemplar + "\n" + oneshot.analysis_text)
    parts.append(live)
    return [
        {"role": "system", "content": load_asset("analyzer_system.txt")},
        {"role": "user", "content": "\n\n".join(parts)},
    ]


def render_decider_prompt(
    oneshot: OneShotExample | None,
    query: PaperRecord,
    analyses: Sequence[tuple[str, str]],
) -> list[ChatMessage]:
    """System message plus numbered title/analysis slots, exemplar first."""
    if not analyses:
        raise RenderError("analysis list must be nonempty")
    live = _fill_decider_user(query.title, query.abstract, analyses)
    parts = []
    if oneshot is not None:
        exemplar_analyses = split_numbered_blocks(oneshot.analysis_text, len(oneshot.candidates))
        if exemplar_analyses is None:
            exemplar_analyses = [oneshot.analysis_text] * len(oneshot.candidates)
        exemplar = _fill_decider_user(
            oneshot.query.title,
            oneshot.query.abstract,
            list(zip((c.title for c in oneshot.candidates), exemplar_analyses)),
        )
        parts.append(exemplar + "\n" + oneshot.ranking_text)
    parts.append(live)
    return [
        {"role": "system", "content": load_asset("decider_system.txt")},
        {"role": "user", "content": "\n\n".join(parts)},
    ]


def split_numbered_blocks(text: str, m: int) -> list[str] | None:
    """Split analyzer output into per-candidate blocks via numbered headings.

    Returns None when the headings do not map cleanly onto 1..m; the caller
    then attaches the whole text to every candidate slot.
    """
    matches = list(_HEADING_RE.finditer(text))
    by_index: dict[int, str] = {}
    for pos, match in enumerate(matches):
        idx = int(match.group(1))
        if idx < 1 or idx > m or idx in by_index:
            continue
        end = matches[pos + 1].start() if pos + 1 < len(matches) else len(text)
        by_index[idx] = text[match.end():end].strip()
    if len(by_index) != m:
        return None
    return [by_index[i] for i in range(1, m + 1)]


def load_oneshot(directory: str | Path) -> OneShotExample:
    directory = Path(directory)
    meta_path = directory / "example.json"
    if not meta_path.exists():
        raise OneShotError(f"missing example.json in {directory}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        query = ExemplarPaper(meta["query"]["title"], meta["query"]["abstract"])
        candidates = tuple(
            ExemplarPaper(c["title"], c["abstract"]) for c in meta["candidates"]
        )
    except (ValueError, KeyError, TypeError) as exc:
        raise OneShotError(f"malformed one-shot asset {meta_path}: {exc}") from exc
    analysis = (directory / "analysis.txt")
    ranking = (directory / "ranking.txt")
    if not analysis.exists() or not ranking.exists():
        raise OneShotError(f"one-shot asset {directory} missing analysis.txt or ranking.txt")
    return OneShotExample(
        name=str(meta.get("name", directory.name)),
        field=meta.get("field"),
        query=query,
        candidates=candidates,
        analysis_text=analysis.read_text(encoding="utf-8").strip(),
        ranking_text=ranking.read_text(encoding="utf-8").strip(),
        approved=(directory / APPROVAL_MARKER).exists(),
        ground_truth_order=tuple(int(i) for i in meta.get("ground_truth_order", [])),
    )


def list_oneshot_assets(root: str | Path) -> list[OneShotExample]:
    root = Path(root)
    if not root.exists():
        return []
    return [
        load_oneshot(d) for d in sorted(root.iterdir())
        if d.is_dir() and (d / "example.json").exists()
    ]


def select_oneshot(
    root: str | Path, field: str | None = None, few_shot: bool = False
) -> OneShotExample:
    """Pick the injectable exemplar: per-field when few-shot, else default.

    Only approved assets qualify; a missing approved asset is an error (the
    no-guider ablation skips this lookup entirely).
    """
    assets = {a.name: a for a in list_oneshot_assets(root)}
    if few_shot and field is not None:
        candidate = assets.get(field)
        if candidate is not None and candidate.approved:
            return candidate
    default = assets.get("default")
    if default is None or not default.approved:
        raise OneShotError(
            f"no approved default one-shot asset under {root}; "
            "run the oneshot build/approve commands or enable the no-guider ablation"
        )
    return default


def default_oneshot_root() -> Path:
    return ASSET_DIR / "oneshot"


def save_oneshot_draft(
    root: str | Path,
    name: str,
    query: ExemplarPaper,
    candidates: Sequence[ExemplarPaper],
    analysis_text: str,
    ranking_text: str,
    field: str | None = None,
    ground_truth_order: Sequence[int] | None = None,
) -> Path:
    """Persist a draft exemplar for human review; not yet injectable."""
    directory = Path(root) / name
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "example.json").write_text(json.dumps({
        "name": name,
        "field": field,
        "query": {"title": query.title, "abstract": query.abstract},
        "candidates": [{"title": c.title, "abstract": c.abstract} for c in candidates],
        "ground_truth_order": list(ground_truth_order or []),
    }, indent=2, ensure_ascii=False), encoding="utf-8")
    (directory / "analysis.txt").write_text(analysis_text, encoding="utf-8")
    (directory / "ranking.txt").write_text(ranking_text, encoding="utf-8")
    marker = directory / APPROVAL_MARKER
    if marker.exists():
        marker.unlink()  # a rebuilt draft requires fresh review
    return directory


def approve_oneshot(root: str | Path, name: str) -> Path:
    directory = Path(root) / name
    if not (directory / "example.json").exists():
        raise OneShotError(f"no draft named {name!r} under {root}")
    marker = directory / APPROVAL_MARKER
    marker.write_text("approved\n", encoding="utf-8")
    return directory


def copy_bundled_assets(dest: str | Path) -> Path:
    """Copy the shipped one-shot assets into a writable directory."""
    dest = Path(dest)
    if not dest.exists():
        shutil.copytree(default_oneshot_root(), dest)
    return dest
