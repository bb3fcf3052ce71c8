"""Run manifests, digest validation, and output-directory locking.

Every stage writes a manifest recording its resolved config, input and
output digests, and counters. Downstream stages refuse to run when an
upstream artifact is missing or its digest no longer matches the manifest,
naming the command to rerun.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Mapping


class UpstreamError(Exception):
    """Missing or stale upstream artifact; maps to exit code 3."""

    def __init__(self, message: str, rerun: str):
        super().__init__(f"{message} (rerun: hlmcite {rerun})")
        self.rerun = rerun


class LockError(Exception):
    """Another invocation holds the output directory."""


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def manifest_dir(outdir: str | Path) -> Path:
    d = Path(outdir) / "manifests"
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_manifest(
    outdir: str | Path,
    stage: str,
    config_snapshot: Mapping,
    inputs: Mapping[str, str | Path],
    outputs: Mapping[str, str | Path],
    extra: Mapping | None = None,
    elapsed_seconds: float | None = None,
) -> Path:
    payload = {
        "stage": stage,
        "config": dict(config_snapshot),
        "inputs": {name: {"path": str(p), "sha256": sha256_file(p)} for name, p in inputs.items()},
        "outputs": {name: {"path": str(p), "sha256": sha256_file(p)} for name, p in outputs.items()},
        "extra": dict(extra or {}),
        "elapsed_seconds": elapsed_seconds,
    }
    path = manifest_dir(outdir) / f"{stage}.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True), encoding="utf-8")
    return path


def read_manifest(outdir: str | Path, stage: str) -> dict | None:
    path = Path(outdir) / "manifests" / f"{stage}.json"
    if not path.exists():
        return None
    return json.loads(path.read_text(encoding="utf-8"))


def require_upstream(outdir: str | Path, stage: str, artifacts: Mapping[str, str | Path]) -> dict:
    """Check the producing stage ran and its outputs are intact on disk."""
    manifest = read_manifest(outdir, stage)
    if manifest is None:
        raise UpstreamError(f"no manifest for upstream stage {stage!r}", rerun=stage)
    for name, path in artifacts.items():
        path = Path(path)
        recorded = manifest["outputs"].get(name)
        if recorded is None:
            raise UpstreamError(f"stage {stage!r} did not record output {name!r}", rerun=stage)
        if not path.exists():
            raise UpstreamError(f"missing upstream artifact {path}", rerun=stage)
        digest = sha256_file(path)
        if digest != recorded["sha256"]:
            raise UpstreamError(
                f"stale upstream artifact {path}: digest {digest[:12]} != "
                f"recorded {recorded['sha256'][:12]}",
                rerun=stage,
            )
    return manifest


@contextmanager
def output_lock(outdir: str | Path) -> Iterator[None]:
    """Reject concurrent invocations on the same output directory."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    lock_path = outdir / ".lock"
    try:
        fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise LockError(
            f"output directory {outdir} is locked by another run "
            f"(remove {lock_path} if that run crashed)"
        ) from None
    try:
        os.write(fd, f"{os.getpid()} {time.time()}\n".encode())
        os.close(fd)
        yield
    finally:
        lock_path.unlink(missing_ok=True)
