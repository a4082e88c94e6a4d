"""CSV output with an embedded run manifest, written atomically."""

from __future__ import annotations

import io
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .config import RunConfig

MAGIC = "# tfqkd-manifest v1"


def fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def manifest(command: str, schema: str, options: dict, cfg: RunConfig) -> dict:
    return {
        "tool_version": __version__,
        "schema": schema,
        "command": command,
        "options": options,
        "config_hash": cfg.config_hash(),
        "seed": cfg.seed,
        "shards": options.get("shards", cfg.shards),
        "config": cfg.to_dict(),
    }


def render_csv(meta: dict, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(MAGIC + "\n")
    for key in ("tool_version", "schema", "command", "config_hash", "seed", "shards"):
        buf.write(f"# {key}: {meta[key]}\n")
    buf.write(f"# options: {json.dumps(meta['options'], sort_keys=True)}\n")
    buf.write(f"# config: {json.dumps(meta['config'], sort_keys=True)}\n")
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def write_atomic(path: str | Path | None, text: str) -> None:
    """Write ``text`` to ``path`` via a temp file and rename; ``None`` means stdout."""
    if path is None or str(path) == "-":
        sys.stdout.write(text)
        return
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def read_manifest(path: str | Path) -> dict:
    """Recover the manifest block from the head of a CSV written by this tool."""
    meta = {}
    with open(path) as fh:
        first = fh.readline().rstrip("\n")
        if first != MAGIC:
            raise ValueError(f"{path}: no tfqkd manifest block found")
        for line in fh:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            meta[key] = json.loads(value) if key in ("options", "config") else value
    for key in ("command", "options", "config"):
        if key not in meta:
            raise ValueError(f"{path}: manifest lacks {key!r}")
    return meta
