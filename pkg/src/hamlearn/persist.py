"""Atomic file writes, canonical JSON, and schema-version checks."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
from pathlib import Path

from .errors import SchemaVersionError


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, compact separators, full float repr."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(obj) -> str:
    """Short stable hash of a JSON-serializable configuration."""
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()[:16]


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def require_schema(header: dict, schema: str, version: int, path) -> None:
    found_schema = header.get("schema")
    found_version = header.get("version")
    if found_schema != schema or found_version != version:
        raise SchemaVersionError(
            f"{path}: expected schema {schema!r} v{version}, "
            f"found {found_schema!r} v{found_version}"
        )
