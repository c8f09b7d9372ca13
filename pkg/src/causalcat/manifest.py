"""Plain-text key-value manifests and content digests.

One ``key = value`` pair per line, keys sorted, nested mappings flattened with
dots. Values are stored as text; callers convert types on read.
"""

from __future__ import annotations

import hashlib
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Mapping

from causalcat.errors import DataError

TIMESTAMP_KEYS = frozenset({"created_at"})


def flatten(data: Mapping[str, Any], prefix: str = "") -> dict[str, str]:
    out: dict[str, str] = {}
    for key, value in data.items():
        full = f"{prefix}{key}"
        if isinstance(value, Mapping):
            out.update(flatten(value, full + "."))
        elif isinstance(value, (list, tuple)):
            out[full] = ",".join(str(v) for v in value)
        elif isinstance(value, float):
            out[full] = repr(value)
        elif value is None:
            out[full] = ""
        else:
            out[full] = str(value)
    return out


def dumps(data: Mapping[str, Any]) -> str:
    flat = flatten(data)
    for key, value in flat.items():
        if "\n" in key or "\n" in value or "=" in key:
            raise ValueError(f"manifest entry {key!r} cannot be written as one line")
    return "".join(f"{k} = {flat[k]}\n" for k in sorted(flat))


def write_manifest(path: str | Path, data: Mapping[str, Any], stamp: bool = True) -> None:
    data = dict(data)
    if stamp:
        data["created_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    Path(path).write_text(dumps(data), encoding="utf-8")


def read_manifest(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"manifest not found: {path}")
    out = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise DataError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip()] = value
    return out


def without_timestamps(manifest: Mapping[str, str]) -> dict[str, str]:
    return {k: v for k, v in manifest.items() if k not in TIMESTAMP_KEYS}


def file_digest(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
