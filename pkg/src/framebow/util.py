"""Small shared helpers."""

from __future__ import annotations

import hashlib
from pathlib import Path


def file_fingerprint(path: str | Path) -> str:
    """sha256 of a file's bytes; ties trained artifacts to each other."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
