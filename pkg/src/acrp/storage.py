"""Content-addressed blob store: filesystem directory with two-level fan-out.

Keys are the SHA-256 of the value, rendered lowercase hex on disk as
aa/bb/<full hex>.  Writes go to a temp file and rename into place, so
concurrent puts of the same value are idempotent and readers never see a
partial object.  Every read re-hashes the bytes and flags corruption.
"""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path
from typing import Iterable, Optional, Set

MAX_VALUE_BYTES = 32 * 1024 * 1024


class TooLarge(ValueError):
    pass


class IntegrityError(RuntimeError):
    pass


class BlobStore:
    def __init__(self, root: str):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key_hex: str) -> Path:
        return self.root / key_hex[:2] / key_hex[2:4] / key_hex

    def put(self, value: bytes) -> bytes:
        """Store value, returning its 32-byte digest key; idempotent."""
        if len(value) > MAX_VALUE_BYTES:
            raise TooLarge(f"{len(value)} bytes exceeds {MAX_VALUE_BYTES}")
        key = hashlib.sha256(value).digest()
        path = self._path(key.hex())
        if not path.exists():
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-")
            try:
                with os.fdopen(fd, "wb") as f:
                    f.write(value)
                os.replace(tmp, path)
            except BaseException:
                if os.path.exists(tmp):
                    os.unlink(tmp)
                raise
        return key

    def get(self, key: bytes) -> Optional[bytes]:
        """Exact stored bytes, or None if absent; IntegrityError on corruption."""
        path = self._path(key.hex())
        if not path.exists():
            return None
        value = path.read_bytes()
        if hashlib.sha256(value).digest() != key:
            raise IntegrityError(f"digest mismatch for {key.hex()}")
        return value

    def has(self, key: bytes) -> bool:
        return self._path(key.hex()).exists()

    def keys(self) -> Set[bytes]:
        out = set()
        for path in self.root.glob("??/??/*"):
            if path.is_file() and not path.name.startswith(".tmp-"):
                out.add(bytes.fromhex(path.name))
        return out

    def gc(self, retain: Iterable[bytes]) -> int:
        """Remove every object not in retain; requires exclusive access."""
        keep = set(retain)
        removed = 0
        for key in self.keys():
            if key not in keep:
                self._path(key.hex()).unlink()
                removed += 1
        return removed
