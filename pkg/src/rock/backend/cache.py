"""Persistent response cache: append-only record log with an in-memory index.

One file per backend id. Layout: a magic header followed by length-prefixed
records ``[u32 key_len][key][u64 created_at_ns][u32 body_len][body]``. Loading
tolerates a truncated final record (a torn append is simply ignored), and
appends are serialized under a lock while reads go through the in-memory
index, so concurrent readers are safe.
"""

from __future__ import annotations

import os
import struct
import threading
import time
from pathlib import Path

MAGIC = b"ROCKCACHE"
VERSION = 1
_HEADER = MAGIC + struct.pack(">H", VERSION)
_U32 = struct.Struct(">I")
_U64 = struct.Struct(">Q")


class CacheFormatError(ValueError):
    pass


class ResponseCache:
    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self._index: dict[str, bytes] = {}
        self.hits = 0
        self.misses = 0
        self._load()

    def _load(self) -> None:
        if not self.path.exists():
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "wb") as fh:
                fh.write(_HEADER)
            return
        data = self.path.read_bytes()
        if not data.startswith(MAGIC):
            raise CacheFormatError(f"{self.path}: not a cache file (bad magic)")
        version = struct.unpack(">H", data[len(MAGIC) : len(MAGIC) + 2])[0]
        if version != VERSION:
            raise CacheFormatError(f"{self.path}: unsupported cache version {version}")
        pos = len(_HEADER)
        while pos < len(data):
            record = self._read_record(data, pos)
            if record is None:
                break  # torn tail from an interrupted append
            key, body, new_pos = record
            self._index[key] = body
            pos = new_pos

    @staticmethod
    def _read_record(data: bytes, pos: int) -> tuple[str, bytes, int] | None:
        if pos + 4 > len(data):
            return None
        (key_len,) = _U32.unpack_from(data, pos)
        pos += 4
        if pos + key_len + 8 + 4 > len(data):
            return None
        key = data[pos : pos + key_len].decode("utf-8")
        pos += key_len + 8  # skip created_at
        (body_len,) = _U32.unpack_from(data, pos)
        pos += 4
        if pos + body_len > len(data):
            return None
        return key, data[pos : pos + body_len], pos + body_len

    def get(self, key: str) -> bytes | None:
        body = self._index.get(key)
        if body is None:
            self.misses += 1
        else:
            self.hits += 1
        return body

    def put(self, key: str, body: bytes) -> None:
        kb = key.encode("utf-8")
        record = b"".join(
            (_U32.pack(len(kb)), kb, _U64.pack(time.time_ns()), _U32.pack(len(body)), body)
        )
        with self._lock:
            with open(self.path, "ab") as fh:
                fh.write(record)
            self._index[key] = body

    def __contains__(self, key: str) -> bool:
        return key in self._index

    def __len__(self) -> int:
        return len(self._index)

    def compact(self) -> int:
        """Rewrite the file keeping one (latest) record per key; returns bytes saved."""
        with self._lock:
            before = self.path.stat().st_size
            tmp = self.path.with_suffix(self.path.suffix + ".compact")
            with open(tmp, "wb") as fh:
                fh.write(_HEADER)
                for key, body in self._index.items():
                    kb = key.encode("utf-8")
                    fh.write(_U32.pack(len(kb)))
                    fh.write(kb)
                    fh.write(_U64.pack(time.time_ns()))
                    fh.write(_U32.pack(len(body)))
                    fh.write(body)
            os.replace(tmp, self.path)
            return before - self.path.stat().st_size

    def stats(self) -> dict:
        return {
            "path": str(self.path),
            "entries": len(self._index),
            "file_bytes": self.path.stat().st_size,
            "hits": self.hits,
            "misses": self.misses,
        }
