"""Shared storage plumbing: the embedded SQLite database and the file store.

Everything durable lives under a single storage root:

    <root>/elab.sqlite   one transactional database (WAL mode)
    <root>/files/<lfn>   physical bytes behind logical file names
    <root>/work/         per-plan scratch directories for the executor
"""

from __future__ import annotations

import hashlib
import os
import shutil
import sqlite3
import threading
from pathlib import Path


def sha256_hex(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def digest_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


class Database:
    """One SQLite connection shared by every store, writes serialized.

    Readers and the single logical writer all funnel through ``execute`` /
    ``transaction`` under an RLock, which is the whole concurrency story:
    callers on any thread get atomic, isolated operations.
    """

    def __init__(self, path: str | os.PathLike[str] | None):
        self.path = str(path) if path is not None else ":memory:"
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
        self._conn = sqlite3.connect(self.path, check_same_thread=False)
        self._conn.execute("PRAGMA journal_mode=WAL")
        self._conn.execute("PRAGMA synchronous=NORMAL")
        self._conn.execute("PRAGMA busy_timeout=10000")
        self._conn.execute("PRAGMA foreign_keys=ON")
        self.lock = threading.RLock()

    def executescript(self, script: str) -> None:
        with self.lock:
            self._conn.executescript(script)
            self._conn.commit()

    def execute(self, sql: str, params: tuple = ()) -> list[tuple]:
        with self.lock:
            cur = self._conn.execute(sql, params)
            rows = cur.fetchall()
            self._conn.commit()
            return rows

    def query(self, sql: str, params: tuple = ()) -> list[tuple]:
        with self.lock:
            return self._conn.execute(sql, params).fetchall()

    def transaction(self, statements: list[tuple[str, tuple]]) -> None:
        """Run several statements atomically; roll back on any failure."""
        with self.lock:
            try:
                for sql, params in statements:
                    self._conn.execute(sql, params)
            except Exception:
                self._conn.rollback()
                raise
            self._conn.commit()

    def close(self) -> None:
        with self.lock:
            self._conn.close()


class FileStore:
    """Physical bytes behind logical file names, addressed as files/<lfn>."""

    def __init__(self, root: str | os.PathLike[str]):
        self.root = Path(root)
        self.files_dir = self.root / "files"
        self.files_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, lfn: str) -> Path:
        if "/" in lfn or lfn.startswith("."):
            raise ValueError(f"unsafe logical file name: {lfn!r}")
        return self.files_dir / lfn

    def put_bytes(self, lfn: str, data: bytes) -> str:
        path = self.path_for(lfn)
        path.write_bytes(data)
        return sha256_hex(data)

    def put_file(self, lfn: str, source: Path) -> str:
        path = self.path_for(lfn)
        shutil.copyfile(source, path)
        return digest_file(path)

    def read_bytes(self, lfn: str) -> bytes:
        return self.path_for(lfn).read_bytes()

    def exists(self, lfn: str) -> bool:
        return self.path_for(lfn).is_file()

    def materialize(self, lfn: str, dest: Path, read_only: bool = True) -> Path:
        """Copy a stored file to dest (a file path), optionally read-only."""
        shutil.copyfile(self.path_for(lfn), dest)
        if read_only:
            os.chmod(dest, 0o444)
        return dest
