"""Embedded persistence: a revisioned entity log plus a content-addressed
blob store.

Entities are stored as an append-only JSONL log of canonical payloads; per
entity, revisions are strictly increasing and gapless, and every append
states the revision the writer expected, so concurrent writers lose with a
conflict instead of silently overwriting each other. Appends are flushed and
fsynced before being acknowledged.

Blobs are written once under their SHA-256 digest and re-hashed on every
read, so any on-disk tampering surfaces as a digest mismatch at the moment
the content is used.
"""

from __future__ import annotations

import os
import threading
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path
from typing import Any, Iterator, Mapping

from .canonical import (
    canonical_json_bytes,
    format_timestamp,
    parse_canonical,
    parse_timestamp,
    sha256_hex,
)
from .errors import ConflictError, DigestMismatchError, NotFoundError, ValidationError

_LOG_NAME = "entities.log"
_BLOB_DIR = "blobs"


@dataclass(frozen=True)
class StoredRevision:
    entity_id: str
    revision: int
    payload: dict[str, Any]
    actor: str
    at: datetime

    def to_doc(self) -> dict[str, Any]:
        return {
            "entity_id": self.entity_id,
            "revision": self.revision,
            "payload": self.payload,
            "actor": self.actor,
            "at": format_timestamp(self.at),
        }

    @staticmethod
    def from_doc(doc: Mapping[str, Any]) -> "StoredRevision":
        return StoredRevision(
            entity_id=doc["entity_id"],
            revision=doc["revision"],
            payload=doc["payload"],
            actor=doc.get("actor", ""),
            at=parse_timestamp(doc["at"]),
        )


class Store:
    """Entity log + blob store; file-backed when given a path, otherwise
    in-memory (useful for tests and fixture loading)."""

    def __init__(self, path: str | os.PathLike[str] | None = None) -> None:
        self._lock = threading.RLock()
        self._revisions: dict[str, list[StoredRevision]] = {}
        self._memory_blobs: dict[str, bytes] = {}
        self._path: Path | None = None
        if path is not None:
            self._path = Path(path)
            self._path.mkdir(parents=True, exist_ok=True)
            (self._path / _BLOB_DIR).mkdir(exist_ok=True)
            self._replay_log()

    @property
    def path(self) -> Path | None:
        return self._path

    # -- entity log ---------------------------------------------------------

    def _replay_log(self) -> None:
        assert self._path is not None
        log_path = self._path / _LOG_NAME
        if not log_path.exists():
            return
        with log_path.open("r", encoding="utf-8") as handle:
            for line_no, line in enumerate(handle, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    revision = StoredRevision.from_doc(parse_canonical(line))
                except (KeyError, ValueError) as exc:
                    raise ValidationError(f"corrupt store log at line {line_no}: {exc}") from exc
                self._revisions.setdefault(revision.entity_id, []).append(revision)

    def _write_line(self, revision: StoredRevision) -> None:
        assert self._path is not None
        log_path = self._path / _LOG_NAME
        with log_path.open("ab") as handle:
            handle.write(canonical_json_bytes(revision.to_doc()) + b"\n")
            handle.flush()
            os.fsync(handle.fileno())

    def current_revision(self, entity_id: str) -> int:
        with self._lock:
            revisions = self._revisions.get(entity_id)
            return revisions[-1].revision if revisions else 0

    def exists(self, entity_id: str) -> bool:
        return self.current_revision(entity_id) > 0

    def entity_ids(self, prefix: str = "") -> list[str]:
        with self._lock:
            return sorted(e for e in self._revisions if e.startswith(prefix))

    def append(
        self,
        entity_id: str,
        expected_revision: int,
        payload: dict[str, Any],
        *,
        actor: str,
        at: datetime,
    ) -> StoredRevision:
        """Append a new revision; ``expected_revision`` must equal the current
        one (0 for a brand-new entity)."""
        with self._lock:
            current = self.current_revision(entity_id)
            if expected_revision != current:
                raise ConflictError(entity_id, expected_revision, current)
            revision = StoredRevision(
                entity_id=entity_id,
                revision=current + 1,
                payload=payload,
                actor=actor,
                at=at,
            )
            if self._path is not None:
                self._write_line(revision)
            self._revisions.setdefault(entity_id, []).append(revision)
            return revision

    def append_history(self, revisions: list[StoredRevision]) -> None:
        """Materialize a full imported history for entities that must not
        already exist (bundle import)."""
        with self._lock:
            by_entity: dict[str, list[StoredRevision]] = {}
            for revision in revisions:
                by_entity.setdefault(revision.entity_id, []).append(revision)
            for entity_id, entity_revisions in by_entity.items():
                if self.exists(entity_id):
                    raise ConflictError(entity_id, 0, self.current_revision(entity_id))
                expected = list(range(1, len(entity_revisions) + 1))
                actual = [r.revision for r in entity_revisions]
                if actual != expected:
                    raise ValidationError(
                        f"imported history for {entity_id!r} is not gapless: {actual}"
                    )
            for entity_id, entity_revisions in by_entity.items():
                for revision in entity_revisions:
                    if self._path is not None:
                        self._write_line(revision)
                    self._revisions.setdefault(entity_id, []).append(revision)

    def get(self, entity_id: str) -> StoredRevision:
        with self._lock:
            revisions = self._revisions.get(entity_id)
            if not revisions:
                raise NotFoundError(f"unknown entity: {entity_id}")
            return revisions[-1]

    def history(self, entity_id: str) -> list[StoredRevision]:
        with self._lock:
            revisions = self._revisions.get(entity_id)
            if not revisions:
                raise NotFoundError(f"unknown entity: {entity_id}")
            return list(revisions)

    # -- blobs --------------------------------------------------------------

    def put_blob(self, content: bytes) -> str:
        digest = sha256_hex(content)
        with self._lock:
            if self._path is None:
                self._memory_blobs[digest] = bytes(content)
            else:
                blob_path = self._path / _BLOB_DIR / digest
                if not blob_path.exists():
                    tmp_path = blob_path.with_name(f".{digest}.tmp")
                    tmp_path.write_bytes(content)
                    os.replace(tmp_path, blob_path)
        return digest

    def has_blob(self, digest: str) -> bool:
        with self._lock:
            if self._path is None:
                return digest in self._memory_blobs
            return (self._path / _BLOB_DIR / digest).exists()

    def get_blob(self, digest: str) -> bytes:
        """Read a blob and re-verify its digest; tampering raises."""
        with self._lock:
            if self._path is None:
                content = self._memory_blobs.get(digest)
                if content is None:
                    raise NotFoundError(f"unknown blob: {digest}")
            else:
                blob_path = self._path / _BLOB_DIR / digest
                if not blob_path.exists():
                    raise NotFoundError(f"unknown blob: {digest}")
                content = blob_path.read_bytes()
        actual = sha256_hex(content)
        if actual != digest:
            raise DigestMismatchError(f"blob {digest}", digest, actual)
        return content

    def blob_digests(self) -> Iterator[str]:
        with self._lock:
            if self._path is None:
                yield from sorted(self._memory_blobs)
            else:
                blob_dir = self._path / _BLOB_DIR
                yield from sorted(p.name for p in blob_dir.iterdir() if p.is_file())

    # -- direct tamper hook for tests ---------------------------------------

    def overwrite_blob_unchecked(self, digest: str, content: bytes) -> None:
        """Bypass integrity to simulate at-rest corruption (tests only)."""
        with self._lock:
            if self._path is None:
                self._memory_blobs[digest] = content
            else:
                (self._path / _BLOB_DIR / digest).write_bytes(content)
