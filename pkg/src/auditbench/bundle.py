"""Self-contained audit bundles: deterministic export, verified import.

A bundle is a zip archive with a fixed member layout and zeroed timestamps,
so exporting the same stored state twice yields identical bytes:

    manifest.json              format version, audit id, member digests
    entities/<entity id>.json  full revision history, one document
    blobs/<sha256>             content-addressed evidence blobs

The manifest lists the SHA-256 of every other member; import verifies each
digest before anything is materialized and names the offending member on
mismatch, so a single corrupted byte anywhere is caught and attributed.
"""

from __future__ import annotations

import io
import zipfile
from typing import Any

from .canonical import canonical_json_bytes, parse_canonical, sha256_hex
from .errors import BundleError, ConflictError
from .store import Store, StoredRevision
from .workflow import Audit

BUNDLE_FORMAT_VERSION = 1
_MANIFEST_NAME = "manifest.json"
_ZIP_EPOCH = (1980, 1, 1, 0, 0, 0)


def audit_entity_id(audit_id: str) -> str:
    return f"audit:{audit_id}"


def _zip_write(archive: zipfile.ZipFile, name: str, content: bytes) -> None:
    info = zipfile.ZipInfo(filename=name, date_time=_ZIP_EPOCH)
    info.compress_type = zipfile.ZIP_STORED
    info.external_attr = (0o100644 & 0xFFFF) << 16
    info.create_system = 3
    archive.writestr(info, content)


def export_bundle(store: Store, audit_id: str) -> bytes:
    """Serialize one audit (full history plus referenced blobs) to bundle
    bytes. Re-export without intervening writes is byte-identical."""
    entity_id = audit_entity_id(audit_id)
    history = store.history(entity_id)  # raises NotFoundError for unknown audits
    audit = Audit.from_doc(history[-1].payload)

    blob_digests: set[str] = set()
    for iteration in audit.iterations:
        for item in iteration.evidence:
            if store.has_blob(item.content_digest):
                blob_digests.add(item.content_digest)

    members: list[tuple[str, bytes]] = []
    entity_doc = {
        "entity_id": entity_id,
        "revisions": [r.to_doc() for r in history],
    }
    members.append((f"entities/{entity_id}.json", canonical_json_bytes(entity_doc)))
    for digest in sorted(blob_digests):
        members.append((f"blobs/{digest}", store.get_blob(digest)))

    manifest = {
        "format_version": BUNDLE_FORMAT_VERSION,
        "audit_id": audit_id,
        "entries": [
            {"path": name, "sha256": sha256_hex(content), "size": len(content)}
            for name, content in members
        ],
    }

    buffer = io.BytesIO()
    with zipfile.ZipFile(buffer, mode="w") as archive:
        _zip_write(archive, _MANIFEST_NAME, canonical_json_bytes(manifest))
        for name, content in sorted(members):
            _zip_write(archive, name, content)
    return buffer.getvalue()


def verify_bundle(data: bytes) -> dict[str, Any]:
    """Structural and digest verification; returns the parsed manifest."""
    try:
        archive = zipfile.ZipFile(io.BytesIO(data))
    except zipfile.BadZipFile as exc:
        raise BundleError(f"not a bundle archive: {exc}") from exc
    with archive:
        names = set(archive.namelist())
        if _MANIFEST_NAME not in names:
            raise BundleError("bundle has no manifest.json")
        try:
            manifest = parse_canonical(archive.read(_MANIFEST_NAME))
        except (zipfile.BadZipFile, ValueError) as exc:
            raise BundleError(f"corrupt bundle manifest: {exc}") from exc
        version = manifest.get("format_version")
        if version != BUNDLE_FORMAT_VERSION:
            raise BundleError(
                f"unsupported bundle format version: {version!r} "
                f"(supported: {BUNDLE_FORMAT_VERSION})"
            )
        entries = manifest.get("entries", [])
        listed = {e["path"] for e in entries}
        extra = names - listed - {_MANIFEST_NAME}
        if extra:
            raise BundleError(f"bundle members missing from manifest: {sorted(extra)}")
        for entry in entries:
            path = entry["path"]
            if path not in names:
                raise BundleError(f"manifest lists missing member: {path}")
            try:
                content = archive.read(path)
            except zipfile.BadZipFile as exc:
                raise BundleError(f"corrupt bundle member {path}: {exc}") from exc
            actual = sha256_hex(content)
            if actual != entry["sha256"]:
                raise BundleError(
                    f"digest mismatch for bundle member {path}: "
                    f"manifest says {entry['sha256']}, content is {actual}"
                )
        return manifest


def _rename_payload(payload: dict[str, Any], new_id: str) -> dict[str, Any]:
    renamed = dict(payload)
    renamed["id"] = new_id
    return renamed


def import_bundle(store: Store, data: bytes, *, rename_to: str | None = None) -> str:
    """Materialize a bundle into ``store`` with its full revision history.

    An existing audit with the same id is a collision; pass ``rename_to`` to
    import under a different id.
    """
    manifest = verify_bundle(data)
    audit_id = manifest["audit_id"]
    target_id = rename_to or audit_id

    entity_id = audit_entity_id(target_id)
    if store.exists(entity_id):
        raise ConflictError(entity_id, 0, store.current_revision(entity_id))

    with zipfile.ZipFile(io.BytesIO(data)) as archive:
        entity_doc = parse_canonical(archive.read(f"entities/{audit_entity_id(audit_id)}.json"))
        revisions: list[StoredRevision] = []
        for revision_doc in entity_doc["revisions"]:
            doc = dict(revision_doc)
            if rename_to is not None:
                doc["entity_id"] = entity_id
                doc["payload"] = _rename_payload(doc["payload"], target_id)
            revisions.append(StoredRevision.from_doc(doc))

        # Every internal evidence reference must resolve inside the bundle.
        audit = Audit.from_doc(revisions[-1].payload)
        bundled_blobs = {
            name.split("/", 1)[1] for name in archive.namelist() if name.startswith("blobs/")
        }
        for iteration in audit.iterations:
            for item in iteration.evidence:
                if item.uri is None and item.content_digest not in bundled_blobs:
                    raise BundleError(
                        f"evidence {item.id!r} references blob {item.content_digest} "
                        "which is not in the bundle"
                    )

        store.append_history(revisions)
        for digest in sorted(bundled_blobs):
            content = archive.read(f"blobs/{digest}")
            actual = sha256_hex(content)
            if actual != digest:
                raise BundleError(
                    f"digest mismatch for bundle member blobs/{digest}: content is {actual}"
                )
            store.put_blob(content)
    return target_id
