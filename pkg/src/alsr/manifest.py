import hashlib
import json
from pathlib import Path

MANIFEST = "manifest.json"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(root) -> Path:
    """List every file under ``root`` (recursively, except the manifest) with its SHA-256."""
    root = Path(root)
    entries = [
        {"path": p.relative_to(root).as_posix(), "bytes": p.stat().st_size, "sha256": sha256_file(p)}
        for p in sorted(root.rglob("*"))
        if p.is_file() and p != root / MANIFEST
    ]
    path = root / MANIFEST
    path.write_text(json.dumps({"files": entries}, indent=2) + "\n")
    return path


def verify_manifest(root) -> list:
    """Paths whose current hash differs from the manifest (empty when intact)."""
    root = Path(root)
    doc = json.loads((root / MANIFEST).read_text())
    return [e["path"] for e in doc["files"] if sha256_file(root / e["path"]) != e["sha256"]]
