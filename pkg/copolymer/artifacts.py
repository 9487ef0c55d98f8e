"""Reproducible output files and their manifests.

Floats are written with ``repr`` so that they read back bit for bit, JSON
keys are sorted, and every command finishes with a manifest holding the
resolved configuration and a SHA-256 checksum per output file.
"""
import csv
import hashlib
import json
import logging
import math
from pathlib import Path

from copolymer import __version__

logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"


def format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return repr(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_value(value) for value in row])
    logger.debug("wrote %s (%d rows)", path, len(rows))
    return path


def read_csv(path):
    with Path(path).open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle))
    return rows[0], rows[1:]


def _clean(data):
    if isinstance(data, float) and not math.isfinite(data):
        return repr(data)
    if isinstance(data, dict):
        return {str(k): _clean(v) for k, v in data.items()}
    if isinstance(data, (list, tuple)):
        return [_clean(v) for v in data]
    return data


def dumps(data):
    return json.dumps(_clean(data), sort_keys=True, indent=2) + "\n"


def write_json(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(data), encoding="utf-8")
    return path


def write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text if text.endswith("\n") else text + "\n", encoding="utf-8")
    return path


def sha256_of(path):
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for chunk in iter(lambda: handle.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(out_dir, command, config, files, extra=None):
    """Write ``manifest.json`` next to ``files`` (paths inside ``out_dir``)."""
    out_dir = Path(out_dir)
    manifest = {
        "command": command,
        "version": __version__,
        "config": config.to_dict(),
        "files": {Path(f).name: sha256_of(f) for f in sorted(map(str, files))},
    }
    if extra:
        manifest.update(extra)
    return write_json(out_dir / MANIFEST_NAME, manifest)


def verify_manifest(out_dir):
    """Names of files whose checksum no longer matches the manifest."""
    out_dir = Path(out_dir)
    manifest = json.loads((out_dir / MANIFEST_NAME).read_text(encoding="utf-8"))
    bad = []
    for name, digest in sorted(manifest["files"].items()):
        target = out_dir / name
        if not target.exists() or sha256_of(target) != digest:
            logger.error("checksum mismatch for %s", target)
            bad.append(name)
    return bad
