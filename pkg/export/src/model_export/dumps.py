"""Writer for the layered-embedding dump format consumed downstream.

The schema is the analysis toolkit's external contract: a directory with
manifest.json (format_version, dim, n_layers, first_layer, setting,
record_count, per-file sha256 checksums, provenance) plus
records-00000.jsonl lines of {word, n_instances, layers}. Floats are
serialized at full precision so vector bytes survive a round-trip.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


@dataclass(frozen=True)
class DumpRecord:
    word: str
    layers: np.ndarray  # (n_layers, dim) float32
    n_instances: int = 1


def write_dump(
    records: list[DumpRecord],
    out_dir: str | Path,
    setting_descriptor: dict,
    first_layer: int,
    provenance: str,
) -> Path:
    if not records:
        raise ValueError("nothing to write: no records")
    shapes = {r.layers.shape for r in records}
    if len(shapes) != 1:
        raise ValueError(f"records disagree on shape: {sorted(shapes)}")
    n_layers, dim = shapes.pop()

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    name = "records-00000.jsonl"
    lines = []
    for rec in sorted(records, key=lambda r: r.word):
        lines.append(json.dumps({
            "word": rec.word,
            "n_instances": rec.n_instances,
            "layers": [[float(x) for x in row] for row in rec.layers],
        }, ensure_ascii=False))
    payload = "\n".join(lines) + "\n"
    (out_dir / name).write_text(payload, encoding="utf-8")

    manifest = {
        "format_version": FORMAT_VERSION,
        "dim": int(dim),
        "n_layers": int(n_layers),
        "first_layer": first_layer,
        "setting": setting_descriptor,
        "record_count": len(records),
        "files": {name: hashlib.sha256(payload.encode("utf-8")).hexdigest()},
        "provenance": provenance,
    }
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out_dir
