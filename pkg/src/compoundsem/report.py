"""Publication-style outputs: best-layer summaries, per-layer curves,
per-compound trajectories, and the weighted-transparency grid.

Everything is emitted as plain data files ready for external plotting; no
figures are rendered here. Each artifact embeds the checksum of the run
manifest it came from, and emission is byte-deterministic given identical
inputs (the timestamp lives only in the manifest file itself).
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__
from .dataset import Dataset
from .embeddings import EmbeddingStore, RepresentationSetting
from .errors import ValidationError
from .measures import MeasureTable, SimilarityPair, WeightGrid, compute_table, st_weighted
from .stats import EvalResult, SweepReport, mae, spearman

MANIFEST_FILE = "manifest.json"


@dataclass(frozen=True)
class RunManifest:
    dataset_checksum: str
    store_provenance: str
    setting: str
    flags: Mapping[str, object]
    tool_version: str = __version__
    timestamp: str = ""

    @staticmethod
    def build(dataset_path: str | Path | None, store_provenance: str, setting: str,
              flags: Mapping[str, object]) -> "RunManifest":
        checksum = ""
        if dataset_path is not None:
            checksum = hashlib.sha256(Path(dataset_path).read_bytes()).hexdigest()
        return RunManifest(
            dataset_checksum=checksum,
            store_provenance=store_provenance,
            setting=setting,
            flags=dict(sorted(flags.items())),
            timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"),
        )

    def checksum(self) -> str:
        """Checksum over the identity fields only; the timestamp stays out
        so artifacts are byte-stable across reruns."""
        identity = {
            "dataset_checksum": self.dataset_checksum,
            "store_provenance": self.store_provenance,
            "setting": self.setting,
            "flags": dict(self.flags),
            "tool_version": self.tool_version,
        }
        blob = json.dumps(identity, sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:16]

    def write(self, out_dir: str | Path) -> str:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        payload = {
            "checksum": self.checksum(),
            "dataset_checksum": self.dataset_checksum,
            "store_provenance": self.store_provenance,
            "setting": self.setting,
            "flags": dict(self.flags),
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
        }
        (out / MANIFEST_FILE).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return self.checksum()


@dataclass(frozen=True)
class SummaryRow:
    label: str
    measure: str
    best_mae: float
    best_mae_layer: int
    best_rho: float
    best_rho_layer: int
    n: int


def summary_table(reports: Sequence[tuple[str, SweepReport]]) -> list[SummaryRow]:
    """One row per (label, measure) with best-layer MAE and rho."""
    if not reports:
        raise ValidationError("summary_table needs at least one report")
    rows: list[SummaryRow] = []
    for label, report in reports:
        for measure in ("lmd", "st"):
            mae_layer, mae_best = report.best(measure, by="mae")
            rho_layer, rho_best = report.best(measure, by="rho")
            rows.append(SummaryRow(
                label, measure,
                mae_best.mae, mae_layer,
                rho_best.spearman_rho, rho_layer,
                rho_best.n,
            ))
    return rows


def render_summary(rows: Sequence[SummaryRow]) -> str:
    """Aligned text table; 6 significant digits, best layer in parentheses."""
    header = ("label", "measure", "MAE (layer)", "rho (layer)", "n")
    body = [
        (r.label, r.measure,
         f"{r.best_mae:.6g} ({r.best_mae_layer})",
         f"{r.best_rho:.6g} ({r.best_rho_layer})",
         str(r.n))
        for r in rows
    ]
    widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in [header, *body]]
    return "\n".join(lines)


def write_summary_csv(rows: Sequence[SummaryRow], path: str | Path, manifest_checksum: str | None = None) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        if manifest_checksum:
            fh.write(f"# manifest {manifest_checksum}\n")
        writer = csv.writer(fh)
        writer.writerow(("label", "measure", "best_mae", "best_mae_layer", "best_rho", "best_rho_layer", "n"))
        for r in rows:
            writer.writerow([r.label, r.measure, repr(r.best_mae), r.best_mae_layer,
                             repr(r.best_rho), r.best_rho_layer, r.n])


@dataclass(frozen=True)
class TrajectorySeries:
    compound: str
    measure: str
    points: tuple[tuple[int, float], ...]  # (layer, predicted)
    gold: float


def trajectory(compound: str, tables: Mapping[int, MeasureTable], measure: str, gold: float) -> TrajectorySeries:
    """Predicted values across layers for one compound, plus the gold line."""
    if measure not in ("lmd", "st"):
        raise ValidationError(f"unknown measure {measure!r}")
    points: list[tuple[int, float]] = []
    for layer in sorted(tables):
        row = tables[layer].rows.get(compound)
        if row is None:
            raise ValidationError(f"compound {compound!r} missing from layer {layer} table")
        points.append((layer, getattr(row, f"{measure}_pred")))
    return TrajectorySeries(compound, measure, tuple(points), gold)


def write_trajectory_csv(series: TrajectorySeries, path: str | Path, manifest_checksum: str | None = None) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        if manifest_checksum:
            fh.write(f"# manifest {manifest_checksum}\n")
        writer = csv.writer(fh)
        writer.writerow(("compound", "measure", "layer", "predicted", "gold"))
        for layer, value in series.points:
            writer.writerow([series.compound, series.measure, layer, repr(value), repr(series.gold)])


def weighted_st_grid(
    ds: Dataset,
    store: EmbeddingStore,
    setting: RepresentationSetting,
    grid: WeightGrid = WeightGrid(),
    layers: Sequence[int] | None = None,
    clamp_cosine: bool = False,
) -> dict[tuple[float, int], EvalResult]:
    """Evaluate weighted transparency for every (left weight, layer) cell."""
    if layers is None:
        layers = [k for k in store.layer_indices() if k >= 1]
    gold = ds.by_compound()
    out: dict[tuple[float, int], EvalResult] = {}
    for layer in sorted(layers):
        table = compute_table(ds, store, setting, layer, clamp_cosine)
        compounds = [c for c in sorted(table.rows) if c in gold]
        if len(compounds) < 2:
            raise ValidationError(f"layer {layer}: fewer than 2 compounds to evaluate")
        human = [gold[c].human_st for c in compounds]
        for alpha in grid.weights:
            pred = [
                st_weighted(SimilarityPair(table.rows[c].L, table.rows[c].R, layer), alpha)
                for c in compounds
            ]
            out[(alpha, layer)] = EvalResult(mae(pred, human), spearman(pred, human), len(compounds))
    return out


def write_grid_csv(grid_results: Mapping[tuple[float, int], EvalResult], path: str | Path,
                   manifest_checksum: str | None = None) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        if manifest_checksum:
            fh.write(f"# manifest {manifest_checksum}\n")
        writer = csv.writer(fh)
        writer.writerow(("alpha", "layer", "mae", "rho", "n"))
        for alpha, layer in sorted(grid_results):
            r = grid_results[(alpha, layer)]
            writer.writerow([repr(alpha), layer, repr(r.mae), repr(r.spearman_rho), r.n])
