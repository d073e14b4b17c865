"""Cosine-based compound measures: meaning dominance and transparency.

For a triplet (compound, left, right), L and R are the cosines between each
constituent and the compound at a given layer. Dominance is 5(R-L)+5 (0 =
fully left-determined, 10 = fully right-determined); transparency is
3(L+R)+1 in [1, 7] for non-negative cosines. The weighted transparency
variant 6(aL+(1-a)R)+1 reduces exactly to the plain one at a=0.5.

Real embeddings can produce negative cosines, which push the measures
outside their nominal ranges; by default raw cosines are kept and range
violations are counted, with an opt-in clamp of L,R to [0, 1].
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .dataset import Dataset, Triplet
from .embeddings import EmbeddingStore, RepresentationSetting, StaticStore
from .errors import ValidationError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimilarityPair:
    """Constituent-to-compound cosines for one compound at one layer."""

    L: float
    R: float
    layer: int = 1

    def __post_init__(self) -> None:
        for name, v in (("L", self.L), ("R", self.R)):
            if not math.isfinite(v) or not -1.0 <= v <= 1.0:
                raise ValidationError(f"{name}={v} is not a finite cosine in [-1, 1]")

    def swapped(self) -> "SimilarityPair":
        return SimilarityPair(self.R, self.L, self.layer)


@dataclass(frozen=True)
class MeasureRow:
    L: float
    R: float
    lmd_pred: float
    st_pred: float


@dataclass(frozen=True)
class TableMiss:
    compound: str
    missing_words: tuple[str, ...]


@dataclass(frozen=True)
class MeasureTable:
    """Per-compound predictions for one (setting, layer); setting is None
    for the static baseline."""

    setting: RepresentationSetting | None
    layer: int
    rows: Mapping[str, MeasureRow]
    misses: tuple[TableMiss, ...] = ()
    n_negative_cosines: int = 0

    @property
    def effective_n(self) -> int:
        return len(self.rows)

    @property
    def setting_name(self) -> str:
        return self.setting.cli_name if self.setting is not None else "static"


DEFAULT_WEIGHTS = tuple(i / 10 for i in range(11))


@dataclass(frozen=True)
class WeightGrid:
    """Left-constituent weights a; the right constituent gets 1-a."""

    weights: tuple[float, ...] = DEFAULT_WEIGHTS

    def __post_init__(self) -> None:
        if not self.weights:
            raise ValidationError("weight grid is empty")
        for w in self.weights:
            if not 0.0 <= w <= 1.0:
                raise ValidationError(f"weight {w} outside [0, 1]")


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity in 64-bit, clamped to [-1, 1] against rounding."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValidationError(f"dimension mismatch: {u.shape} vs {v.shape}")
    nu = math.sqrt(float(np.dot(u, u)))
    nv = math.sqrt(float(np.dot(v, v)))
    if nu == 0.0 or nv == 0.0:
        raise ValidationError("zero-norm vector: degenerate representation")
    if np.array_equal(u, v):
        return 1.0
    c = float(np.dot(u, v)) / (nu * nv)
    return min(1.0, max(-1.0, c))


def lmd(pair: SimilarityPair) -> float:
    """Meaning dominance: 0 if all weight is on the left, 10 if on the right."""
    return 5.0 * (pair.R - pair.L) + 5.0


def st(pair: SimilarityPair) -> float:
    """Transparency: how much both constituents' semantics survive in the compound."""
    return 3.0 * (pair.L + pair.R) + 1.0


def st_weighted(pair: SimilarityPair, alpha: float) -> float:
    """Transparency with left weight alpha, right weight 1-alpha.

    alpha=0 depends only on the head's cosine, alpha=1 only on the
    modifier's; alpha=0.5 equals st() exactly.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValidationError(f"alpha {alpha} outside [0, 1]")
    return 6.0 * (alpha * pair.L + (1.0 - alpha) * pair.R) + 1.0


def _lookup(store: EmbeddingStore | StaticStore, word: str,
            setting: RepresentationSetting | None, layer: int) -> np.ndarray | None:
    if isinstance(store, StaticStore):
        return store.get(word)
    if setting is None:
        raise ValidationError("a layered store requires a representation setting")
    return store.layer_vector(word, setting, layer)


def compute_table(
    ds: Dataset,
    store: EmbeddingStore | StaticStore,
    setting: RepresentationSetting | None,
    layer: int = 1,
    clamp_cosine: bool = False,
) -> MeasureTable:
    """Compute L, R and both measures for every fully-covered triplet.

    Triplets with any word absent from the store shrink effective_n and are
    itemized as misses instead of being imputed.
    """
    if isinstance(store, StaticStore):
        setting = None
        layer = 1
    rows: dict[str, MeasureRow] = {}
    misses: list[TableMiss] = []
    n_negative = 0
    for t in ds.triplets:
        vecs = {w: _lookup(store, w, setting, layer) for w in (t.compound, t.left, t.right)}
        absent = tuple(w for w, v in vecs.items() if v is None)
        if absent:
            misses.append(TableMiss(t.compound, absent))
            continue
        L = cosine(vecs[t.left], vecs[t.compound])
        R = cosine(vecs[t.right], vecs[t.compound])
        if L < 0.0 or R < 0.0:
            n_negative += 1
            if clamp_cosine:
                L, R = max(0.0, L), max(0.0, R)
        pair = SimilarityPair(L, R, layer)
        rows[t.compound] = MeasureRow(L, R, lmd(pair), st(pair))
    if not rows:
        raise ValidationError("no dataset triplet is fully covered by the store")
    if n_negative and not clamp_cosine:
        log.warning("%d compounds have a negative constituent cosine (raw values kept)", n_negative)
    return MeasureTable(setting, layer, rows, tuple(misses), n_negative)


def reverse_compounds(ds: Dataset) -> Dataset:
    """Replace each compound with its constituent-order-swapped form.

    Left/right roles and the human norms are preserved so correlations stay
    comparable. Non-concatenative compounds have no well-defined reversal
    and are skipped with a recorded reason.
    """
    triplets: list[Triplet] = []
    exclusions = list(ds.exclusions)
    for t in ds.triplets:
        # swap the current constituent order so reversal is an involution
        if not t.non_concatenative and t.compound == t.left + t.right:
            triplets.append(replace(t, compound=t.right + t.left))
        elif not t.non_concatenative and t.compound == t.right + t.left:
            triplets.append(replace(t, compound=t.left + t.right))
        else:
            exclusions.append((t.compound, "non-concatenative: reversal undefined"))
    return replace(ds, triplets=tuple(triplets), exclusions=tuple(exclusions))


TABLE_COLUMNS = ("compound", "layer", "setting", "L", "R", "lmd_pred", "st_pred")


def write_table_csv(table: MeasureTable, path: str | Path, manifest_checksum: str | None = None) -> None:
    """Serialize a measure table; full-precision floats, rows sorted by compound."""
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        if manifest_checksum:
            fh.write(f"# manifest {manifest_checksum}\n")
        writer = csv.writer(fh)
        writer.writerow(TABLE_COLUMNS)
        for compound in sorted(table.rows):
            r = table.rows[compound]
            writer.writerow([
                compound, table.layer, table.setting_name,
                repr(r.L), repr(r.R), repr(r.lmd_pred), repr(r.st_pred),
            ])


def read_table_csv(path: str | Path) -> MeasureTable:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"measure table not found: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    reader = csv.DictReader(lines)
    rows: dict[str, MeasureRow] = {}
    layer, setting_name = 1, "static"
    for rec in reader:
        try:
            layer = int(rec["layer"])
            setting_name = rec["setting"]
            rows[rec["compound"]] = MeasureRow(
                float(rec["L"]), float(rec["R"]), float(rec["lmd_pred"]), float(rec["st_pred"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path.name}: malformed table row {rec!r}: {exc}") from None
    if not rows:
        raise ValidationError(f"{path.name}: empty measure table")
    setting = None
    if setting_name != "static":
        setting = RepresentationSetting.from_cli_name(
            setting_name, template="<word>" if setting_name == "templated" else None
        )
    return MeasureTable(setting, layer, rows)
