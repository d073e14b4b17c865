"""Compound triplet dataset: loading, validation, covariate joins.

The dataset file is a UTF-8 CSV with a header row. A column map decouples
the loader from any particular published layout; by default the required
columns are compound,left,right,lmd,st. All words are lowercased at load.
A compound must equal the concatenation left+right unless the row carries
an explicit non_concatenative flag; silent mismatches are rejected.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Mapping

from .errors import ValidationError

log = logging.getLogger(__name__)

LMD_RANGE = (0.0, 10.0)
ST_RANGE = (1.0, 7.0)

_TRUTHY = {"1", "true", "yes", "y"}


@dataclass(frozen=True)
class ColumnMap:
    """Names of the CSV columns holding each semantic field."""

    compound: str = "compound"
    left: str = "left"
    right: str = "right"
    lmd: str = "lmd"
    st: str = "st"
    # Optional columns; absent from the header means the feature is unused.
    non_concatenative: str = "non_concatenative"
    exclude: str = "exclude"


@dataclass(frozen=True)
class Triplet:
    compound: str
    left: str
    right: str
    human_lmd: float
    human_st: float
    non_concatenative: bool = False


@dataclass(frozen=True)
class Covariates:
    word: str
    concreteness: float | None = None
    n_instances: int | None = None
    n_tokens: int | None = None


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of triplets plus per-word covariates.

    Safe to share across threads; all "mutations" return a new Dataset.
    """

    triplets: tuple[Triplet, ...]
    covariates: Mapping[str, Covariates] = field(default_factory=dict)
    exclusions: tuple[tuple[str, str], ...] = ()

    def __len__(self) -> int:
        return len(self.triplets)

    def words(self) -> set[str]:
        out: set[str] = set()
        for t in self.triplets:
            out.update((t.compound, t.left, t.right))
        return out

    def by_compound(self) -> dict[str, Triplet]:
        return {t.compound: t for t in self.triplets}

    def covariate(self, word: str) -> Covariates:
        return self.covariates.get(word, Covariates(word))


def _check_word(value: str, what: str, row: int) -> str:
    word = value.strip().lower()
    if not word:
        raise ValidationError(f"row {row}: empty {what}")
    if any(ch.isspace() for ch in word):
        raise ValidationError(f"row {row}: {what} {value!r} contains whitespace")
    return word


def _check_float(value: str, what: str, row: int, lo: float, hi: float) -> float:
    try:
        x = float(value)
    except (TypeError, ValueError):
        raise ValidationError(f"row {row}: {what} {value!r} is not a number") from None
    if not lo <= x <= hi:
        raise ValidationError(f"row {row}: {what} {x} outside [{lo}, {hi}]")
    return x


def load_exclusions(path: str | Path) -> list[tuple[str, str]]:
    """Read an exclusion sidecar: one `word,reason` pair per line."""
    out: list[tuple[str, str]] = []
    for ln, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        word, _, reason = line.partition(",")
        word = word.strip().lower()
        if not word:
            raise ValidationError(f"exclusion line {ln}: empty word")
        out.append((word, reason.strip() or "excluded"))
    return out


def load_dataset(
    path: str | Path,
    schema: ColumnMap = ColumnMap(),
    exclusions_path: str | Path | None = None,
) -> Dataset:
    """Load and validate the triplet CSV.

    Rows failing any invariant are rejected with a diagnostic carrying the
    file row number. Exclusions come from the optional `exclude` column
    and/or a sidecar list; excluded compounds never reach the triplet list.
    """
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"dataset file not found: {path}")

    excluded: dict[str, str] = {}
    exclusion_order: list[tuple[str, str]] = []
    if exclusions_path is not None:
        for word, reason in load_exclusions(exclusions_path):
            if word not in excluded:
                excluded[word] = reason
                exclusion_order.append((word, reason))

    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        required = (schema.compound, schema.left, schema.right, schema.lmd, schema.st)
        missing = [c for c in required if c not in header]
        if missing:
            raise ValidationError(f"dataset missing required columns: {', '.join(missing)}")
        has_flag = schema.non_concatenative in header
        has_exclude = schema.exclude in header

        triplets: list[Triplet] = []
        seen: set[str] = set()
        n_rows = 0
        for row_no, row in enumerate(reader, start=2):
            n_rows += 1
            compound = _check_word(row[schema.compound], "compound", row_no)
            left = _check_word(row[schema.left], "left constituent", row_no)
            right = _check_word(row[schema.right], "right constituent", row_no)

            if has_exclude and (row.get(schema.exclude) or "").strip():
                reason = row[schema.exclude].strip()
                if compound not in excluded:
                    excluded[compound] = reason
                    exclusion_order.append((compound, reason))
            if compound in excluded:
                continue

            flagged = has_flag and (row.get(schema.non_concatenative) or "").strip().lower() in _TRUTHY
            if not flagged and left + right != compound:
                raise ValidationError(
                    f"row {row_no}: compound {compound!r} != left+right "
                    f"{left + right!r} and not flagged non_concatenative"
                )
            lmd = _check_float(row[schema.lmd], "lmd", row_no, *LMD_RANGE)
            st = _check_float(row[schema.st], "st", row_no, *ST_RANGE)

            if compound in seen:
                raise ValidationError(f"row {row_no}: duplicate compound {compound!r}")
            seen.add(compound)
            triplets.append(Triplet(compound, left, right, lmd, st, flagged))

    if n_rows == 0:
        raise ValidationError(f"no rows in dataset file: {path}")
    return Dataset(tuple(triplets), {}, tuple(exclusion_order))


def _parse_two_column(path: Path) -> Iterable[tuple[int, str, str]]:
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",") if "," in line else line.split()
        if len(parts) != 2:
            raise ValidationError(f"{path.name} line {ln}: expected two columns, got {len(parts)}")
        yield ln, parts[0].strip().lower(), parts[1].strip()


def join_covariates(ds: Dataset, concreteness_path: str | Path) -> Dataset:
    """Attach concreteness norms to every matched dataset word.

    Unmatched dataset words are counted and reported, not dropped; they are
    only excluded later, inside the regression analysis. Duplicate entries
    with equal values collapse to one; conflicting values are an error.
    """
    path = Path(concreteness_path)
    if not path.exists():
        raise ValidationError(f"concreteness file not found: {path}")
    norms: dict[str, float] = {}
    for ln, word, raw in _parse_two_column(path):
        try:
            value = float(raw)
        except ValueError:
            raise ValidationError(f"{path.name} line {ln}: non-numeric value {raw!r}") from None
        if word in norms and norms[word] != value:
            raise ValidationError(f"{path.name} line {ln}: conflicting values for {word!r}")
        norms[word] = value

    words = ds.words()
    covariates = dict(ds.covariates)
    matched = 0
    for word in words:
        if word in norms:
            covariates[word] = replace(ds.covariate(word), concreteness=norms[word])
            matched += 1
    missing_compounds = sum(1 for t in ds.triplets if t.compound not in norms)
    log.info(
        "concreteness: %d/%d dataset words matched; %d compounds missing",
        matched, len(words), missing_compounds,
    )
    return replace(ds, covariates=covariates)


def join_instance_counts(ds: Dataset, samples_path: str | Path) -> Dataset:
    """Attach per-word instance counts from a corpus-sampling JSONL report."""
    path = Path(samples_path)
    if not path.exists():
        raise ValidationError(f"samples file not found: {path}")
    covariates = dict(ds.covariates)
    for ln, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            word = rec["word"].lower()
            count = len(rec["sentences"])
        except (json.JSONDecodeError, KeyError, TypeError):
            raise ValidationError(f"{path.name} line {ln}: malformed sample record") from None
        covariates[word] = replace(ds.covariate(word), n_instances=count)
    return replace(ds, covariates=covariates)


def join_token_counts(ds: Dataset, counts_path: str | Path) -> Dataset:
    """Attach per-word subword token counts from a two-column file."""
    path = Path(counts_path)
    if not path.exists():
        raise ValidationError(f"token-count file not found: {path}")
    covariates = dict(ds.covariates)
    for ln, word, raw in _parse_two_column(path):
        if word == "word":  # tolerate a header row
            continue
        try:
            count = int(raw)
        except ValueError:
            raise ValidationError(f"{path.name} line {ln}: non-integer count {raw!r}") from None
        if count < 1:
            raise ValidationError(f"{path.name} line {ln}: token count must be >= 1")
        covariates[word] = replace(ds.covariate(word), n_tokens=count)
    return replace(ds, covariates=covariates)
