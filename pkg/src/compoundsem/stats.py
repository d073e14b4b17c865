"""Evaluation against human norms: MAE, Spearman rank correlation,
layer sweeps, and linear regression with exact t-distribution p-values.

Spearman is the Pearson correlation of average-rank-transformed series
(ties get the mean of their rank span) and is undefined, not zero, for a
constant input. Accumulations use exactly-rounded summation (math.fsum) so
results are independent of input order.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy import stats as sps

from .dataset import Dataset
from .embeddings import EmbeddingStore, RepresentationSetting
from .errors import ValidationError
from .measures import MeasureTable, compute_table

log = logging.getLogger(__name__)

MEASURES = ("lmd", "st")


@dataclass(frozen=True)
class EvalResult:
    mae: float
    spearman_rho: float
    n: int


@dataclass(frozen=True)
class SweepReport:
    """Per-layer evaluation plus best-layer selections (ties -> lower layer)."""

    per_layer: Mapping[int, Mapping[str, EvalResult]]
    best_lmd_layer: int
    best_st_layer: int
    best_lmd_mae_layer: int
    best_st_mae_layer: int

    def best(self, measure: str, by: str = "rho") -> tuple[int, EvalResult]:
        layer = {
            ("lmd", "rho"): self.best_lmd_layer,
            ("st", "rho"): self.best_st_layer,
            ("lmd", "mae"): self.best_lmd_mae_layer,
            ("st", "mae"): self.best_st_mae_layer,
        }[(measure, by)]
        return layer, self.per_layer[layer][measure]


@dataclass(frozen=True)
class CoefficientStats:
    estimate: float
    std_error: float
    t_stat: float
    p_value: float


@dataclass(frozen=True)
class RegressionResult:
    coefficients: Mapping[str, CoefficientStats]
    intercept: CoefficientStats | None
    n: int
    r_squared: float
    n_excluded: int = 0


def mae(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Mean absolute distance between two equal-length series."""
    if len(pred) != len(gold):
        raise ValidationError(f"length mismatch: {len(pred)} vs {len(gold)}")
    if len(pred) == 0:
        raise ValidationError("mae of empty series")
    for series in (pred, gold):
        if not all(math.isfinite(x) for x in series):
            raise ValidationError("non-finite value in mae input")
    return math.fsum(abs(p - g) for p, g in zip(pred, gold)) / len(pred)


def average_ranks(values: Sequence[float]) -> np.ndarray:
    """1-based ranks; tied values share the mean of their rank span."""
    x = np.asarray(values, dtype=np.float64)
    order = np.argsort(x, kind="stable")
    ranks = np.empty(len(x), dtype=np.float64)
    i = 0
    while i < len(x):
        j = i
        while j + 1 < len(x) and x[order[j + 1]] == x[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Rank correlation with average ranks for ties."""
    if len(x) != len(y):
        raise ValidationError(f"length mismatch: {len(x)} vs {len(y)}")
    if len(x) < 2:
        raise ValidationError("spearman needs at least two observations")
    for series in (x, y):
        if not all(math.isfinite(v) for v in series):
            raise ValidationError("non-finite value in spearman input")
    rx, ry = average_ranks(x), average_ranks(y)
    mx = math.fsum(rx) / len(rx)
    my = math.fsum(ry) / len(ry)
    dx = [r - mx for r in rx]
    dy = [r - my for r in ry]
    ssx = math.fsum(d * d for d in dx)
    ssy = math.fsum(d * d for d in dy)
    if ssx == 0.0 or ssy == 0.0:
        raise ValidationError("constant input: rank correlation undefined")
    rho = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(ssx * ssy)
    return min(1.0, max(-1.0, rho))


def evaluate(table: MeasureTable, ds: Dataset) -> dict[str, EvalResult]:
    """MAE and Spearman rho of both measures over table/dataset intersection."""
    gold = ds.by_compound()
    compounds = [c for c in sorted(table.rows) if c in gold]
    if len(compounds) < 2:
        raise ValidationError(
            f"only {len(compounds)} compounds shared between table and dataset; need >= 2"
        )
    out: dict[str, EvalResult] = {}
    for measure in MEASURES:
        pred = [getattr(table.rows[c], f"{measure}_pred") for c in compounds]
        human = [getattr(gold[c], f"human_{measure}") for c in compounds]
        out[measure] = EvalResult(mae(pred, human), spearman(pred, human), len(compounds))
    return out


def _argbest(values: dict[int, float], larger_is_better: bool) -> int:
    best_layer, best = None, None
    for layer in sorted(values):
        v = values[layer]
        if best is None or (v > best if larger_is_better else v < best):
            best_layer, best = layer, v
    assert best_layer is not None
    return best_layer


def sweep(
    ds: Dataset,
    store: EmbeddingStore,
    setting: RepresentationSetting,
    layers: Sequence[int] | None = None,
    clamp_cosine: bool = False,
    include_layer0: bool = False,
) -> SweepReport:
    """Evaluate every layer and select the best by rho and by MAE.

    Layer 0 (the input embedding, when stored) is excluded unless asked for.
    """
    if layers is None:
        layers = [k for k in store.layer_indices() if k >= 1 or include_layer0]
    if not layers:
        raise ValidationError("no layers to sweep")
    per_layer: dict[int, dict[str, EvalResult]] = {}
    for layer in sorted(layers):
        table = compute_table(ds, store, setting, layer, clamp_cosine)
        per_layer[layer] = evaluate(table, ds)
    return SweepReport(
        per_layer=per_layer,
        best_lmd_layer=_argbest({k: v["lmd"].spearman_rho for k, v in per_layer.items()}, True),
        best_st_layer=_argbest({k: v["st"].spearman_rho for k, v in per_layer.items()}, True),
        best_lmd_mae_layer=_argbest({k: v["lmd"].mae for k, v in per_layer.items()}, False),
        best_st_mae_layer=_argbest({k: v["st"].mae for k, v in per_layer.items()}, False),
    )


def ols_fit(
    y: Sequence[float],
    X: np.ndarray,
    names: Sequence[str],
    add_intercept: bool = True,
) -> RegressionResult:
    """Ordinary least squares with standard errors and two-sided t-test p-values.

    Estimates come from an orthogonal (SVD) decomposition; standard errors
    from the unbiased residual variance; p-values from the exact
    t-distribution with n-p-1 degrees of freedom.
    """
    y = np.asarray(y, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ValidationError(f"design shape {X.shape} incompatible with {y.shape[0]} responses")
    if X.shape[1] != len(names):
        raise ValidationError(f"{X.shape[1]} columns but {len(names)} names")
    n, p = X.shape
    k = p + (1 if add_intercept else 0)
    if n <= k + (0 if add_intercept else 1):
        raise ValidationError(f"n={n} too small for {p} predictors")
    design = np.column_stack([np.ones(n), X]) if add_intercept else X

    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < design.shape[1]:
        raise ValidationError(f"design matrix is rank deficient (rank {rank} < {design.shape[1]})")
    resid = y - design @ beta
    dof = n - design.shape[1]
    s2 = float(resid @ resid) / dof
    cov = s2 * np.linalg.inv(design.T @ design)
    se = np.sqrt(np.diag(cov))
    t_stats = beta / se
    p_values = 2.0 * sps.t.sf(np.abs(t_stats), dof)

    tss = float(np.sum((y - y.mean()) ** 2)) if add_intercept else float(y @ y)
    r_squared = 1.0 - float(resid @ resid) / tss if tss > 0 else float("nan")

    records = [
        CoefficientStats(float(beta[i]), float(se[i]), float(t_stats[i]), float(p_values[i]))
        for i in range(design.shape[1])
    ]
    if add_intercept:
        intercept, coef_records = records[0], records[1:]
    else:
        intercept, coef_records = None, records
    return RegressionResult(dict(zip(names, coef_records)), intercept, n, r_squared)


REGRESSION_PREDICTORS = (
    "token_count",
    "n_instances",
    "compound_concreteness",
    "modifier_concreteness",
    "head_concreteness",
)


def regression_analysis(
    ds: Dataset,
    table: MeasureTable,
    target: str = "lmd",
    predictors: Sequence[str] = REGRESSION_PREDICTORS,
) -> RegressionResult:
    """Regress the predicted measure on per-compound covariates.

    Rows lacking any predictor are excluded and counted; the fit runs on
    the remainder with an intercept.
    """
    if target not in MEASURES:
        raise ValidationError(f"unknown target {target!r}")
    rows_y: list[float] = []
    rows_x: list[list[float]] = []
    n_excluded = 0
    for t in ds.triplets:
        row = table.rows.get(t.compound)
        if row is None:
            continue
        comp = ds.covariate(t.compound)
        values = {
            "token_count": comp.n_tokens,
            "n_instances": comp.n_instances,
            "compound_concreteness": comp.concreteness,
            "modifier_concreteness": ds.covariate(t.left).concreteness,
            "head_concreteness": ds.covariate(t.right).concreteness,
        }
        picked = [values[name] for name in predictors]
        if any(v is None for v in picked):
            n_excluded += 1
            continue
        rows_y.append(getattr(row, f"{target}_pred"))
        rows_x.append([float(v) for v in picked])  # type: ignore[arg-type]
    if not rows_y:
        raise ValidationError("no compound has the full predictor set")
    result = ols_fit(rows_y, np.asarray(rows_x), predictors)
    log.info("regression on %s: n=%d, excluded=%d", target, result.n, n_excluded)
    return RegressionResult(result.coefficients, result.intercept, result.n, result.r_squared, n_excluded)


# --- serialization ---------------------------------------------------------

SWEEP_COLUMNS = ("layer", "measure", "mae", "rho", "n")


def write_sweep_csv(report: SweepReport, path: str | Path, manifest_checksum: str | None = None) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        if manifest_checksum:
            fh.write(f"# manifest {manifest_checksum}\n")
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for layer in sorted(report.per_layer):
            for measure in MEASURES:
                r = report.per_layer[layer][measure]
                writer.writerow([layer, measure, repr(r.mae), repr(r.spearman_rho), r.n])


def read_sweep_csv(path: str | Path) -> SweepReport:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"sweep file not found: {path}")
    with path.open(encoding="utf-8", newline="") as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    per_layer: dict[int, dict[str, EvalResult]] = {}
    for rec in csv.DictReader(lines):
        try:
            layer = int(rec["layer"])
            per_layer.setdefault(layer, {})[rec["measure"]] = EvalResult(
                float(rec["mae"]), float(rec["rho"]), int(rec["n"])
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ValidationError(f"{path.name}: malformed sweep row {rec!r}: {exc}") from None
    if not per_layer or any(set(v) != set(MEASURES) for v in per_layer.values()):
        raise ValidationError(f"{path.name}: incomplete sweep table")
    return SweepReport(
        per_layer=per_layer,
        best_lmd_layer=_argbest({k: v["lmd"].spearman_rho for k, v in per_layer.items()}, True),
        best_st_layer=_argbest({k: v["st"].spearman_rho for k, v in per_layer.items()}, True),
        best_lmd_mae_layer=_argbest({k: v["lmd"].mae for k, v in per_layer.items()}, False),
        best_st_mae_layer=_argbest({k: v["st"].mae for k, v in per_layer.items()}, False),
    )


REGRESSION_COLUMNS = ("predictor", "estimate", "std_error", "t", "p")


def write_regression_csv(result: RegressionResult, path: str | Path, manifest_checksum: str | None = None) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        if manifest_checksum:
            fh.write(f"# manifest {manifest_checksum}\n")
        writer = csv.writer(fh)
        writer.writerow(REGRESSION_COLUMNS)
        rows = []
        if result.intercept is not None:
            rows.append(("(intercept)", result.intercept))
        rows.extend(result.coefficients.items())
        for name, c in rows:
            writer.writerow([name, repr(c.estimate), repr(c.std_error), repr(c.t_stat), repr(c.p_value)])
