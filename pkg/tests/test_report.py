from __future__ import annotations

import numpy as np
import pytest

from compoundsem.dataset import Dataset, Triplet, load_dataset
from compoundsem.embeddings import (
    EmbeddingStore,
    LayeredEmbedding,
    RepresentationSetting,
    SettingKind,
    load_dump,
)
from compoundsem.errors import ValidationError
from compoundsem.measures import MeasureRow, MeasureTable, WeightGrid, compute_table
from compoundsem.report import (
    RunManifest,
    render_summary,
    summary_table,
    trajectory,
    weighted_st_grid,
    write_grid_csv,
    write_summary_csv,
    write_trajectory_csv,
)
from compoundsem.stats import EvalResult, SweepReport, sweep

from conftest import DATA

CONTEXT = RepresentationSetting(SettingKind.IN_CONTEXT)


def report_with_best(rho: float, layer: int, n_layers: int = 24) -> SweepReport:
    per_layer = {}
    for k in range(1, n_layers + 1):
        r = rho if k == layer else rho - 0.2
        per_layer[k] = {
            "lmd": EvalResult(1.0 - (0.02 if k == layer else 0.0), r, 628),
            "st": EvalResult(0.9, r - 0.1, 628),
        }
    return SweepReport(per_layer, layer, layer, layer, layer)


def test_summary_row_formats_best_layer():
    rows = summary_table([("bert-large C", report_with_best(0.586, 21))])
    text = render_summary(rows)
    assert "0.586 (21)" in text
    assert "bert-large C" in text


def test_summary_single_layer_annotation():
    per_layer = {1: {"lmd": EvalResult(1.0, 0.5, 10), "st": EvalResult(1.0, 0.3, 10)}}
    report = SweepReport(per_layer, 1, 1, 1, 1)
    text = render_summary(summary_table([("glove", report)]))
    assert "(1)" in text


def test_summary_identical_reports_give_identical_rows():
    report = report_with_best(0.4, 3)
    rows = summary_table([("a", report), ("b", report)])
    a_rows = [r for r in rows if r.label == "a"]
    b_rows = [r for r in rows if r.label == "b"]
    for ra, rb in zip(a_rows, b_rows):
        assert (ra.measure, ra.best_mae, ra.best_rho) == (rb.measure, rb.best_mae, rb.best_rho)


def test_summary_requires_reports():
    with pytest.raises(ValidationError):
        summary_table([])


def test_summary_csv_written_with_manifest(tmp_path):
    rows = summary_table([("x", report_with_best(0.5, 2))])
    path = tmp_path / "summary.csv"
    write_summary_csv(rows, path, manifest_checksum="cafe01")
    content = path.read_text()
    assert content.startswith("# manifest cafe01\n")
    assert "best_rho" in content.splitlines()[1]


# --- trajectories -----------------------------------------------------------------


def tables_for(values: dict[int, float], compound: str = "handgun") -> dict[int, MeasureTable]:
    return {
        layer: MeasureTable(CONTEXT, layer, {compound: MeasureRow(0.5, 0.5, v, v)})
        for layer, v in values.items()
    }


def test_trajectory_carries_gold_line(tmp_path):
    tables = tables_for({1: 7.0, 2: 7.5, 3: 8.0})
    series = trajectory("handgun", tables, "lmd", gold=8.13)
    assert series.gold == 8.13
    assert series.points == ((1, 7.0), (2, 7.5), (3, 8.0))
    path = tmp_path / "traj.csv"
    write_trajectory_csv(series, path, manifest_checksum="ab")
    assert "8.13" in path.read_text()


def test_trajectory_flat_series():
    series = trajectory("handgun", tables_for({1: 5.0, 2: 5.0, 3: 5.0}), "st", gold=4.0)
    assert {v for _, v in series.points} == {5.0}


def test_trajectory_monotone_fixture():
    series = trajectory("handgun", tables_for({k: 1.0 * k for k in range(1, 6)}), "lmd", gold=4.0)
    values = [v for _, v in series.points]
    assert values == sorted(values) and len(set(values)) == len(values)


def test_trajectory_missing_layer_is_fatal():
    tables = tables_for({1: 5.0})
    tables[2] = MeasureTable(CONTEXT, 2, {"other": MeasureRow(0.5, 0.5, 1.0, 1.0)})
    with pytest.raises(ValidationError, match="missing from layer 2"):
        trajectory("handgun", tables, "lmd", gold=4.0)


# --- weighted grid ----------------------------------------------------------------


def test_grid_alpha_half_equals_plain_st_sweep(fixture_golden):
    ds = load_dataset(DATA / "triplets.csv")
    store = load_dump(DATA / "dump_fixture")
    grid = weighted_st_grid(ds, store, CONTEXT)
    report = sweep(ds, store, CONTEXT)
    for layer in (1, 2, 3):
        assert grid[(0.5, layer)] == report.per_layer[layer]["st"]


def test_grid_has_eleven_by_n_layers_cells():
    ds = load_dataset(DATA / "triplets.csv")
    store = load_dump(DATA / "dump_fixture")
    grid = weighted_st_grid(ds, store, CONTEXT)
    assert len(grid) == 11 * 3


def test_grid_matches_golden(fixture_golden):
    ds = load_dataset(DATA / "triplets.csv")
    store = load_dump(DATA / "dump_fixture")
    grid = weighted_st_grid(ds, store, CONTEXT)
    for (alpha, layer), result in grid.items():
        want = fixture_golden["weighted"][repr(alpha)][str(layer)]
        assert result.mae == want["mae"]
        assert result.spearman_rho == want["rho"]


def test_grid_head_dominant_fixture_peaks_at_alpha_zero():
    """Compounds represented by (nearly) their head, gold tracking R: the
    head-only weighting must win the grid."""
    from compoundsem.measures import cosine

    rng = np.random.default_rng(8)
    words = []
    for i in range(12):
        r_vec = rng.standard_normal(6)
        l_vec = rng.standard_normal(6)
        c_vec = r_vec + 0.05 * rng.standard_normal(6)
        words.append((f"xx{i:02d}", l_vec, f"yy{i:02d}", r_vec, c_vec))
    r_cosines = [cosine(r_vec, c_vec) for _, _, _, r_vec, c_vec in words]
    order = sorted(range(12), key=lambda i: r_cosines[i])
    gold_st = {i: 1.0 + 6.0 * (order.index(i) + 1) / 13 for i in range(12)}

    triplets, embeddings = [], []
    as_layers = lambda v: np.tile(v, (2, 1)).astype(np.float32)
    for i, (l, l_vec, r, r_vec, c_vec) in enumerate(words):
        triplets.append(Triplet(l + r, l, r, 5.0, gold_st[i]))
        embeddings.extend([
            LayeredEmbedding(l + r, CONTEXT, as_layers(c_vec)),
            LayeredEmbedding(l, CONTEXT, as_layers(l_vec)),
            LayeredEmbedding(r, CONTEXT, as_layers(r_vec)),
        ])
    grid = weighted_st_grid(Dataset(tuple(triplets)), EmbeddingStore(embeddings), CONTEXT)
    by_alpha = {alpha: grid[(alpha, 1)].spearman_rho for alpha in WeightGrid().weights}
    assert by_alpha[0.0] == max(by_alpha.values())
    assert by_alpha[0.0] > by_alpha[0.5]
    assert by_alpha[0.0] > by_alpha[1.0]


def test_grid_csv(tmp_path):
    ds = load_dataset(DATA / "triplets.csv")
    store = load_dump(DATA / "dump_fixture")
    grid = weighted_st_grid(ds, store, CONTEXT, layers=[2])
    path = tmp_path / "grid.csv"
    write_grid_csv(grid, path, manifest_checksum="cc")
    lines = path.read_text().splitlines()
    assert lines[0] == "# manifest cc"
    assert len(lines) == 2 + 11


# --- manifests -----------------------------------------------------------------


def test_manifest_checksum_ignores_timestamp():
    a = RunManifest("d", "s", "context", {"clamp_cosine": False}, timestamp="2026-01-01T00:00:00")
    b = RunManifest("d", "s", "context", {"clamp_cosine": False}, timestamp="2026-02-02T02:02:02")
    assert a.checksum() == b.checksum()
    c = RunManifest("d", "s", "context", {"clamp_cosine": True})
    assert a.checksum() != c.checksum()


def test_artifacts_are_byte_deterministic(tmp_path):
    ds = load_dataset(DATA / "triplets.csv")
    store = load_dump(DATA / "dump_fixture")
    manifest = RunManifest.build(DATA / "triplets.csv", store.provenance, "context", {})
    outputs = []
    for run in ("one", "two"):
        out = tmp_path / run
        out.mkdir()
        checksum = manifest.checksum()
        table = compute_table(ds, store, CONTEXT, 2)
        from compoundsem.measures import write_table_csv

        write_table_csv(table, out / "t.csv", checksum)
        outputs.append((out / "t.csv").read_bytes())
    assert outputs[0] == outputs[1]
