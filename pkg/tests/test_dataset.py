from __future__ import annotations

from pathlib import Path

import pytest

from compoundsem.dataset import (
    ColumnMap,
    Triplet,
    join_covariates,
    join_instance_counts,
    join_token_counts,
    load_dataset,
    load_exclusions,
)
from compoundsem.errors import ValidationError

from conftest import DATA


def write(tmp_path: Path, text: str, name: str = "ds.csv") -> Path:
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


HEADER = "compound,left,right,lmd,st\n"


def test_fixture_loads_in_order():
    ds = load_dataset(DATA / "triplets.csv")
    assert len(ds) == 10
    assert ds.triplets[0].compound == "handgun"
    assert ds.triplets[-1].compound == "snowball"


def test_single_row_parses_to_triplet(tmp_path):
    path = write(tmp_path, HEADER + "handgun,hand,gun,8.13,6.29\n")
    ds = load_dataset(path)
    assert ds.triplets == (Triplet("handgun", "hand", "gun", 8.13, 6.29),)


def test_sidecar_exclusion_removes_pseudo_compound(tmp_path):
    data = write(tmp_path, HEADER + "mushroom,mush,room,5.0,4.0\nhandgun,hand,gun,8.13,6.29\n")
    sidecar = write(tmp_path, "mushroom,pseudo-compound\n", "exclude.csv")
    ds = load_dataset(data, exclusions_path=sidecar)
    assert [t.compound for t in ds.triplets] == ["handgun"]
    assert ("mushroom", "pseudo-compound") in ds.exclusions


def test_exclude_column(tmp_path):
    path = write(tmp_path, "compound,left,right,lmd,st,exclude\n"
                           "mushroom,mush,room,5.0,4.0,pseudo-compound\n"
                           "handgun,hand,gun,8.13,6.29,\n")
    ds = load_dataset(path)
    assert [t.compound for t in ds.triplets] == ["handgun"]
    assert ds.exclusions == (("mushroom", "pseudo-compound"),)


def test_empty_file_is_an_error(tmp_path):
    path = write(tmp_path, HEADER)
    with pytest.raises(ValidationError, match="no rows"):
        load_dataset(path)


def test_missing_file(tmp_path):
    with pytest.raises(ValidationError, match="not found"):
        load_dataset(tmp_path / "absent.csv")


def test_missing_column(tmp_path):
    path = write(tmp_path, "compound,left,lmd,st\nhandgun,hand,8.13,6.29\n")
    with pytest.raises(ValidationError, match="right"):
        load_dataset(path)


def test_malformed_value_reports_row(tmp_path):
    path = write(tmp_path, HEADER + "handgun,hand,gun,8.13,6.29\nwartime,war,time,oops,6.31\n")
    with pytest.raises(ValidationError, match="row 3"):
        load_dataset(path)


def test_range_violations(tmp_path):
    with pytest.raises(ValidationError, match="outside"):
        load_dataset(write(tmp_path, HEADER + "handgun,hand,gun,11.0,6.29\n"))
    with pytest.raises(ValidationError, match="outside"):
        load_dataset(write(tmp_path, HEADER + "handgun,hand,gun,8.13,0.5\n"))


def test_duplicate_compound(tmp_path):
    path = write(tmp_path, HEADER + "handgun,hand,gun,8.13,6.29\nhandgun,hand,gun,8.13,6.29\n")
    with pytest.raises(ValidationError, match="duplicate"):
        load_dataset(path)


def test_concatenation_mismatch_needs_flag(tmp_path):
    bad = write(tmp_path, HEADER + "policeman,police,men,3.07,6.13\n")
    with pytest.raises(ValidationError, match="non_concatenative"):
        load_dataset(bad)
    flagged = write(tmp_path, "compound,left,right,lmd,st,non_concatenative\n"
                              "policeman,police,men,3.07,6.13,1\n", "ok.csv")
    ds = load_dataset(flagged)
    assert ds.triplets[0].non_concatenative


def test_words_are_lowercased(tmp_path):
    path = write(tmp_path, HEADER + "HandGun,Hand,GUN,8.13,6.29\n")
    t = load_dataset(path).triplets[0]
    assert (t.compound, t.left, t.right) == ("handgun", "hand", "gun")


def test_whitespace_in_word_rejected(tmp_path):
    path = write(tmp_path, HEADER + "hand gun,hand,gun,8.13,6.29\n")
    with pytest.raises(ValidationError, match="whitespace"):
        load_dataset(path)


def test_unmapped_columns_ignored(tmp_path):
    path = write(tmp_path, "compound,left,right,lmd,st,aoa,imageability\n"
                           "handgun,hand,gun,8.13,6.29,4.2,5.1\n")
    assert len(load_dataset(path)) == 1


def test_custom_column_map(tmp_path):
    path = write(tmp_path, "cmp,l,r,dominance,transparency\nhandgun,hand,gun,8.13,6.29\n")
    schema = ColumnMap(compound="cmp", left="l", right="r", lmd="dominance", st="transparency")
    assert load_dataset(path, schema=schema).triplets[0].compound == "handgun"


def test_loading_is_deterministic_and_idempotent(tmp_path):
    sidecar = write(tmp_path, "mushroom,pseudo-compound\n", "exclude.csv")
    a = load_dataset(DATA / "triplets.csv", exclusions_path=sidecar)
    b = load_dataset(DATA / "triplets.csv", exclusions_path=sidecar)
    assert a == b


def test_concatenation_invariant_over_fixture():
    for t in load_dataset(DATA / "triplets.csv").triplets:
        assert t.left + t.right == t.compound or t.non_concatenative


def test_load_exclusions_reports_bad_lines(tmp_path):
    path = write(tmp_path, ",no word here\n", "exclude.csv")
    with pytest.raises(ValidationError, match="line 1"):
        load_exclusions(path)


# --- covariates -------------------------------------------------------------


def test_join_covariates_counts_missing(caplog):
    ds = load_dataset(DATA / "triplets.csv")
    with caplog.at_level("INFO"):
        ds = join_covariates(ds, DATA / "concreteness.txt")
    # three compounds are deliberately absent from the fixture norms
    for compound in ("muskrat", "primrose", "cheapskate"):
        assert ds.covariate(compound).concreteness is None
    assert ds.covariate("handgun").concreteness is not None
    assert ds.covariate("hand").concreteness is not None
    assert "3 compounds missing" in caplog.text


def test_join_covariates_full_coverage(tmp_path):
    ds = load_dataset(write(tmp_path, HEADER + "handgun,hand,gun,8.13,6.29\n"))
    norms = write(tmp_path, "handgun 4.0\nhand 4.5\ngun 4.8\n", "conc.txt")
    ds = join_covariates(ds, norms)
    assert all(ds.covariate(w).concreteness is not None for w in ds.words())


def test_duplicate_norm_with_equal_value_ok(tmp_path):
    ds = load_dataset(write(tmp_path, HEADER + "handgun,hand,gun,8.13,6.29\n"))
    norms = write(tmp_path, "hand 4.5\nhand 4.5\ngun 4.0\n", "conc.txt")
    assert join_covariates(ds, norms).covariate("hand").concreteness == 4.5


def test_duplicate_norm_with_conflicting_value_fails(tmp_path):
    ds = load_dataset(write(tmp_path, HEADER + "handgun,hand,gun,8.13,6.29\n"))
    norms = write(tmp_path, "hand 4.5\nhand 4.6\n", "conc.txt")
    with pytest.raises(ValidationError, match="conflicting"):
        join_covariates(ds, norms)


def test_non_numeric_concreteness(tmp_path):
    ds = load_dataset(write(tmp_path, HEADER + "handgun,hand,gun,8.13,6.29\n"))
    norms = write(tmp_path, "hand high\n", "conc.txt")
    with pytest.raises(ValidationError, match="non-numeric"):
        join_covariates(ds, norms)


def test_join_instance_and_token_counts(tmp_path):
    ds = load_dataset(write(tmp_path, HEADER + "handgun,hand,gun,8.13,6.29\n"))
    samples = write(tmp_path, '{"word": "handgun", "sentences": ["a", "b"], "n_matched_total": 9}\n',
                    "samples.jsonl")
    counts = write(tmp_path, "word,n_tokens\nhandgun,2\n", "tok.csv")
    ds = join_instance_counts(ds, samples)
    ds = join_token_counts(ds, counts)
    assert ds.covariate("handgun").n_instances == 2
    assert ds.covariate("handgun").n_tokens == 2
