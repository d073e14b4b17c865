from __future__ import annotations

import csv
import json
import sys
from pathlib import Path

import pytest

from compoundsem.cli import main

from conftest import DATA, SCRIPTS

TOY_BACKEND = f"{sys.executable} {SCRIPTS / 'toy_pipe_backend.py'} --dim 6 --layers 3"


def run(*argv: str) -> int:
    return main(list(argv))


def test_usage_error_exits_1(capsys):
    assert run("score", "--setting", "bogus") == 1
    assert "usage error" in capsys.readouterr().err


def test_missing_dataset_exits_2(tmp_path, capsys):
    code = run("score", "--dataset", str(tmp_path / "none.csv"),
               "--store", str(DATA / "dump_fixture"), "--out-dir", str(tmp_path))
    assert code == 2


def test_backend_failure_exits_3(tmp_path, capsys):
    words = tmp_path / "words.txt"
    words.write_text("zzzcrash\n", encoding="utf-8")
    code = run("embed", "--words", str(words), "--setting", "nc-nospec",
               "--backend-cmd", TOY_BACKEND, "--out-dir", str(tmp_path))
    assert code == 3
    assert "backend failure" in capsys.readouterr().err


def test_score_writes_tables_and_manifest(tmp_path):
    out = tmp_path / "out"
    code = run("score", "--dataset", str(DATA / "triplets.csv"),
               "--store", str(DATA / "dump_fixture"), "--layers", "1-3",
               "--out-dir", str(out))
    assert code == 0
    tables = sorted(p.name for p in out.glob("measures-*.csv"))
    assert tables == [f"measures-context-layer{k:02d}.csv" for k in (1, 2, 3)]
    manifest = json.loads((out / "manifest.json").read_text())
    first_table = (out / tables[0]).read_text().splitlines()[0]
    assert manifest["checksum"] in first_table


def test_sweep_command_prints_best_layers(tmp_path, capsys):
    out = tmp_path / "out"
    code = run("sweep", "--dataset", str(DATA / "triplets.csv"),
               "--store", str(DATA / "dump_fixture"), "--out-dir", str(out))
    assert code == 0
    captured = capsys.readouterr().out
    assert "best rho 1 (2)" in captured  # the planted layer
    assert (out / "sweep-context.csv").exists()


def test_eval_command(tmp_path, capsys):
    out = tmp_path / "out"
    run("score", "--dataset", str(DATA / "triplets.csv"),
        "--store", str(DATA / "dump_fixture"), "--layers", "2", "--out-dir", str(out))
    code = run("eval", "--dataset", str(DATA / "triplets.csv"),
               "--table", str(out / "measures-context-layer02.csv"))
    assert code == 0
    assert "rho=1 " in capsys.readouterr().out


def test_score_static_store(tmp_path, capsys):
    out = tmp_path / "out"
    code = run("score", "--dataset", str(DATA / "triplets6.csv"),
               "--store", str(DATA / "static_partial.txt"), "--out-dir", str(out))
    assert code == 0
    captured = capsys.readouterr().out
    assert "effective_n=4" in captured
    assert "muskrat" in captured and "milestone" in captured


def test_sample_command(tmp_path, capsys):
    out = tmp_path / "out"
    words = tmp_path / "words.txt"
    words.write_text("handgun\nwartime\nsun\n", encoding="utf-8")
    code = run("sample", "--corpus", str(DATA / "corpus_fixture.txt"),
               "--words", str(words), "--cap", "50", "--shards", "3",
               "--out-dir", str(out))
    assert code == 0
    samples = {json.loads(line)["word"]: json.loads(line)
               for line in (out / "samples.jsonl").read_text().splitlines()}
    assert len(samples["handgun"]["sentences"]) == 50
    assert samples["handgun"]["n_matched_total"] == 260
    assert len(samples["wartime"]["sentences"]) == 3


def test_analyze_reversed_emit_words(tmp_path):
    out_words = tmp_path / "reversed.txt"
    code = run("analyze", "reversed", "--dataset", str(DATA / "triplets.csv"),
               "--emit-words", str(out_words))
    assert code == 0
    words = out_words.read_text().split()
    assert "timewar" in words and "guardbody" in words


def test_analyze_reversed(tmp_path, fixture_golden):
    out = tmp_path / "out"
    code = run("analyze", "reversed", "--dataset", str(DATA / "triplets.csv"),
               "--store", str(DATA / "dump_fixture"), "--setting", "context",
               "--out-dir", str(out))
    assert code == 0
    with (out / "reversed.csv").open() as fh:
        rows = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
    by_key = {(r["layer"], r["measure"]): r for r in rows}
    want = fixture_golden["reversed"]["2"]["lmd"]
    assert float(by_key[("2", "lmd")]["rho"]) == want["rho_original"]
    assert float(by_key[("2", "lmd")]["rho_reversed"]) == want["rho_reversed"]


def test_analyze_weighted_st(tmp_path, fixture_golden):
    out = tmp_path / "out"
    code = run("analyze", "weighted-st", "--dataset", str(DATA / "triplets.csv"),
               "--store", str(DATA / "dump_fixture"), "--out-dir", str(out))
    assert code == 0
    with (out / "weighted-st.csv").open() as fh:
        rows = list(csv.DictReader(ln for ln in fh if not ln.startswith("#")))
    assert len(rows) == 33
    cell = next(r for r in rows if r["alpha"] == "0.5" and r["layer"] == "2")
    assert float(cell["rho"]) == fixture_golden["weighted"]["0.5"]["2"]["rho"]


def test_analyze_regression(tmp_path, capsys):
    out = tmp_path / "out"
    run("score", "--dataset", str(DATA / "triplets.csv"),
        "--store", str(DATA / "dump_fixture"), "--layers", "2", "--out-dir", str(out))
    token_counts = tmp_path / "tokens.csv"
    import compoundsem.dataset as dsmod
    ds = dsmod.load_dataset(DATA / "triplets.csv")
    token_counts.write_text(
        "word,n_tokens\n" + "".join(f"{t.compound},{2 + len(t.compound) % 3}\n" for t in ds.triplets),
        encoding="utf-8",
    )
    instances = tmp_path / "samples.jsonl"
    instances.write_text(
        "".join(json.dumps({"word": t.compound,
                            "sentences": ["x"] * (3 + i), "n_matched_total": 9}) + "\n"
                for i, t in enumerate(ds.triplets)),
        encoding="utf-8",
    )
    code = run("analyze", "regression", "--dataset", str(DATA / "triplets.csv"),
               "--table", str(out / "measures-context-layer02.csv"),
               "--concreteness", str(DATA / "concreteness.txt"),
               "--token-counts", str(token_counts),
               "--instances", str(instances),
               "--target", "lmd", "--out-dir", str(out))
    assert code == 0
    captured = capsys.readouterr().out
    # three compounds lack concreteness in the fixture norms
    assert "n=7 excluded=3" in captured
    assert (out / "regression-lmd.csv").exists()


def test_report_command(tmp_path, capsys):
    out = tmp_path / "out"
    run("sweep", "--dataset", str(DATA / "triplets.csv"),
        "--store", str(DATA / "dump_fixture"), "--out-dir", str(out))
    run("sweep", "--dataset", str(DATA / "triplets6.csv"),
        "--store", str(DATA / "static_partial.txt"), "--out-dir", str(out / "static"))
    capsys.readouterr()
    code = run("report", "--sweep-csv", f"fixture={out / 'sweep-context.csv'}",
               "--sweep-csv", f"static-baseline={out / 'static' / 'sweep-static.csv'}",
               "--out-dir", str(out))
    assert code == 0
    text = capsys.readouterr().out
    assert "fixture" in text and "(2)" in text
    assert "static-baseline" in text and "(1)" in text
    assert (out / "summary.csv").exists()
    assert (out / "summary.txt").exists()


def test_report_trajectory(tmp_path):
    out = tmp_path / "out"
    run("score", "--dataset", str(DATA / "triplets.csv"),
        "--store", str(DATA / "dump_fixture"), "--out-dir", str(out))
    code = run("report", "--dataset", str(DATA / "triplets.csv"),
               "--tables-dir", str(out), "--trajectory", "handgun:lmd",
               "--out-dir", str(out))
    assert code == 0
    content = (out / "trajectory-handgun-lmd.csv").read_text()
    assert content.count("handgun,lmd") == 3  # one row per layer


@pytest.mark.slow
def test_embed_via_pipe_backend_end_to_end(tmp_path, capsys):
    out = tmp_path / "embed"
    words = tmp_path / "words.txt"
    words.write_text("snowboard\nsnow\nboard\nzzzmisser\n", encoding="utf-8")
    code = run("embed", "--words", str(words), "--setting", "nc-nospec",
               "--backend-cmd", TOY_BACKEND, "--out-dir", str(out))
    assert code == 0
    from compoundsem.embeddings import load_dump

    store = load_dump(out / "dump")
    assert store.words() == {"snowboard", "snow", "board", "zzzmisser"} - {"zzzmisser"}
    assert (store.dim, store.n_layers) == (6, 3)
    counts = dict(
        line.split(",") for line in
        (out / "token_counts.csv").read_text().splitlines()[1:]
    )
    assert counts["snowboard"] == "3"
    misses = (out / "misses.csv").read_text()
    assert "zzzmisser" in misses


@pytest.mark.slow
def test_embed_context_and_templated_paths(tmp_path):
    corpus = tmp_path / "corpus.txt"
    corpus.write_text(
        "the snowboard leans on the wall.\n"
        "a snowboard needs wax.\n"
        "snow fell all night.\n"
        "the board creaked.\n",
        encoding="utf-8",
    )
    sampled = tmp_path / "s"
    run("sample", "--corpus", str(corpus), "--words", str(_write(tmp_path, "w.txt", "snowboard\nsnow\nboard\n")),
        "--out-dir", str(sampled))
    out_ctx = tmp_path / "ctx"
    code = run("embed", "--words", str(tmp_path / "w.txt"), "--setting", "context",
               "--sentences", str(sampled / "samples.jsonl"),
               "--backend-cmd", TOY_BACKEND, "--out-dir", str(out_ctx))
    assert code == 0
    from compoundsem.embeddings import load_dump

    store = load_dump(out_ctx / "dump")
    emb = store.entries[("snowboard", next(iter(store.settings())))]
    assert emb.n_instances == 2

    out_tpl = tmp_path / "tpl"
    code = run("embed", "--words", str(tmp_path / "w.txt"), "--setting", "templated",
               "--backend-cmd", TOY_BACKEND, "--out-dir", str(out_tpl),
               "--dump-format", "packed")
    assert code == 0
    tpl_store = load_dump(out_tpl / "dump")
    assert next(iter(tpl_store.settings())).template == "This is a <word>"

    code = run("analyze", "templated", "--dataset", str(DATA / "triplets.csv"),
               "--store", str(out_tpl / "dump"), "--out-dir", str(tmp_path / "ta"))
    assert code == 2  # fixture words absent from this tiny store -> data error


def _write(tmp_path: Path, name: str, content: str) -> Path:
    path = tmp_path / name
    path.write_text(content, encoding="utf-8")
    return path
