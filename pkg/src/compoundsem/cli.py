"""Command-line interface.

Subcommands: sample, embed, score, sweep, eval, analyze
(reversed | weighted-st | regression | templated), report.

Exit codes: 0 success, 1 usage error, 2 data/validation error,
3 backend failure. No environment variables are consulted; all
configuration is explicit.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__
from .backends import OnnxBackend, PipeBackend
from .corpus import SamplePlan, read_samples, sample_sentences, write_samples
from .dataset import (
    Dataset,
    join_covariates,
    join_instance_counts,
    join_token_counts,
    load_dataset,
)
from .embeddings import (
    EmbeddingStore,
    RepresentationSetting,
    SettingKind,
    StaticStore,
    embed_via_backend,
    load_dump,
    load_static,
    write_dump,
)
from .errors import BackendError, ValidationError
from .measures import (
    MeasureTable,
    WeightGrid,
    compute_table,
    read_table_csv,
    reverse_compounds,
    write_table_csv,
)
from .report import (
    RunManifest,
    render_summary,
    summary_table,
    weighted_st_grid,
    write_grid_csv,
    write_summary_csv,
    write_trajectory_csv,
    trajectory,
)
from .stats import (
    evaluate,
    read_sweep_csv,
    regression_analysis,
    sweep,
    write_regression_csv,
    write_sweep_csv,
)

SETTING_CHOICES = ("nc-nospec", "nc-withcls", "nc-all", "context", "templated")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(message)


def _parse_layers(spec: str | None) -> list[int] | None:
    if spec is None or spec == "all":
        return None
    layers: list[int] = []
    for part in spec.split(","):
        part = part.strip()
        if "-" in part.lstrip("-"):
            lo_s, _, hi_s = part.partition("-")
            try:
                lo, hi = int(lo_s), int(hi_s)
            except ValueError:
                raise UsageError(f"bad layer range {part!r}") from None
            layers.extend(range(lo, hi + 1))
        else:
            try:
                layers.append(int(part))
            except ValueError:
                raise UsageError(f"bad layer {part!r}") from None
    if not layers:
        raise UsageError(f"empty layer spec {spec!r}")
    return layers


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dataset", type=Path, help="triplet CSV with human norms")
    parser.add_argument("--exclusions", type=Path, help="exclusion sidecar (word,reason lines)")
    parser.add_argument("--store", type=Path,
                        help="embedding store: dump directory or static-vector text file")
    parser.add_argument("--setting", choices=SETTING_CHOICES, help="representation setting")
    parser.add_argument("--template", help="template sentence with one <word> slot")
    parser.add_argument("--layers", help="layer spec: all, K, LO-HI, or comma list")
    parser.add_argument("--clamp-cosine", action="store_true",
                        help="clamp constituent cosines to [0,1] before the measures")
    parser.add_argument("--include-layer0", action="store_true",
                        help="include the input-embedding layer in sweeps when stored")
    parser.add_argument("--out-dir", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized modes")


def build_parser() -> _Parser:
    parser = _Parser(prog="compoundsem", description=__doc__)
    parser.add_argument("--version", action="version", version=f"compoundsem {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample sentence contexts for dataset words")
    _common_flags(p)
    p.add_argument("--corpus", type=Path, required=True, help="UTF-8 corpus, one sentence per line")
    p.add_argument("--words", type=Path, help="word list file (default: all dataset words)")
    p.add_argument("--cap", type=int, default=100, help="max unique sentences per word")
    p.add_argument("--shards", type=int, default=1, help="scan the corpus in N byte-range shards")

    p = sub.add_parser("embed", help="embed words through a backend into a dump")
    _common_flags(p)
    p.add_argument("--words", type=Path, help="word list file (default: all dataset words)")
    p.add_argument("--sentences", type=Path, help="sampled-sentences JSONL (context setting)")
    p.add_argument("--backend-cmd", help="command for the NDJSON pipe backend")
    p.add_argument("--onnx", type=Path, help="interchange-format model file (in-process backend)")
    p.add_argument("--tokenizer", type=Path, help="tokenizer definition file (in-process backend)")
    p.add_argument("--dump-format", choices=("jsonl", "packed"), default="jsonl")

    p = sub.add_parser("score", help="compute measure tables from a store")
    _common_flags(p)

    p = sub.add_parser("sweep", help="evaluate every layer and pick the best")
    _common_flags(p)

    p = sub.add_parser("eval", help="evaluate an existing measure table against the dataset")
    _common_flags(p)
    p.add_argument("--table", type=Path, required=True, help="measure table CSV")

    p = sub.add_parser("analyze", help="secondary analyses")
    asub = p.add_subparsers(dest="analysis", required=True)

    a = asub.add_parser("reversed", help="compare correlations for order-reversed compounds")
    _common_flags(a)
    a.add_argument("--emit-words", type=Path,
                   help="write the reversed word list (for the embed step) and exit")

    a = asub.add_parser("weighted-st", help="transparency with unequal constituent weights")
    _common_flags(a)
    a.add_argument("--weights", help="comma list of left weights (default 0.0,0.1,...,1.0)")

    a = asub.add_parser("regression", help="regress predictions on psycholinguistic covariates")
    _common_flags(a)
    a.add_argument("--table", type=Path, required=True, help="measure table CSV (chosen layer)")
    a.add_argument("--concreteness", type=Path, required=True, help="word,value concreteness norms")
    a.add_argument("--instances", type=Path, help="sampled-sentences JSONL for frequency counts")
    a.add_argument("--token-counts", type=Path, help="word,count subword token counts")
    a.add_argument("--target", choices=("lmd", "st"), default="lmd")

    a = asub.add_parser("templated", help="sweep a templated-context store")
    _common_flags(a)

    p = sub.add_parser("report", help="summarize sweep reports; optional per-compound trajectories")
    _common_flags(p)
    p.add_argument("--sweep-csv", action="append", default=[], metavar="LABEL=PATH",
                   help="labelled sweep CSV; repeatable")
    p.add_argument("--tables-dir", type=Path,
                   help="directory of per-layer measure tables (for trajectories)")
    p.add_argument("--trajectory", action="append", default=[], metavar="COMPOUND:MEASURE",
                   help="emit a layer trajectory for a compound; repeatable")

    return parser


def _load_ds(args: argparse.Namespace) -> Dataset:
    if args.dataset is None:
        raise UsageError("--dataset is required for this command")
    return load_dataset(args.dataset, exclusions_path=args.exclusions)


def _load_store(path: Path | None) -> EmbeddingStore | StaticStore:
    if path is None:
        raise UsageError("--store is required for this command")
    if path.is_dir():
        return load_dump(path)
    return load_static(path)


def _setting(args: argparse.Namespace, store: EmbeddingStore | StaticStore | None = None) -> RepresentationSetting | None:
    if isinstance(store, StaticStore):
        return None
    if args.setting is not None:
        return RepresentationSetting.from_cli_name(args.setting, getattr(args, "template", None))
    if isinstance(store, EmbeddingStore):
        settings = store.settings()
        if len(settings) == 1:
            return settings.pop()
    raise UsageError("--setting is required (the store does not pin one)")


def _manifest(args: argparse.Namespace, store_provenance: str, setting_name: str) -> RunManifest:
    return RunManifest.build(
        args.dataset if args.dataset and Path(args.dataset).exists() else None,
        store_provenance,
        setting_name,
        flags={
            "clamp_cosine": bool(getattr(args, "clamp_cosine", False)),
            "include_layer0": bool(getattr(args, "include_layer0", False)),
            "layers": getattr(args, "layers", None) or "all",
        },
    )


def _read_words_file(path: Path) -> list[str]:
    if not path.exists():
        raise ValidationError(f"word list not found: {path}")
    return [w.strip().lower() for w in path.read_text(encoding="utf-8").splitlines() if w.strip()]


def _cmd_sample(args: argparse.Namespace) -> int:
    if args.words is not None:
        words = set(_read_words_file(args.words))
    else:
        words = _load_ds(args).words()
    samples = sample_sentences(args.corpus, words, SamplePlan(cap=args.cap, seed=args.seed),
                               n_shards=args.shards)
    args.out_dir.mkdir(parents=True, exist_ok=True)
    out = args.out_dir / "samples.jsonl"
    write_samples(samples, out)
    n_empty = sum(1 for s in samples.values() if not s.sentences)
    print(f"sampled {len(samples)} words -> {out} ({n_empty} with zero matches)")
    return 0


def _make_backend(args: argparse.Namespace):
    if args.backend_cmd:
        return PipeBackend(args.backend_cmd)
    if args.onnx:
        if not args.tokenizer:
            raise UsageError("--onnx requires --tokenizer")
        return OnnxBackend(args.onnx, args.tokenizer)
    raise UsageError("embed needs --backend-cmd or --onnx/--tokenizer")


def _cmd_embed(args: argparse.Namespace) -> int:
    if args.words is not None:
        words = sorted(set(_read_words_file(args.words)))
    else:
        words = sorted(_load_ds(args).words())
    if args.setting is None:
        raise UsageError("--setting is required for embed")
    setting = RepresentationSetting.from_cli_name(args.setting, args.template)

    sentences: dict[str, Sequence[str]] = {}
    if setting.kind is SettingKind.IN_CONTEXT:
        if args.sentences is None:
            raise UsageError("context setting requires --sentences (see the sample command)")
        sentences = {w: s.sentences for w, s in read_samples(args.sentences).items()}

    backend = _make_backend(args)
    try:
        result = embed_via_backend(
            [(w, sentences.get(w, ())) for w in words],
            setting, backend, include_layer0=args.include_layer0,
        )
    finally:
        backend.close()

    if result.store is None:
        raise ValidationError("backend produced no embeddings at all")
    args.out_dir.mkdir(parents=True, exist_ok=True)
    dump_dir = args.out_dir / "dump"
    write_dump(result.store, dump_dir, fmt=args.dump_format)
    with (args.out_dir / "token_counts.csv").open("w", encoding="utf-8") as fh:
        fh.write("word,n_tokens\n")
        for w in sorted(result.token_counts):
            fh.write(f"{w},{result.token_counts[w]}\n")
    if result.misses:
        with (args.out_dir / "misses.csv").open("w", encoding="utf-8") as fh:
            fh.write("word,reason\n")
            for m in result.misses:
                fh.write(f"{m.word},{m.reason}\n")
    print(f"embedded {len(result.store)} words -> {dump_dir} ({len(result.misses)} misses)")
    return 0


def _select_layers(args: argparse.Namespace, store: EmbeddingStore | StaticStore) -> list[int]:
    if isinstance(store, StaticStore):
        return [1]
    chosen = _parse_layers(args.layers)
    if chosen is None:
        return [k for k in store.layer_indices() if k >= 1 or args.include_layer0]
    bad = [k for k in chosen if k not in store.layer_indices()]
    if bad:
        raise ValidationError(f"layers {bad} not in store range {list(store.layer_indices())}")
    return chosen


def _cmd_score(args: argparse.Namespace) -> int:
    ds = _load_ds(args)
    store = _load_store(args.store)
    setting = _setting(args, store)
    layers = _select_layers(args, store)
    manifest = _manifest(args, getattr(store, "provenance", str(args.store)),
                         setting.cli_name if setting else "static")
    checksum = manifest.write(args.out_dir)
    for layer in layers:
        table = compute_table(ds, store, setting, layer, args.clamp_cosine)
        name = f"measures-{table.setting_name}-layer{layer:02d}.csv"
        write_table_csv(table, args.out_dir / name, checksum)
        if table.misses:
            missing = "; ".join(f"{m.compound} (missing {', '.join(m.missing_words)})"
                                for m in table.misses)
            print(f"layer {layer}: effective_n={table.effective_n}, misses: {missing}")
        else:
            print(f"layer {layer}: effective_n={table.effective_n}")
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    ds = _load_ds(args)
    store = _load_store(args.store)
    setting = _setting(args, store)
    manifest = _manifest(args, getattr(store, "provenance", str(args.store)),
                         setting.cli_name if setting else "static")
    checksum = manifest.write(args.out_dir)
    if isinstance(store, StaticStore):
        # a static baseline has no layers; emit a single-row report so it can
        # still appear as a summary line next to layered models
        from .stats import SweepReport

        table = compute_table(ds, store, None, 1, args.clamp_cosine)
        results = evaluate(table, ds)
        report = SweepReport({1: results}, 1, 1, 1, 1)
        write_sweep_csv(report, args.out_dir / "sweep-static.csv", checksum)
        for measure in ("lmd", "st"):
            r = results[measure]
            print(f"{measure}: mae={r.mae:.6g} rho={r.spearman_rho:.6g} n={r.n}")
        return 0
    report = sweep(ds, store, setting, _parse_layers(args.layers),
                   args.clamp_cosine, args.include_layer0)
    name = f"sweep-{setting.cli_name if setting else 'static'}.csv"
    write_sweep_csv(report, args.out_dir / name, checksum)
    for measure in ("lmd", "st"):
        layer, best = report.best(measure, by="rho")
        mae_layer, best_mae = report.best(measure, by="mae")
        print(f"{measure}: best rho {best.spearman_rho:.6g} ({layer}), "
              f"best mae {best_mae.mae:.6g} ({mae_layer}), n={best.n}")
    return 0


def _cmd_eval(args: argparse.Namespace) -> int:
    ds = _load_ds(args)
    table = read_table_csv(args.table)
    results = evaluate(table, ds)
    for measure in ("lmd", "st"):
        r = results[measure]
        print(f"{measure}: mae={r.mae:.6g} rho={r.spearman_rho:.6g} n={r.n}")
    return 0


def _cmd_analyze_reversed(args: argparse.Namespace) -> int:
    ds = _load_ds(args)
    reversed_ds = reverse_compounds(ds)
    if args.emit_words:
        words = sorted(reversed_ds.words())
        args.emit_words.parent.mkdir(parents=True, exist_ok=True)
        args.emit_words.write_text("\n".join(words) + "\n", encoding="utf-8")
        print(f"wrote {len(words)} words -> {args.emit_words}")
        return 0
    store = _load_store(args.store)
    if isinstance(store, StaticStore):
        raise ValidationError("reversed analysis needs a layered store")
    setting = _setting(args, store)
    assert setting is not None
    layers = _parse_layers(args.layers)
    original = sweep(ds, store, setting, layers, args.clamp_cosine, args.include_layer0)
    rev = sweep(reversed_ds, store, setting, layers, args.clamp_cosine, args.include_layer0)
    manifest = _manifest(args, store.provenance, setting.cli_name)
    checksum = manifest.write(args.out_dir)
    out = args.out_dir / "reversed.csv"
    with out.open("w", encoding="utf-8", newline="") as fh:
        fh.write(f"# manifest {checksum}\n")
        fh.write("layer,measure,rho,rho_reversed,delta\n")
        for layer in sorted(original.per_layer):
            for measure in ("lmd", "st"):
                rho = original.per_layer[layer][measure].spearman_rho
                rho_rev = rev.per_layer[layer][measure].spearman_rho
                fh.write(f"{layer},{measure},{rho!r},{rho_rev!r},{rho - rho_rev!r}\n")
    b_layer, b = original.best("lmd", by="rho")
    rb_layer, rb = rev.best("lmd", by="rho")
    print(f"lmd rho: original {b.spearman_rho:.6g} ({b_layer}) vs reversed "
          f"{rb.spearman_rho:.6g} ({rb_layer}) -> {out}")
    return 0


def _cmd_analyze_weighted(args: argparse.Namespace) -> int:
    ds = _load_ds(args)
    store = _load_store(args.store)
    if isinstance(store, StaticStore):
        raise ValidationError("the weighted-transparency grid needs a layered store")
    setting = _setting(args, store)
    assert setting is not None
    grid = WeightGrid()
    if args.weights:
        try:
            grid = WeightGrid(tuple(float(w) for w in args.weights.split(",")))
        except ValueError:
            raise UsageError(f"bad --weights {args.weights!r}") from None
    results = weighted_st_grid(ds, store, setting, grid, _parse_layers(args.layers), args.clamp_cosine)
    manifest = _manifest(args, store.provenance, setting.cli_name)
    checksum = manifest.write(args.out_dir)
    out = args.out_dir / "weighted-st.csv"
    write_grid_csv(results, out, checksum)
    best = max(results, key=lambda k: results[k].spearman_rho)
    print(f"{len(results)} cells -> {out}; best rho {results[best].spearman_rho:.6g} "
          f"at weight {best[0]:g}, layer {best[1]}")
    return 0


def _cmd_analyze_regression(args: argparse.Namespace) -> int:
    ds = _load_ds(args)
    ds = join_covariates(ds, args.concreteness)
    if args.instances:
        ds = join_instance_counts(ds, args.instances)
    if args.token_counts:
        ds = join_token_counts(ds, args.token_counts)
    table = read_table_csv(args.table)
    result = regression_analysis(ds, table, target=args.target)
    manifest = _manifest(args, str(args.table), args.target)
    checksum = manifest.write(args.out_dir)
    out = args.out_dir / f"regression-{args.target}.csv"
    write_regression_csv(result, out, checksum)
    print(f"n={result.n} excluded={result.n_excluded} r_squared={result.r_squared:.6g}")
    for name, c in result.coefficients.items():
        print(f"  {name}: estimate={c.estimate:.6g} se={c.std_error:.6g} "
              f"t={c.t_stat:.6g} p={c.p_value:.6g}")
    return 0


def _cmd_analyze_templated(args: argparse.Namespace) -> int:
    ds = _load_ds(args)
    store = _load_store(args.store)
    if isinstance(store, StaticStore):
        raise ValidationError("templated analysis needs a layered store")
    settings = store.settings()
    if len(settings) == 1 and next(iter(settings)).kind is not SettingKind.TEMPLATED:
        raise ValidationError("store was not built under the templated setting")
    setting = settings.pop()
    report = sweep(ds, store, setting, _parse_layers(args.layers),
                   args.clamp_cosine, args.include_layer0)
    manifest = _manifest(args, store.provenance, setting.cli_name)
    checksum = manifest.write(args.out_dir)
    write_sweep_csv(report, args.out_dir / "sweep-templated.csv", checksum)
    for measure in ("lmd", "st"):
        layer, best = report.best(measure, by="rho")
        print(f"{measure}: best rho {best.spearman_rho:.6g} ({layer})")
    return 0


def _cmd_report(args: argparse.Namespace) -> int:
    if not args.sweep_csv and not args.trajectory:
        raise UsageError("report needs --sweep-csv LABEL=PATH and/or --trajectory entries")
    checksum = None
    if args.sweep_csv:
        labelled = []
        for item in args.sweep_csv:
            label, sep, path = item.partition("=")
            if not sep:
                raise UsageError(f"--sweep-csv expects LABEL=PATH, got {item!r}")
            labelled.append((label, read_sweep_csv(Path(path))))
        rows = summary_table(labelled)
        manifest = _manifest(args, ";".join(lbl for lbl, _ in labelled), "summary")
        checksum = manifest.write(args.out_dir)
        write_summary_csv(rows, args.out_dir / "summary.csv", checksum)
        text = render_summary(rows)
        (args.out_dir / "summary.txt").write_text(f"# manifest {checksum}\n{text}\n", encoding="utf-8")
        print(text)
    if args.trajectory:
        if args.tables_dir is None:
            raise UsageError("--trajectory requires --tables-dir")
        ds = _load_ds(args)
        gold = ds.by_compound()
        tables: dict[int, MeasureTable] = {}
        for path in sorted(args.tables_dir.glob("measures-*.csv")):
            table = read_table_csv(path)
            tables[table.layer] = table
        if not tables:
            raise ValidationError(f"no measure tables under {args.tables_dir}")
        if checksum is None:
            manifest = _manifest(args, str(args.tables_dir), "trajectory")
            checksum = manifest.write(args.out_dir)
        for item in args.trajectory:
            compound, sep, measure = item.partition(":")
            if not sep or measure not in ("lmd", "st"):
                raise UsageError(f"--trajectory expects COMPOUND:MEASURE, got {item!r}")
            if compound not in gold:
                raise ValidationError(f"compound {compound!r} not in the dataset")
            series = trajectory(compound, tables, measure,
                                getattr(gold[compound], f"human_{measure}"))
            out = args.out_dir / f"trajectory-{compound}-{measure}.csv"
            write_trajectory_csv(series, out, checksum)
            print(f"trajectory {compound}/{measure} -> {out}")
    return 0


_COMMANDS = {
    "sample": _cmd_sample,
    "embed": _cmd_embed,
    "score": _cmd_score,
    "sweep": _cmd_sweep,
    "eval": _cmd_eval,
    "report": _cmd_report,
}
_ANALYSES = {
    "reversed": _cmd_analyze_reversed,
    "weighted-st": _cmd_analyze_weighted,
    "regression": _cmd_analyze_regression,
    "templated": _cmd_analyze_templated,
}


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "analyze":
            return _ANALYSES[args.analysis](args)
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except BackendError as exc:
        print(f"backend failure: {exc}", file=sys.stderr)
        return 3
    except (ValidationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())
