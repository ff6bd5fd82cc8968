"""Command-line surface: ingest, stats, synth, run, report.

Exit codes: 0 success, 1 usage error (usage text on stderr), 2 data or
runtime error. Diagnostics go to stderr; results go to files or stdout.
All randomness flows from --seed, so a run is reproducible from its
command line and input files alone.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import experiments
from .corpus import Corpus, compute_stats, parse_tsv, write_tsv
from .features import load_embeddings
from .preprocess import load_patterns, preprocess_corpus
from .synthetic import SyntheticSpec, generate

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def _build_parser() -> _Parser:
    parser = _Parser(prog="authattr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="parse, clean and filter a review TSV")
    p.add_argument("--input", required=True, help="review TSV path")
    p.add_argument("--year", type=int, default=None, help="keep only reviews of this year")
    p.add_argument("--min-chars", type=int, default=11, help="minimum post-cleaning length to keep")
    p.add_argument("--patterns", default=None, help="boilerplate pattern file (overrides STYLO_PATTERNS)")
    p.add_argument("--out", required=True, help="output corpus file")
    p.add_argument("--out-tsv", default=None, help="also write the cleaned corpus as TSV")

    p = sub.add_parser("stats", help="print corpus statistics as JSON")
    p.add_argument("--corpus", required=True)

    p = sub.add_parser("synth", help="generate a synthetic corpus TSV")
    p.add_argument("--u", type=int, required=True, help="number of authors")
    p.add_argument("--k", type=int, required=True, help="reviews per author")
    p.add_argument("--signature", type=float, default=0.9, help="marker injection strength in [0,1]")
    p.add_argument("--boilerplate", type=float, default=0.3, help="shared boilerplate rate in [0,1]")
    p.add_argument("--median-chars", type=int, default=60)
    p.add_argument("--p95-chars", type=int, default=432)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output TSV path")

    p = sub.add_parser("run", help="run an experiment design")
    p.add_argument("--design", required=True, choices=["exp1", "exp2a", "exp2b", "exp3"])
    p.add_argument("--corpus", required=True, help="ingested corpus file")
    p.add_argument("--methods", default="tfidf_lr", help="comma list of tfidf_lr,emb_lr,metric_knn")
    p.add_argument("--u", type=int, default=None, help="number of candidate authors (default 100)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--k-max", type=int, default=None)
    p.add_argument("--u-grid", default=None, help="comma list of U values (exp3)")
    p.add_argument("--k-grid", default=None, help="comma list of k values (exp1)")
    p.add_argument("--k-max-grid", default=None, help="comma list of K_max values (exp2b)")
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default 42)")
    p.add_argument("--folds", type=int, default=None, help="CV folds (default 5)")
    p.add_argument("--embeddings", default=None, help="EMB1 file for emb_lr")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--config", default=None, help="JSON config file (flags take precedence)")
    p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("report", help="re-emit a results.json")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--format", choices=["csv", "json"], default="csv")
    return parser


def _parse_grid(text: str | None) -> tuple[int, ...] | None:
    if text is None:
        return None
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise ValueError(f"bad grid value in {text!r}") from None


def _cmd_ingest(args) -> int:
    result = parse_tsv(args.input, year=args.year)
    patterns = load_patterns(args.patterns)
    cleaned, report = preprocess_corpus(result.corpus, args.min_chars, patterns)
    cleaned.save(args.out)
    if args.out_tsv:
        write_tsv(cleaned, args.out_tsv)
    print(
        f"parsed={len(result.corpus)} skipped={result.skipped_count} "
        f"field_warnings={result.field_warning_count} year_filtered={result.filtered_by_year} "
        f"boilerplate_spans={report.removed_boilerplate_spans} "
        f"dropped_short={report.dropped_short_reviews} kept={len(cleaned)}",
        file=sys.stderr,
    )
    print(json.dumps({"reviews": len(cleaned), "authors": cleaned.num_authors}))
    return 0


def _cmd_stats(args) -> int:
    corpus = Corpus.load(args.corpus)
    print(json.dumps(compute_stats(corpus).to_dict(), indent=1))
    return 0


def _cmd_synth(args) -> int:
    spec = SyntheticSpec(
        U=args.u,
        k=args.k,
        signature_strength=args.signature,
        boilerplate_rate=args.boilerplate,
        length_distribution=(args.median_chars, args.p95_chars),
        seed=args.seed,
    )
    corpus = generate(spec)
    write_tsv(corpus, args.out)
    print(f"wrote {len(corpus)} reviews for {corpus.num_authors} authors", file=sys.stderr)
    return 0


def _cmd_run(args) -> int:
    cfg_file = {}
    if args.config:
        cfg_file = json.loads(Path(args.config).read_text(encoding="utf-8"))

    def setting(flag_value, key, default):
        # precedence: explicit flag > config file > default
        if flag_value is not None:
            return flag_value
        return cfg_file.get(key, default)

    methods = tuple(m.strip() for m in args.methods.split(",") if m.strip())
    config = experiments.ExperimentConfig(
        design=args.design.upper(),
        U=setting(args.u, "U", 100),
        k=setting(args.k, "k", None),
        K_max=setting(args.k_max, "K_max", None),
        methods=methods,
        seed=setting(args.seed, "seed", 42),
        folds=setting(args.folds, "folds", 5),
        k_grid=_parse_grid(args.k_grid) or _tuple_or_none(cfg_file.get("k_grid")),
        u_grid=_parse_grid(args.u_grid) or _tuple_or_none(cfg_file.get("u_grid")),
        k_max_grid=_parse_grid(args.k_max_grid) or _tuple_or_none(cfg_file.get("k_max_grid")),
    )
    base = Corpus.load(args.corpus)
    embeddings = load_embeddings(args.embeddings) if args.embeddings else None

    def progress(point, rows):
        for row in rows:
            d = row.to_dict()
            acc = d.get("accuracy_mean")
            acc_s = "nan" if acc is None else f"{acc:.4f}"
            print(
                f"progress design={point.design} U={point.U} k={point.k} "
                f"K_max={point.K_max} method={row.method} accuracy={acc_s}",
                file=sys.stderr,
            )

    rows = experiments.run_experiment(
        config, base, embeddings=embeddings, workers=args.workers, progress=progress
    )
    written = experiments.emit_report(rows, args.out)
    for path in written:
        print(f"wrote {path}", file=sys.stderr)
    return 0


def _tuple_or_none(value):
    return tuple(value) if value else None


def _cmd_report(args) -> int:
    rows = experiments.load_results(args.infile)
    if args.format == "json":
        print(json.dumps({"format": "RESULTS1", "rows": rows}, ensure_ascii=False, indent=1))
    else:
        sys.stdout.write(experiments.results_to_csv_text(rows))
    return 0


_COMMANDS = {
    "ingest": _cmd_ingest,
    "stats": _cmd_stats,
    "synth": _cmd_synth,
    "run": _cmd_run,
    "report": _cmd_report,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else USAGE_ERROR
    try:
        return _COMMANDS[args.command](args)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
