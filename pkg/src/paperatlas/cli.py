"""Command-line entry point: the pipeline as composable subcommands.

Every stage reads from and writes to plain files inside a shared store
directory, so intermediates stay inspectable and each stage can be
re-run in isolation. Mutating commands take an exclusive lock on the
store and append one entry to the run manifest. Exit codes: 0 success,
1 validation/usage error, 2 I/O or transport error.
"""

from __future__ import annotations

import argparse
import contextlib
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .analytics import AnalyticsConfig, compute_lifecycle, compute_usage, \
    dataset_usage, export_analytics, institution_stats
from .cluster import ClusterParams, load_clustering, load_condensed_tree, \
    run_hdbscan, save_clustering
from .corpus import CorpusStore, record_from_dict, serialize_record
from .errors import StoreError, TransportError, ValidationError
from .llmgateway import PAPER_PARSE_SCHEMA, gateway_from_env, \
    parse_structured_response, render_prompt
from .retrieval import SEARCHABLE_FIELDS, SubQuery, assemble_evidence, \
    build_field_index, decompose_query, parse_query_plan, retrieve
from .topics import assign_topics, build_topic_tree, build_vocabulary, \
    ctfidf_weights, name_topics, save_topics
from .vectorize import ReductionConfig, VectorSet, embed_corpus, \
    export_vectors, import_vectors, reduce_dims

logger = logging.getLogger("paperatlas")


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with status 2 on bad usage; the contract wants 1.
    def error(self, message):
        raise _UsageError(message)


@dataclass
class RunManifest:
    command: str
    config: dict
    inputs: dict[str, str]
    started: float
    finished: float
    version: str
    warnings: int

    def to_json(self) -> dict:
        return {
            "command": self.command,
            "config": self.config,
            "inputs": self.inputs,
            "started": self.started,
            "finished": self.finished,
            "version": self.version,
            "warnings": self.warnings,
        }


def _sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _append_manifest(store_dir: Path, command: str, config: dict,
                     inputs: list[Path], started: float, warnings: int) -> None:
    entry = RunManifest(
        command=command,
        config=config,
        inputs={str(p): _sha256(p) for p in inputs if p.exists()},
        started=started,
        finished=time.time(),
        version=__version__,
        warnings=warnings,
    )
    with open(store_dir / "manifest.jsonl", "a", encoding="utf-8") as fh:
        fh.write(json.dumps(entry.to_json(), sort_keys=True) + "\n")


@contextlib.contextmanager
def _store_lock(store_dir: Path):
    store_dir.mkdir(parents=True, exist_ok=True)
    lock = store_dir / ".lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise StoreError(f"store is locked by another command: {lock}")
    try:
        os.write(fd, str(os.getpid()).encode())
        os.close(fd)
        yield
    finally:
        with contextlib.suppress(OSError):
            lock.unlink()


def _load_store(store_dir: Path) -> CorpusStore:
    return CorpusStore.load(store_dir)


def _vector_file(store_dir: Path) -> tuple[Path, str]:
    reduced = store_dir / "reduced.jsonl"
    if reduced.exists():
        return reduced, "reduced"
    raw = store_dir / "vectors.jsonl"
    if raw.exists():
        return raw, "embedding"
    raise ValidationError("missing vectors: run `vectorize` before this stage")


def cmd_ingest(args) -> int:
    store_dir = Path(args.store)
    started = time.time()
    with _store_lock(store_dir):
        store = CorpusStore.ingest(args.input)
        store.save(store_dir)
        _append_manifest(store_dir, "ingest", {"input": str(args.input)},
                         [Path(args.input)], started, len(store.report))
    logger.info("ingested %d records (%d failures) into %s",
                len(store), len(store.report), store_dir)
    return 0


def cmd_vectorize(args) -> int:
    store_dir = Path(args.store)
    started = time.time()
    with _store_lock(store_dir):
        store = _load_store(store_dir)
        texts = [(r.record_id, r.paper_name, r.abstract_summary)
                 for r in store.records]
        vs = embed_corpus(texts, dim=args.dims)
        export_vectors(vs, store_dir / "vectors.jsonl")

        warnings = int(vs.zero_rows.sum())
        if warnings:
            logger.warning("%d records have empty embedding text", warnings)

        if args.reduce:
            kind, _, value = args.reduce.partition(":")
            if kind == "pca":
                try:
                    k = int(value)
                except ValueError:
                    raise ValidationError(f"bad --reduce value: {args.reduce}")
                cfg = ReductionConfig(method="pca", n_components=k, seed=args.seed)
                reduced = reduce_dims(vs, cfg)
            elif kind == "import":
                if not value:
                    raise ValidationError("--reduce import: needs a file path")
                reduced = import_vectors(value, store.ids, space_tag="reduced")
            else:
                raise ValidationError(f"bad --reduce value: {args.reduce}")
            export_vectors(reduced, store_dir / "reduced.jsonl")

        # One searchable field at a time keeps peak memory flat.
        fields_dir = store_dir / "fields"
        for name in SEARCHABLE_FIELDS:
            field_vs = build_field_index(store, dim=args.dims, fields=(name,))[name]
            export_vectors(field_vs, fields_dir / f"{name}.jsonl")
            del field_vs

        _append_manifest(
            store_dir, "vectorize",
            {"dims": args.dims, "reduce": args.reduce, "seed": args.seed},
            [store_dir / "records.jsonl"], started, warnings,
        )
    logger.info("vectorized %d records at dim %d", len(store), args.dims)
    return 0


def cmd_cluster(args) -> int:
    store_dir = Path(args.store)
    started = time.time()
    with _store_lock(store_dir):
        store = _load_store(store_dir)
        vec_path, space = _vector_file(store_dir)
        if space == "embedding":
            logger.warning("no reduced vectors found; clustering the raw "
                           "embedding space")
        vs = import_vectors(vec_path, store.ids, space_tag=space)
        params = ClusterParams(
            min_cluster_size=args.min_cluster_size,
            min_samples=args.min_samples,
            selection=args.selection,
            metric=args.metric,
        )
        clustering, tree = run_hdbscan(vs, params)
        save_clustering(clustering, tree, store_dir / "clustering.json")
        _append_manifest(
            store_dir, "cluster",
            {"min_cluster_size": params.min_cluster_size,
             "min_samples": params.min_samples,
             "metric": params.metric, "selection": params.selection},
            [vec_path], started, 0,
        )
    logger.info("clustered %d records into %d clusters (%d noise)",
                len(store), clustering.n_clusters, clustering.n_noise)
    return 0


def cmd_topics(args) -> int:
    store_dir = Path(args.store)
    started = time.time()
    with _store_lock(store_dir):
        store = _load_store(store_dir)
        clustering_path = store_dir / "clustering.json"
        if not clustering_path.exists():
            raise ValidationError("missing clustering: run `cluster` first")
        clustering = load_clustering(clustering_path)
        tree = load_condensed_tree(clustering_path)

        docs = [r.embedding_text() for r in store.records]
        ngram_range = tuple(int(x) for x in args.ngrams.split(","))
        if len(ngram_range) != 2:
            raise ValidationError("--ngrams must be lo,hi")
        vocab = build_vocabulary(docs, max_df_percent=args.max_df,
                                 min_df_floor=args.min_df,
                                 ngram_range=ngram_range)  # type: ignore[arg-type]
        sigs = ctfidf_weights(clustering, vocab, docs)

        gateway = gateway_from_env() if args.llm else None
        warnings: list[str] = []
        if args.llm and gateway is None:
            warnings.append("no gateway configured; deterministic fallback naming")
            logger.warning(warnings[-1])
        abstracts: dict[int, list[str]] = {}
        for record, label in zip(store.records, clustering.labels):
            abstracts.setdefault(int(label), []).append(record.abstract_summary)
        warnings += name_topics(gateway, sigs, abstracts)

        topic_tree = build_topic_tree(tree, clustering, sigs,
                                      total_records=len(store))
        assign_topics(store, clustering, topic_tree)
        store.save(store_dir)
        save_topics(sigs, topic_tree, store_dir, k=args.top_k)
        _append_manifest(
            store_dir, "topics",
            {"max_df": args.max_df, "min_df": args.min_df,
             "ngrams": args.ngrams, "llm": bool(args.llm), "top_k": args.top_k},
            [clustering_path, store_dir / "records.jsonl"], started,
            len(warnings),
        )
    logger.info("named %d topics", len(sigs))
    return 0


def cmd_analyze(args) -> int:
    store_dir = Path(args.store)
    started = time.time()
    with _store_lock(store_dir):
        store = _load_store(store_dir)
        config = AnalyticsConfig.from_json(args.config) if args.config \
            else AnalyticsConfig()
        _, usage = export_analytics(store, store_dir, config)
        _append_manifest(
            store_dir, "analyze",
            {"config": str(args.config) if args.config else None},
            [store_dir / "records.jsonl"], started,
            usage.malformed + usage.unresolved,
        )
    logger.info("analytics written to %s", store_dir)
    return 0


def _load_field_index(store_dir: Path, store: CorpusStore,
                      fields: list[str]) -> dict[str, VectorSet]:
    fields_dir = store_dir / "fields"
    index = {}
    for name in fields:
        path = fields_dir / f"{name}.jsonl"
        if not path.exists():
            raise ValidationError(
                f"missing vectors for field {name}: run `vectorize` first"
            )
        index[name] = import_vectors(path, store.ids, space_tag="embedding")
    return index


def cmd_query(args) -> int:
    store_dir = Path(args.store)
    store = _load_store(store_dir)
    warnings: list[str] = []

    if args.plan:
        with open(args.plan, encoding="utf-8") as fh:
            plan = parse_query_plan(fh.read(), k=args.k)
        warnings += plan.warnings
        subs = [SubQuery(index=0, plan=plan, origin=args.question or "")]
        question = args.question or ""
    elif args.question:
        gateway = gateway_from_env() if args.llm else None
        if args.llm and gateway is None:
            warnings.append("no gateway configured; deterministic fallback plan")
        subs, decompose_warnings = decompose_query(gateway, args.question, k=args.k)
        warnings += decompose_warnings
        question = args.question
    else:
        raise ValidationError("query needs --plan or --question")

    needed = sorted({name for sub in subs for name in sub.plan.weights})
    index = _load_field_index(store_dir, store, needed)
    results = [retrieve(store, index, sub, k=args.k) for sub in subs]
    bundle = assemble_evidence(store, results, question)

    for message in warnings:
        logger.warning(message)
    if args.format == "table":
        out = []
        for section in bundle.sections:
            out.append(f"# sub-query {section['sub_index']}: {section['query']}")
            for row in section["results"]:
                rec = store.by_id(row["record_id"])
                out.append(f"{row['score']:+.4f}  {rec.record_id}  "
                           f"{rec.conference} {rec.year}  {rec.paper_name}")
        text = "\n".join(out) + "\n"
    else:
        text = bundle.serialize() + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_parse_papers(args) -> int:
    gateway = gateway_from_env()
    if gateway is None:
        raise ValidationError(
            "parse-papers needs a gateway: set LLM_ENDPOINT or LLM_MOCK_SCRIPT"
        )
    meta: dict = {}
    if args.meta:
        with open(args.meta, encoding="utf-8") as fh:
            meta = json.load(fh)

    input_dir = Path(args.input)
    if not input_dir.is_dir():
        raise StoreError(f"not a directory: {input_dir}")
    files = sorted(input_dir.glob("*.md"))
    warnings = 0
    written = 0
    out_path = Path(args.output)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    with open(out_path, "w", encoding="utf-8") as out:
        for path in files:
            entry = meta.get(path.name) or meta.get(path.stem) or {}
            base = {"paper_name": entry.get("paper_name", path.stem), **entry}
            if "year" not in base:
                logger.warning("%s: no year in metadata sidecar; skipped", path.name)
                warnings += 1
                continue
            parsed: dict = {}
            try:
                prompt = render_prompt("paper_parse",
                                       {"document": path.read_text(encoding="utf-8")})
                raw = gateway.complete(prompt, template="paper_parse")
                parsed = parse_structured_response(raw, PAPER_PARSE_SCHEMA)
                parsed["keywords_description"] = parsed.pop("keywords_explanation", {})
            except Exception as exc:
                logger.warning("%s: parse fell back to metadata only (%s)",
                               path.name, exc)
                warnings += 1
            record = record_from_dict({**parsed, **base})
            out.write(serialize_record(record) + "\n")
            written += 1
    logger.info("parsed %d of %d files into %s (%d warnings)",
                written, len(files), out_path, warnings)
    return 0


def cmd_export(args) -> int:
    store_dir = Path(args.store)
    store = _load_store(store_dir)
    config = AnalyticsConfig.from_json(args.config) if args.config \
        else AnalyticsConfig()

    if args.what == "topics":
        topics_path = store_dir / "topics.json"
        if not topics_path.exists():
            raise ValidationError("missing topics.json: run `topics` first")
        data = json.loads(topics_path.read_text(encoding="utf-8"))
        rows = [[t["id"], t["name"], t["paper_count"],
                 " ".join(t["top_terms"])] for t in data]
        header = ["topic_id", "name", "paper_count", "top_terms"]
    elif args.what == "lifecycle":
        metrics = compute_lifecycle(store, config)
        data = [m.__dict__ for m in metrics]
        header = ["topic_id", "name", "cagr", "mean_year", "mean_year_norm",
                  "n_recent", "W", "quadrant"]
        rows = [[m.topic_id, m.topic_name,
                 "" if m.cagr is None else format(m.cagr, ".9g"),
                 format(m.mean_year, ".9g"), format(m.mean_year_norm, ".9g"),
                 m.n_recent,
                 "" if m.impact_norm is None else format(m.impact_norm, ".9g"),
                 m.quadrant] for m in metrics]
    elif args.what == "compute":
        usage = compute_usage(store, config)
        data = {"rows": usage.rows, "parsed": usage.parsed,
                "malformed": usage.malformed, "unresolved": usage.unresolved}
        header = ["year", "topic_id", "n_records", "a100_equiv_hours"]
        rows = [[y, t, n, format(h, ".9g")] for y, t, n, h in usage.rows]
    elif args.what == "datasets":
        data = dataset_usage(store, config.dataset_aliases)
        header = ["dataset", "year", "count"]
        rows = [[d, y, c] for d, years in data.items()
                for y, c in sorted(years.items())]
    elif args.what == "institutions":
        stats = institution_stats(store)
        data = {
            "counts": dict(sorted(stats.counts.items())),
            "pairs": [[a, b, c] for (a, b), c in sorted(stats.cooccurrence.items())],
        }
        header = ["institution", "papers"]
        rows = [[name, stats.counts[name]] for name in sorted(stats.counts)]
    else:  # pragma: no cover - argparse restricts choices
        raise ValidationError(f"unknown export target: {args.what}")

    if args.format == "json":
        text = json.dumps(data, indent=2, ensure_ascii=False) + "\n"
    else:
        lines = [",".join(str(c) for c in header)]
        for row in rows:
            lines.append(",".join(str(c) for c in row))
        text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="paperatlas",
                     description="Corpus profiling and retrieval pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a record file into a store")
    p.add_argument("--input", required=True)
    p.add_argument("--store", required=True)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("vectorize", help="embed records and reduce dimensions")
    p.add_argument("--store", required=True)
    p.add_argument("--dims", type=int, default=512)
    p.add_argument("--reduce", default=None,
                   help="pca:<k> or import:<path>")
    p.add_argument("--seed", type=int, default=42)
    p.set_defaults(func=cmd_vectorize)

    p = sub.add_parser("cluster", help="run density clustering")
    p.add_argument("--store", required=True)
    p.add_argument("--min-cluster-size", type=int, default=50)
    p.add_argument("--min-samples", type=int, default=1)
    p.add_argument("--metric", default="euclidean",
                   choices=["euclidean", "cosine", "cosine-distance"])
    p.add_argument("--selection", default="eom", choices=["eom"])
    p.set_defaults(func=cmd_cluster)

    p = sub.add_parser("topics", help="build topic signatures, names, and tree")
    p.add_argument("--store", required=True)
    p.add_argument("--max-df", type=float, default=0.9)
    p.add_argument("--min-df", type=int, default=50)
    p.add_argument("--ngrams", default="1,2")
    p.add_argument("--llm", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--top-k", type=int, default=10)
    p.set_defaults(func=cmd_topics)

    p = sub.add_parser("analyze", help="compute trend statistics and CSV exports")
    p.add_argument("--store", required=True)
    p.add_argument("--config", default=None, help="analytics config JSON")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("query", help="retrieve evidence for a plan or question")
    p.add_argument("--store", required=True)
    p.add_argument("--plan", default=None, help="query-plan JSON file")
    p.add_argument("--question", default=None)
    p.add_argument("-k", type=int, default=10)
    p.add_argument("--llm", action=argparse.BooleanOptionalAction, default=False)
    p.add_argument("--format", default="json", choices=["json", "table"])
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("parse-papers",
                       help="batch-parse Markdown papers through the gateway")
    p.add_argument("--input", required=True, help="directory of .md files")
    p.add_argument("--meta", default=None,
                   help="JSON sidecar: filename -> metadata fields")
    p.add_argument("--output", required=True, help="records JSONL to write")
    p.set_defaults(func=cmd_parse_papers)

    p = sub.add_parser("export", help="re-emit derived tables as csv or json")
    p.add_argument("--store", required=True)
    p.add_argument("--what", required=True,
                   choices=["lifecycle", "compute", "datasets",
                            "institutions", "topics"])
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--config", default=None)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_export)
    return parser


def run_command(argv: list[str]) -> int:
    """Execute one subcommand; returns the process exit status."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (StoreError, TransportError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(stream=sys.stderr, level=logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    return run_command(argv if argv is not None else sys.argv[1:])


if __name__ == "__main__":
    sys.exit(main())
